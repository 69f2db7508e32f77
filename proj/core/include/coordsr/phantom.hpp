#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "coordsr/image.hpp"

namespace coordsr {

enum class PhantomKind { shepp_logan, texture, edges };

PhantomKind parse_phantom_kind(std::string_view s);
std::string to_string(PhantomKind k);

/// Deterministic synthetic ground truth with intensities in [0,1].
///  - shepp_logan: jittered modified Shepp-Logan ellipses
///  - texture: tissue-like ellipses filled with oriented band-limited
///    gratings, with a substantial share of energy above half-Nyquist
///  - edges: step-edged rectangles/wedges plus linear and radial ramps
/// Throws DomainError for n < 32.
ImageGrid make_phantom(PhantomKind kind, int n, std::uint64_t seed);

}  // namespace coordsr
