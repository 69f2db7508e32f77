#pragma once

#include <cstdint>
#include <vector>

#include "coordsr/fft.hpp"
#include "coordsr/image.hpp"

namespace coordsr {

/// Complex receive-coil sensitivity.
struct CoilMap {
  ComplexImage sensitivity;
};

/// Synthetic smooth coil maps: Gaussian-bump magnitudes centered on a ring
/// around the field of view with slowly varying linear phase, normalized so
/// the root-sum-of-squares across coils is 1 at every pixel. `smoothness`
/// is the bump std as a fraction of the image side.
std::vector<CoilMap> make_coil_maps(int coils, int rows, int cols, double smoothness,
                                    std::uint64_t seed);

/// y_i = fft2(S_i * x) + complex Gaussian noise (std sigma_k per real and
/// imaginary component, unitary transform), reconstructed as the
/// root-sum-of-squares of ifft2(y_i) and clamped to [0,1]. An empty coil
/// list means a single uniform coil. Throws DomainError for sigma_k < 0.
ImageGrid simulate_measurement(const ImageGrid& x, const std::vector<CoilMap>& coils, double sigma_k,
                               std::uint64_t seed);

/// With the unitary transform, image-domain noise std equals sigma_k for
/// signal well above the noise floor; 0.03 matches the default denoiser.
inline constexpr double kDefaultSigmaK = 0.03;

}  // namespace coordsr
