#pragma once

#include "coordsr/image.hpp"

namespace coordsr {

/// 10*log10(peak^2 / MSE) in dB; +infinity for identical images.
/// Throws UsageError on a dims mismatch.
double psnr(const ImageGrid& estimate, const ImageGrid& reference, double peak = 1.0);

double mse(const ImageGrid& a, const ImageGrid& b);

/// Pixel-domain visual information fidelity, 4 scales.
///
/// Images are scaled to 0-255. At scale k = 1..4 a Gaussian window of size
/// 2^k+1 and std 0.5*2^(k-1) gives local means/variances/covariance
/// ("same" filtering, reflect-101 borders); for k > 1 both images are first
/// filtered with that window and decimated by 2. Each scale contributes
/// sum log(1 + g^2 s_ref/(s_v + s_n)) to the numerator and
/// sum log(1 + s_ref/s_n) to the denominator, with s_n = 2. Degenerate
/// local statistics are guarded as in the reference vifp code.
///
/// vif(x, x) == 1. For a constant reference (zero denominator) returns 1.
/// Throws UsageError on a dims mismatch, DomainError below 32x32.
double vif(const ImageGrid& distorted, const ImageGrid& reference);

}  // namespace coordsr
