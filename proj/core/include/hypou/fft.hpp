#pragma once

#include <complex>
#include <vector>

namespace hypou {

// In-place FFT along every axis of a row-major tensor with extents `dims`.
// The inverse transform includes the 1/(prod dims) normalization.
void fftn(std::vector<std::complex<double>>& data, const std::vector<int>& dims,
          bool inverse);

// Angular wavenumbers 2*pi*freq for a length-n axis with spacing dx, in FFT
// output order (non-negative first, then negative).
std::vector<double> fft_wavenumbers(int n, double dx);

} // namespace hypou
