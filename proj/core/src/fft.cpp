#include "hypou/fft.hpp"

#include <unsupported/Eigen/FFT>

#include "hypou/errors.hpp"

namespace hypou {

void fftn(std::vector<std::complex<double>>& data, const std::vector<int>& dims,
          bool inverse) {
    std::size_t total = 1;
    for (int d : dims) {
        if (d < 1) throw DimensionError("fftn: axis extents must be positive");
        total *= static_cast<std::size_t>(d);
    }
    if (data.size() != total)
        throw DimensionError("fftn: data size does not match extents");

    Eigen::FFT<double> fft;
    const int nd = static_cast<int>(dims.size());
    std::size_t stride_after = 1;  // product of extents after the current axis
    for (int ax = nd - 1; ax >= 0; --ax) {
        const std::size_t n = static_cast<std::size_t>(dims[ax]);
        const std::size_t block = stride_after * n;
        std::vector<std::complex<double>> line(n), out(n);
        for (std::size_t base = 0; base < total; base += block) {
            for (std::size_t off = 0; off < stride_after; ++off) {
                for (std::size_t j = 0; j < n; ++j)
                    line[j] = data[base + off + j * stride_after];
                if (inverse)
                    fft.inv(out, line);
                else
                    fft.fwd(out, line);
                for (std::size_t j = 0; j < n; ++j)
                    data[base + off + j * stride_after] = out[j];
            }
        }
        stride_after = block;
    }
}

std::vector<double> fft_wavenumbers(int n, double dx) {
    std::vector<double> xi(n);
    const double base = 2.0 * M_PI / (n * dx);
    for (int j = 0; j < n; ++j) {
        const int f = (j <= (n - 1) / 2) ? j : j - n;
        xi[j] = base * f;
    }
    return xi;
}

} // namespace hypou
