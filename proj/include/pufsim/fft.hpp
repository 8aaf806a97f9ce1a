#ifndef PUFSIM_FFT_HPP
#define PUFSIM_FFT_HPP

#include <complex>
#include <cstddef>
#include <vector>

namespace pufsim {

using cdouble = std::complex<double>;

bool is_pow2(size_t n);
size_t next_pow2(size_t n);

// In-place radix-2 FFT, n must be a power of two. Forward is unnormalized;
// inverse scales by 1/n, so forward+inverse is the identity up to rounding.
void fft(cdouble* data, size_t n, bool inverse);

// 2D FFT over an x-fastest grid (index = x + nx*y). nx, ny powers of two.
void fft2d(std::vector<cdouble>& a, int nx, int ny, bool inverse);

}  // namespace pufsim

#endif
