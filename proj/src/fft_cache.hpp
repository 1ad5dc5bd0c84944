#pragma once

// Thin wrapper around FFTW with per-thread plan caching. Plans are
// created with FFTW_ESTIMATE (deterministic) on buffers owned by the
// cache entry; fftw plan creation/destruction is serialized behind a
// global mutex since only fftw_execute is thread-safe.

#include <complex>
#include <span>

namespace nudgelab::detail {

// 1D real <-> half-complex transforms. `half` holds n/2 + 1 bins.
// c2r computes x_j = sum_k X_k e^{+2 pi i j k / n} (unnormalized inverse,
// hermitian extension implied); r2c is the unnormalized forward sum.
void fft_c2r(std::span<const std::complex<double>> half, std::span<double> out);
void fft_r2c(std::span<const double> in, std::span<std::complex<double>> half);

// 2D complex transforms on an n-by-n row-major plane, unnormalized.
// sign = +1 for the inverse (e^{+i}) direction, -1 for forward.
void fft2(std::span<const std::complex<double>> in,
          std::span<std::complex<double>> out, int n, int sign);

}  // namespace nudgelab::detail
