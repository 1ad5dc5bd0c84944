#include "fft_cache.hpp"

#include <fftw3.h>

#include <cstring>
#include <memory>
#include <mutex>
#include <unordered_map>

namespace nudgelab::detail {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct Real1dPlans {
  int n = 0;
  double* rbuf = nullptr;
  fftw_complex* cbuf = nullptr;
  fftw_plan fwd = nullptr;  // r2c
  fftw_plan bwd = nullptr;  // c2r

  explicit Real1dPlans(int n_) : n(n_) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    rbuf = fftw_alloc_real(n);
    cbuf = fftw_alloc_complex(n / 2 + 1);
    fwd = fftw_plan_dft_r2c_1d(n, rbuf, cbuf, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_c2r_1d(n, cbuf, rbuf, FFTW_ESTIMATE);
  }
  ~Real1dPlans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
    fftw_free(rbuf);
    fftw_free(cbuf);
  }
  Real1dPlans(const Real1dPlans&) = delete;
  Real1dPlans& operator=(const Real1dPlans&) = delete;
};

struct Complex2dPlans {
  int n = 0;
  fftw_complex* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;

  explicit Complex2dPlans(int n_) : n(n_) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    in = fftw_alloc_complex(static_cast<size_t>(n) * n);
    out = fftw_alloc_complex(static_cast<size_t>(n) * n);
    fwd = fftw_plan_dft_2d(n, n, in, out, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_2d(n, n, in, out, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~Complex2dPlans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
    fftw_free(in);
    fftw_free(out);
  }
  Complex2dPlans(const Complex2dPlans&) = delete;
  Complex2dPlans& operator=(const Complex2dPlans&) = delete;
};

Real1dPlans& real_plans(int n) {
  thread_local std::unordered_map<int, std::unique_ptr<Real1dPlans>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<Real1dPlans>(n);
  return *slot;
}

Complex2dPlans& complex2d_plans(int n) {
  thread_local std::unordered_map<int, std::unique_ptr<Complex2dPlans>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<Complex2dPlans>(n);
  return *slot;
}

}  // namespace

void fft_c2r(std::span<const std::complex<double>> half, std::span<double> out) {
  const int n = static_cast<int>(out.size());
  auto& p = real_plans(n);
  std::memcpy(p.cbuf, half.data(), sizeof(fftw_complex) * (n / 2 + 1));
  fftw_execute(p.bwd);
  std::memcpy(out.data(), p.rbuf, sizeof(double) * n);
}

void fft_r2c(std::span<const double> in, std::span<std::complex<double>> half) {
  const int n = static_cast<int>(in.size());
  auto& p = real_plans(n);
  std::memcpy(p.rbuf, in.data(), sizeof(double) * n);
  fftw_execute(p.fwd);
  std::memcpy(static_cast<void*>(half.data()), p.cbuf, sizeof(fftw_complex) * (n / 2 + 1));
}

void fft2(std::span<const std::complex<double>> in,
          std::span<std::complex<double>> out, int n, int sign) {
  auto& p = complex2d_plans(n);
  std::memcpy(p.in, in.data(), sizeof(fftw_complex) * in.size());
  fftw_execute(sign < 0 ? p.fwd : p.bwd);
  std::memcpy(static_cast<void*>(out.data()), p.out, sizeof(fftw_complex) * out.size());
}

}  // namespace nudgelab::detail
