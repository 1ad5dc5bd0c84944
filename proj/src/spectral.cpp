#include "nudgelab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fft_cache.hpp"
#include "nudgelab/errors.hpp"

namespace nudgelab {

namespace {

constexpr double kPi = std::numbers::pi;

void require_power_of_two(int n) {
  if (n < 2 || (n & (n - 1)) != 0)
    throw ValidationError("grid size must be a power of two, got " +
                          std::to_string(n));
}

double max_abs(std::span<const Complex> c) {
  double m = 0.0;
  for (const auto& v : c) m = std::max(m, std::abs(v));
  return m;
}

// Symmetry tolerance is relative for O(1)-and-larger fields and
// absolute below that, so tiny fields are not rejected for roundoff.
void check_real_symmetry(double violation, double scale) {
  if (violation > 1e-12 * std::max(1.0, scale))
    throw MalformedFieldError(
        "spectral field violates conjugate symmetry (violation " +
        std::to_string(violation) + "); not a real-valued field");
}

}  // namespace

int dealias_cutoff(int n) noexcept { return n / 3; }

// --- SpectralField1D -------------------------------------------------------

SpectralField1D::SpectralField1D(int n, double period)
    : n_(n), period_(period), coeffs_(n) {
  require_power_of_two(n);
  if (period <= 0.0) throw ValidationError("period must be positive");
}

int SpectralField1D::index(int k) const {
  if (k < -n_ / 2 + 1 || k > n_ / 2)
    throw ValidationError("wavenumber " + std::to_string(k) +
                          " out of range for N = " + std::to_string(n_));
  return k >= 0 ? k : k + n_;
}

double SpectralField1D::wavenumber(int k) const noexcept {
  return 2.0 * kPi * k / period_;
}

Complex SpectralField1D::coeff(int k) const { return coeffs_[index(k)]; }

void SpectralField1D::set_coeff(int k, Complex v) { coeffs_[index(k)] = v; }

void SpectralField1D::set_mode_pair(int k, Complex v) {
  coeffs_[index(k)] = v;
  if (k != 0 && k != n_ / 2) coeffs_[index(-k)] = std::conj(v);
}

// --- SpectralVectorField2D -------------------------------------------------

SpectralVectorField2D::SpectralVectorField2D(int n)
    : n_(n), u1_(static_cast<size_t>(n) * n), u2_(static_cast<size_t>(n) * n) {
  require_power_of_two(n);
}

int SpectralVectorField2D::index(int k) const {
  if (k < -n_ / 2 + 1 || k > n_ / 2)
    throw ValidationError("wavenumber " + std::to_string(k) +
                          " out of range for N = " + std::to_string(n_));
  return k >= 0 ? k : k + n_;
}

Complex SpectralVectorField2D::coeff(int comp, int k1, int k2) const {
  const auto& plane = comp == 0 ? u1_ : u2_;
  return plane[static_cast<size_t>(index(k1)) * n_ + index(k2)];
}

void SpectralVectorField2D::set_coeff(int comp, int k1, int k2, Complex v) {
  auto& plane = comp == 0 ? u1_ : u2_;
  plane[static_cast<size_t>(index(k1)) * n_ + index(k2)] = v;
}

void SpectralVectorField2D::set_mode_pair(int comp, int k1, int k2, Complex v) {
  set_coeff(comp, k1, k2, v);
  const bool self = (k1 == 0 || k1 == n_ / 2) && (k2 == 0 || k2 == n_ / 2);
  if (!self) {
    const int m1 = k1 == n_ / 2 ? k1 : -k1;
    const int m2 = k2 == n_ / 2 ? k2 : -k2;
    set_coeff(comp, m1, m2, std::conj(v));
  }
}

std::span<Complex> SpectralVectorField2D::data(int comp) {
  return comp == 0 ? std::span<Complex>(u1_) : std::span<Complex>(u2_);
}

std::span<const Complex> SpectralVectorField2D::data(int comp) const {
  return comp == 0 ? std::span<const Complex>(u1_)
                   : std::span<const Complex>(u2_);
}

// --- ModeProjection --------------------------------------------------------

ModeProjection::ModeProjection(int m, Kind kind) : m_(m), kind_(kind) {
  if (m < 1) throw ValidationError("mode projection cutoff must be >= 1");
}

ModeProjection ModeProjection::band(int m) {
  return ModeProjection(m, Kind::band1d);
}

ModeProjection ModeProjection::annulus(int m) {
  return ModeProjection(m, Kind::annulus2d);
}

bool ModeProjection::keeps(int k) const {
  if (kind_ != Kind::band1d)
    throw ValidationError("1D membership queried on a 2D annulus projection");
  return k != 0 && std::abs(k) <= m_;
}

bool ModeProjection::keeps(int k1, int k2) const {
  if (kind_ != Kind::annulus2d)
    throw ValidationError("2D membership queried on a 1D band projection");
  const long r2 = static_cast<long>(k1) * k1 + static_cast<long>(k2) * k2;
  return r2 != 0 && r2 <= static_cast<long>(m_) * m_;
}

// --- 1D operations ---------------------------------------------------------

double symmetry_violation(const SpectralField1D& f) {
  const int n = f.size();
  auto c = f.data();
  double v = std::abs(c[0].imag());
  v = std::max(v, std::abs(c[n / 2].imag()));
  for (int k = 1; k < n / 2; ++k)
    v = std::max(v, std::abs(c[n - k] - std::conj(c[k])));
  return v;
}

namespace detail {

std::vector<double> to_physical_nocheck(const SpectralField1D& f) {
  const int n = f.size();
  // c2r reads the upper half-spectrum k = 0..N/2 and implies the
  // conjugate lower half.
  std::vector<Complex> half(f.data().begin(), f.data().begin() + n / 2 + 1);
  std::vector<double> out(n);
  fft_c2r(half, out);
  return out;
}

}  // namespace detail

std::vector<double> to_physical(const SpectralField1D& f) {
  check_real_symmetry(symmetry_violation(f), max_abs(f.data()));
  return detail::to_physical_nocheck(f);
}

SpectralField1D to_spectral(std::span<const double> samples, double period) {
  const int n = static_cast<int>(samples.size());
  require_power_of_two(n);
  SpectralField1D f(n, period);
  std::vector<Complex> half(n / 2 + 1);
  detail::fft_r2c(samples, half);
  auto c = f.data();
  const double inv_n = 1.0 / n;
  c[0] = Complex(half[0].real() * inv_n, 0.0);
  c[n / 2] = Complex(half[n / 2].real() * inv_n, 0.0);
  for (int k = 1; k < n / 2; ++k) {
    c[k] = half[k] * inv_n;
    c[n - k] = std::conj(c[k]);
  }
  return f;
}

SpectralField1D ddx(const SpectralField1D& f, int order) {
  if (order != 1 && order != 3)
    throw ValidationError("ddx supports derivative orders 1 and 3, got " +
                          std::to_string(order));
  SpectralField1D out = f;
  const int n = f.size();
  auto c = out.data();
  for (int j = 0; j < n; ++j) {
    const int k = j <= n / 2 ? j : j - n;
    const Complex iq(0.0, f.wavenumber(k));
    Complex sym = iq;
    for (int p = 1; p < order; ++p) sym *= iq;
    c[j] *= sym;
  }
  return out;
}

SpectralField1D dealias_23(SpectralField1D f) {
  const int n = f.size();
  const int cut = dealias_cutoff(n);
  auto c = f.data();
  for (int j = 0; j < n; ++j) {
    const int k = j <= n / 2 ? j : j - n;
    if (std::abs(k) > cut) c[j] = Complex(0.0, 0.0);
  }
  return f;
}

SpectralField1D project(const ModeProjection& p, SpectralField1D f) {
  const int n = f.size();
  auto c = f.data();
  for (int j = 0; j < n; ++j) {
    const int k = j <= n / 2 ? j : j - n;
    if (!p.keeps(k)) c[j] = Complex(0.0, 0.0);
  }
  return f;
}

double l2_norm(const SpectralField1D& f) {
  double sum = 0.0;
  for (const auto& v : f.data()) sum += std::norm(v);
  return std::sqrt(f.period() * sum);
}

std::pair<double, double> l2_norm_split(const SpectralField1D& f,
                                        const ModeProjection& p) {
  const int n = f.size();
  auto c = f.data();
  double low = 0.0, high = 0.0;
  for (int j = 0; j < n; ++j) {
    const int k = j <= n / 2 ? j : j - n;
    (p.keeps(k) ? low : high) += std::norm(c[j]);
  }
  return {std::sqrt(f.period() * low), std::sqrt(f.period() * high)};
}

// --- 2D operations ---------------------------------------------------------

double symmetry_violation(const SpectralVectorField2D& f) {
  const int n = f.size();
  double v = 0.0;
  for (int comp = 0; comp < 2; ++comp) {
    auto c = f.data(comp);
    for (int i1 = 0; i1 < n; ++i1) {
      const int m1 = (n - i1) % n;
      for (int i2 = 0; i2 < n; ++i2) {
        const int m2 = (n - i2) % n;
        const Complex a = c[static_cast<size_t>(i1) * n + i2];
        const Complex b = c[static_cast<size_t>(m1) * n + m2];
        v = std::max(v, std::abs(a - std::conj(b)));
      }
    }
  }
  return v;
}

namespace detail {

std::vector<double> to_physical_nocheck(const SpectralVectorField2D& f,
                                        int comp) {
  const int n = f.size();
  std::vector<Complex> out(static_cast<size_t>(n) * n);
  fft2(f.data(comp), out, n, +1);
  std::vector<double> re(out.size());
  for (size_t i = 0; i < out.size(); ++i) re[i] = out[i].real();
  return re;
}

}  // namespace detail

std::vector<double> to_physical(const SpectralVectorField2D& f, int comp) {
  double scale = std::max(max_abs(f.data(0)), max_abs(f.data(1)));
  check_real_symmetry(symmetry_violation(f), scale);
  return detail::to_physical_nocheck(f, comp);
}

SpectralVectorField2D from_physical(std::span<const double> u1,
                                    std::span<const double> u2, int n) {
  SpectralVectorField2D f(n);
  const size_t total = static_cast<size_t>(n) * n;
  if (u1.size() != total || u2.size() != total)
    throw ValidationError("physical sample count does not match grid size");
  std::vector<Complex> buf(total), out(total);
  const double inv = 1.0 / static_cast<double>(total);
  for (int comp = 0; comp < 2; ++comp) {
    auto src = comp == 0 ? u1 : u2;
    for (size_t i = 0; i < total; ++i) buf[i] = Complex(src[i], 0.0);
    detail::fft2(buf, out, n, -1);
    auto dst = f.data(comp);
    for (size_t i = 0; i < total; ++i) dst[i] = out[i] * inv;
  }
  return f;
}

SpectralVectorField2D dealias_23(SpectralVectorField2D f) {
  const int n = f.size();
  const int cut = dealias_cutoff(n);
  for (int comp = 0; comp < 2; ++comp) {
    auto c = f.data(comp);
    for (int i1 = 0; i1 < n; ++i1) {
      const int k1 = i1 <= n / 2 ? i1 : i1 - n;
      for (int i2 = 0; i2 < n; ++i2) {
        const int k2 = i2 <= n / 2 ? i2 : i2 - n;
        if (std::max(std::abs(k1), std::abs(k2)) > cut)
          c[static_cast<size_t>(i1) * n + i2] = Complex(0.0, 0.0);
      }
    }
  }
  return f;
}

SpectralVectorField2D project(const ModeProjection& p,
                              SpectralVectorField2D f) {
  const int n = f.size();
  for (int comp = 0; comp < 2; ++comp) {
    auto c = f.data(comp);
    for (int i1 = 0; i1 < n; ++i1) {
      const int k1 = i1 <= n / 2 ? i1 : i1 - n;
      for (int i2 = 0; i2 < n; ++i2) {
        const int k2 = i2 <= n / 2 ? i2 : i2 - n;
        if (!p.keeps(k1, k2))
          c[static_cast<size_t>(i1) * n + i2] = Complex(0.0, 0.0);
      }
    }
  }
  return f;
}

double l2_norm(const SpectralVectorField2D& f) {
  double sum = 0.0;
  for (int comp = 0; comp < 2; ++comp)
    for (const auto& v : f.data(comp)) sum += std::norm(v);
  const double area = SpectralVectorField2D::period() *
                      SpectralVectorField2D::period();
  return std::sqrt(area * sum);
}

std::pair<double, double> l2_norm_split(const SpectralVectorField2D& f,
                                        const ModeProjection& p) {
  const int n = f.size();
  double low = 0.0, high = 0.0;
  for (int comp = 0; comp < 2; ++comp) {
    auto c = f.data(comp);
    for (int i1 = 0; i1 < n; ++i1) {
      const int k1 = i1 <= n / 2 ? i1 : i1 - n;
      for (int i2 = 0; i2 < n; ++i2) {
        const int k2 = i2 <= n / 2 ? i2 : i2 - n;
        (p.keeps(k1, k2) ? low : high) +=
            std::norm(c[static_cast<size_t>(i1) * n + i2]);
      }
    }
  }
  const double area = SpectralVectorField2D::period() *
                      SpectralVectorField2D::period();
  return {std::sqrt(area * low), std::sqrt(area * high)};
}

double divergence_max(const SpectralVectorField2D& f) {
  const int n = f.size();
  auto c1 = f.data(0);
  auto c2 = f.data(1);
  double m = 0.0;
  for (int i1 = 0; i1 < n; ++i1) {
    const int k1 = i1 <= n / 2 ? i1 : i1 - n;
    for (int i2 = 0; i2 < n; ++i2) {
      const int k2 = i2 <= n / 2 ? i2 : i2 - n;
      const size_t idx = static_cast<size_t>(i1) * n + i2;
      m = std::max(m, std::abs(static_cast<double>(k1) * c1[idx] +
                               static_cast<double>(k2) * c2[idx]));
    }
  }
  return m;
}

}  // namespace nudgelab
