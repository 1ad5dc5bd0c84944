#pragma once

// Shared field algebra for the pseudo-spectral solvers: periodic real
// fields stored by their Fourier coefficients, transforms, spectral
// derivatives, 2/3 dealiasing, mode projections, and Parseval norms.
//
// Convention: a field expands as f(x) = sum_k fhat_k e^{i q_k x} with
// q_k = 2*pi*k/L, and the L2 norm is the continuous-integral one, so
// ||f||^2 = L * sum_k |fhat_k|^2 in 1D and area * sum in 2D.

#include <complex>
#include <span>
#include <utility>
#include <vector>

namespace nudgelab {

using Complex = std::complex<double>;

// Largest wavenumber kept by the 2/3 rule: modes with |k| > floor(N/3)
// are zeroed after any nonlinear product.
int dealias_cutoff(int n) noexcept;

// Real scalar periodic field on [0, L). Coefficients are stored in FFT
// order for wavenumbers k in (-N/2, N/2]; conjugate symmetry
// coeff(-k) == conj(coeff(k)) is an invariant of every well-formed field.
class SpectralField1D {
 public:
  SpectralField1D() = default;
  SpectralField1D(int n, double period);

  int size() const noexcept { return n_; }
  double period() const noexcept { return period_; }
  int max_mode() const noexcept { return n_ / 2; }
  // Scaled wavenumber q_k = 2*pi*k/L (the derivative symbol).
  double wavenumber(int k) const noexcept;

  Complex coeff(int k) const;
  void set_coeff(int k, Complex v);
  // Sets coeff(k) = v and coeff(-k) = conj(v), preserving realness.
  void set_mode_pair(int k, Complex v);

  std::span<Complex> data() noexcept { return coeffs_; }
  std::span<const Complex> data() const noexcept { return coeffs_; }

 private:
  int index(int k) const;
  int n_ = 0;
  double period_ = 2.0;
  std::vector<Complex> coeffs_;
};

// Real divergence-free vector field on the torus [0, 2*pi)^2. One
// complex coefficient plane per component, both axes in FFT order,
// wavevectors k = (k1, k2) with |k_i| <= N/2. Period is fixed at 2*pi,
// so the derivative symbol is simply i*k.
class SpectralVectorField2D {
 public:
  SpectralVectorField2D() = default;
  explicit SpectralVectorField2D(int n);

  int size() const noexcept { return n_; }
  static constexpr double period() noexcept { return 2.0 * 3.14159265358979323846; }

  Complex coeff(int comp, int k1, int k2) const;
  void set_coeff(int comp, int k1, int k2, Complex v);
  void set_mode_pair(int comp, int k1, int k2, Complex v);

  std::span<Complex> data(int comp);
  std::span<const Complex> data(int comp) const;

  int index(int k) const;  // FFT-order index of a single wavenumber

 private:
  int n_ = 0;
  std::vector<Complex> u1_, u2_;
};

// Observation operator P_M. In 1D it keeps the band 0 < |k| <= M; in 2D
// it keeps the annulus 0 < k1^2 + k2^2 <= M^2, tested in exact integer
// arithmetic. The zero mode is always dropped (all systems here are
// mean-free).
class ModeProjection {
 public:
  enum class Kind { band1d, annulus2d };

  static ModeProjection band(int m);
  static ModeProjection annulus(int m);

  int cutoff() const noexcept { return m_; }
  Kind kind() const noexcept { return kind_; }

  bool keeps(int k) const;           // 1D membership
  bool keeps(int k1, int k2) const;  // 2D membership

 private:
  ModeProjection(int m, Kind kind);
  int m_ = 0;
  Kind kind_ = Kind::band1d;
};

// --- 1D operations -------------------------------------------------------

// Inverse transform to N physical samples at x_j = j*L/N. Throws
// MalformedFieldError when conjugate symmetry is violated beyond
// 1e-12 relative.
std::vector<double> to_physical(const SpectralField1D& f);
SpectralField1D to_spectral(std::span<const double> samples, double period);

// Spectral derivative: coeff_out(k) = (i q_k)^order * coeff_in(k).
SpectralField1D ddx(const SpectralField1D& f, int order);

SpectralField1D dealias_23(SpectralField1D f);
SpectralField1D project(const ModeProjection& p, SpectralField1D f);

double l2_norm(const SpectralField1D& f);
// (low, high) with low = ||P_M f|| and high = ||(I - P_M) f||.
std::pair<double, double> l2_norm_split(const SpectralField1D& f,
                                        const ModeProjection& p);

// Worst-case deviation from coeff(-k) == conj(coeff(k)); includes any
// imaginary content in the k = 0 and Nyquist bins.
double symmetry_violation(const SpectralField1D& f);

// --- 2D operations -------------------------------------------------------

std::vector<double> to_physical(const SpectralVectorField2D& f, int comp);
SpectralVectorField2D from_physical(std::span<const double> u1,
                                    std::span<const double> u2, int n);

SpectralVectorField2D dealias_23(SpectralVectorField2D f);
SpectralVectorField2D project(const ModeProjection& p, SpectralVectorField2D f);

double l2_norm(const SpectralVectorField2D& f);
std::pair<double, double> l2_norm_split(const SpectralVectorField2D& f,
                                        const ModeProjection& p);

double symmetry_violation(const SpectralVectorField2D& f);

// max over k of |k . uhat(k)|, the discrete incompressibility defect.
double divergence_max(const SpectralVectorField2D& f);

namespace detail {
// Transform without the symmetry check, for solver-internal hot paths
// where fields are symmetric by construction.
std::vector<double> to_physical_nocheck(const SpectralField1D& f);
std::vector<double> to_physical_nocheck(const SpectralVectorField2D& f, int comp);
}  // namespace detail

}  // namespace nudgelab
