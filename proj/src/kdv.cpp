#include "nudgelab/kdv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include "fft_cache.hpp"
#include "nudgelab/errors.hpp"

namespace nudgelab {

namespace {

constexpr double kPi = std::numbers::pi;
// Resolution criterion: reference spectrum at the dealiasing cutoff must
// sit in the machine-precision band.
constexpr double kResolutionThreshold = 10.0 * 2.220446049250313e-16;

bool finite_half(const KdvIntegrator::Half& h) {
  for (const auto& c : h)
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) return false;
  return true;
}

bool zero_half(const KdvIntegrator::Half& h) {
  for (const auto& c : h)
    if (c.real() != 0.0 || c.imag() != 0.0) return false;
  return true;
}

// Parseval weights on the half-spectrum: interior modes represent a
// conjugate pair, the k = 0 and Nyquist bins only themselves.
double half_energy(const KdvIntegrator::Half& h, int from, int to) {
  const int nyquist = static_cast<int>(h.size()) - 1;
  double sum = 0.0;
  for (int k = from; k <= to; ++k) {
    const double w = (k == 0 || k == nyquist) ? 1.0 : 2.0;
    sum += w * std::norm(h[k]);
  }
  return sum;
}

double half_norm(const KdvIntegrator::Half& h, double period) {
  return std::sqrt(period * half_energy(h, 0, static_cast<int>(h.size()) - 1));
}

}  // namespace

void KdvParams::validate() const {
  if (grid_size < 4 || (grid_size & (grid_size - 1)) != 0)
    throw ValidationError("N must be a power of two >= 4, got " +
                          std::to_string(grid_size));
  if (period <= 0.0) throw ValidationError("period must be positive");
  if (dt <= 0.0) throw ValidationError("dt must be positive");
  if (gamma < 0.0) throw ValidationError("gamma must be nonnegative");
  if (mu < 0.0) throw ValidationError("mu must be nonnegative");
  if (observed_modes < 1 || observed_modes > grid_size / 2)
    throw ValidationError("M must lie in [1, N/2], got " +
                          std::to_string(observed_modes));
  if (mu * dt >= 2.0)
    throw ValidationError(
        "CFL constraint violated: explicit nudging requires mu < 2/dt "
        "(mu ≲ 2/Δt); got mu*dt = " +
        std::to_string(mu * dt));
  const double dx2 = dx() * dx();
  if (dt > 4.0 * dx2)
    throw ValidationError(
        "timestep guard violated: the scheme requires dt ≲ dx^2 "
        "(enforced as dt <= 4 dx^2 = " +
        std::to_string(4.0 * dx2) + ")");
}

Complex linear_symbol(int k, const KdvParams& p) {
  const double q = 2.0 * kPi * k / p.period;
  return Complex(p.gamma, -p.delta * p.delta * q * q * q);
}

SpectralField1D init_single_mode(double c, int k0, int n, double period) {
  if (c == 0.0) throw ValidationError("single-mode amplitude must be nonzero");
  if (k0 == 0) throw ValidationError("single-mode wavenumber must be nonzero");
  if (std::abs(k0) > n / 2)
    throw ValidationError("wavemode " + std::to_string(k0) +
                          " not representable on N = " + std::to_string(n));
  SpectralField1D f(n, period);
  f.set_mode_pair(std::abs(k0), Complex(c / 2.0, 0.0));
  return f;
}

SpectralField1D init_cosine_sum(std::span<const std::pair<double, int>> terms,
                                int n, double period) {
  SpectralField1D f(n, period);
  for (const auto& [c, k] : terms) {
    if (k == 0 || std::abs(k) > n / 2)
      throw ValidationError("cosine-sum wavemode " + std::to_string(k) +
                            " not representable on N = " + std::to_string(n));
    const Complex prev = f.coeff(std::abs(k));
    f.set_mode_pair(std::abs(k), prev + Complex(c / 2.0, 0.0));
  }
  return f;
}

SpectralField1D init_shifted_profile(const SpectralField1D& u_in,
                                     int observed_modes, int k_offset) {
  if (k_offset < 0) throw ValidationError("k_offset must be nonnegative");
  const double base_norm = l2_norm(u_in);
  if (base_norm == 0.0)
    throw ValidationError("shifted profile needs a nonzero base profile");
  const int spike_mode = 2 * observed_modes + k_offset;
  SpectralField1D out = u_in;
  const SpectralField1D spike =
      init_single_mode(1.0, spike_mode, u_in.size(), u_in.period());
  auto o = out.data();
  auto s = spike.data();
  for (size_t i = 0; i < o.size(); ++i) o[i] += s[i];
  const double scale = base_norm / l2_norm(out);
  for (auto& c : o) c *= scale;
  return out;
}

int choose_M(std::span<const SpectralField1D> u_series, double eps) {
  if (eps <= 0.0) throw ValidationError("eps must be positive");
  int sup = 1;
  for (const auto& u : u_series) {
    const int half = u.size() / 2;
    // Cumulative low-mode energy in the continuous-integral norm.
    std::vector<double> low(half + 1, 0.0);
    for (int k = 1; k <= half; ++k) {
      const double w = (k == half) ? 1.0 : 2.0;
      low[k] = low[k - 1] + w * u.period() * std::norm(u.coeff(k));
    }
    const double total = low[half];
    int m = 1;
    while (m < half && low[m] < total - eps) ++m;
    sup = std::max(sup, m);
  }
  return sup;
}

// --- KdvIntegrator ---------------------------------------------------------

KdvIntegrator::KdvIntegrator(const KdvParams& p,
                             std::optional<SpectralField1D> forcing)
    : p_(p) {
  p_.validate();
  const int half = p_.grid_size / 2 + 1;
  cutoff_ = dealias_cutoff(p_.grid_size);
  e_full_.resize(half);
  e_half_.resize(half);
  for (int k = 0; k < half; ++k) {
    const Complex l = linear_symbol(k, p_);
    e_full_[k] = std::exp(-l * p_.dt);
    e_half_[k] = std::exp(-l * (p_.dt / 2.0));
  }
  if (forcing) {
    if (forcing->size() != p_.grid_size || forcing->period() != p_.period)
      throw ValidationError("forcing grid does not match solver grid");
    if (std::abs(forcing->coeff(0)) != 0.0)
      throw ValidationError("forcing must have zero spatial mean");
    forcing_ = to_half(dealias_23(*forcing));
    has_forcing_ = true;
  }
  k1_.resize(half);
  k2_.resize(half);
  k3_.resize(half);
  k4_.resize(half);
  stage_.resize(half);
  feedback_.resize(half);
  phys_.resize(p_.grid_size);
}

KdvIntegrator::Half KdvIntegrator::to_half(const SpectralField1D& f) const {
  if (f.size() != p_.grid_size || f.period() != p_.period)
    throw ValidationError("field grid does not match solver grid");
  auto c = f.data();
  return Half(c.begin(), c.begin() + p_.grid_size / 2 + 1);
}

SpectralField1D KdvIntegrator::to_field(const Half& h) const {
  SpectralField1D f(p_.grid_size, p_.period);
  auto c = f.data();
  const int n = p_.grid_size;
  c[0] = h[0];
  c[n / 2] = h[n / 2];
  for (int k = 1; k < n / 2; ++k) {
    c[k] = h[k];
    c[n - k] = std::conj(h[k]);
  }
  return f;
}

void KdvIntegrator::nonlinear_half(const Half& u, Half& out) const {
  detail::fft_c2r(u, phys_);
  for (auto& x : phys_) x *= x;
  detail::fft_r2c(phys_, out);
  const int half = static_cast<int>(out.size()) - 1;
  const double inv_n = 1.0 / p_.grid_size;
  for (int k = 0; k <= half; ++k) {
    if (k > cutoff_) {
      out[k] = Complex(0.0, 0.0);
      continue;
    }
    const double q = 2.0 * kPi * k / p_.period;
    // -(1/2) * (i q) * (u^2)_k, with the forward-transform normalization.
    out[k] *= Complex(0.0, -0.5 * q * inv_n);
    if (has_forcing_) out[k] += forcing_[k];
  }
}

void KdvIntegrator::step_in_place(Half& u) const {
  const int half = static_cast<int>(u.size()) - 1;
  const double dt = p_.dt;
  if (!nonlinear_enabled_) {
    for (int k = 0; k <= half; ++k) u[k] *= e_full_[k];
    return;
  }
  nonlinear_half(u, k1_);
  for (int k = 0; k <= half; ++k)
    stage_[k] = e_half_[k] * (u[k] + 0.5 * dt * k1_[k]);
  nonlinear_half(stage_, k2_);
  for (int k = 0; k <= half; ++k)
    stage_[k] = e_half_[k] * u[k] + 0.5 * dt * k2_[k];
  nonlinear_half(stage_, k3_);
  for (int k = 0; k <= half; ++k)
    stage_[k] = e_full_[k] * u[k] + dt * e_half_[k] * k3_[k];
  nonlinear_half(stage_, k4_);
  for (int k = 0; k <= half; ++k)
    u[k] = e_full_[k] * u[k] +
           dt / 6.0 *
               (e_full_[k] * k1_[k] + 2.0 * e_half_[k] * (k2_[k] + k3_[k]) +
                k4_[k]);
}

void KdvIntegrator::nudged_step_in_place(Half& v, const Half& u_obs) const {
  const int m = std::min(p_.observed_modes, p_.grid_size / 2);
  // Observed mismatch at the step's start.
  for (int k = 1; k <= m; ++k) feedback_[k] = u_obs[k] - v[k];
  step_in_place(v);
  const double mudt = p_.mu * p_.dt;
  for (int k = 1; k <= m; ++k) v[k] += e_full_[k] * (mudt * feedback_[k]);
}

SpectralField1D KdvIntegrator::step(const SpectralField1D& u) const {
  Half h = to_half(dealias_23(u));
  step_in_place(h);
  if (!finite_half(h))
    throw DivergenceError("spectral coefficients became nonfinite", 0);
  return to_field(h);
}

SpectralField1D KdvIntegrator::nudged_step(const SpectralField1D& v,
                                           const SpectralField1D& u_obs) const {
  Half hv = to_half(dealias_23(v));
  const Half hu = to_half(u_obs);
  nudged_step_in_place(hv, hu);
  if (!finite_half(hv))
    throw DivergenceError("spectral coefficients became nonfinite", 0);
  return to_field(hv);
}

SpectralField1D ifrk4_step(const SpectralField1D& u, const KdvParams& p,
                           const std::optional<SpectralField1D>& forcing) {
  return KdvIntegrator(p, forcing).step(u);
}

SpectralField1D nudge_step(const SpectralField1D& v,
                           const SpectralField1D& u_obs, const KdvParams& p,
                           const std::optional<SpectralField1D>& forcing) {
  return KdvIntegrator(p, forcing).nudged_step(v, u_obs);
}

SpectralField1D nonlinear_term(const SpectralField1D& u) {
  const int n = u.size();
  std::vector<double> phys = detail::to_physical_nocheck(dealias_23(u));
  for (auto& x : phys) x *= x;
  std::vector<Complex> half(n / 2 + 1);
  detail::fft_r2c(phys, half);
  SpectralField1D out(n, u.period());
  const int cut = dealias_cutoff(n);
  const double inv_n = 1.0 / n;
  for (int k = 1; k <= cut; ++k) {
    const double q = 2.0 * kPi * k / u.period();
    out.set_mode_pair(k, half[k] * Complex(0.0, -0.5 * q * inv_n));
  }
  return out;
}

// --- Twin experiment -------------------------------------------------------

namespace {

// Band wide enough to catch lattice-supported spectra: any 7-bin window
// contains a multiple of every spacing up to 7.
double spectrum_tail(const KdvIntegrator::Half& u, int cutoff) {
  const int band = 6;
  double tail = 0.0;
  for (int k = std::max(1, cutoff - band); k <= cutoff; ++k)
    tail = std::max(tail, std::abs(u[k]));
  return tail;
}

void check_resolution(double tail, ResolutionPolicy policy, double t) {
  if (tail <= kResolutionThreshold || policy == ResolutionPolicy::off) return;
  char msg[160];
  std::snprintf(msg, sizeof(msg),
                "reference spectrum reaches the dealiasing cutoff at %.3e "
                "(> %.1e) at t = %g; increase N",
                tail, kResolutionThreshold, t);
  if (policy == ResolutionPolicy::enforce) throw ResolutionError(msg);
  std::fprintf(stderr, "warning: %s\n", msg);
}

}  // namespace

KdvRunResult run_twin_kdv(const SpectralField1D& ref_init,
                          const SpectralField1D& assim_init,
                          const KdvParams& p,
                          const std::optional<SpectralField1D>& forcing,
                          double T, const KdvRunOptions& options) {
  if (T <= 0.0) throw ValidationError("T must be positive");
  KdvIntegrator integ(p, forcing);
  auto u = integ.to_half(dealias_23(ref_init));
  auto v = integ.to_half(dealias_23(assim_init));

  const long steps = std::lround(T / p.dt);
  const int stride = std::max(1, options.output_stride);
  const int m = p.observed_modes;
  const int half = p.grid_size / 2;

  std::set<long> snapshot_steps;
  for (double t : options.snapshot_times)
    snapshot_steps.insert(std::clamp(std::lround(t / p.dt), 0L, steps));

  KdvRunResult result;
  ErrorSeries& series = result.series;
  series.metadata["system"] = "kdv";
  series.metadata["N"] = std::to_string(p.grid_size);
  series.metadata["dt"] = std::to_string(p.dt);
  series.metadata["M"] = std::to_string(p.observed_modes);
  series.metadata["output_stride"] = std::to_string(stride);
  auto& err_low = series.channel("err_low");
  auto& err_high = series.channel("err_high");
  auto& err_total = series.channel("err_total");
  auto& norm_u = series.channel("norm_u");
  auto& norm_v = series.channel("norm_v");

  KdvIntegrator::Half diff(u.size());
  auto record = [&](long step) {
    for (size_t i = 0; i < u.size(); ++i) diff[i] = u[i] - v[i];
    const double low2 = half_energy(diff, 1, std::min(m, half));
    const double total2 = half_energy(diff, 0, half);
    series.times.push_back(step * p.dt);
    err_low.push_back(std::sqrt(p.period * low2));
    err_high.push_back(std::sqrt(p.period * std::max(0.0, total2 - low2)));
    err_total.push_back(std::sqrt(p.period * total2));
    norm_u.push_back(half_norm(u, p.period));
    norm_v.push_back(half_norm(v, p.period));
  };
  auto snapshot = [&](long step) {
    result.snapshots.push_back(
        {step * p.dt, integ.to_field(u), integ.to_field(v)});
  };

  check_resolution(spectrum_tail(u, dealias_cutoff(p.grid_size)),
                   options.resolution, 0.0);
  result.assim_bitwise_zero = zero_half(v);

  record(0);
  if (snapshot_steps.count(0)) snapshot(0);

  for (long n = 0; n < steps; ++n) {
    integ.nudged_step_in_place(v, u);  // uses the pre-step observations
    integ.step_in_place(u);
    if (!finite_half(u) || !finite_half(v))
      throw DivergenceError("spectral coefficients became nonfinite", n + 1);
    if (result.assim_bitwise_zero) result.assim_bitwise_zero = zero_half(v);
    if ((n + 1) % stride == 0 || n + 1 == steps) record(n + 1);
    if (snapshot_steps.count(n + 1)) snapshot(n + 1);
  }

  result.resolution_tail = spectrum_tail(u, dealias_cutoff(p.grid_size));
  check_resolution(result.resolution_tail, options.resolution, steps * p.dt);
  result.final_u = integ.to_field(u);
  result.final_v = integ.to_field(v);
  return result;
}

}  // namespace nudgelab
