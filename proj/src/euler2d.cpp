#include "nudgelab/euler2d.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "nudgelab/errors.hpp"

namespace nudgelab {

namespace {

constexpr double kResolutionThreshold = 10.0 * 2.220446049250313e-16;

bool finite_field(const SpectralVectorField2D& f) {
  for (int comp = 0; comp < 2; ++comp)
    for (const auto& c : f.data(comp))
      if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) return false;
  return true;
}

bool zero_field(const SpectralVectorField2D& f) {
  for (int comp = 0; comp < 2; ++comp)
    for (const auto& c : f.data(comp))
      if (c.real() != 0.0 || c.imag() != 0.0) return false;
  return true;
}

// Largest |coefficient| on the two outermost kept shells of the
// max-norm dealias square.
double spectrum_tail(const SpectralVectorField2D& f) {
  const int n = f.size();
  const int cut = dealias_cutoff(n);
  const int band = 6;  // covers lattice spacings up to 7
  double tail = 0.0;
  for (int comp = 0; comp < 2; ++comp) {
    auto c = f.data(comp);
    for (int i1 = 0; i1 < n; ++i1) {
      const int k1 = i1 <= n / 2 ? i1 : i1 - n;
      for (int i2 = 0; i2 < n; ++i2) {
        const int k2 = i2 <= n / 2 ? i2 : i2 - n;
        const int m = std::max(std::abs(k1), std::abs(k2));
        if (m >= cut - band && m <= cut)
          tail = std::max(tail, std::abs(c[static_cast<size_t>(i1) * n + i2]));
      }
    }
  }
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

void EulerParams::validate() const {
  if (grid_size < 4 || (grid_size & (grid_size - 1)) != 0)
    throw ValidationError("N must be a power of two >= 4, got " +
                          std::to_string(grid_size));
  if (dt <= 0.0) throw ValidationError("dt must be positive");
  if (mu < 0.0) throw ValidationError("mu must be nonnegative");
  if (observed_modes < 1)
    throw ValidationError("M must be >= 1, got " +
                          std::to_string(observed_modes));
  if (mu * dt >= 2.0)
    throw ValidationError(
        "CFL constraint violated: explicit nudging requires mu < 2/dt "
        "(mu ≲ 2/Δt); got mu*dt = " +
        std::to_string(mu * dt));
}

SpectralVectorField2D taylor_green(const TaylorGreenSpec& spec, int n) {
  if (spec.k < 1) throw ValidationError("Taylor-Green frequency must be >= 1");
  if (spec.k > dealias_cutoff(n))
    throw ValidationError(
        "Taylor-Green frequency " + std::to_string(spec.k) +
        " is not resolvable after dealiasing on N = " + std::to_string(n));
  SpectralVectorField2D f(n);
  const double a = spec.c / 4.0;
  for (int s1 : {-1, 1}) {
    for (int s2 : {-1, 1}) {
      // sin(k a) cos(k b) has coefficient -i s1 c/4 at (s1 k, s2 k);
      // -cos(k a) sin(k b) has +i s2 c/4 there.
      f.set_coeff(0, s1 * spec.k, s2 * spec.k, Complex(0.0, -s1 * a));
      f.set_coeff(1, s1 * spec.k, s2 * spec.k, Complex(0.0, s2 * a));
    }
  }
  return f;
}

SpectralVectorField2D leray_project(SpectralVectorField2D f) {
  const int n = f.size();
  auto c1 = f.data(0);
  auto c2 = f.data(1);
  for (int i1 = 0; i1 < n; ++i1) {
    const int k1 = i1 <= n / 2 ? i1 : i1 - n;
    for (int i2 = 0; i2 < n; ++i2) {
      const int k2 = i2 <= n / 2 ? i2 : i2 - n;
      const size_t idx = static_cast<size_t>(i1) * n + i2;
      if (k1 == 0 && k2 == 0) {
        c1[idx] = Complex(0.0, 0.0);
        c2[idx] = Complex(0.0, 0.0);
        continue;
      }
      const double k1d = k1, k2d = k2;
      const Complex kdotu = (k1d * c1[idx] + k2d * c2[idx]) / (k1d * k1d + k2d * k2d);
      c1[idx] -= k1d * kdotu;
      c2[idx] -= k2d * kdotu;
    }
  }
  return f;
}

SpectralVectorField2D euler_nonlinear(const SpectralVectorField2D& u) {
  const int n = u.size();
  const size_t total = static_cast<size_t>(n) * n;

  // Vorticity omega = d1 u2 - d2 u1 in spectral space (q = k on the
  // 2*pi-periodic torus).
  SpectralVectorField2D work(n);
  auto w = work.data(0);
  auto u1 = u.data(0);
  auto u2 = u.data(1);
  for (int i1 = 0; i1 < n; ++i1) {
    const int k1 = i1 <= n / 2 ? i1 : i1 - n;
    for (int i2 = 0; i2 < n; ++i2) {
      const int k2 = i2 <= n / 2 ? i2 : i2 - n;
      const size_t idx = static_cast<size_t>(i1) * n + i2;
      w[idx] = Complex(0.0, 1.0) *
               (static_cast<double>(k1) * u2[idx] -
                static_cast<double>(k2) * u1[idx]);
    }
  }

  const std::vector<double> omega = detail::to_physical_nocheck(work, 0);
  const std::vector<double> a = detail::to_physical_nocheck(u, 0);
  const std::vector<double> b = detail::to_physical_nocheck(u, 1);

  // (u . grad)u = grad(|u|^2/2) + omega * u_perp with u_perp = (-u2, u1);
  // the gradient part is annihilated by the projection below.
  std::vector<double> f1(total), f2(total);
  for (size_t i = 0; i < total; ++i) {
    f1[i] = -omega[i] * b[i];
    f2[i] = omega[i] * a[i];
  }
  return leray_project(dealias_23(from_physical(f1, f2, n)));
}

// --- EulerIntegrator ---------------------------------------------------------

EulerIntegrator::EulerIntegrator(const EulerParams& p)
    : p_(p), obs_(ModeProjection::annulus(std::max(1, p.observed_modes))) {
  p_.validate();
}

namespace {

void pin_zero_mode(SpectralVectorField2D& f) {
  f.set_coeff(0, 0, 0, Complex(0.0, 0.0));
  f.set_coeff(1, 0, 0, Complex(0.0, 0.0));
}

}  // namespace

SpectralVectorField2D EulerIntegrator::step(const SpectralVectorField2D& u) const {
  const SpectralVectorField2D nl = euler_nonlinear(u);
  SpectralVectorField2D next = u;
  for (int comp = 0; comp < 2; ++comp) {
    auto dst = next.data(comp);
    auto src = nl.data(comp);
    for (size_t i = 0; i < dst.size(); ++i) dst[i] -= p_.dt * src[i];
  }
  pin_zero_mode(next);
  return next;
}

SpectralVectorField2D EulerIntegrator::nudged_step(
    const SpectralVectorField2D& v, const SpectralVectorField2D& u_obs) const {
  const int n = v.size();
  const SpectralVectorField2D nl = euler_nonlinear(v);
  SpectralVectorField2D next = v;
  const double mudt = p_.mu * p_.dt;
  for (int comp = 0; comp < 2; ++comp) {
    auto dst = next.data(comp);
    auto src = nl.data(comp);
    auto uo = u_obs.data(comp);
    auto vv = v.data(comp);
    for (int i1 = 0; i1 < n; ++i1) {
      const int k1 = i1 <= n / 2 ? i1 : i1 - n;
      for (int i2 = 0; i2 < n; ++i2) {
        const int k2 = i2 <= n / 2 ? i2 : i2 - n;
        const size_t idx = static_cast<size_t>(i1) * n + i2;
        dst[idx] -= p_.dt * src[idx];
        if (obs_.keeps(k1, k2)) dst[idx] += mudt * (uo[idx] - vv[idx]);
      }
    }
  }
  // The observed reference and v are both divergence-free, so the
  // feedback is too; one projection keeps the invariant exact.
  SpectralVectorField2D projected = leray_project(std::move(next));
  pin_zero_mode(projected);
  return projected;
}

SpectralVectorField2D step_euler_2d(const SpectralVectorField2D& u,
                                    const EulerParams& p) {
  return EulerIntegrator(p).step(u);
}

SpectralVectorField2D nudge_step_2d(const SpectralVectorField2D& v,
                                    const SpectralVectorField2D& u_obs,
                                    const EulerParams& p) {
  return EulerIntegrator(p).nudged_step(v, u_obs);
}

// --- Twin experiment ---------------------------------------------------------

EulerRunResult run_twin_euler(const SpectralVectorField2D& ref_init,
                              const SpectralVectorField2D& assim_init,
                              const EulerParams& p, double T,
                              const EulerRunOptions& options) {
  if (T <= 0.0) throw ValidationError("T must be positive");
  if (ref_init.size() != p.grid_size || assim_init.size() != p.grid_size)
    throw ValidationError("initial fields do not match the solver grid");
  EulerIntegrator integ(p);
  const ModeProjection obs = ModeProjection::annulus(p.observed_modes);

  SpectralVectorField2D u = leray_project(dealias_23(ref_init));
  SpectralVectorField2D v = leray_project(dealias_23(assim_init));

  const long steps = std::lround(T / p.dt);
  const int stride = std::max(1, options.output_stride);
  std::set<long> snapshot_steps;
  for (double t : options.snapshot_times)
    snapshot_steps.insert(std::clamp(std::lround(t / p.dt), 0L, steps));

  EulerRunResult result;
  ErrorSeries& series = result.series;
  series.metadata["system"] = "euler2d";
  series.metadata["N"] = std::to_string(p.grid_size);
  series.metadata["dt"] = std::to_string(p.dt);
  series.metadata["M"] = std::to_string(p.observed_modes);
  series.metadata["output_stride"] = std::to_string(stride);
  auto& err_low = series.channel("err_low");
  auto& err_high = series.channel("err_high");
  auto& err_total = series.channel("err_total");
  auto& norm_u = series.channel("norm_u");
  auto& norm_v = series.channel("norm_v");

  auto record = [&](long step) {
    const ErrorSplit split = split_error(u, v, obs);
    series.times.push_back(step * p.dt);
    err_low.push_back(split.low);
    err_high.push_back(split.high);
    err_total.push_back(split.total);
    norm_u.push_back(l2_norm(u));
    norm_v.push_back(l2_norm(v));
  };
  auto snapshot = [&](long step) {
    result.snapshots.push_back({step * p.dt, u, v});
  };
  auto track_divergence = [&]() {
    const double nu = l2_norm(u);
    const double nv = l2_norm(v);
    const double du = divergence_max(u);
    const double dv = divergence_max(v);
    result.max_div_ratio_u =
        std::max(result.max_div_ratio_u,
                 nu > 0.0 ? du / nu : (du > 0.0 ? 1.0 : 0.0));
    result.max_div_ratio_v =
        std::max(result.max_div_ratio_v,
                 nv > 0.0 ? dv / nv : (dv > 0.0 ? 1.0 : 0.0));
  };

  check_resolution(spectrum_tail(u), options.resolution, 0.0);
  result.assim_bitwise_zero = zero_field(v);
  track_divergence();
  record(0);
  if (snapshot_steps.count(0)) snapshot(0);

  for (long n = 0; n < steps; ++n) {
    SpectralVectorField2D v_next = integ.nudged_step(v, u);
    u = integ.step(u);
    v = std::move(v_next);
    if (!finite_field(u) || !finite_field(v))
      throw DivergenceError("spectral coefficients became nonfinite", n + 1);
    if (result.assim_bitwise_zero) result.assim_bitwise_zero = zero_field(v);
    track_divergence();
    if ((n + 1) % stride == 0 || n + 1 == steps) record(n + 1);
    if (snapshot_steps.count(n + 1)) snapshot(n + 1);
  }

  result.resolution_tail = spectrum_tail(u);
  check_resolution(result.resolution_tail, options.resolution, steps * p.dt);
  result.final_u = u;
  result.final_v = v;
  return result;
}

}  // namespace nudgelab
