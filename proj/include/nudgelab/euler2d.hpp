#pragma once

// Incompressible ideal flow on the 2D torus in the pressure-free
// projected form u_t + B(u, u) = 0 with B(a, b) = P(a . grad b), stepped
// with explicit Euler, plus the annulus-observed nudged companion
// v_t + B(v, v) = mu P P_M (u - v). The Taylor-Green cellular state is
// the steady reference used by the experiment catalog.

#include <optional>
#include <vector>

#include "nudgelab/diagnostics.hpp"
#include "nudgelab/kdv.hpp"
#include "nudgelab/spectral.hpp"

namespace nudgelab {

struct EulerParams {
  int grid_size = 256;     // N per direction, power of two
  double dt = 0.001;
  double mu = 0.0;         // nudging coefficient
  int observed_modes = 1;  // M, annulus radius of the observation operator

  void validate() const;  // throws ValidationError
};

struct TaylorGreenSpec {
  int k = 15;       // active frequency
  double c = 1e-4;  // amplitude
};

// Exact spectral representation of
//   u1 = c sin(k x1) cos(k x2),  u2 = -c cos(k x1) sin(k x2):
// four modes per component at (+-k, +-k), divergence-free analytically.
SpectralVectorField2D taylor_green(const TaylorGreenSpec& spec, int n);

// Removes the gradient part: uhat(k) -= k (k . uhat(k)) / |k|^2, zero
// mode zeroed. Output satisfies k . uhat = 0 exactly up to roundoff.
SpectralVectorField2D leray_project(SpectralVectorField2D f);

// B(u, u) evaluated pseudo-spectrally in the rotational form
// P(omega * u_perp) with omega = d1 u2 - d2 u1, which agrees with
// P(u . grad u) for divergence-free fields; dealiased then projected.
SpectralVectorField2D euler_nonlinear(const SpectralVectorField2D& u);

// Explicit-Euler stepper for the twin systems. Owns scratch buffers, so
// instances are not thread-safe; concurrent runs use separate instances.
class EulerIntegrator {
 public:
  explicit EulerIntegrator(const EulerParams& p);

  const EulerParams& params() const noexcept { return p_; }

  // u - dt B(u, u), zero mode pinned to zero.
  SpectralVectorField2D step(const SpectralVectorField2D& u) const;
  // v - dt B(v, v) + dt mu P P_M (u_obs - v), observations at step start.
  SpectralVectorField2D nudged_step(const SpectralVectorField2D& v,
                                    const SpectralVectorField2D& u_obs) const;

 private:
  EulerParams p_;
  ModeProjection obs_;
};

SpectralVectorField2D step_euler_2d(const SpectralVectorField2D& u,
                                    const EulerParams& p);
SpectralVectorField2D nudge_step_2d(const SpectralVectorField2D& v,
                                    const SpectralVectorField2D& u_obs,
                                    const EulerParams& p);

struct EulerRunOptions {
  int output_stride = 10;
  std::vector<double> snapshot_times;
  ResolutionPolicy resolution = ResolutionPolicy::warn;
};

struct Snapshot2D {
  double time = 0.0;
  SpectralVectorField2D u, v;
};

struct EulerRunResult {
  // Channels: err_low, err_high, err_total, norm_u, norm_v.
  ErrorSeries series;
  std::vector<Snapshot2D> snapshots;
  bool assim_bitwise_zero = true;
  // Worst per-step incompressibility defect relative to the field norm:
  // max over steps of max_k |k . uhat| / ||u|| (0 when the field is zero).
  double max_div_ratio_u = 0.0;
  double max_div_ratio_v = 0.0;
  double resolution_tail = 0.0;
  SpectralVectorField2D final_u, final_v;
};

EulerRunResult run_twin_euler(const SpectralVectorField2D& ref_init,
                              const SpectralVectorField2D& assim_init,
                              const EulerParams& p, double T,
                              const EulerRunOptions& options = {});

}  // namespace nudgelab
