#pragma once

// The 1963 convection ODE system in its shifted form, four direct-insertion
// synchronization variants, and the feedback-nudged companion system, all
// stepped with shared explicit Euler. Setting b = 0 removes the dissipation
// on the third component (the partially dissipative regime).

#include "nudgelab/diagnostics.hpp"

namespace nudgelab {

struct LorenzParams {
  double sigma = 10.0;  // Prandtl number, > 0
  double r = 28.0;      // Rayleigh number, > 0
  double b = 8.0 / 3.0; // geometric factor, >= 0 (0 = partially dissipative)
  double mu = 0.0;      // nudging coefficient, >= 0

  void validate() const;  // throws ValidationError
};

struct LorenzState {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

// Which components of the reference are observed, and how they enter the
// assimilated system: Observe* inserts the observed values verbatim into
// the remaining equations; nudge_xy adds mu*(X - x) and mu*(Y - y)
// feedback terms to the x and y equations only.
enum class CouplingVariant {
  observe_x,
  observe_y,
  observe_z,
  observe_xy,
  nudge_xy,
};

// Right-hand side of the reference system:
//   x' = -sigma x + sigma y
//   y' = -sigma x - y - x z
//   z' = -b z + x y - b (r + sigma)
LorenzState lorenz_rhs(const LorenzState& s, const LorenzParams& p);

// Derivative of the assimilated state. For Observe* variants the observed
// slots carry the reference derivative so that shared Euler stepping keeps
// them identical to the reference (direct insertion).
LorenzState coupled_rhs(const LorenzState& ref, const LorenzState& assim,
                        CouplingVariant variant, const LorenzParams& p);

// One explicit Euler step of the reference system. Throws DivergenceError
// when the result is nonfinite.
LorenzState step_euler(const LorenzState& s, const LorenzParams& p, double dt);

// Asymptotic bound on the squared second component used in the
// synchronization estimates: r^2 for b <= 2, b^2 r^2 / (4 (b - 1)) for
// b >= 2 (both branches agree at b = 2).
double hayden_j(const LorenzParams& p);

struct LorenzRunOptions {
  int output_stride = 100;  // record every this-many steps
};

// Integrates reference and assimilated systems side by side with shared
// dt and records per-component absolute errors plus the Euclidean error.
// Channels: err_x, err_y, err_z, err_l2. For Observe* variants the
// observed components of the assimilated state are overwritten with the
// reference values at every step, including t = 0.
ErrorSeries run_twin(const LorenzState& ref_init, const LorenzState& assim_init,
                     CouplingVariant variant, const LorenzParams& p, double dt,
                     double T, const LorenzRunOptions& options = {});

}  // namespace nudgelab
