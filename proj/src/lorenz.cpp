#include "nudgelab/lorenz.hpp"

#include <cmath>

#include "nudgelab/errors.hpp"

namespace nudgelab {

namespace {

bool finite(const LorenzState& s) {
  return std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.z);
}

LorenzState euler_update(const LorenzState& s, const LorenzState& ds,
                         double dt) {
  return {s.x + dt * ds.x, s.y + dt * ds.y, s.z + dt * ds.z};
}

void insert_observed(LorenzState& assim, const LorenzState& ref,
                     CouplingVariant variant) {
  switch (variant) {
    case CouplingVariant::observe_x:
      assim.x = ref.x;
      break;
    case CouplingVariant::observe_y:
      assim.y = ref.y;
      break;
    case CouplingVariant::observe_z:
      assim.z = ref.z;
      break;
    case CouplingVariant::observe_xy:
      assim.x = ref.x;
      assim.y = ref.y;
      break;
    case CouplingVariant::nudge_xy:
      break;
  }
}

}  // namespace

void LorenzParams::validate() const {
  if (sigma <= 0.0) throw ValidationError("sigma must be positive");
  if (r <= 0.0) throw ValidationError("r must be positive");
  if (b < 0.0) throw ValidationError("b must be nonnegative");
  if (mu < 0.0) throw ValidationError("mu must be nonnegative");
}

LorenzState lorenz_rhs(const LorenzState& s, const LorenzParams& p) {
  return {-p.sigma * s.x + p.sigma * s.y,
          -p.sigma * s.x - s.y - s.x * s.z,
          -p.b * s.z + s.x * s.y - p.b * (p.r + p.sigma)};
}

LorenzState coupled_rhs(const LorenzState& ref, const LorenzState& assim,
                        CouplingVariant variant, const LorenzParams& p) {
  const LorenzState rd = lorenz_rhs(ref, p);
  switch (variant) {
    case CouplingVariant::observe_x:
      // X given; evolve (y, z) with X inserted.
      return {rd.x,
              -p.sigma * ref.x - assim.y - ref.x * assim.z,
              -p.b * assim.z + ref.x * assim.y - p.b * (p.r + p.sigma)};
    case CouplingVariant::observe_y:
      return {-p.sigma * assim.x + p.sigma * ref.y,
              rd.y,
              -p.b * assim.z + assim.x * ref.y - p.b * (p.r + p.sigma)};
    case CouplingVariant::observe_z:
      return {-p.sigma * assim.x + p.sigma * assim.y,
              -p.sigma * assim.x - assim.y - assim.x * ref.z,
              rd.z};
    case CouplingVariant::observe_xy:
      return {rd.x, rd.y,
              -p.b * assim.z + ref.x * ref.y - p.b * (p.r + p.sigma)};
    case CouplingVariant::nudge_xy:
      return {-p.sigma * assim.x + p.sigma * assim.y + p.mu * (ref.x - assim.x),
              -p.sigma * assim.x - assim.y - assim.x * assim.z +
                  p.mu * (ref.y - assim.y),
              -p.b * assim.z + assim.x * assim.y - p.b * (p.r + p.sigma)};
  }
  throw ValidationError("unknown coupling variant");
}

LorenzState step_euler(const LorenzState& s, const LorenzParams& p, double dt) {
  if (dt < 0.0) throw ValidationError("dt must be nonnegative");
  const LorenzState next = euler_update(s, lorenz_rhs(s, p), dt);
  if (!finite(next))
    throw DivergenceError("reference state became nonfinite", 0);
  return next;
}

double hayden_j(const LorenzParams& p) {
  if (p.b < 0.0) throw ValidationError("b must be nonnegative");
  if (p.b <= 2.0) return p.r * p.r;
  return p.b * p.b * p.r * p.r / (4.0 * (p.b - 1.0));
}

ErrorSeries run_twin(const LorenzState& ref_init, const LorenzState& assim_init,
                     CouplingVariant variant, const LorenzParams& p, double dt,
                     double T, const LorenzRunOptions& options) {
  p.validate();
  if (dt <= 0.0) throw ValidationError("dt must be positive");
  if (T <= 0.0) throw ValidationError("T must be positive");
  if (variant == CouplingVariant::nudge_xy && p.mu * dt >= 2.0)
    throw ValidationError(
        "CFL constraint violated: explicit nudging requires mu < 2/dt "
        "(mu ≲ 2/Δt)");
  const int stride = options.output_stride > 0 ? options.output_stride : 1;
  const long steps = std::lround(T / dt);

  LorenzState ref = ref_init;
  LorenzState assim = assim_init;
  insert_observed(assim, ref, variant);

  ErrorSeries series;
  series.metadata["system"] = "lorenz";
  series.metadata["dt"] = std::to_string(dt);
  series.metadata["output_stride"] = std::to_string(stride);
  auto& err_x = series.channel("err_x");
  auto& err_y = series.channel("err_y");
  auto& err_z = series.channel("err_z");
  auto& err_l2 = series.channel("err_l2");

  auto record = [&](long step) {
    const double ex = std::abs(ref.x - assim.x);
    const double ey = std::abs(ref.y - assim.y);
    const double ez = std::abs(ref.z - assim.z);
    series.times.push_back(step * dt);
    err_x.push_back(ex);
    err_y.push_back(ey);
    err_z.push_back(ez);
    err_l2.push_back(std::sqrt(ex * ex + ey * ey + ez * ez));
  };

  record(0);
  for (long n = 0; n < steps; ++n) {
    const LorenzState rd = lorenz_rhs(ref, p);
    const LorenzState ad = coupled_rhs(ref, assim, variant, p);
    ref = euler_update(ref, rd, dt);
    assim = euler_update(assim, ad, dt);
    insert_observed(assim, ref, variant);
    if (!finite(ref) || !finite(assim))
      throw DivergenceError("state became nonfinite", n + 1);
    if ((n + 1) % stride == 0 || n + 1 == steps) record(n + 1);
  }
  return series;
}

}  // namespace nudgelab
