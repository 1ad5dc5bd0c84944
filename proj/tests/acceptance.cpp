// Acceptance suite: end-to-end criteria for the twin-experiment catalog,
// one per command-line-selectable name. Each criterion prints a single
// PASS/FAIL line (plus indented notes for violations) and the process
// exits nonzero if any selected criterion fails.
//
// Usage: acceptance [--list] [--only <criterion>]...

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "nudgelab/diagnostics.hpp"
#include "nudgelab/euler2d.hpp"
#include "nudgelab/harness.hpp"
#include "nudgelab/kdv.hpp"
#include "nudgelab/lorenz.hpp"

using namespace nudgelab;
namespace fs = std::filesystem;

namespace {

class Reporter {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok) {
      ok_ = false;
      notes_.push_back(what);
    }
  }
  void note(const std::string& what) { notes_.push_back("note: " + what); }
  bool ok() const { return ok_; }
  const std::vector<std::string>& notes() const { return notes_; }

 private:
  bool ok_ = true;
  std::vector<std::string> notes_;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Each criterion writes into its own subtree so concurrent ctest
// workers never touch the same run directory.
std::string& current_criterion() {
  static std::string name = "adhoc";
  return name;
}

fs::path out_root() {
  fs::path base = "acceptance_runs";
  if (const char* env = std::getenv("NUDGELAB_OUT"); env && *env)
    base = fs::path(env) / "acceptance";
  return base / current_criterion();
}

struct LoadedRun {
  RunRecord record;
  ErrorSeries series;  // errors.csv merged with norms.csv
};

LoadedRun run_entry(const std::string& name) {
  LoadedRun out;
  out.record = run(catalog_entry(name), out_root().string());
  const fs::path dir(out.record.out_dir);
  out.series = read_series_csv((dir / "errors.csv").string());
  if (fs::exists(dir / "norms.csv")) {
    const ErrorSeries norms = read_series_csv((dir / "norms.csv").string());
    for (const auto& [cname, values] : norms.channels)
      out.series.channel(cname) = values;
  }
  return out;
}

double mean_tail(const std::vector<double>& v, double fraction) {
  const std::size_t count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * v.size())));
  double sum = 0.0;
  for (std::size_t i = v.size() - count; i < v.size(); ++i) sum += v[i];
  return sum / count;
}

KdvParams kdv_params(int n, double dt, double delta) {
  KdvParams p;
  p.delta = delta;
  p.gamma = 0.0;
  p.mu = 0.0;
  p.observed_modes = 1;
  p.grid_size = n;
  p.dt = dt;
  return p;
}

// --- criteria ---------------------------------------------------------------

// Fully dissipative run: all three component errors reach 1e-9.
void lorenz_fig1_dissipative(Reporter& rep) {
  const LoadedRun r = run_entry("fig1");
  for (const std::string ch : {"err_x", "err_y", "err_z"}) {
    const double v = r.series.channel(ch).back();
    rep.require(v <= 1e-9, "final " + ch + " = " + fmt(v) + " > 1e-9");
  }
  rep.require(r.record.wall_seconds < 60.0,
              "runtime " + fmt(r.record.wall_seconds) + "s >= 60s");
}

// b = 0: observed components converge, the unobserved offset plateaus
// at the 10^1 level.
void lorenz_fig2_partially_dissipative(Reporter& rep) {
  const LoadedRun r = run_entry("fig2");
  for (const std::string ch : {"err_x", "err_y"}) {
    const double v = r.series.channel(ch).back();
    rep.require(v <= 1e-9, "final " + ch + " = " + fmt(v) + " > 1e-9");
  }
  const double plateau = mean_tail(r.series.channel("err_z"), 0.1);
  rep.require(plateau >= 3.0 && plateau <= 30.0,
              "mean err_z over final 10% = " + fmt(plateau) +
                  " outside [3, 30]");
  rep.require(r.record.wall_seconds < 60.0,
              "runtime " + fmt(r.record.wall_seconds) + "s >= 60s");
}

// Late-time error tracks the initial z offset across twelve decades.
void lorenz_fig3_sensitivity(Reporter& rep) {
  const auto started = std::chrono::steady_clock::now();
  const RunRecord record = run(catalog_entry("fig3"), out_root().string());
  const fs::path dir(record.out_dir);
  const ExperimentConfig cfg = catalog_entry("fig3");
  std::stringstream deltas(cfg.get("z_perturbations"));
  std::string tok;
  while (std::getline(deltas, tok, ',')) {
    const double delta = std::stod(tok);
    const ErrorSeries series =
        read_series_csv((dir / ("errors_delta_" + tok + ".csv")).string());
    const double plateau = mean_tail(series.channel("err_l2"), 0.1);
    rep.require(plateau >= delta / 10.0 && plateau <= delta * 10.0,
                "delta " + tok + ": late-time l2 error " + fmt(plateau) +
                    " not within a factor 10");
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  rep.require(wall < 300.0, "runtime " + fmt(wall) + "s >= 300s");
}

// Direct insertion of both observed components with b = 0: the z offset
// is frozen for the whole horizon.
void lorenz_observe_xy_b0_exact(Reporter& rep) {
  LorenzParams p;
  p.sigma = 10.0;
  p.r = 28.0;
  p.b = 0.0;
  p.mu = 0.0;
  const double dt = 1e-4;
  LorenzState ref{30.0, 40.0, 50.0};
  LorenzState assim{20.0, 30.0, 40.0};
  assim.x = ref.x;
  assim.y = ref.y;
  const double dz0 = assim.z - ref.z;
  double worst = 0.0;
  const long steps = std::lround(20.0 / dt);
  for (long n = 0; n < steps; ++n) {
    const LorenzState rd = lorenz_rhs(ref, p);
    const LorenzState ad = coupled_rhs(ref, assim, CouplingVariant::observe_xy, p);
    ref = {ref.x + dt * rd.x, ref.y + dt * rd.y, ref.z + dt * rd.z};
    assim = {assim.x + dt * ad.x, assim.y + dt * ad.y, assim.z + dt * ad.z};
    assim.x = ref.x;
    assim.y = ref.y;
    worst = std::max(worst, std::abs((assim.z - ref.z) - dz0));
  }
  rep.require(worst <= 1e-10 * std::abs(dz0),
              "max |z(t)-Z(t) - (z0-Z0)| = " + fmt(worst) + " > " +
                  fmt(1e-10 * std::abs(dz0)));
}

// Undamped, unforced equation conserves the L2 norm over t in [0, 10].
void kdv_l2_conservation(Reporter& rep) {
  const KdvParams p = kdv_params(256, 6.103515625e-05, 0.075);
  KdvIntegrator integ(p);
  auto u = integ.to_half(init_single_mode(1.0, 1, 256));
  const double norm0 = l2_norm(integ.to_field(u));
  const long steps = std::lround(10.0 / p.dt);
  double worst = 0.0;
  for (long n = 0; n < steps; ++n) {
    integ.step_in_place(u);
    if ((n + 1) % 1000 == 0 || n + 1 == steps) {
      const double norm = l2_norm(integ.to_field(u));
      worst = std::max(worst, std::abs(norm - norm0) / norm0);
    }
  }
  rep.require(worst < 1e-8, "relative L2 drift " + fmt(worst) + " >= 1e-8");
}

// Data on the k0 = 6 lattice stays on it: off-lattice coefficients stay
// below 1e-12, so the band projection P_5 sees nothing.
void kdv_lattice_invariance(Reporter& rep) {
  const KdvParams p = kdv_params(256, 6.103515625e-05, 0.075);
  KdvIntegrator integ(p);
  auto u = integ.to_half(init_single_mode(1.0, 6, 256));
  const long steps = std::lround(10.0 / p.dt);
  double worst_off = 0.0;
  double worst_low = 0.0;
  const ModeProjection p5 = ModeProjection::band(5);
  for (long n = 0; n < steps; ++n) {
    integ.step_in_place(u);
    if ((n + 1) % 1000 == 0 || n + 1 == steps) {
      const SpectralField1D f = integ.to_field(u);
      for (int k = 1; k <= 128; ++k)
        if (k % 6 != 0)
          worst_off = std::max(worst_off, std::abs(f.coeff(k)));
      worst_low = std::max(worst_low, l2_norm(project(p5, f)));
    }
  }
  rep.require(worst_off < 1e-12,
              "off-lattice coefficient " + fmt(worst_off) + " >= 1e-12");
  rep.require(worst_low < 1e-12, "||P_5 u|| " + fmt(worst_low) + " >= 1e-12");
}

void check_null_side_run(const std::string& name, Reporter& rep) {
  const LoadedRun r = run_entry(name);
  const bool zero_is_assim = name == "fig4";
  const double flag = r.record.scalars.at(
      zero_is_assim ? "assim_bitwise_zero" : "ref_bitwise_zero");
  rep.require(flag == 1.0,
              name + ": the from-zero side did not stay bitwise zero "
                     "(feedback injects roundoff-scale observed content; "
                     "see ledger)");
  const auto& total = r.series.channel("err_total");
  const auto& live = r.series.channel(zero_is_assim ? "norm_u" : "norm_v");
  double worst = 0.0;
  for (std::size_t i = 0; i < total.size(); ++i)
    worst = std::max(worst, std::abs(total[i] - live[i]) / live[i]);
  rep.require(worst <= 1e-13, name + ": max relative gap between err_total "
                                     "and the live norm = " +
                                  fmt(worst));
  const BoundReport bound = lower_bound_check(r.series);
  rep.require(bound.ok, name + ": reverse-triangle lower bound violated "
                               "(worst margin " +
                            fmt(bound.worst_margin) + ")");
  rep.require(r.record.wall_seconds < 600.0,
              name + ": runtime " + fmt(r.record.wall_seconds) + "s >= 600s");
}

// Observation band entirely below the active lattice: nudging never
// develops the reference oscillations, in either role assignment.
void kdv_fig4_fig5_failure(Reporter& rep) {
  check_null_side_run("fig4", rep);
  check_null_side_run("fig5", rep);
}

// Shifted-profile construction: the spike at wavemode 100 is never
// recovered and the total error stays bounded away from zero.
void kdv_fig6_failure(Reporter& rep) {
  const LoadedRun r = run_entry("fig6");
  const double spike = r.record.scalars.at("spike_l2");
  const double final_total = r.series.channel("err_total").back();
  rep.require(final_total >= 0.5 * spike,
              "final err_total " + fmt(final_total) + " < 0.5 * spike " +
                  fmt(0.5 * spike));
  const auto& low = r.series.channel("err_low");
  rep.require(low.back() < 0.2 * low.front(),
              "low-mode error did not drop: " + fmt(low.front()) + " -> " +
                  fmt(low.back()));
  const BoundReport bound = lower_bound_check(r.series);
  rep.require(bound.ok,
              "lower bound violated (margin " + fmt(bound.worst_margin) + ")");

  // Final spectrum: no nudged energy around the spike shells.
  const fs::path spec = fs::path(r.record.out_dir) / "spectrum_t10.csv";
  std::ifstream in(spec);
  rep.require(in.good(), "missing " + spec.string());
  std::string line;
  std::getline(in, line);
  double worst_v = 0.0;
  while (std::getline(in, line)) {
    int k;
    double au, av;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf", &k, &au, &av) == 3 &&
        k >= 90 && k <= 110)
      worst_v = std::max(worst_v, av);
  }
  rep.require(worst_v <= 1e-14,
              "nudged spectrum near k = 100 reaches " + fmt(worst_v));
  rep.require(r.record.wall_seconds < 600.0,
              "runtime " + fmt(r.record.wall_seconds) + "s >= 600s");
}

// Damped and driven: the high-mode error decays at the damping rate.
void kdv_fig9_success_rate(Reporter& rep) {
  const LoadedRun r = run_entry("fig9");
  const DecayFit fit = fit_decay_rate(r.series, "err_high", 500);
  rep.require(fit.rate >= -0.13 && fit.rate <= -0.07,
              "fitted high-mode rate " + fmt(fit.rate) +
                  " outside [-0.13, -0.07]");
  rep.require(r.record.wall_seconds < 600.0,
              "runtime " + fmt(r.record.wall_seconds) + "s >= 600s");
}

// Global self-convergence of the integrating-factor scheme over one
// time unit: observed order 4.0 +- 0.3.
void kdv_ifrk4_order(Reporter& rep) {
  const int n = 64;
  const double delta = 0.3;
  const SpectralField1D u0 = init_single_mode(1.0, 1, n);
  const auto solve = [&](double dt) {
    KdvIntegrator integ(kdv_params(n, dt, delta));
    auto h = integ.to_half(u0);
    const long steps = std::lround(1.0 / dt);
    for (long i = 0; i < steps; ++i) integ.step_in_place(h);
    return integ.to_field(h);
  };
  // dt large enough that the discretization error dominates the
  // ~1e-13 accumulated-roundoff floor of the reference solve.
  const std::vector<double> dts = {1.6e-3, 8e-4, 4e-4};
  const SpectralField1D ref = solve(dts.back() / 16.0);
  std::vector<double> errs;
  for (double dt : dts) {
    SpectralField1D diff = solve(dt);
    auto d = diff.data();
    auto rr = ref.data();
    for (size_t i = 0; i < d.size(); ++i) d[i] -= rr[i];
    errs.push_back(l2_norm(diff));
    rep.note("e(dt=" + fmt(dt) + ") = " + fmt(errs.back()));
  }
  for (size_t i = 0; i + 1 < errs.size(); ++i) {
    const double slope = std::log2(errs[i] / errs[i + 1]);
    rep.require(slope >= 3.7 && slope <= 4.3,
                "self-convergence slope " + fmt(slope) +
                    " outside 4.0 +- 0.3");
  }
}

// The cellular reference is a discrete steady state over the full horizon.
void euler_steady_state(Reporter& rep) {
  const LoadedRun r = run_entry("fig10");
  const double drift = r.record.scalars.at("steady_drift");
  rep.require(drift < 1e-12,
              "reference changed by " + fmt(drift) + " relative over [0,1]");
  rep.require(r.record.wall_seconds < 600.0,
              "runtime " + fmt(r.record.wall_seconds) + "s >= 600s");
}

// Annulus radius 21 vs 22 around the active modes at |(15,15)| = sqrt(450).
void euler_fig11_fig12_threshold(Reporter& rep) {
  rep.require(15 * 15 + 15 * 15 > 21 * 21, "expected 450 > 441");
  rep.require(15 * 15 + 15 * 15 <= 22 * 22, "expected 450 <= 484");
  rep.require(!ModeProjection::annulus(21).keeps(15, 15),
              "annulus(21) must exclude (15,15)");
  rep.require(ModeProjection::annulus(22).keeps(15, 15),
              "annulus(22) must include (15,15)");

  const LoadedRun r11 = run_entry("fig11");
  rep.require(r11.record.scalars.at("assim_bitwise_zero") == 1.0,
              "fig11: nudged-from-zero state did not stay bitwise zero "
              "(feedback injects roundoff-scale observed content; see ledger)");
  const auto& total11 = r11.series.channel("err_total");
  double worst = 0.0;
  for (double v : total11)
    worst = std::max(worst, std::abs(v - total11.front()) / total11.front());
  rep.require(worst <= 1e-10,
              "fig11: error deviates from constant by " + fmt(worst));
  rep.require(r11.record.wall_seconds < 600.0,
              "fig11 runtime " + fmt(r11.record.wall_seconds) + "s >= 600s");

  const LoadedRun r12 = run_entry("fig12");
  const auto& total12 = r12.series.channel("err_total");
  const double floor = 1e-13 * total12.front();
  bool decreasing = true;
  for (std::size_t i = 0; i + 1 < total12.size(); ++i) {
    const bool fine = total12[i] > floor ? total12[i + 1] < total12[i]
                                         : total12[i + 1] <= floor;
    if (!fine) decreasing = false;
  }
  rep.require(decreasing,
              "fig12: error not strictly decreasing down to the roundoff "
              "floor");
  rep.require(total12.back() < total12.front(),
              "fig12: final error did not decrease");
  rep.require(r12.record.wall_seconds < 600.0,
              "fig12 runtime " + fmt(r12.record.wall_seconds) + "s >= 600s");
}

// Discrete incompressibility along every step of every 2D catalog run.
void euler_divergence_free(Reporter& rep) {
  for (const std::string name : {"fig10", "fig11", "fig12"}) {
    const RunRecord record = run(catalog_entry(name), out_root().string());
    const double du = record.scalars.at("max_div_ratio_u");
    const double dv = record.scalars.at("max_div_ratio_v");
    rep.require(du < 1e-12,
                name + ": max |k.uhat|/||u|| = " + fmt(du) + " >= 1e-12");
    rep.require(dv < 1e-12,
                name + ": max |k.vhat|/||v|| = " + fmt(dv) + " >= 1e-12");
  }
}

// Shortened stand-ins for the two long-horizon runs: the lower bound
// never breaks, and the unrecovered spike keeps the high-mode error up.
void kdv_fig7_fig8_short(Reporter& rep) {
  const LoadedRun r7 = run_entry("fig7_short");
  const BoundReport b7 = lower_bound_check(r7.series);
  rep.require(b7.ok, "fig7_short: lower bound violated (margin " +
                         fmt(b7.worst_margin) + ")");
  const double spike = r7.record.scalars.at("spike_l2");
  double min_high = std::numeric_limits<double>::infinity();
  for (double v : r7.series.channel("err_high"))
    min_high = std::min(min_high, v);
  rep.require(min_high >= 0.5 * spike,
              "fig7_short: min err_high " + fmt(min_high) +
                  " < 0.5 * spike " + fmt(0.5 * spike));

  const LoadedRun r8 = run_entry("fig8_short");
  const BoundReport b8 = lower_bound_check(r8.series);
  rep.require(b8.ok, "fig8_short: lower bound violated (margin " +
                         fmt(b8.worst_margin) + ")");
}

struct Criterion {
  std::string name;
  std::function<void(Reporter&)> fn;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list = {
      {"lorenz_fig1_dissipative", lorenz_fig1_dissipative},
      {"lorenz_fig2_partially_dissipative", lorenz_fig2_partially_dissipative},
      {"lorenz_fig3_sensitivity", lorenz_fig3_sensitivity},
      {"lorenz_observe_xy_b0_exact", lorenz_observe_xy_b0_exact},
      {"kdv_l2_conservation", kdv_l2_conservation},
      {"kdv_lattice_invariance", kdv_lattice_invariance},
      {"kdv_fig4_fig5_failure", kdv_fig4_fig5_failure},
      {"kdv_fig6_failure", kdv_fig6_failure},
      {"kdv_fig9_success_rate", kdv_fig9_success_rate},
      {"kdv_ifrk4_order", kdv_ifrk4_order},
      {"euler_steady_state", euler_steady_state},
      {"euler_fig11_fig12_threshold", euler_fig11_fig12_threshold},
      {"euler_divergence_free", euler_divergence_free},
      {"kdv_fig7_fig8_short", kdv_fig7_fig8_short},
  };
  return list;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> selected;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--list") == 0) {
      for (const auto& c : criteria()) std::printf("%s\n", c.name.c_str());
      return 0;
    }
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      selected.push_back(argv[++i]);
    }
  }

  int failures = 0;
  int ran = 0;
  for (const auto& c : criteria()) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), c.name) == selected.end())
      continue;
    ++ran;
    current_criterion() = c.name;
    Reporter rep;
    try {
      c.fn(rep);
    } catch (const std::exception& e) {
      rep.require(false, std::string("exception: ") + e.what());
    }
    std::printf("[%s] %s\n", rep.ok() ? "PASS" : "FAIL", c.name.c_str());
    for (const auto& note : rep.notes())
      std::printf("    %s\n", note.c_str());
    std::fflush(stdout);
    if (!rep.ok()) ++failures;
  }
  if (ran == 0) {
    std::fprintf(stderr, "no matching criterion\n");
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
