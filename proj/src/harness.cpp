#include "nudgelab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "nudgelab/errors.hpp"
#include "nudgelab/euler2d.hpp"
#include "nudgelab/kdv.hpp"
#include "nudgelab/lorenz.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace nudgelab {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& token, const std::string& context) {
  try {
    size_t pos = 0;
    const double v = std::stod(token, &pos);
    if (pos != token.size())
      throw ValidationError("trailing characters in number '" + token +
                            "' for " + context);
    return v;
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception&) {
    throw ValidationError("cannot parse '" + token + "' as a number for " +
                          context);
  }
}

int parse_int(const std::string& token, const std::string& context) {
  const double v = parse_double(token, context);
  const int i = static_cast<int>(std::lround(v));
  if (static_cast<double>(i) != v)
    throw ValidationError("expected an integer for " + context + ", got '" +
                          token + "'");
  return i;
}

std::vector<std::string> split_top_level(const std::string& s) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

struct SpecNode {
  std::string head;
  std::vector<std::string> args;
};

SpecNode parse_spec(const std::string& spec, const std::string& key) {
  const std::string s = trim(spec);
  const auto open = s.find('(');
  if (open == std::string::npos) return {s, {}};
  if (s.back() != ')')
    throw ValidationError("malformed init spec '" + s + "' for key " + key);
  SpecNode node;
  node.head = trim(s.substr(0, open));
  node.args = split_top_level(s.substr(open + 1, s.size() - open - 2));
  return node;
}

SpectralField1D build_field_1d(const std::string& spec, int n, double period,
                               const std::string& key) {
  const SpecNode node = parse_spec(spec, key);
  if (node.head == "zero") {
    return SpectralField1D(n, period);
  }
  if (node.head == "single_mode") {
    if (node.args.size() != 2)
      throw ValidationError("single_mode expects (c, k0) for key " + key);
    return init_single_mode(parse_double(node.args[0], key),
                            parse_int(node.args[1], key), n, period);
  }
  if (node.head == "cosine_sum") {
    if (node.args.size() < 2 || node.args.size() % 2 != 0)
      throw ValidationError("cosine_sum expects (c1, k1, c2, k2, ...) for key " +
                            key);
    std::vector<std::pair<double, int>> terms;
    for (size_t i = 0; i < node.args.size(); i += 2)
      terms.emplace_back(parse_double(node.args[i], key),
                         parse_int(node.args[i + 1], key));
    return init_cosine_sum(terms, n, period);
  }
  if (node.head == "shifted_profile") {
    if (node.args.size() != 3)
      throw ValidationError(
          "shifted_profile expects (base_spec, M, k_offset) for key " + key);
    const SpectralField1D base = build_field_1d(node.args[0], n, period, key);
    return init_shifted_profile(base, parse_int(node.args[1], key),
                                parse_int(node.args[2], key));
  }
  throw ValidationError("unknown 1D init spec '" + node.head + "' for key " +
                        key);
}

SpectralVectorField2D build_field_2d(const std::string& spec, int n,
                                     const std::string& key) {
  const SpecNode node = parse_spec(spec, key);
  if (node.head == "zero") return SpectralVectorField2D(n);
  if (node.head == "taylor_green") {
    if (node.args.size() != 2)
      throw ValidationError("taylor_green expects (k, c) for key " + key);
    return taylor_green({parse_int(node.args[0], key),
                         parse_double(node.args[1], key)},
                        n);
  }
  throw ValidationError("unknown 2D init spec '" + node.head + "' for key " +
                        key);
}

LorenzState parse_triple(const std::string& s, const std::string& key) {
  const auto parts = split_top_level(s);
  if (parts.size() != 3)
    throw ValidationError("expected 'x,y,z' triple for key " + key);
  return {parse_double(parts[0], key), parse_double(parts[1], key),
          parse_double(parts[2], key)};
}

std::vector<double> parse_double_list(const std::string& s,
                                      const std::string& key) {
  std::vector<double> out;
  for (const auto& tok : split_top_level(s))
    if (!tok.empty()) out.push_back(parse_double(tok, key));
  return out;
}

CouplingVariant parse_variant(const std::string& s) {
  if (s == "observe_x") return CouplingVariant::observe_x;
  if (s == "observe_y") return CouplingVariant::observe_y;
  if (s == "observe_z") return CouplingVariant::observe_z;
  if (s == "observe_xy") return CouplingVariant::observe_xy;
  if (s == "nudge_xy") return CouplingVariant::nudge_xy;
  throw ValidationError(
      "unknown variant '" + s +
      "' (expected observe_x|observe_y|observe_z|observe_xy|nudge_xy)");
}

ResolutionPolicy parse_resolution(const std::string& s) {
  if (s == "error") return ResolutionPolicy::enforce;
  if (s == "warn") return ResolutionPolicy::warn;
  if (s == "off") return ResolutionPolicy::off;
  throw ValidationError("unknown resolution_check value '" + s +
                        "' (expected error|warn|off)");
}

std::string format_time_suffix(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", t);
  return buf;
}

}  // namespace

// --- ExperimentConfig -------------------------------------------------------

bool ExperimentConfig::has(const std::string& key) const {
  return values.count(key) > 0;
}

const std::string& ExperimentConfig::get(const std::string& key) const {
  const auto it = values.find(key);
  if (it == values.end())
    throw ValidationError("missing required config key '" + key + "'");
  return it->second;
}

std::string ExperimentConfig::get_or(const std::string& key,
                                     const std::string& fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

double ExperimentConfig::get_double(const std::string& key) const {
  return parse_double(get(key), "key " + key);
}

double ExperimentConfig::get_double_or(const std::string& key,
                                       double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

int ExperimentConfig::get_int(const std::string& key) const {
  return parse_int(get(key), "key " + key);
}

int ExperimentConfig::get_int_or(const std::string& key, int fallback) const {
  return has(key) ? get_int(key) : fallback;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  values[key] = value;
}

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& name) {
  ExperimentConfig cfg;
  cfg.name = name;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(lineno) +
                            " is not 'key = value': '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ValidationError("empty key on config line " +
                            std::to_string(lineno));
    cfg.values[key] = value;
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  std::string name = fs::path(path).stem().string();
  return parse_config_text(ss.str(), name);
}

std::string config_to_text(const ExperimentConfig& cfg) {
  std::string out = "# experiment " + cfg.name + "\n";
  for (const auto& [k, v] : cfg.values) out += k + " = " + v + "\n";
  return out;
}

// --- Catalog ----------------------------------------------------------------

namespace {

ExperimentConfig make_entry(const std::string& name,
                            std::map<std::string, std::string> kv) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.values = std::move(kv);
  return cfg;
}

const std::vector<ExperimentConfig>& catalog() {
  static const std::vector<ExperimentConfig> entries = [] {
    std::vector<ExperimentConfig> v;
    // Feedback nudging on the fully dissipative system.
    v.push_back(make_entry("fig1", {{"system", "lorenz"},
                                    {"sigma", "10"},
                                    {"r", "28"},
                                    {"b", "2.6666666666666665"},
                                    {"mu", "10"},
                                    {"variant", "nudge_xy"},
                                    {"dt", "0.0001"},
                                    {"T", "20"},
                                    {"ref_init", "30,40,50"},
                                    {"assim_init", "20,30,40"},
                                    {"output_stride", "100"}}));
    // Same setup with the third-component dissipation removed.
    v.push_back(make_entry("fig2", {{"system", "lorenz"},
                                    {"sigma", "10"},
                                    {"r", "28"},
                                    {"b", "0"},
                                    {"mu", "10"},
                                    {"variant", "nudge_xy"},
                                    {"dt", "0.0001"},
                                    {"T", "20"},
                                    {"ref_init", "30,40,50"},
                                    {"assim_init", "20,30,40"},
                                    {"output_stride", "100"}}));
    // Sensitivity of the error plateau to the initial offset in z.
    v.push_back(make_entry(
        "fig3",
        {{"system", "lorenz"},
         {"sigma", "10"},
         {"r", "28"},
         {"b", "0"},
         {"mu", "10"},
         {"variant", "nudge_xy"},
         {"dt", "0.0001"},
         {"T", "20"},
         {"ref_init", "20,30,50"},
         {"z_perturbations",
          "1e-1,1e-2,1e-3,1e-4,1e-5,1e-6,1e-7,1e-8,1e-9,1e-10,1e-11,1e-12"},
         {"output_stride", "100"}}));
    // Reference on the k0 = 6 lattice, observation band below it.
    v.push_back(make_entry("fig4", {{"system", "kdv"},
                                    {"delta", "0.075"},
                                    {"mu", "100"},
                                    {"M", "5"},
                                    {"N", "256"},
                                    {"dt", "6.103515625e-05"},
                                    {"T", "10"},
                                    {"ref_init", "single_mode(1,6)"},
                                    {"assim_init", "zero"},
                                    {"output_stride", "100"},
                                    {"snapshot_times", "10"},
                                    {"resolution_check", "error"}}));
    // Roles swapped: the nudged system carries the oscillations.
    v.push_back(make_entry("fig5", {{"system", "kdv"},
                                    {"delta", "0.075"},
                                    {"mu", "100"},
                                    {"M", "5"},
                                    {"N", "256"},
                                    {"dt", "6.103515625e-05"},
                                    {"T", "10"},
                                    {"ref_init", "zero"},
                                    {"assim_init", "single_mode(1,6)"},
                                    {"output_stride", "100"},
                                    {"snapshot_times", "10"},
                                    {"resolution_check", "error"}}));
    // Shifted-profile construction: spike at wavemode 100, 50 observed.
    v.push_back(make_entry(
        "fig6", {{"system", "kdv"},
                 {"delta", "0.075"},
                 {"mu", "100"},
                 {"M", "50"},
                 {"N", "1024"},
                 {"dt", "3.814697265625e-06"},
                 {"T", "10"},
                 {"ref_init", "shifted_profile(single_mode(1,1),50,0)"},
                 {"assim_init", "zero"},
                 {"output_stride", "500"},
                 {"snapshot_times", "10"},
                 {"resolution_check", "error"}}));
    // Long-horizon spike run; hours-scale, gated behind --include-long.
    v.push_back(make_entry("fig7", {{"system", "kdv"},
                                    {"delta", "1"},
                                    {"mu", "100"},
                                    {"M", "10"},
                                    {"N", "128"},
                                    {"dt", "7.62939453125e-06"},
                                    {"T", "1000"},
                                    {"ref_init", "cosine_sum(1,1,0.001,12)"},
                                    {"assim_init", "zero"},
                                    {"output_stride", "10000"},
                                    {"snapshot_times", "1000"},
                                    {"resolution_check", "warn"}}));
    v.push_back(make_entry("fig7_short",
                           {{"system", "kdv"},
                            {"delta", "1"},
                            {"mu", "100"},
                            {"M", "10"},
                            {"N", "128"},
                            {"dt", "7.62939453125e-06"},
                            {"T", "100"},
                            {"ref_init", "cosine_sum(1,1,0.001,12)"},
                            {"assim_init", "zero"},
                            {"output_stride", "1000"},
                            {"snapshot_times", "100"},
                            {"resolution_check", "error"}}));
    v.push_back(make_entry("fig8", {{"system", "kdv"},
                                    {"delta", "1"},
                                    {"mu", "100"},
                                    {"M", "5"},
                                    {"N", "128"},
                                    {"dt", "7.62939453125e-06"},
                                    {"T", "1000"},
                                    {"ref_init", "single_mode(1,3)"},
                                    {"assim_init", "zero"},
                                    {"output_stride", "10000"},
                                    {"snapshot_times", "1000"},
                                    {"resolution_check", "warn"}}));
    v.push_back(make_entry("fig8_short", {{"system", "kdv"},
                                          {"delta", "1"},
                                          {"mu", "100"},
                                          {"M", "5"},
                                          {"N", "128"},
                                          {"dt", "7.62939453125e-06"},
                                          {"T", "100"},
                                          {"ref_init", "single_mode(1,3)"},
                                          {"assim_init", "zero"},
                                          {"output_stride", "1000"},
                                          {"snapshot_times", "100"},
                                          {"resolution_check", "error"}}));
    // Damped and driven variant: nudging succeeds, rate set by gamma.
    v.push_back(make_entry("fig9", {{"system", "kdv_damped"},
                                    {"delta", "1"},
                                    {"gamma", "0.1"},
                                    {"mu", "100"},
                                    {"M", "10"},
                                    {"N", "256"},
                                    {"dt", "6.103515625e-05"},
                                    {"T", "100"},
                                    {"forcing", "single_mode(1,8)"},
                                    {"ref_init", "single_mode(1,12)"},
                                    {"assim_init", "zero"},
                                    {"output_stride", "100"},
                                    {"snapshot_times", "10,100"},
                                    {"resolution_check", "error"}}));
    // Steady cellular reference; twin initialized identically.
    v.push_back(make_entry("fig10", {{"system", "euler2d"},
                                     {"N", "256"},
                                     {"dt", "0.001"},
                                     {"mu", "100"},
                                     {"M", "22"},
                                     {"T", "1"},
                                     {"tg_k", "15"},
                                     {"tg_c", "0.0001"},
                                     {"assim_init", "taylor_green(15,0.0001)"},
                                     {"output_stride", "10"},
                                     {"resolution_check", "error"}}));
    // Annulus radius 21 misses the active modes at |(15,15)|.
    v.push_back(make_entry("fig11", {{"system", "euler2d"},
                                     {"N", "256"},
                                     {"dt", "0.001"},
                                     {"mu", "100"},
                                     {"M", "21"},
                                     {"T", "1"},
                                     {"tg_k", "15"},
                                     {"tg_c", "0.0001"},
                                     {"assim_init", "zero"},
                                     {"output_stride", "10"},
                                     {"snapshot_times", "1"},
                                     {"resolution_check", "error"}}));
    // Radius 22 covers them and the error contracts every step.
    v.push_back(make_entry("fig12", {{"system", "euler2d"},
                                     {"N", "256"},
                                     {"dt", "0.001"},
                                     {"mu", "100"},
                                     {"M", "22"},
                                     {"T", "1"},
                                     {"tg_k", "15"},
                                     {"tg_c", "0.0001"},
                                     {"assim_init", "zero"},
                                     {"output_stride", "10"},
                                     {"snapshot_times", "1"},
                                     {"resolution_check", "error"}}));
    return v;
  }();
  return entries;
}

}  // namespace

std::vector<std::string> catalog_names() {
  std::vector<std::string> names;
  for (const auto& e : catalog()) names.push_back(e.name);
  return names;
}

ExperimentConfig catalog_entry(const std::string& name) {
  for (const auto& e : catalog())
    if (e.name == name) return e;
  std::string valid;
  for (const auto& n : catalog_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ValidationError("unknown catalog entry '" + name +
                        "'; valid names: " + valid);
}

bool catalog_entry_is_long(const std::string& name) {
  return name == "fig7" || name == "fig8";
}

// --- Validation ---------------------------------------------------------------

namespace {

const std::map<std::string, std::vector<std::string>>& allowed_keys() {
  static const std::map<std::string, std::vector<std::string>> keys = {
      {"lorenz",
       {"system", "sigma", "r", "b", "mu", "variant", "dt", "T", "ref_init",
        "assim_init", "z_perturbations", "output_stride", "seed"}},
      {"kdv",
       {"system", "delta", "gamma", "mu", "M", "N", "dt", "T", "ref_init",
        "assim_init", "output_stride", "snapshot_times", "resolution_check",
        "seed"}},
      {"kdv_damped",
       {"system", "delta", "gamma", "mu", "M", "N", "dt", "T", "forcing",
        "ref_init", "assim_init", "output_stride", "snapshot_times",
        "resolution_check", "seed"}},
      {"euler2d",
       {"system", "N", "dt", "mu", "M", "T", "tg_k", "tg_c", "assim_init",
        "output_stride", "snapshot_times", "spectrum_full", "resolution_check",
        "seed"}},
  };
  return keys;
}

KdvParams kdv_params_from(const ExperimentConfig& cfg) {
  KdvParams p;
  p.delta = cfg.get_double("delta");
  p.gamma = cfg.get_double_or("gamma", 0.0);
  p.mu = cfg.get_double("mu");
  p.observed_modes = cfg.get_int("M");
  p.grid_size = cfg.get_int("N");
  p.dt = cfg.get_double("dt");
  return p;
}

EulerParams euler_params_from(const ExperimentConfig& cfg) {
  EulerParams p;
  p.grid_size = cfg.get_int("N");
  p.dt = cfg.get_double("dt");
  p.mu = cfg.get_double("mu");
  p.observed_modes = cfg.get_int("M");
  return p;
}

LorenzParams lorenz_params_from(const ExperimentConfig& cfg) {
  LorenzParams p;
  p.sigma = cfg.get_double("sigma");
  p.r = cfg.get_double("r");
  p.b = cfg.get_double("b");
  p.mu = cfg.get_double("mu");
  return p;
}

}  // namespace

void validate_config(const ExperimentConfig& cfg) {
  const std::string system = cfg.get("system");
  const auto it = allowed_keys().find(system);
  if (it == allowed_keys().end())
    throw ValidationError("unknown system '" + system +
                          "' (expected lorenz|kdv|kdv_damped|euler2d)");
  for (const auto& [key, value] : cfg.values) {
    if (std::find(it->second.begin(), it->second.end(), key) ==
        it->second.end())
      throw ValidationError("unknown config key '" + key + "' for system " +
                            system);
  }
  const double T = cfg.get_double("T");
  if (T <= 0.0) throw ValidationError("key T must be positive");

  if (system == "lorenz") {
    lorenz_params_from(cfg).validate();
    const double dt = cfg.get_double("dt");
    if (dt <= 0.0) throw ValidationError("key dt must be positive");
    if (cfg.get("variant") == "nudge_xy" && cfg.get_double("mu") * dt >= 2.0)
      throw ValidationError(
          "CFL constraint violated: explicit nudging requires mu < 2/dt "
          "(mu ≲ 2/Δt)");
    parse_variant(cfg.get("variant"));
    parse_triple(cfg.get("ref_init"), "ref_init");
    if (cfg.has("z_perturbations")) {
      const auto deltas =
          parse_double_list(cfg.get("z_perturbations"), "z_perturbations");
      if (deltas.empty())
        throw ValidationError("key z_perturbations must list at least one value");
    } else {
      parse_triple(cfg.get("assim_init"), "assim_init");
    }
  } else if (system == "kdv" || system == "kdv_damped") {
    const KdvParams p = kdv_params_from(cfg);
    p.validate();
    if (system == "kdv" && p.gamma != 0.0)
      throw ValidationError("system kdv has gamma = 0; use kdv_damped");
    if (system == "kdv_damped" && p.gamma <= 0.0)
      throw ValidationError("system kdv_damped requires gamma > 0");
    build_field_1d(cfg.get("ref_init"), p.grid_size, p.period, "ref_init");
    build_field_1d(cfg.get("assim_init"), p.grid_size, p.period, "assim_init");
    if (cfg.has("forcing"))
      build_field_1d(cfg.get("forcing"), p.grid_size, p.period, "forcing");
    if (cfg.has("snapshot_times"))
      parse_double_list(cfg.get("snapshot_times"), "snapshot_times");
    if (cfg.has("resolution_check")) parse_resolution(cfg.get("resolution_check"));
  } else {  // euler2d
    const EulerParams p = euler_params_from(cfg);
    p.validate();
    taylor_green({cfg.get_int("tg_k"), cfg.get_double("tg_c")}, p.grid_size);
    build_field_2d(cfg.get("assim_init"), p.grid_size, "assim_init");
    if (cfg.has("snapshot_times"))
      parse_double_list(cfg.get("snapshot_times"), "snapshot_times");
    if (cfg.has("resolution_check")) parse_resolution(cfg.get("resolution_check"));
  }
}

// --- Run artifacts and assertions --------------------------------------------

namespace {

struct SpectrumTable {
  double time = 0.0;
  std::vector<double> index;  // k (1D) or shell (2D)
  std::vector<double> au, av;
};

struct RunArtifacts {
  ExperimentConfig cfg;
  ErrorSeries series;
  std::vector<double> sweep_deltas;
  std::vector<ErrorSeries> sweep;
  std::map<std::string, double> scalars;
  std::vector<SpectrumTable> spectra;
};

double mean_tail(const std::vector<double>& v, double fraction) {
  if (v.empty()) return 0.0;
  const std::size_t count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * v.size())));
  double sum = 0.0;
  for (std::size_t i = v.size() - count; i < v.size(); ++i) sum += v[i];
  return sum / count;
}

double mean_head(const std::vector<double>& v, double fraction) {
  if (v.empty()) return 0.0;
  const std::size_t count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * v.size())));
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) sum += v[i];
  return sum / count;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

class AssertionSink {
 public:
  explicit AssertionSink(std::vector<AssertionResult>& out) : out_(out) {}
  void add(const std::string& name, bool passed, const std::string& detail) {
    out_.push_back({name, passed, detail});
  }

 private:
  std::vector<AssertionResult>& out_;
};

void generic_series_assertions(const RunArtifacts& a, AssertionSink& sink) {
  bool increasing = true;
  for (std::size_t i = 1; i < a.series.times.size(); ++i)
    if (a.series.times[i] <= a.series.times[i - 1]) increasing = false;
  sink.add("times_strictly_increasing", increasing,
           std::to_string(a.series.samples()) + " samples");

  const std::string system = a.cfg.get("system");
  if (system == "kdv" || system == "kdv_damped" || system == "euler2d") {
    const double defect = parseval_defect(a.series);
    sink.add("parseval_split", defect <= 1e-10,
             "worst relative defect " + fmt(defect));
    const BoundReport bound = lower_bound_check(a.series);
    sink.add("reverse_triangle_lower_bound", bound.ok,
             "worst margin " + fmt(bound.worst_margin));
  }
  if (system == "euler2d") {
    const double du = a.scalars.at("max_div_ratio_u");
    const double dv = a.scalars.at("max_div_ratio_v");
    sink.add("divergence_free_u", du < 1e-12, "max |k.uhat|/||u|| = " + fmt(du));
    sink.add("divergence_free_v", dv < 1e-12, "max |k.vhat|/||v|| = " + fmt(dv));
  }
}

void entry_assertions(const RunArtifacts& a, AssertionSink& sink) {
  const std::string& name = a.cfg.name;
  const auto final_of = [&](const std::string& ch) {
    return a.series.channel(ch).back();
  };

  if (name == "fig1") {
    for (const std::string ch : {"err_x", "err_y", "err_z"}) {
      const double v = final_of(ch);
      sink.add("fig1_final_" + ch, v <= 1e-9, ch + " = " + fmt(v));
    }
  } else if (name == "fig2") {
    for (const std::string ch : {"err_x", "err_y"}) {
      const double v = final_of(ch);
      sink.add("fig2_final_" + ch, v <= 1e-9, ch + " = " + fmt(v));
    }
    const double plateau = mean_tail(a.series.channel("err_z"), 0.1);
    sink.add("fig2_z_plateau", plateau >= 3.0 && plateau <= 30.0,
             "mean err_z over final 10% = " + fmt(plateau));
  } else if (name == "fig3") {
    for (std::size_t i = 0; i < a.sweep.size(); ++i) {
      const double delta = a.sweep_deltas[i];
      const double plateau = mean_tail(a.sweep[i].channel("err_l2"), 0.1);
      const bool ok = plateau >= delta / 10.0 && plateau <= delta * 10.0;
      sink.add("fig3_plateau_delta_" + fmt(delta), ok,
               "late-time l2 error " + fmt(plateau) + " vs delta " + fmt(delta));
    }
  } else if (name == "fig4" || name == "fig5") {
    const bool zero_side_is_assim = name == "fig4";
    const double zero_flag =
        a.scalars.at(zero_side_is_assim ? "assim_bitwise_zero" : "ref_bitwise_zero");
    sink.add(name + (zero_side_is_assim ? "_assim_bitwise_zero"
                                        : "_ref_bitwise_zero"),
             zero_flag == 1.0,
             zero_side_is_assim
                 ? "nudged-from-zero state bitwise zero: " + fmt(zero_flag)
                 : "zero reference stayed bitwise zero: " + fmt(zero_flag));
    // With one side null the total error must equal the live side's norm.
    const auto& total = a.series.channel("err_total");
    const auto& live =
        a.series.channel(zero_side_is_assim ? "norm_u" : "norm_v");
    double worst = 0.0;
    for (std::size_t i = 0; i < total.size(); ++i)
      worst = std::max(worst, std::abs(total[i] - live[i]) / live[i]);
    sink.add(name + "_error_equals_live_norm", worst <= 1e-13,
             "max relative gap " + fmt(worst));
    double worst_low = 0.0;
    for (double v : a.series.channel("err_low"))
      worst_low = std::max(worst_low, v);
    sink.add(name + "_low_mode_error_null", worst_low < 1e-12,
             "max err_low " + fmt(worst_low));
    if (!zero_side_is_assim) {
      const auto& nv = a.series.channel("norm_v");
      double drift = 0.0;
      for (double v : nv) drift = std::max(drift, std::abs(v - nv[0]) / nv[0]);
      sink.add("fig5_l2_conservation", drift < 1e-8,
               "max relative drift " + fmt(drift));
    }
  } else if (name == "fig6") {
    const double spike = a.scalars.at("spike_l2");
    const double final_total = final_of("err_total");
    sink.add("fig6_error_floor", final_total >= 0.5 * spike,
             "final err_total " + fmt(final_total) + " vs 0.5*spike " +
                 fmt(0.5 * spike));
    const auto& low = a.series.channel("err_low");
    sink.add("fig6_low_mode_drop", low.back() < 0.2 * low.front(),
             "err_low " + fmt(low.front()) + " -> " + fmt(low.back()));
    bool gap_ok = true;
    double gap_worst = 0.0;
    for (const auto& spec : a.spectra) {
      for (std::size_t i = 0; i < spec.index.size(); ++i) {
        if (spec.index[i] >= 90 && spec.index[i] <= 110) {
          gap_worst = std::max(gap_worst, spec.av[i]);
          if (spec.av[i] > 1e-14) gap_ok = false;
        }
      }
    }
    sink.add("fig6_no_nudged_energy_at_spike", gap_ok && !a.spectra.empty(),
             "max |vhat| on k in [90,110] = " + fmt(gap_worst));
  } else if (name == "fig7" || name == "fig7_short") {
    const double spike = a.scalars.at("spike_l2");
    double min_high = std::numeric_limits<double>::infinity();
    for (double v : a.series.channel("err_high")) min_high = std::min(min_high, v);
    sink.add(name + "_high_mode_floor", min_high >= 0.5 * spike,
             "min err_high " + fmt(min_high) + " vs 0.5*spike " +
                 fmt(0.5 * spike));
  } else if (name == "fig8" || name == "fig8_short") {
    const auto& total = a.series.channel("err_total");
    const double head = mean_head(total, 0.1);
    const double tail = mean_tail(total, 0.1);
    sink.add(name + "_error_trend_decreasing", tail < head,
             "mean err_total first 10% " + fmt(head) + " -> final 10% " +
                 fmt(tail));
  } else if (name == "fig9") {
    const DecayFit fit = fit_decay_rate(a.series, "err_high", 500);
    sink.add("fig9_high_mode_decay_rate",
             fit.rate >= -0.13 && fit.rate <= -0.07,
             "fitted rate " + fmt(fit.rate) + " (residual " + fmt(fit.residual) +
                 ")");
  } else if (name == "fig10") {
    const double drift = a.scalars.at("steady_drift");
    sink.add("fig10_steady_state", drift < 1e-12,
             "relative change of reference over [0,T] = " + fmt(drift));
    const auto& total = a.series.channel("err_total");
    const auto& nu = a.series.channel("norm_u");
    double worst = 0.0;
    for (std::size_t i = 0; i < total.size(); ++i)
      worst = std::max(worst, total[i] / nu[i]);
    sink.add("fig10_twin_identity", worst <= 1e-12,
             "max err_total/||u|| = " + fmt(worst));
  } else if (name == "fig11") {
    sink.add("fig11_assim_exactly_zero",
             a.scalars.at("assim_bitwise_zero") == 1.0,
             "nudged-from-zero state bitwise zero: " +
                 fmt(a.scalars.at("assim_bitwise_zero")));
    const auto& total = a.series.channel("err_total");
    double worst = 0.0;
    for (double v : total)
      worst = std::max(worst, std::abs(v - total.front()) / total.front());
    sink.add("fig11_error_constant", worst <= 1e-10,
             "max relative deviation from err(0): " + fmt(worst));
  } else if (name == "fig12") {
    const auto& total = a.series.channel("err_total");
    const double floor = 1e-13 * total.front();
    bool ok = true;
    std::size_t bad = 0;
    for (std::size_t i = 0; i + 1 < total.size(); ++i) {
      const bool fine = total[i] > floor ? total[i + 1] < total[i]
                                         : total[i + 1] <= floor;
      if (!fine && ok) {
        ok = false;
        bad = i + 1;
      }
    }
    sink.add("fig12_error_strictly_decreasing", ok,
             ok ? "monotone to the roundoff floor " + fmt(floor)
                : "first violation at sample " + std::to_string(bad));
  }
}

std::vector<AssertionResult> evaluate_assertions(const RunArtifacts& a) {
  std::vector<AssertionResult> results;
  AssertionSink sink(results);
  if (!a.sweep.empty()) {
    bool increasing = true;
    for (const auto& s : a.sweep)
      for (std::size_t i = 1; i < s.times.size(); ++i)
        if (s.times[i] <= s.times[i - 1]) increasing = false;
    sink.add("times_strictly_increasing", increasing,
             std::to_string(a.sweep.size()) + " sweep series");
  } else {
    generic_series_assertions(a, sink);
  }
  entry_assertions(a, sink);
  return results;
}

}  // namespace

// --- Run --------------------------------------------------------------------

namespace {

const std::vector<std::string> kLorenzColumns = {"err_x", "err_y", "err_z",
                                                 "err_l2"};
const std::vector<std::string> kPdeColumns = {"err_low", "err_high",
                                              "err_total"};
const std::vector<std::string> kNormColumns = {"norm_u", "norm_v"};

std::string sanitize_token(std::string s) {
  for (char& c : s)
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  return s;
}

// Norm of the single-cosine part at the given wavemode, in the
// continuous-integral convention.
double mode_l2(const SpectralField1D& f, int mode) {
  return std::sqrt(2.0 * f.period()) * std::abs(f.coeff(mode));
}

struct RunOutputs {
  // csv name -> written
  std::vector<std::string> csv_paths;
  std::map<std::string, double> scalars;
  std::vector<FitRecord> fits;
  json csv_index;
};

void try_fit(const ErrorSeries& series, const std::string& channel,
             std::vector<FitRecord>& fits) {
  try {
    const DecayFit fit = fit_decay_rate(series, channel, 500);
    fits.push_back({channel, fit.rate, fit.residual,
                    series.times[fit.window_begin],
                    series.times[fit.window_end - 1]});
  } catch (const UndefinedFitError&) {
    // Channel sits at the floor or is empty; nothing to record.
  }
}

RunOutputs run_lorenz(const ExperimentConfig& cfg, const fs::path& dir) {
  RunOutputs out;
  const LorenzParams p = lorenz_params_from(cfg);
  const double dt = cfg.get_double("dt");
  const double T = cfg.get_double("T");
  const CouplingVariant variant = parse_variant(cfg.get("variant"));
  const LorenzState ref = parse_triple(cfg.get("ref_init"), "ref_init");
  LorenzRunOptions options;
  options.output_stride = cfg.get_int_or("output_stride", 100);

  out.csv_index["sweep"] = json::array();
  if (cfg.has("z_perturbations")) {
    const auto tokens = split_top_level(cfg.get("z_perturbations"));
    for (const auto& tok : tokens) {
      const double delta = parse_double(tok, "z_perturbations");
      LorenzState assim = ref;
      assim.z += delta;
      const ErrorSeries series =
          run_twin(ref, assim, variant, p, dt, T, options);
      const std::string file = "errors_delta_" + sanitize_token(tok) + ".csv";
      write_series_csv((dir / file).string(), series, kLorenzColumns);
      out.csv_paths.push_back(file);
      out.csv_index["sweep"].push_back({{"delta", delta}, {"path", file}});
    }
  } else {
    const LorenzState assim = parse_triple(cfg.get("assim_init"), "assim_init");
    const ErrorSeries series = run_twin(ref, assim, variant, p, dt, T, options);
    write_series_csv((dir / "errors.csv").string(), series, kLorenzColumns);
    out.csv_paths.push_back("errors.csv");
    out.csv_index["errors"] = "errors.csv";
    try_fit(series, "err_l2", out.fits);
    try_fit(series, "err_z", out.fits);
  }
  return out;
}

RunOutputs run_kdv(const ExperimentConfig& cfg, const fs::path& dir) {
  RunOutputs out;
  const KdvParams p = kdv_params_from(cfg);
  const double T = cfg.get_double("T");
  const SpectralField1D ref =
      build_field_1d(cfg.get("ref_init"), p.grid_size, p.period, "ref_init");
  const SpectralField1D assim =
      build_field_1d(cfg.get("assim_init"), p.grid_size, p.period, "assim_init");
  std::optional<SpectralField1D> forcing;
  if (cfg.has("forcing"))
    forcing =
        build_field_1d(cfg.get("forcing"), p.grid_size, p.period, "forcing");

  KdvRunOptions options;
  options.output_stride = cfg.get_int_or("output_stride", 100);
  options.resolution = parse_resolution(cfg.get_or("resolution_check", "warn"));
  if (cfg.has("snapshot_times"))
    options.snapshot_times =
        parse_double_list(cfg.get("snapshot_times"), "snapshot_times");

  // The non-base cosine of a constructed profile, for floor assertions.
  const SpecNode ref_spec = parse_spec(cfg.get("ref_init"), "ref_init");
  if (ref_spec.head == "shifted_profile") {
    const int m = parse_int(ref_spec.args[1], "ref_init");
    const int off = parse_int(ref_spec.args[2], "ref_init");
    out.scalars["spike_l2"] = mode_l2(ref, 2 * m + off);
  } else if (ref_spec.head == "cosine_sum" && ref_spec.args.size() >= 4) {
    const int k_last =
        parse_int(ref_spec.args[ref_spec.args.size() - 1], "ref_init");
    out.scalars["spike_l2"] = mode_l2(ref, k_last);
  }

  // The reference side is the unnudged one; track whether a zero
  // reference stays exactly zero (the nudged side is tracked in-run).
  const bool ref_started_zero = l2_norm(ref) == 0.0;

  KdvRunResult result = run_twin_kdv(ref, assim, p, forcing, T, options);

  write_series_csv((dir / "errors.csv").string(), result.series, kPdeColumns);
  write_series_csv((dir / "norms.csv").string(), result.series, kNormColumns);
  out.csv_paths.push_back("errors.csv");
  out.csv_paths.push_back("norms.csv");
  out.csv_index["errors"] = "errors.csv";
  out.csv_index["norms"] = "norms.csv";
  out.csv_index["spectra"] = json::array();
  for (const auto& snap : result.snapshots) {
    const std::string file =
        "spectrum_t" + sanitize_token(format_time_suffix(snap.time)) + ".csv";
    write_spectrum_csv((dir / file).string(), snap.u, snap.v);
    out.csv_paths.push_back(file);
    out.csv_index["spectra"].push_back({{"t", snap.time}, {"path", file}});
  }

  out.scalars["assim_bitwise_zero"] = result.assim_bitwise_zero ? 1.0 : 0.0;
  out.scalars["ref_bitwise_zero"] =
      (ref_started_zero && l2_norm(result.final_u) == 0.0) ? 1.0 : 0.0;
  out.scalars["resolution_tail"] = result.resolution_tail;
  out.scalars["observation_cutoff"] = p.observed_modes;
  out.scalars["dealias_cutoff"] = dealias_cutoff(p.grid_size);
  try_fit(result.series, "err_high", out.fits);
  try_fit(result.series, "err_total", out.fits);
  return out;
}

RunOutputs run_euler(const ExperimentConfig& cfg, const fs::path& dir) {
  RunOutputs out;
  const EulerParams p = euler_params_from(cfg);
  const double T = cfg.get_double("T");
  const TaylorGreenSpec tg{cfg.get_int("tg_k"), cfg.get_double("tg_c")};
  const SpectralVectorField2D ref = taylor_green(tg, p.grid_size);
  const SpectralVectorField2D assim =
      build_field_2d(cfg.get("assim_init"), p.grid_size, "assim_init");

  EulerRunOptions options;
  options.output_stride = cfg.get_int_or("output_stride", 10);
  options.resolution = parse_resolution(cfg.get_or("resolution_check", "warn"));
  if (cfg.has("snapshot_times"))
    options.snapshot_times =
        parse_double_list(cfg.get("snapshot_times"), "snapshot_times");

  EulerRunResult result = run_twin_euler(ref, assim, p, T, options);

  write_series_csv((dir / "errors.csv").string(), result.series, kPdeColumns);
  write_series_csv((dir / "norms.csv").string(), result.series, kNormColumns);
  out.csv_paths.push_back("errors.csv");
  out.csv_paths.push_back("norms.csv");
  out.csv_index["errors"] = "errors.csv";
  out.csv_index["norms"] = "norms.csv";
  out.csv_index["spectra"] = json::array();
  const bool full_dump = cfg.get_or("spectrum_full", "false") == "true";
  for (const auto& snap : result.snapshots) {
    const std::string suffix = sanitize_token(format_time_suffix(snap.time));
    const std::string file = "spectrum_t" + suffix + ".csv";
    write_spectrum_csv((dir / file).string(), snap.u, snap.v);
    out.csv_paths.push_back(file);
    out.csv_index["spectra"].push_back({{"t", snap.time}, {"path", file}});
    if (full_dump) {
      const std::string full = "spectrum_full_t" + suffix + ".csv";
      write_spectrum_full_csv((dir / full).string(), snap.u, snap.v);
      out.csv_paths.push_back(full);
    }
  }

  // Relative change of the reference over the run (steady-state check).
  SpectralVectorField2D diff = result.final_u;
  for (int comp = 0; comp < 2; ++comp) {
    auto d = diff.data(comp);
    auto r = ref.data(comp);
    for (size_t i = 0; i < d.size(); ++i) d[i] -= r[i];
  }
  out.scalars["steady_drift"] = l2_norm(diff) / l2_norm(ref);
  out.scalars["assim_bitwise_zero"] = result.assim_bitwise_zero ? 1.0 : 0.0;
  out.scalars["max_div_ratio_u"] = result.max_div_ratio_u;
  out.scalars["max_div_ratio_v"] = result.max_div_ratio_v;
  out.scalars["resolution_tail"] = result.resolution_tail;
  out.scalars["observation_cutoff"] = p.observed_modes;
  out.scalars["dealias_cutoff"] = dealias_cutoff(p.grid_size);
  try_fit(result.series, "err_high", out.fits);
  try_fit(result.series, "err_total", out.fits);
  return out;
}

SpectrumTable load_spectrum_csv(const std::string& path, double time) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);  // header
  SpectrumTable table;
  table.time = time;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() < 3) throw Error("short row in '" + path + "'");
    table.index.push_back(row[0]);
    table.au.push_back(row[1]);
    table.av.push_back(row[2]);
  }
  return table;
}

RunArtifacts load_artifacts(const fs::path& dir) {
  std::ifstream in(dir / "record.json");
  if (!in)
    throw Error("'" + (dir / "record.json").string() +
                "' not found; not a completed run directory");
  json record = json::parse(in);

  RunArtifacts a;
  a.cfg.name = record.at("name").get<std::string>();
  for (const auto& [k, v] : record.at("config").items())
    a.cfg.values[k] = v.get<std::string>();
  for (const auto& [k, v] : record.at("scalars").items())
    a.scalars[k] = v.get<double>();

  const json& csv = record.at("csv");
  if (csv.contains("errors")) {
    a.series =
        read_series_csv((dir / csv.at("errors").get<std::string>()).string());
    if (csv.contains("norms")) {
      const ErrorSeries norms =
          read_series_csv((dir / csv.at("norms").get<std::string>()).string());
      for (const auto& [name, values] : norms.channels)
        a.series.channel(name) = values;
    }
  }
  if (csv.contains("sweep")) {
    for (const auto& item : csv.at("sweep")) {
      a.sweep_deltas.push_back(item.at("delta").get<double>());
      a.sweep.push_back(
          read_series_csv((dir / item.at("path").get<std::string>()).string()));
    }
  }
  if (csv.contains("spectra")) {
    for (const auto& item : csv.at("spectra"))
      a.spectra.push_back(
          load_spectrum_csv((dir / item.at("path").get<std::string>()).string(),
                            item.at("t").get<double>()));
  }
  return a;
}

json record_to_json(const RunRecord& record, const json& csv_index) {
  json j;
  j["name"] = record.config.name;
  j["system"] = record.config.get("system");
  j["config"] = json::object();
  for (const auto& [k, v] : record.config.values) j["config"][k] = v;
  j["csv"] = csv_index;
  j["csv_paths"] = record.csv_paths;
  j["scalars"] = record.scalars;
  j["fits"] = json::array();
  for (const auto& fit : record.fits)
    j["fits"].push_back({{"channel", fit.channel},
                         {"rate", fit.rate},
                         {"residual", fit.residual},
                         {"window_t0", fit.window_t0},
                         {"window_t1", fit.window_t1}});
  j["assertions"] = json::array();
  for (const auto& r : record.assertions)
    j["assertions"].push_back(
        {{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
  j["wall_seconds"] = record.wall_seconds;
  return j;
}

}  // namespace

bool RunRecord::assertions_passed() const {
  for (const auto& r : assertions)
    if (!r.passed) return false;
  return true;
}

std::string default_output_root() {
  if (const char* env = std::getenv("NUDGELAB_OUT"); env && *env) return env;
  return "runs";
}

RunRecord run(const ExperimentConfig& cfg, const std::string& out_root) {
  validate_config(cfg);
  const auto started = std::chrono::steady_clock::now();

  const fs::path dir = fs::path(out_root) / cfg.name;
  // A directory holding a previous run of the same entry is replaced.
  if (fs::exists(dir / "record.json")) fs::remove_all(dir);
  fs::create_directories(dir);

  {
    std::ofstream echo(dir / "config.cfg");
    echo << config_to_text(cfg);
  }

  const std::string system = cfg.get("system");
  RunOutputs outputs;
  if (system == "lorenz") {
    outputs = run_lorenz(cfg, dir);
  } else if (system == "kdv" || system == "kdv_damped") {
    outputs = run_kdv(cfg, dir);
  } else {
    outputs = run_euler(cfg, dir);
  }

  RunRecord record;
  record.config = cfg;
  record.out_dir = dir.string();
  record.csv_paths = outputs.csv_paths;
  record.scalars = outputs.scalars;
  record.fits = outputs.fits;
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();

  // Persist first, then evaluate assertions from the persisted artifacts
  // so run-time and verify-time verdicts use the same data path.
  {
    std::ofstream out(dir / "record.json");
    out << record_to_json(record, outputs.csv_index).dump(2) << "\n";
  }
  for (const auto& rel : record.csv_paths) {
    const fs::path p = dir / rel;
    if (!fs::exists(p) || fs::file_size(p) == 0)
      throw Error("output file '" + p.string() + "' missing or empty");
  }
  record.assertions = evaluate_assertions(load_artifacts(dir));
  {
    std::ofstream out(dir / "record.json");
    out << record_to_json(record, outputs.csv_index).dump(2) << "\n";
  }
  return record;
}

bool VerifyReport::passed() const {
  for (const auto& r : assertions)
    if (!r.passed) return false;
  return true;
}

VerifyReport verify(const std::string& run_dir) {
  const RunArtifacts artifacts = load_artifacts(run_dir);
  VerifyReport report;
  report.name = artifacts.cfg.name;
  report.assertions = evaluate_assertions(artifacts);
  return report;
}

std::vector<RunManyStatus> run_many(const std::vector<std::string>& names,
                                    const std::string& out_root, int jobs) {
  std::vector<RunManyStatus> statuses(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) statuses[i].name = names[i];

  std::atomic<std::size_t> next{0};
  std::mutex io_mutex;
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= names.size()) return;
      try {
        const RunRecord record = run(catalog_entry(names[i]), out_root);
        statuses[i].ran = true;
        statuses[i].verified = record.assertions_passed();
      } catch (const std::exception& e) {
        statuses[i].error = e.what();
      }
      std::lock_guard<std::mutex> lock(io_mutex);
      std::printf("[%s] %s\n", names[i].c_str(),
                  !statuses[i].error.empty()
                      ? ("error: " + statuses[i].error).c_str()
                      : (statuses[i].verified ? "ok" : "assertions failed"));
      std::fflush(stdout);
    }
  };

  const int n_workers = std::max(1, std::min<int>(jobs, names.size()));
  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (int t = 0; t < n_workers; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  return statuses;
}

}  // namespace nudgelab
