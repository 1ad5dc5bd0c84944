// Command-line front end: run catalog entries or config files, list the
// catalog, run everything, and verify completed run directories.
//
// Exit codes: 0 success, 2 validation error, 3 divergence, 4 verification
// failure (resolution refusals count as validation).

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nudgelab/errors.hpp"
#include "nudgelab/harness.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitVerification = 4;

void print_assertions(const std::vector<nudgelab::AssertionResult>& results) {
  for (const auto& r : results)
    std::printf("  [%s] %s: %s\n", r.passed ? "pass" : "FAIL", r.name.c_str(),
                r.detail.c_str());
}

nudgelab::ExperimentConfig resolve_config(const std::string& target) {
  for (const auto& name : nudgelab::catalog_names())
    if (name == target) return nudgelab::catalog_entry(target);
  if (!std::filesystem::exists(target))
    throw nudgelab::ValidationError(
        "'" + target + "' is neither a catalog entry nor a config file");
  return nudgelab::load_config_file(target);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Twin-experiment harness for nudging data assimilation on the "
               "Lorenz, KdV and 2D Euler systems"};
  app.require_subcommand(1);

  std::string out_root = nudgelab::default_output_root();

  auto* cmd_run = app.add_subcommand(
      "run", "Run one experiment (catalog name or config file)");
  std::string run_target;
  std::vector<std::string> overrides;
  cmd_run->add_option("target", run_target, "Catalog entry or config path")
      ->required();
  cmd_run->add_option("--set", overrides, "Override a config key (key=value)");
  cmd_run->add_option("--out", out_root, "Output root directory");

  auto* cmd_catalog =
      app.add_subcommand("catalog", "List catalog entries or dump one");
  std::string catalog_target;
  cmd_catalog->add_option("name", catalog_target, "Entry to print");

  auto* cmd_run_all = app.add_subcommand("run-all", "Run catalog entries");
  int jobs = 1;
  bool include_long = false;
  cmd_run_all->add_option("--jobs", jobs, "Concurrent workers");
  cmd_run_all->add_flag("--include-long", include_long,
                        "Also run the long-horizon entries (fig7, fig8)");
  cmd_run_all->add_option("--out", out_root, "Output root directory");

  auto* cmd_verify =
      app.add_subcommand("verify", "Re-check a completed run directory");
  std::string verify_dir;
  cmd_verify->add_option("run_dir", verify_dir, "Run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_run) {
      nudgelab::ExperimentConfig cfg = resolve_config(run_target);
      for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
          throw nudgelab::ValidationError("--set expects key=value, got '" +
                                          kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
      }
      const nudgelab::RunRecord record = nudgelab::run(cfg, out_root);
      std::printf("run %s finished in %.2fs; outputs in %s\n",
                  record.config.name.c_str(), record.wall_seconds,
                  record.out_dir.c_str());
      print_assertions(record.assertions);
      return record.assertions_passed() ? 0 : kExitVerification;
    }
    if (*cmd_catalog) {
      if (catalog_target.empty()) {
        for (const auto& name : nudgelab::catalog_names())
          std::printf("%s%s\n", name.c_str(),
                      nudgelab::catalog_entry_is_long(name) ? "  (long)" : "");
      } else {
        std::fputs(
            nudgelab::config_to_text(nudgelab::catalog_entry(catalog_target))
                .c_str(),
            stdout);
      }
      return 0;
    }
    if (*cmd_run_all) {
      std::vector<std::string> names;
      for (const auto& name : nudgelab::catalog_names())
        if (include_long || !nudgelab::catalog_entry_is_long(name))
          names.push_back(name);
      const auto statuses = nudgelab::run_many(names, out_root, jobs);
      bool all_ok = true;
      for (const auto& s : statuses) {
        if (!s.error.empty()) {
          all_ok = false;
        } else if (!s.verified) {
          all_ok = false;
        }
      }
      return all_ok ? 0 : kExitVerification;
    }
    if (*cmd_verify) {
      const nudgelab::VerifyReport report = nudgelab::verify(verify_dir);
      std::printf("verify %s:\n", report.name.c_str());
      print_assertions(report.assertions);
      return report.passed() ? 0 : kExitVerification;
    }
  } catch (const nudgelab::DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return kExitDivergence;
  } catch (const nudgelab::ValidationError& e) {
    std::fprintf(stderr, "validation: %s\n", e.what());
    return kExitValidation;
  } catch (const nudgelab::ResolutionError& e) {
    std::fprintf(stderr, "resolution: %s\n", e.what());
    return kExitValidation;
  } catch (const nudgelab::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
