#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "orbitherm/drivers.hpp"
#include "orbitherm/errors.hpp"

using namespace orbitherm;

int main(int argc, char** argv) {
  CLI::App app{"orbitherm: ergodic optimization and zero-temperature limits for "
               "geodesic flows on Schottky surfaces"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", cache_root;
  int threads = 4;
  bool verbose = false;
  app.add_option("--config", config_path, "JSON experiment config")->required();
  app.add_option("--out", out_dir, "output directory (default: .)");
  app.add_option("--threads", threads, "worker threads (default: 4)")
      ->check(CLI::Range(1, 256));
  app.add_option("--cache", cache_root,
                 "cache root (default: $ORBITHERM_CACHE, else <out>/cache)");
  app.add_flag("--verbose", verbose, "progress notes on stderr");

  using Driver = ResultEnvelope (*)(const ExperimentConfig&, const DriverOptions&);
  const std::vector<std::pair<std::string, Driver>> drivers{
      {"check", run_check},
      {"exponents", run_exponents},
      {"pressure-curve", run_pressure_curve},
      {"zero-temp", run_zero_temp},
      {"intermediate", run_intermediate},
      {"nonergodic", run_nonergodic},
      {"divergence", run_divergence},
      {"no-maximizer", run_no_maximizer},
      {"density", run_density},
  };
  const std::vector<std::pair<std::string, std::string>> about{
      {"check", "validate the group and run geometry smoke tests"},
      {"exponents", "critical exponents: full group, cyclic, nested families"},
      {"pressure-curve", "pressure, entropy and region masses over t_grid"},
      {"zero-temp", "zero-temperature limit onto a target invariant set"},
      {"intermediate", "bisection for prescribed equilibrium entropies"},
      {"nonergodic", "flip-symmetric target: the 1/2-1/2 ground state split"},
      {"divergence", "inductive schedule with alternating region masses"},
      {"no-maximizer", "escaping-family averages, gap test, tilted beta curve"},
      {"density", "equilibrium averages against closed-orbit oracles"},
  };
  for (const auto& [name, blurb] : about) app.add_subcommand(name, blurb)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const ExperimentConfig cfg = parse_config(read_text_file(config_path));
    DriverOptions opt;
    opt.out_dir = out_dir;
    opt.cache_root = cache_root;
    opt.threads = threads;
    opt.verbose = verbose;
    for (const auto& [name, fn] : drivers)
      if (app.got_subcommand(name)) return fn(cfg, opt).ok() ? 0 : 2;
    return 1;  // unreachable: require_subcommand(1)
  } catch (const Error& e) {
    nlohmann::json err;
    err["error"] = {{"code", errc_name(e.code())}, {"message", e.what()}};
    std::cerr << err.dump(1, '\t') << "\n";
    return 1;
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"] = {{"code", "internal"}, {"message", e.what()}};
    std::cerr << err.dump(1, '\t') << "\n";
    return 1;
  }
}
