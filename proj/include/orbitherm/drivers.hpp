#pragma once
#include <string>

#include "orbitherm/config.hpp"
#include "orbitherm/io_util.hpp"

namespace orbitherm {

struct DriverOptions {
  std::string out_dir = ".";
  std::string cache_root;  // "" = $ORBITHERM_CACHE, else <out_dir>/cache
  int threads = 4;
  bool verbose = false;
};

// Each driver writes <name>.csv (plus auxiliary CSVs where noted) and
// <name>.json into out_dir and returns the envelope; the caller maps ok() to
// the process exit code (0 clean, 2 on failed verdicts).
ResultEnvelope run_check(const ExperimentConfig& cfg, const DriverOptions& opt);
ResultEnvelope run_exponents(const ExperimentConfig& cfg, const DriverOptions& opt);
ResultEnvelope run_pressure_curve(const ExperimentConfig& cfg, const DriverOptions& opt);
ResultEnvelope run_zero_temp(const ExperimentConfig& cfg, const DriverOptions& opt);
ResultEnvelope run_intermediate(const ExperimentConfig& cfg, const DriverOptions& opt);
ResultEnvelope run_nonergodic(const ExperimentConfig& cfg, const DriverOptions& opt);
ResultEnvelope run_divergence(const ExperimentConfig& cfg, const DriverOptions& opt);
ResultEnvelope run_no_maximizer(const ExperimentConfig& cfg, const DriverOptions& opt);
ResultEnvelope run_density(const ExperimentConfig& cfg, const DriverOptions& opt);

}  // namespace orbitherm
