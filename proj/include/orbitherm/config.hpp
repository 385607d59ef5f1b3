#pragma once
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "orbitherm/potentials.hpp"
#include "orbitherm/schottky.hpp"

namespace orbitherm {

struct RegionConfig {
  std::string name;
  InvariantSetSpec set;
  double radius = 0.3;
  bool complement = false;
};

struct Knobs {
  double set_step = 0.05;
  double quad_step = 0.05;
  int neighbor_depth = 2;
  int grid_steps = 33;
  int shell_len = 12;
  int cluster_size = 16;
  long long word_cap = 100000000;
  std::string extrapolation = "richardson";
};

struct PressureChecksConfig {
  double convexity_tol = 1e-6;
  double fd_tol = 1e-3;
  double beta_floor_tol = 1e-6;
};

struct ExponentsConfig {
  bool present = false;
  struct CyclicEntry {
    std::string name;
    bool by_letter = true;
    int letter = 1;
    Isometry matrix;
    int n_max = 256;
  };
  std::vector<CyclicEntry> cyclic;
  bool has_nested = false;
  int nested_plus[2] = {1, 2};
  int nested_minus[2] = {3, 4};
  std::vector<int> nested_n_list;
  int core_depth = 3;
};

struct ZeroTempConfig {
  bool present = false;
  InvariantSetSpec target;
  double radius = 0.3;
  double eps_target = 0.05;
  double entropy_tol = 0.05;
  double t0_entropy_tol = 0.02;
};

struct IntermediateConfig {
  bool present = false;
  std::vector<double> target_fracs{0.25, 0.5, 0.75};
  double tol = 0.01;
  int max_evals = 30;
};

struct NonergodicConfig {
  bool present = false;
  Word target_word;
  double radius = 0.3;
  double t_max = 40.0;
  double mass_tol = 0.05;
  double combined_min = 0.95;
};

struct DivergenceStageConfig {
  PotentialSpec bump;       // the stage bump b_k (a Bump over Y_k)
  InvariantSetSpec region;  // U_k core; the mass region is its radius-r nbhd
  double eps = 0.1;
};
struct DivergenceConfig {
  bool present = false;
  std::vector<DivergenceStageConfig> stages;
  double delta1 = 1.0;
  double t_start = 1.0;
  double t_cap = 1e6;
  double delta_min = 1e-8;
  double radius = 0.3;
};

struct NoMaximizerConfig {
  bool present = false;
  int parabolic_letter = 1;
  Word tail_word;           // escaping family p^n w; required on extended groups
  std::vector<int> n_list;  // family depths; required on extended groups
  double margin = 0.05;
  std::vector<double> s_grid{0.0, 0.05, 0.1, 0.2, 0.35, 0.5};
  bool has_psi = false;
  PotentialSpec psi;
  std::string expect;  // "", "maximizer_expected", or "full_escape_expected"
};

struct DensityConfig {
  bool present = false;
  Word target_word;
  std::vector<std::pair<std::string, PotentialSpec>> tests;
  double deviation_max = 0.02;
};

struct ExperimentConfig {
  SchottkyGroup group;
  bool has_potential = false;
  PotentialSpec potential;
  std::vector<double> t_grid;
  int n_lo = 4, n_hi = 8;
  Knobs knobs;
  std::vector<RegionConfig> regions;
  bool has_h_inf = false;
  double h_inf_reference = 0.0;
  std::uint64_t seed = 1;
  PressureChecksConfig pressure_checks;
  ExponentsConfig exponents;
  ZeroTempConfig zero_temp;
  IntermediateConfig intermediate;
  NonergodicConfig nonergodic;
  DivergenceConfig divergence;
  NoMaximizerConfig no_maximizer;
  DensityConfig density;
  std::string config_hash;  // hex FNV-1a of the canonical JSON bytes
};

// Parses and validates a config document.  Violations are collected across
// the whole document and reported together, each prefixed with its JSON
// pointer path; unknown keys are rejected.
ExperimentConfig parse_config(const std::string& bytes);

}  // namespace orbitherm
