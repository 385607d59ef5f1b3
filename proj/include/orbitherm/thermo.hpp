#pragma once
#include <string>
#include <utility>
#include <vector>

#include "orbitherm/orbit_table.hpp"

namespace orbitherm {

// A potential bound to table columns: the integral over a class works out to
// const_coef * ell + sum over terms of coef * cols[column].
struct TablePotential {
  double const_coef = 0.0;
  std::vector<std::pair<std::size_t, double>> terms;
};

TablePotential bind_potential(const OrbitTable& t, const CompiledPotential& phi);

// Per-class integrals of a bound potential, in table row order.
std::vector<double> class_integrals(const OrbitTable& t, const TablePotential& phi);

struct LevelRoot {
  int n = 0;
  double c = 0.0;     // growth-ratio Bowen root at depth n
  double mean = 0.0;  // dc/dt at the root by implicit differentiation
};

struct PressureResult {
  double t = 0.0;            // inverse-temperature parameter of t * phi
  double c_star = 0.0;       // extrapolated pressure
  double phi_mean = 0.0;     // matched equilibrium mean (= dc*/dt for richardson)
  double entropy_raw = 0.0;  // c_star - t * phi_mean, unclipped
  double entropy = 0.0;      // clipped below at 0
  bool entropy_clipped = false;
  double residual = 0.0;  // change against the previous level pair
  int n_lo = 0, n_hi = 0;
  std::vector<LevelRoot> levels;
};

// Pressure of t * phi from cumulative class sums: c_n is the root in c of
// sum over classes of length <= n of mult * exp(t*I_w - c*ell_w) = 1, and the
// deepest roots are extrapolated ("richardson" two-point, "aitken" three-point,
// or "top_level" for the raw deepest root).
PressureResult flow_pressure(const OrbitTable& t, const TablePotential& phi,
                             double tparam, int n_lo, int n_hi,
                             const std::string& extrapolation = "richardson");

struct RegionSpec {
  std::string name;
  std::size_t time_column = 0;  // a Time column of the table
  bool complement = false;      // report 1 - mass instead
};

struct GibbsStats {
  PressureResult pressure;
  std::vector<std::pair<std::string, double>> masses;
  double normalization = 1.0;  // Gibbs average of the constant 1
};

// Pressure plus empirical-measure region masses, pooled over the classes of
// length n_lo..n_hi with weights mult * exp(t*I - c_star*ell).  The window
// matches the one the pressure extrapolation consumes, so deepening both ends
// refines the same surrogate.
GibbsStats equilibrium_stats(const OrbitTable& t, const TablePotential& phi,
                             double tparam, int n_lo, int n_hi,
                             const std::vector<RegionSpec>& regions,
                             const std::string& extrapolation = "richardson");

// Pooled Gibbs average of psi over the same window:
// sum w * I_psi / sum w * ell at (tparam, c) for classes of length n_lo..n_hi.
double gibbs_average(const OrbitTable& t, const TablePotential& phi, double tparam,
                     double c, int n_lo, int n_hi, const TablePotential& psi);

// Partition sum over classes of length exactly n:
// Z_n = sum mult * exp(tparam * I_w - c * ell_w).
double partition_sum(const OrbitTable& t, const TablePotential& phi, int n,
                     double tparam, double c);

// Phase-transition locator against a reference entropy-at-infinity: the
// smallest grid t beyond which every sampled pressure exceeds h_inf.
struct TPhiReport {
  bool applicable = false;    // false when no reference constant was supplied
  bool found = false;         // true when the plateau threshold was located
  double t_phi = 0.0;         // smallest grid t with c_star(s) > h_inf for s > t
  bool reference_above_h_top = false;  // warning: h_inf exceeds c_star(0)
  std::vector<std::pair<double, double>> curve;  // (t, c_star) samples
};
TPhiReport t_phi_report(const OrbitTable& t, const TablePotential& phi,
                        const std::vector<double>& t_grid, bool has_h_inf,
                        double h_inf, int n_lo, int n_hi,
                        const std::string& extrapolation = "richardson");

}  // namespace orbitherm
