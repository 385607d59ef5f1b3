#pragma once
#include <string>
#include <vector>

#include "orbitherm/thermo.hpp"

namespace orbitherm {

// Best closed-orbit average of phi over the table: a rigorous lower bound for
// the maximal ergodic average.  Reports the running maximum per word length.
struct PerLengthMax {
  int n = 0;
  double average = 0.0;
  Word rep;
};
struct MaximizingClass {
  Word rep;
  int n = 0;
  double ell = 0.0;
  double average = 0.0;
  std::vector<PerLengthMax> per_length;
};
MaximizingClass beta_lower(const OrbitTable& t, const TablePotential& phi);

// Averages of phi along the escaping family p^n w (p a parabolic letter, w a
// fixed hyperbolic tail), computed by direct quadrature; these orbits leave
// every word-length truncation as n grows.
struct EscapeRow {
  int n = 0;
  double ell = 0.0;
  double average = 0.0;
};
std::vector<EscapeRow> escaping_family_averages(SetStore& store,
                                                const CompiledPotential& phi,
                                                int parabolic_letter, const Word& tail,
                                                const std::vector<int>& n_list,
                                                double quad_step, int threads);

// Max closed-orbit average of phi - s * psi per tilt value s.
struct TiltRow {
  double s = 0.0;
  double beta = 0.0;
  Word argmax;
};
std::vector<TiltRow> tilted_beta_curve(const OrbitTable& t, const TablePotential& phi,
                                       const TablePotential& psi,
                                       const std::vector<double>& s_grid);

enum class MaximizerVerdict { MaximizerExpected, FullEscapeExpected, Inconclusive };
const char* verdict_name(MaximizerVerdict v);

struct GapReport {
  MaximizerVerdict verdict = MaximizerVerdict::Inconclusive;
  double beta_hat = 0.0;            // best closed-orbit average
  bool has_beta_inf = false;        // false on groups with no escaping family
  double beta_inf_estimate = 0.0;   // deepest escaping-family average
  double gap = 0.0;                 // beta_hat - beta_inf_estimate
};
// Margin test: escaping averages overtaking every closed-orbit average (and
// still rising) indicate that the maximizing mass escapes into the cusp.
// With no escaping family (pass an empty vector) the maximizer always exists
// and the report carries no beta_inf estimate.
GapReport gap_test(double beta_hat, const std::vector<EscapeRow>& escape, double margin);

// Bisection in t for prescribed equilibrium entropy h(t) = target.
struct IntermediateResult {
  double t = 0.0;
  double entropy = 0.0;
  double pressure = 0.0;
  double phi_mean = 0.0;
  int evals = 0;
};
IntermediateResult intermediate_entropy_search(const OrbitTable& t,
                                               const TablePotential& phi,
                                               double target_h, double tol,
                                               int max_evals, int n_lo, int n_hi,
                                               const std::string& extrapolation);

// Inductive schedule for a potential whose equilibrium states diverge: at each
// stage the temperature is pushed until the Gibbs mass concentrates on the
// stage's region, and the next coefficient is shrunk until it no longer
// disturbs the stages already locked in.
struct DivergenceStage {
  TablePotential bump;  // b_k, the stage bump potential
  RegionSpec region;    // U_k, alternating regions
  double eps = 0.1;
};
struct DivergenceParams {
  double delta1 = 1.0;
  double t_start = 1.0;
  double t_cap = 1e6;
  double delta_min = 1e-8;
  int n_lo = 4, n_hi = 6;
  std::string extrapolation = "richardson";
};
struct StageResult {
  int k = 0;
  double t = 0.0;
  double delta = 0.0;
  double mass = 0.0;        // region mass at stage time under the stage potential
  double mass_final = 0.0;  // same mass under the full final potential
};
struct DivergenceResult {
  std::vector<StageResult> stages;
  TablePotential phi_final;
};
// On schedule failure the stages locked so far (re-examined under the partial
// potential) are stored into *partial, if given, before the error is raised.
DivergenceResult run_divergence_schedule(const OrbitTable& t,
                                         const std::vector<DivergenceStage>& stages,
                                         const DivergenceParams& params,
                                         DivergenceResult* partial = nullptr);

}  // namespace orbitherm
