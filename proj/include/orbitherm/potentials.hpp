#pragma once
#include <vector>

#include "orbitherm/sets.hpp"

namespace orbitherm {

// Grammar of Holder observables on the unit tangent bundle, built from
// distances to flow-invariant sets:
//   Bump(S)   = 1 / (1 + d(., S))      (maximized exactly on S)
//   Tail(S)   = d(., S) / (1 + d(., S)) = 1 - Bump(S)
//   Constant(c), Scaled(a, phi), WeightedSum(w_i, phi_i).
struct PotentialSpec {
  enum class Kind { Bump, Tail, Constant, Scaled, WeightedSum };
  Kind kind = Kind::Constant;
  InvariantSetSpec target;           // Bump / Tail
  double value = 0.0;                // Constant value or Scaled factor
  std::vector<PotentialSpec> terms;  // Scaled: one; WeightedSum: many
  std::vector<double> weights;       // WeightedSum coefficients

  static PotentialSpec bump(InvariantSetSpec s);
  static PotentialSpec tail(InvariantSetSpec s);
  static PotentialSpec constant(double c);
  static PotentialSpec scaled(double a, PotentialSpec inner);
  // Weights must be positive, strictly decreasing, with w[i+1] <= w[i] / 2, so
  // the tail of the sum past level n is bounded by w[n].
  static PotentialSpec weighted_sum(std::vector<double> w, std::vector<PotentialSpec> parts);
};

// Upper bound for sup|phi| + Lip(phi): bumps and tails are 1-Lipschitz with
// sup 1, so both get 2; the bound composes through scaling and weighted sums.
double lipschitz_bound(const PotentialSpec& spec);

// Every potential in the grammar is an affine combination of bump functions:
// phi = constant + sum_i coef_i * Bump(S_i), with distinct compiled sets S_i.
struct CompiledPotential {
  double constant = 0.0;
  struct BumpTerm {
    CompiledSet set;
    double coef = 0.0;
  };
  std::vector<BumpTerm> bumps;
};

CompiledPotential compile_potential(SetStore& store, const PotentialSpec& spec);
double eval_potential(const SetStore& store, const CompiledPotential& phi,
                      const TangentVector& v);

// One-off evaluation: builds a private store with the given knobs.
double eval_potential(const SchottkyGroup& g, const PotentialSpec& spec,
                      const TangentVector& v, double set_step = 0.05,
                      int neighbor_depth = 2, int grid_steps = 33);

// Trapezoid quadrature of phi over one period of a sampled closed orbit.
struct BirkhoffResult {
  double integral = 0.0;
  double average = 0.0;
};
BirkhoffResult birkhoff_integral(const SetStore& store, const CompiledPotential& phi,
                                 const OrbitSamples& orbit);

}  // namespace orbitherm
