#include "orbitherm/potentials.hpp"

#include <algorithm>
#include <cmath>

#include "orbitherm/errors.hpp"
#include "orbitherm/parallel.hpp"

namespace orbitherm {

PotentialSpec PotentialSpec::bump(InvariantSetSpec s) {
  PotentialSpec p;
  p.kind = Kind::Bump;
  p.target = std::move(s);
  return p;
}
PotentialSpec PotentialSpec::tail(InvariantSetSpec s) {
  PotentialSpec p;
  p.kind = Kind::Tail;
  p.target = std::move(s);
  return p;
}
PotentialSpec PotentialSpec::constant(double c) {
  PotentialSpec p;
  p.kind = Kind::Constant;
  p.value = c;
  return p;
}
PotentialSpec PotentialSpec::scaled(double a, PotentialSpec inner) {
  PotentialSpec p;
  p.kind = Kind::Scaled;
  p.value = a;
  p.terms.push_back(std::move(inner));
  return p;
}
PotentialSpec PotentialSpec::weighted_sum(std::vector<double> w,
                                          std::vector<PotentialSpec> parts) {
  require(w.size() == parts.size() && !parts.empty(), errc::invalid_spec,
          "weighted sum needs matching weights and parts");
  for (std::size_t i = 0; i < w.size(); ++i) {
    require(w[i] > 0.0, errc::invalid_spec, "F-sum constraint: weights must be positive");
    require(i == 0 || w[i] <= w[i - 1] / 2.0, errc::invalid_spec,
            "F-sum constraint: weights must satisfy w[k+1] <= w[k]/2");
  }
  PotentialSpec p;
  p.kind = Kind::WeightedSum;
  p.weights = std::move(w);
  p.terms = std::move(parts);
  return p;
}

double lipschitz_bound(const PotentialSpec& spec) {
  switch (spec.kind) {
    case PotentialSpec::Kind::Bump:
    case PotentialSpec::Kind::Tail:
      return 2.0;
    case PotentialSpec::Kind::Constant:
      return std::abs(spec.value);
    case PotentialSpec::Kind::Scaled:
      require(spec.terms.size() == 1, errc::invalid_spec, "scaled needs one inner term");
      return std::abs(spec.value) * lipschitz_bound(spec.terms[0]);
    case PotentialSpec::Kind::WeightedSum: {
      require(spec.terms.size() == spec.weights.size() && !spec.terms.empty(),
              errc::invalid_spec, "weighted sum needs matching weights and parts");
      double total = 0.0;
      for (std::size_t i = 0; i < spec.terms.size(); ++i)
        total += spec.weights[i] * lipschitz_bound(spec.terms[i]);
      return total;
    }
  }
  raise(errc::internal, "unhandled potential kind");
}

namespace {

void accumulate(SetStore& store, const PotentialSpec& spec, double scale,
                CompiledPotential& out) {
  switch (spec.kind) {
    case PotentialSpec::Kind::Constant:
      out.constant += scale * spec.value;
      break;
    case PotentialSpec::Kind::Bump:
      out.bumps.push_back({store.compile(spec.target), scale});
      break;
    case PotentialSpec::Kind::Tail:
      out.constant += scale;
      out.bumps.push_back({store.compile(spec.target), -scale});
      break;
    case PotentialSpec::Kind::Scaled:
      require(spec.terms.size() == 1, errc::invalid_spec, "scaled needs one inner term");
      accumulate(store, spec.terms[0], scale * spec.value, out);
      break;
    case PotentialSpec::Kind::WeightedSum:
      require(spec.terms.size() == spec.weights.size() && !spec.terms.empty(),
              errc::invalid_spec, "weighted sum needs matching weights and parts");
      for (std::size_t i = 0; i < spec.terms.size(); ++i)
        accumulate(store, spec.terms[i], scale * spec.weights[i], out);
      break;
  }
}

}  // namespace

CompiledPotential compile_potential(SetStore& store, const PotentialSpec& spec) {
  CompiledPotential out;
  accumulate(store, spec, 1.0, out);
  // Merge duplicate sets so each distinct column is integrated exactly once.
  std::sort(out.bumps.begin(), out.bumps.end(),
            [](const CompiledPotential::BumpTerm& a, const CompiledPotential::BumpTerm& b) {
              return a.set.key() < b.set.key();
            });
  std::vector<CompiledPotential::BumpTerm> merged;
  for (auto& term : out.bumps) {
    if (!merged.empty() && merged.back().set == term.set)
      merged.back().coef += term.coef;
    else
      merged.push_back(std::move(term));
  }
  merged.erase(std::remove_if(merged.begin(), merged.end(),
                              [](const CompiledPotential::BumpTerm& t) {
                                return t.coef == 0.0;
                              }),
               merged.end());
  out.bumps = std::move(merged);
  for (const auto& term : out.bumps) store.prepare(term.set);
  return out;
}

double eval_potential(const SetStore& store, const CompiledPotential& phi,
                      const TangentVector& v) {
  double value = phi.constant;
  for (const auto& term : phi.bumps)
    value += term.coef / (1.0 + store.distance(v, term.set));
  return value;
}

double eval_potential(const SchottkyGroup& g, const PotentialSpec& spec,
                      const TangentVector& v, double set_step, int neighbor_depth,
                      int grid_steps) {
  SetStore store(g, set_step, neighbor_depth, grid_steps);
  const CompiledPotential phi = compile_potential(store, spec);
  return eval_potential(store, phi, v);
}

BirkhoffResult birkhoff_integral(const SetStore& store, const CompiledPotential& phi,
                                 const OrbitSamples& orbit) {
  require(orbit.nodes.size() >= 4, errc::quadrature_resolution,
          "orbit has fewer than 4 quadrature samples");
  // Closed-loop trapezoid rule with uniform spacing reduces to h * sum.
  const double h = orbit.ell / static_cast<double>(orbit.nodes.size());
  KahanAccumulator acc;
  for (const auto& node : orbit.nodes) acc.add(eval_potential(store, phi, node));
  BirkhoffResult out;
  out.integral = h * acc.value();
  out.average = out.integral / orbit.ell;
  return out;
}

}  // namespace orbitherm
