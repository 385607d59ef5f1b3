#include "orbitherm/ergopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "orbitherm/errors.hpp"
#include "orbitherm/parallel.hpp"

namespace orbitherm {

MaximizingClass beta_lower(const OrbitTable& t, const TablePotential& phi) {
  require(!t.rows.empty(), errc::invalid_config, "beta bound needs a nonempty table");
  const std::vector<double> integrals = class_integrals(t, phi);
  MaximizingClass best;
  best.average = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const double avg = integrals[i] / t.rows[i].ell;
    if (avg > best.average) {
      best.average = avg;
      best.rep = t.rows[i].rep;
      best.n = t.rows[i].n;
      best.ell = t.rows[i].ell;
    }
    if (best.per_length.empty() || best.per_length.back().n < t.rows[i].n)
      best.per_length.push_back({t.rows[i].n, avg, t.rows[i].rep});
    else if (avg > best.per_length.back().average)
      best.per_length.back() = {t.rows[i].n, avg, t.rows[i].rep};
  }
  return best;
}

std::vector<EscapeRow> escaping_family_averages(SetStore& store,
                                                const CompiledPotential& phi,
                                                int parabolic_letter, const Word& tail,
                                                const std::vector<int>& n_list,
                                                double quad_step, int threads) {
  require(!tail.empty(), errc::invalid_spec, "escaping family needs a hyperbolic tail");
  for (const auto& term : phi.bumps) store.prepare(term.set);
  std::vector<EscapeRow> rows(n_list.size());
  parallel_for(n_list.size(), threads, [&](std::size_t i) {
    const int n = n_list[i];
    require(n >= 0, errc::invalid_spec, "escaping family power must be >= 0");
    Word w;
    for (int j = 0; j < n; ++j) w.push_back(parabolic_letter);
    w.insert(w.end(), tail.begin(), tail.end());
    require(is_cyclically_reduced(w), errc::invalid_spec,
            "escaping family word is not cyclically reduced");
    const OrbitSamples orbit = closed_geodesic_from_word(store.group(), w, quad_step);
    KahanAccumulator acc;
    for (const auto& node : orbit.nodes) acc.add(eval_potential(store, phi, node));
    rows[i] = {n, orbit.ell, acc.value() / orbit.nodes.size()};
  });
  return rows;
}

std::vector<TiltRow> tilted_beta_curve(const OrbitTable& t, const TablePotential& phi,
                                       const TablePotential& psi,
                                       const std::vector<double>& s_grid) {
  const std::vector<double> iphi = class_integrals(t, phi);
  const std::vector<double> ipsi = class_integrals(t, psi);
  std::vector<TiltRow> rows;
  for (double s : s_grid) {
    TiltRow row;
    row.s = s;
    row.beta = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const double avg = (iphi[i] - s * ipsi[i]) / t.rows[i].ell;
      if (avg > row.beta) {
        row.beta = avg;
        row.argmax = t.rows[i].rep;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

const char* verdict_name(MaximizerVerdict v) {
  switch (v) {
    case MaximizerVerdict::MaximizerExpected: return "maximizer_expected";
    case MaximizerVerdict::FullEscapeExpected: return "full_escape_expected";
    case MaximizerVerdict::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

GapReport gap_test(double beta_hat, const std::vector<EscapeRow>& escape, double margin) {
  require(margin > 0.0, errc::invalid_config, "gap margin must be positive");
  GapReport report;
  report.beta_hat = beta_hat;
  if (escape.empty()) {
    // No cusp, no escaping family: a maximizing measure always exists.
    report.verdict = MaximizerVerdict::MaximizerExpected;
    return report;
  }
  require(escape.size() >= 3, errc::invalid_config,
          "gap test needs at least three escaping averages");
  report.has_beta_inf = true;
  report.beta_inf_estimate = escape.back().average;
  report.gap = beta_hat - report.beta_inf_estimate;
  bool rising = true;
  for (std::size_t i = escape.size() - 3; i + 1 < escape.size(); ++i)
    rising = rising && escape[i + 1].average > escape[i].average - 1e-12;
  if (report.beta_inf_estimate > beta_hat - margin && rising)
    report.verdict = MaximizerVerdict::FullEscapeExpected;
  else if (report.beta_inf_estimate < beta_hat - margin)
    report.verdict = MaximizerVerdict::MaximizerExpected;
  else
    report.verdict = MaximizerVerdict::Inconclusive;
  return report;
}

IntermediateResult intermediate_entropy_search(const OrbitTable& t,
                                               const TablePotential& phi,
                                               double target_h, double tol,
                                               int max_evals, int n_lo, int n_hi,
                                               const std::string& extrapolation) {
  require(tol > 0.0, errc::invalid_config, "entropy tolerance must be positive");
  int evals = 0;
  IntermediateResult best;
  best.entropy = std::numeric_limits<double>::infinity();
  auto h_of = [&](double tp) {
    require(++evals <= max_evals, errc::estimation_failure,
            "entropy search exceeded its evaluation budget");
    const PressureResult p = flow_pressure(t, phi, tp, n_lo, n_hi, extrapolation);
    if (std::abs(p.entropy_raw - target_h) < std::abs(best.entropy - target_h))
      best = {tp, p.entropy_raw, p.c_star, p.phi_mean, 0};
    return p.entropy_raw;
  };

  const double h_top = h_of(0.0);
  require(target_h > 0.0 && target_h < h_top, errc::invalid_target,
          "target entropy must lie strictly between 0 and the entropy at t=0");

  double lo = 0.0, hi = 1.0;
  while (h_of(hi) > target_h) {
    lo = hi;
    hi *= 2.0;
    require(hi < 1e9, errc::estimation_failure,
            "equilibrium entropy never drops to the target");
  }
  while (std::abs(best.entropy - target_h) > tol && evals < max_evals) {
    const double mid = 0.5 * (lo + hi);
    (h_of(mid) > target_h ? lo : hi) = mid;
  }
  require(std::abs(best.entropy - target_h) <= tol, errc::bisection_failure,
          "entropy bisection did not reach the tolerance in budget");
  best.evals = evals;
  return best;
}

namespace {

TablePotential add_scaled(const TablePotential& base, double coef,
                          const TablePotential& extra) {
  TablePotential out = base;
  out.const_coef += coef * extra.const_coef;
  for (const auto& [col, w] : extra.terms) {
    bool merged = false;
    for (auto& [bcol, bw] : out.terms)
      if (bcol == col) {
        bw += coef * w;
        merged = true;
        break;
      }
    if (!merged) out.terms.emplace_back(col, coef * w);
  }
  return out;
}

}  // namespace

DivergenceResult run_divergence_schedule(const OrbitTable& t,
                                         const std::vector<DivergenceStage>& stages,
                                         const DivergenceParams& params,
                                         DivergenceResult* partial) {
  require(!stages.empty(), errc::invalid_config, "divergence schedule needs stages");
  DivergenceResult result;
  TablePotential current;  // zero potential
  double delta = params.delta1;
  double t_prev = 0.0;

  // Re-examines every locked stage under the given (possibly partial) final
  // potential; also used to hand back partial results on schedule failure.
  auto finalize = [&](DivergenceResult& r, const TablePotential& phi) {
    for (auto& sr : r.stages) {
      const DivergenceStage& stage = stages[static_cast<std::size_t>(sr.k) - 1];
      sr.mass_final = equilibrium_stats(t, phi, sr.t, params.n_lo, params.n_hi,
                                        {stage.region}, params.extrapolation)
                          .masses[0]
                          .second;
    }
    r.phi_final = phi;
  };
  auto fail = [&](const std::string& msg) {
    if (partial) {
      *partial = result;
      finalize(*partial, current);
    }
    raise(errc::schedule_failure, msg);
  };

  for (std::size_t si = 0; si < stages.size(); ++si) {
    const DivergenceStage& stage = stages[si];
    const int k = static_cast<int>(si) + 1;
    const double target = 1.0 - stage.eps / 3.0;
    const TablePotential pk = add_scaled(current, delta, stage.bump);
    auto mass_at = [&](double tp) {
      return equilibrium_stats(t, pk, tp, params.n_lo, params.n_hi, {stage.region},
                               params.extrapolation)
          .masses[0]
          .second;
    };

    // Push the temperature up: doubling, with a golden-section retreat into
    // the peak if the mass starts falling before the target is reached.
    const double t_min = std::max(t_prev + k, params.t_start);
    double t_best = t_min, m_best = mass_at(t_min);
    double t_found = std::numeric_limits<double>::quiet_NaN();
    if (m_best >= target) t_found = t_min;
    double t_below = t_min, t_cur = 2.0 * t_min;
    while (std::isnan(t_found)) {
      if (t_cur > params.t_cap) fail("stage mass never reached its target");
      const double m_cur = mass_at(t_cur);
      if (m_cur >= target) {
        t_found = t_cur;
        break;
      }
      if (m_cur > m_best) {
        t_below = t_best;
        t_best = t_cur;
        m_best = m_cur;
        t_cur *= 2.0;
        continue;
      }
      // Past the peak: refine on [t_below, t_cur] around t_best.
      double a = t_below, b = t_cur;
      for (int it = 0; it < 40 && std::isnan(t_found); ++it) {
        const double x1 = a + 0.381966011250105 * (b - a);
        const double x2 = b - 0.381966011250105 * (b - a);
        const double m1 = mass_at(x1), m2 = mass_at(x2);
        if (m1 >= target) t_found = x1;
        if (std::isnan(t_found) && m2 >= target) t_found = x2;
        if (m1 > m_best) { m_best = m1; t_best = x1; }
        if (m2 > m_best) { m_best = m2; t_best = x2; }
        if (m1 < m2) a = x1; else b = x2;
        if (b - a <= 1e-6 * (1.0 + b)) break;
      }
      if (std::isnan(t_found))
        fail("stage mass peaks below its target; schedule cannot continue");
    }

    StageResult sr;
    sr.k = k;
    sr.t = t_found;
    sr.delta = delta;
    sr.mass = mass_at(t_found);
    result.stages.push_back(sr);
    current = pk;
    t_prev = t_found;

    // Shrink the next coefficient until it no longer disturbs this stage.
    if (si + 1 < stages.size()) {
      const double base_mass = sr.mass;
      double next = delta / 2.0;
      for (;;) {
        const TablePotential probe = add_scaled(current, next, stages[si + 1].bump);
        const double m = equilibrium_stats(t, probe, t_found, params.n_lo, params.n_hi,
                                           {stage.region}, params.extrapolation)
                             .masses[0]
                             .second;
        if (std::abs(m - base_mass) < stage.eps / 3.0) break;
        next /= 2.0;
        if (next < params.delta_min)
          fail("perturbation coefficient underflowed before stabilizing");
      }
      delta = next;
    }
  }

  finalize(result, current);
  return result;
}

}  // namespace orbitherm
