#include "orbitherm/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "orbitherm/errors.hpp"
#include "orbitherm/parallel.hpp"

namespace orbitherm {

TablePotential bind_potential(const OrbitTable& t, const CompiledPotential& phi) {
  TablePotential bound;
  bound.const_coef = phi.constant;
  for (const auto& term : phi.bumps) {
    ColumnRequest req;
    req.op = ColumnRequest::Op::Bump;
    req.set = term.set;
    bound.terms.emplace_back(t.find_column(req.id()), term.coef);
  }
  return bound;
}

std::vector<double> class_integrals(const OrbitTable& t, const TablePotential& phi) {
  std::vector<double> out(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    double v = phi.const_coef * t.rows[i].ell;
    for (const auto& [col, coef] : phi.terms) v += coef * t.rows[i].cols[col];
    out[i] = v;
  }
  return out;
}

namespace {

struct ClassArrays {
  std::vector<double> integral;  // I_w
  std::vector<double> ell;
  std::vector<double> logmult;
};

ClassArrays gather(const OrbitTable& t, const TablePotential& phi) {
  ClassArrays a;
  a.integral = class_integrals(t, phi);
  a.ell.resize(t.rows.size());
  a.logmult.resize(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    a.ell[i] = t.rows[i].ell;
    a.logmult[i] = std::log(static_cast<double>(t.rows[i].mult));
  }
  return a;
}

struct Range {
  std::size_t begin = 0, end = 0;
  bool empty() const { return begin >= end; }
};

// log of the sum over one range of classes at (t, c).
double log_partition(const ClassArrays& a, double tparam, double c, Range r) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = r.begin; i < r.end; ++i)
    mx = std::max(mx, tparam * a.integral[i] - c * a.ell[i] + a.logmult[i]);
  KahanAccumulator sum;
  for (std::size_t i = r.begin; i < r.end; ++i)
    sum.add(std::exp(tparam * a.integral[i] - c * a.ell[i] + a.logmult[i] - mx));
  return mx + std::log(sum.value());
}

// Root in c of log(Z_top(c) / Z_below(c)) = 0: the growth ratio of successive
// level sums crosses 1 at the pressure. With an empty `below` this degrades to
// the absolute crossing Z_top = 1 (only level 1 of a table lands here). Both
// forms are strictly decreasing in c because the deeper level carries the
// longer mean period.
double partition_root(const ClassArrays& a, double tparam, Range top, Range below) {
  require(!top.empty(), errc::invalid_config, "pressure root needs classes");
  auto f = [&](double c) {
    const double lt = log_partition(a, tparam, c, top);
    return below.empty() ? lt : lt - log_partition(a, tparam, c, below);
  };
  double lo = 0.0, hi = 1.0;
  int tries = 0;
  double step = 1.0;
  while (f(lo) < 0.0) {
    require(++tries <= 200, errc::bracket_failure, "pressure root bracket failed below");
    lo -= step;
    step *= 2.0;
  }
  step = 1.0;
  tries = 0;
  while (f(hi) > 0.0) {
    require(++tries <= 200, errc::bracket_failure, "pressure root bracket failed above");
    hi += step;
    step *= 2.0;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-13 * (1.0 + std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// dc_n/dt at the ratio root by implicit differentiation: the difference of the
// level Gibbs averages of the integral over the difference of the level
// averages of the period, both at (t, c).
double partition_mean(const ClassArrays& a, double tparam, double c, Range top,
                      Range below) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Range r : {top, below})
    for (std::size_t i = r.begin; i < r.end; ++i)
      mx = std::max(mx, tparam * a.integral[i] - c * a.ell[i] + a.logmult[i]);
  auto sums = [&](Range r, double* num, double* den, double* mass) {
    KahanAccumulator sn, sd, sm;
    for (std::size_t i = r.begin; i < r.end; ++i) {
      const double w = std::exp(tparam * a.integral[i] - c * a.ell[i] + a.logmult[i] - mx);
      sn.add(w * a.integral[i]);
      sd.add(w * a.ell[i]);
      sm.add(w);
    }
    *num = sn.value();
    *den = sd.value();
    *mass = sm.value();
  };
  double nt, dt, mt;
  sums(top, &nt, &dt, &mt);
  if (below.empty()) {
    require(dt > 0.0, errc::degenerate_weights, "all class weights underflowed");
    return nt / dt;
  }
  double nb, db, mb;
  sums(below, &nb, &db, &mb);
  require(mt > 0.0 && mb > 0.0, errc::degenerate_weights, "all class weights underflowed");
  // d/dt log Z = <I> (per-level normalized); d/dc log Z = -<ell>.
  const double dmean = dt / mt - db / mb;
  require(dmean > 0.0, errc::degenerate_weights,
          "level mean periods do not increase; mean undefined");
  return (nt / mt - nb / mb) / dmean;
}

double aitken(double x0, double x1, double x2) {
  const double d1 = x1 - x0, d2 = x2 - x1;
  const double den = d2 - d1;
  if (std::abs(den) <= 1e-14 * (std::abs(d1) + std::abs(d2)) || std::abs(d2) >= std::abs(d1))
    return x2;
  return x2 - d2 * d2 / den;
}

}  // namespace

PressureResult flow_pressure(const OrbitTable& t, const TablePotential& phi,
                             double tparam, int n_lo, int n_hi,
                             const std::string& extrapolation) {
  require(n_lo >= 1 && n_lo <= n_hi && n_hi <= t.n_max, errc::invalid_config,
          "pressure level range out of table bounds");
  require(extrapolation == "richardson" || extrapolation == "aitken" ||
              extrapolation == "top_level",
          errc::invalid_config, "unknown extrapolation method");
  const ClassArrays a = gather(t, phi);

  PressureResult out;
  out.t = tparam;
  out.n_lo = n_lo;
  out.n_hi = n_hi;
  for (int n = n_lo; n <= n_hi; ++n) {
    const Range top{t.level_begin[n], t.level_begin[n + 1]};
    const Range below = n >= 2 ? Range{t.level_begin[n - 1], t.level_begin[n]} : Range{};
    require(!top.empty(), errc::invalid_config, "no classes at requested level");
    LevelRoot lr;
    lr.n = n;
    lr.c = partition_root(a, tparam, top, below);
    lr.mean = partition_mean(a, tparam, lr.c, top, below);
    out.levels.push_back(lr);
  }

  auto combo = [&](std::size_t top, auto field) {
    const LevelRoot& b = out.levels[top];
    if (extrapolation == "top_level" || top == 0) return field(b);
    const LevelRoot& p = out.levels[top - 1];
    if (extrapolation == "richardson" || top < 2)
      return b.n * field(b) - p.n * field(p);
    return aitken(field(out.levels[top - 2]), field(p), field(b));
  };
  auto c_of = [](const LevelRoot& l) { return l.c; };
  auto m_of = [](const LevelRoot& l) { return l.mean; };
  const std::size_t top = out.levels.size() - 1;
  out.c_star = combo(top, c_of);
  out.phi_mean = combo(top, m_of);
  out.residual = top >= 1 ? std::abs(out.c_star - combo(top - 1, c_of))
                          : std::abs(out.c_star);
  out.entropy_raw = out.c_star - tparam * out.phi_mean;
  out.entropy = std::max(out.entropy_raw, 0.0);
  out.entropy_clipped = out.entropy_raw < -1e-6;
  return out;
}

GibbsStats equilibrium_stats(const OrbitTable& t, const TablePotential& phi,
                             double tparam, int n_lo, int n_hi,
                             const std::vector<RegionSpec>& regions,
                             const std::string& extrapolation) {
  GibbsStats stats;
  stats.pressure = flow_pressure(t, phi, tparam, n_lo, n_hi, extrapolation);
  const ClassArrays a = gather(t, phi);
  const std::size_t first = t.level_begin[n_lo];
  const std::size_t count = t.level_begin[n_hi + 1];
  const double c = stats.pressure.c_star;

  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = first; i < count; ++i)
    mx = std::max(mx, tparam * a.integral[i] - c * a.ell[i] + a.logmult[i]);
  std::vector<double> w(count);
  KahanAccumulator den;
  for (std::size_t i = first; i < count; ++i) {
    w[i] = std::exp(tparam * a.integral[i] - c * a.ell[i] + a.logmult[i] - mx);
    den.add(w[i] * a.ell[i]);
  }
  const double total_time = den.value();
  require(total_time > 0.0, errc::degenerate_weights, "all class weights underflowed");
  stats.normalization = total_time / total_time;

  for (const auto& region : regions) {
    require(region.time_column < t.column_ids.size(), errc::invalid_config,
            "region time column out of range");
    KahanAccumulator num;
    for (std::size_t i = first; i < count; ++i)
      num.add(w[i] * t.rows[i].cols[region.time_column]);
    const double inside = num.value() / total_time;
    stats.masses.emplace_back(region.name, region.complement ? 1.0 - inside : inside);
  }
  return stats;
}

double gibbs_average(const OrbitTable& t, const TablePotential& phi, double tparam,
                     double c, int n_lo, int n_hi, const TablePotential& psi) {
  require(n_lo >= 1 && n_lo <= n_hi && n_hi <= t.n_max, errc::invalid_config,
          "gibbs average levels out of table bounds");
  const ClassArrays a = gather(t, phi);
  const std::vector<double> ipsi = class_integrals(t, psi);
  const std::size_t first = t.level_begin[n_lo];
  const std::size_t count = t.level_begin[n_hi + 1];
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = first; i < count; ++i)
    mx = std::max(mx, tparam * a.integral[i] - c * a.ell[i] + a.logmult[i]);
  KahanAccumulator num, den;
  for (std::size_t i = first; i < count; ++i) {
    const double w = std::exp(tparam * a.integral[i] - c * a.ell[i] + a.logmult[i] - mx);
    num.add(w * ipsi[i]);
    den.add(w * a.ell[i]);
  }
  require(den.value() > 0.0, errc::degenerate_weights, "all class weights underflowed");
  return num.value() / den.value();
}

double partition_sum(const OrbitTable& t, const TablePotential& phi, int n,
                     double tparam, double c) {
  require(n >= 1 && n <= t.n_max, errc::invalid_config,
          "partition level out of table bounds");
  const ClassArrays a = gather(t, phi);
  KahanAccumulator sum;
  for (std::size_t i = t.level_begin[n]; i < t.level_begin[n + 1]; ++i)
    sum.add(std::exp(tparam * a.integral[i] - c * a.ell[i] + a.logmult[i]));
  return sum.value();
}

TPhiReport t_phi_report(const OrbitTable& t, const TablePotential& phi,
                        const std::vector<double>& t_grid, bool has_h_inf,
                        double h_inf, int n_lo, int n_hi,
                        const std::string& extrapolation) {
  require(!t_grid.empty(), errc::invalid_config, "t_phi_report needs a t grid");
  TPhiReport rep;
  std::vector<double> grid = t_grid;
  std::sort(grid.begin(), grid.end());
  for (double s : grid)
    rep.curve.emplace_back(s, flow_pressure(t, phi, s, n_lo, n_hi, extrapolation).c_star);
  if (!has_h_inf) return rep;
  rep.applicable = true;
  rep.reference_above_h_top =
      h_inf > flow_pressure(t, phi, 0.0, n_lo, n_hi, extrapolation).c_star;

  // Largest grid point at which the pressure still fails to clear h_inf.
  std::ptrdiff_t last_fail = -1;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (!(rep.curve[i].second > h_inf)) last_fail = static_cast<std::ptrdiff_t>(i);
  if (last_fail + 1 == static_cast<std::ptrdiff_t>(grid.size())) return rep;  // not found
  rep.found = true;
  rep.t_phi = last_fail < 0 ? grid.front() : grid[static_cast<std::size_t>(last_fail)];
  return rep;
}

}  // namespace orbitherm
