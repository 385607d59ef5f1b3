#include "orbitherm/schottky.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_set>

namespace orbitherm {

bool is_reduced(const Word& w) {
  for (std::size_t i = 0; i + 1 < w.size(); ++i)
    if (w[i + 1] == -w[i]) return false;
  return true;
}

bool is_cyclically_reduced(const Word& w) {
  if (!is_reduced(w)) return false;
  return w.size() <= 1 || w.front() != -w.back();
}

namespace {
bool rank_less(const Word& a, const Word& b) {
  std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    int ra = letter_rank(a[i]), rb = letter_rank(b[i]);
    if (ra != rb) return ra < rb;
  }
  return a.size() < b.size();
}

Word rotate(const Word& w, std::size_t s) {
  Word out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[(i + s) % w.size()];
  return out;
}
}  // namespace

Word canonical_rotation(const Word& w) {
  if (w.size() <= 1) return w;
  Word best = w;
  for (std::size_t s = 1; s < w.size(); ++s) {
    Word r = rotate(w, s);
    if (rank_less(r, best)) best = r;
  }
  return best;
}

int primitive_period(const Word& w) {
  int n = static_cast<int>(w.size());
  for (int p = 1; p < n; ++p) {
    if (n % p != 0) continue;
    bool match = true;
    for (int i = 0; i < n && match; ++i) match = w[i] == w[(i + p) % n];
    if (match) return p;
  }
  return n;
}

Word word_power(const Word& w, int j) {
  Word out;
  out.reserve(w.size() * j);
  for (int t = 0; t < j; ++t) out.insert(out.end(), w.begin(), w.end());
  return out;
}

Word inverse_word(const Word& w) {
  Word out(w.rbegin(), w.rend());
  for (int& l : out) l = -l;
  return out;
}

std::string word_label(const Word& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) s += "*";
    s += "g" + std::to_string(std::abs(w[i]));
    if (w[i] < 0) s += "^-1";
  }
  return s;
}

std::int64_t count_cyclically_reduced(int k, int n) {
  std::int64_t pw = 1;
  for (int i = 0; i < n; ++i) pw *= (2 * k - 1);
  return pw + 1 + static_cast<std::int64_t>(k - 1) * (1 + (n % 2 == 0 ? 1 : -1));
}

void enumerate_reduced_words(int k, int n, const std::function<void(const Word&)>& fn) {
  require(n >= 1, errc::invalid_spec, "word length must be >= 1");
  Word w;
  w.reserve(n);
  std::vector<int> letters;
  for (int i = 1; i <= k; ++i) {
    letters.push_back(i);
    letters.push_back(-i);
  }
  std::sort(letters.begin(), letters.end(),
            [](int a, int b) { return letter_rank(a) < letter_rank(b); });
  auto rec = [&](auto&& self, int depth) -> void {
    if (depth == n) {
      fn(w);
      return;
    }
    for (int l : letters) {
      if (!w.empty() && l == -w.back()) continue;
      w.push_back(l);
      self(self, depth + 1);
      w.pop_back();
    }
  };
  rec(rec, 0);
}

std::vector<CyclicClass> enumerate_cyclic_classes(int k, int n, std::int64_t word_cap) {
  double est = 2.0 * k * std::pow(2.0 * k - 1.0, n - 1);
  require(est <= static_cast<double>(word_cap), errc::resource_limit,
          "word enumeration exceeds the configured cap");
  std::unordered_set<std::string> seen;
  std::vector<CyclicClass> out;
  enumerate_reduced_words(k, n, [&](const Word& w) {
    if (!is_cyclically_reduced(w)) return;
    Word canon = canonical_rotation(w);
    std::string key;
    key.reserve(canon.size());
    for (int l : canon) key.push_back(static_cast<char>(l + 16));
    if (!seen.insert(key).second) return;
    out.push_back({canon, primitive_period(canon)});
  });
  std::sort(out.begin(), out.end(),
            [](const CyclicClass& a, const CyclicClass& b) { return rank_less(a.rep, b.rep); });
  return out;
}

Isometry SchottkyGroup::word_matrix(const Word& w) const {
  Isometry m;
  for (int l : w) m = m * letter_matrix(l);
  return m;
}

namespace {
void validate_disks(const SchottkyGroup& g, errc code) {
  struct Entry {
    const Disk* d;
    int gen;
  };
  std::vector<Entry> all;
  for (std::size_t i = 0; i < g.disks.size(); ++i) {
    all.push_back({&g.disks[i].minus, static_cast<int>(i)});
    all.push_back({&g.disks[i].plus, static_cast<int>(i)});
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      double gap = std::abs(all[i].d->center - all[j].d->center) -
                   (all[i].d->radius + all[j].d->radius);
      bool tangent_ok = g.extended && all[i].gen == g.parabolic_index &&
                        all[j].gen == g.parabolic_index;
      if (tangent_ok ? gap < -1e-15 : gap <= 0.0)
        raise(code, "Schottky disks are not pairwise disjoint (gap " +
                        std::to_string(gap) + ")");
    }
  }
  for (const auto& gd : g.disks) {
    if (gd.minus.contains_point(g.basepoint) || gd.plus.contains_point(g.basepoint))
      raise(code, "basepoint lies inside a Schottky disk");
  }
}

void finish_group(SchottkyGroup& g, errc code) {
  g.inverses.clear();
  for (const auto& m : g.generators) g.inverses.push_back(m.inverse());
  require(g.generators.size() >= 2, errc::invalid_spec,
          "Schottky group needs at least two generators");
  validate_disks(g, code);
}
}  // namespace

SchottkyGroup make_schottky(const std::vector<Isometry>& gens, HPoint basepoint) {
  SchottkyGroup g;
  g.generators = gens;
  g.basepoint = basepoint;
  for (const auto& m : gens) {
    IsometryClass cls = classify_isometry(m);
    require(cls.kind == IsoKind::Hyperbolic, errc::invalid_spec,
            "Schottky generators must be hyperbolic");
    g.disks.push_back({isometric_circle(m), isometric_circle(m.inverse())});
  }
  finish_group(g, errc::invalid_spec);
  return g;
}

SchottkyGroup make_extended_schottky(double s, const std::vector<Isometry>& hyperbolic_gens,
                                     HPoint basepoint) {
  require(s > 0.0, errc::invalid_spec, "parabolic parameter must be positive");
  SchottkyGroup g;
  g.extended = true;
  g.parabolic_index = 0;
  g.basepoint = basepoint;
  g.generators.push_back(Isometry(1.0, 0.0, s, 1.0));
  g.disks.push_back({Disk{-1.0 / s, 1.0 / s}, Disk{1.0 / s, 1.0 / s}});
  for (const auto& m : hyperbolic_gens) {
    IsometryClass cls = classify_isometry(m);
    require(cls.kind == IsoKind::Hyperbolic, errc::invalid_spec,
            "extended group needs hyperbolic generators besides the parabolic");
    g.generators.push_back(m);
    g.disks.push_back({isometric_circle(m), isometric_circle(m.inverse())});
  }
  finish_group(g, errc::invalid_spec);
  return g;
}

SchottkyGroup make_subgroup(const SchottkyGroup& g, const std::vector<PoweredGen>& gens) {
  SchottkyGroup out;
  out.basepoint = g.basepoint;
  for (const auto& pg : gens) {
    require(pg.index >= 1 && pg.index <= g.rank(), errc::invalid_spec,
            "subgroup generator index out of range");
    require(pg.power >= 1, errc::invalid_spec, "subgroup generator power must be >= 1");
    require(!(g.extended && pg.index - 1 == g.parabolic_index), errc::invalid_spec,
            "subgroup cores are built on hyperbolic letters only");
    Isometry m = g.generators[pg.index - 1].pow(pg.power);
    out.generators.push_back(m);
    if (pg.power == 1)
      out.disks.push_back(g.disks[pg.index - 1]);
    else
      out.disks.push_back({isometric_circle(m), isometric_circle(m.inverse())});
  }
  finish_group(out, errc::family_error);
  return out;
}

void override_disks(SchottkyGroup& g, const std::vector<GeneratorDisks>& disks) {
  const std::size_t offset = g.extended ? 1 : 0;
  require(disks.size() + offset == g.generators.size(), errc::invalid_config,
          "disk list must match the hyperbolic generator count");
  for (const auto& gd : disks)
    require(gd.minus.radius > 0.0 && gd.plus.radius > 0.0, errc::invalid_config,
            "Schottky disks need positive radii");
  for (std::size_t i = 0; i < disks.size(); ++i) g.disks[i + offset] = disks[i];
  validate_disks(g, errc::invalid_config);
}

SchottkyGroup nested_subgroup(const SchottkyGroup& g, int i1, int i2, int n) {
  require(n >= 0 && n <= 30, errc::invalid_spec, "nested index out of range");
  return make_subgroup(g, {{i1, 1}, {i2, 1 << n}});
}

SchottkyGroup nested_subgroup(const Isometry& h1, const Isometry& h2, int n,
                              HPoint basepoint) {
  require(n >= 0 && n <= 30, errc::invalid_spec, "nested index out of range");
  return make_schottky({h1, h2.pow(1 << n)}, basepoint);
}

PingPongReport check_ping_pong(const SchottkyGroup& g, int samples_per_gen,
                               std::uint64_t seed) {
  PingPongReport rep;
  rep.min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.disks.size(); ++i) {
    const Disk* di[2] = {&g.disks[i].minus, &g.disks[i].plus};
    for (std::size_t j = i; j < g.disks.size(); ++j) {
      const Disk* dj[2] = {&g.disks[j].minus, &g.disks[j].plus};
      for (int a = 0; a < 2; ++a) {
        for (int b = (i == j ? a + 1 : 0); b < 2; ++b) {
          if (g.extended && static_cast<int>(i) == g.parabolic_index && i == j) continue;
          double gap = std::abs(di[a]->center - dj[b]->center) -
                       (di[a]->radius + dj[b]->radius);
          rep.min_gap = std::min(rep.min_gap, gap);
        }
      }
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-M_PI, M_PI);
  rep.ok = rep.min_gap > 0.0;
  for (int gi = 0; gi < g.rank(); ++gi) {
    for (int sign = 0; sign < 2; ++sign) {
      const Isometry& m = sign == 0 ? g.generators[gi] : g.inverses[gi];
      const Disk& source = sign == 0 ? g.disks[gi].minus : g.disks[gi].plus;
      const Disk& target = sign == 0 ? g.disks[gi].plus : g.disks[gi].minus;
      double tol = 1e-9 * (1.0 + std::abs(target.center) + target.radius);
      int done = 0;
      while (done < samples_per_gen) {
        double theta = unif(rng);
        BoundaryPoint x = BoundaryPoint::real(std::tan(0.5 * theta));
        if (source.contains_boundary(x, tol)) continue;
        ++done;
        ++rep.samples;
        BoundaryPoint y = apply_boundary(m, x);
        double viol = y.at_infinity
                          ? std::numeric_limits<double>::infinity()
                          : std::max(0.0, std::abs(y.value - target.center) - target.radius);
        rep.max_violation = std::max(rep.max_violation, viol);
        if (viol > tol) rep.ok = false;
      }
      BoundaryPoint y = apply_boundary(m, BoundaryPoint::infinity());
      double viol = y.at_infinity
                        ? std::numeric_limits<double>::infinity()
                        : std::max(0.0, std::abs(y.value - target.center) - target.radius);
      rep.max_violation = std::max(rep.max_violation, viol);
      if (viol > tol) rep.ok = false;
      ++rep.samples;
    }
  }
  if (!rep.ok) rep.detail = "disk disjointness or mapping containment violated";
  return rep;
}

namespace {
// Smallest p >= 1 with m^p z outside `source`; the landing point is then
// outside both disks of the pair.
std::pair<long long, HPoint> accelerate_out(const Isometry& m, const Disk& source, HPoint z,
                                            int* guard) {
  long long lo = 0;
  long long hi = 1;
  HPoint zhi = apply_isometry(m, z);
  while (source.contains_point(zhi)) {
    lo = hi;
    if (hi > (1ll << 60)) raise(errc::reduction_limit, "fd reduction power overflow");
    hi *= 2;
    zhi = apply_isometry(m.pow(hi), z);
    if (++(*guard) > 400) raise(errc::reduction_limit, "fd reduction stuck");
  }
  while (hi - lo > 1) {
    long long mid = lo + (hi - lo) / 2;
    HPoint zm = apply_isometry(m.pow(mid), z);
    if (source.contains_point(zm)) {
      lo = mid;
    } else {
      hi = mid;
      zhi = zm;
    }
    if (++(*guard) > 400) raise(errc::reduction_limit, "fd reduction stuck");
  }
  return {hi, zhi};
}
}  // namespace

ReduceResult reduce_to_fd(const SchottkyGroup& g, HPoint z, int step_cap) {
  ReduceResult out;
  out.point = z;
  int guard = 0;
  for (;;) {
    int move = 0;
    const Disk* source = nullptr;
    for (int i = 0; i < g.rank(); ++i) {
      if (g.disks[i].plus.contains_point(out.point)) {
        move = -(i + 1);
        source = &g.disks[i].plus;
        break;
      }
      if (g.disks[i].minus.contains_point(out.point)) {
        move = i + 1;
        source = &g.disks[i].minus;
        break;
      }
    }
    if (move == 0) return out;
    if (out.steps >= step_cap)
      raise(errc::reduction_limit, "fd reduction exceeded the step cap");
    const Isometry& m = g.letter_matrix(move);
    auto [p, zp] = accelerate_out(m, *source, out.point, &guard);
    out.point = zp;
    out.moves.emplace_back(move, p);
    ++out.steps;
  }
}

std::vector<Isometry> neighbor_matrices(const SchottkyGroup& g, int depth) {
  std::vector<Isometry> out;
  out.emplace_back();
  for (int n = 1; n <= depth; ++n) {
    enumerate_reduced_words(g.rank(), n,
                            [&](const Word& w) { out.push_back(g.word_matrix(w)); });
  }
  return out;
}

double quotient_point_dist(const HPoint& z, const HPoint& w, const SchottkyGroup& g,
                           int depth) {
  const HPoint zf = reduce_to_fd(g, z).point;
  const HPoint wf = reduce_to_fd(g, w).point;
  const std::vector<Isometry> nb = neighbor_matrices(g, depth);
  std::vector<HPoint> wi(nb.size());
  for (std::size_t i = 0; i < nb.size(); ++i) wi[i] = apply_isometry(nb[i], wf);
  double best = std::numeric_limits<double>::infinity();
  for (const Isometry& u : nb) {
    const HPoint zu = apply_isometry(u, zf);
    for (const HPoint& wv : wi) best = std::min(best, hyp_cosh_excess(zu, wv));
  }
  return dist_from_excess(best);
}

}  // namespace orbitherm
