#include "orbitherm/sets.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "orbitherm/errors.hpp"

namespace orbitherm {

InvariantSetSpec InvariantSetSpec::closed_orbit(Word w) {
  InvariantSetSpec s;
  s.kind = Kind::ClosedOrbit;
  s.word = std::move(w);
  return s;
}
InvariantSetSpec InvariantSetSpec::subgroup_core(std::vector<PoweredGen> gens, int depth) {
  InvariantSetSpec s;
  s.kind = Kind::SubgroupCore;
  s.gens = std::move(gens);
  s.sample_depth = depth;
  return s;
}
InvariantSetSpec InvariantSetSpec::flipped(InvariantSetSpec inner) {
  InvariantSetSpec s;
  s.kind = Kind::Flipped;
  s.parts.push_back(std::move(inner));
  return s;
}
InvariantSetSpec InvariantSetSpec::unite(std::vector<InvariantSetSpec> parts) {
  require(!parts.empty(), errc::invalid_spec, "empty union");
  InvariantSetSpec s;
  s.kind = Kind::Union;
  s.parts = std::move(parts);
  return s;
}

bool CompiledSet::operator==(const CompiledSet& o) const {
  return key() == o.key();
}

CompiledSet CompiledSet::flipped() const {
  CompiledSet f;
  for (const auto& t : terms) f.terms.push_back({t.atomic, !t.flipped});
  std::sort(f.terms.begin(), f.terms.end(), [](const SetTerm& x, const SetTerm& y) {
    return x.atomic != y.atomic ? x.atomic < y.atomic : x.flipped < y.flipped;
  });
  return f;
}

bool CompiledSet::flip_symmetric() const { return key() == flipped().key(); }

std::string CompiledSet::key() const {
  std::vector<std::string> parts;
  for (const auto& t : terms) {
    std::string p = t.flipped ? "~" : "";
    p += std::to_string(t.atomic);
    parts.push_back(p);
  }
  std::sort(parts.begin(), parts.end());
  parts.erase(std::unique(parts.begin(), parts.end()), parts.end());
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += '|';
    out += parts[i];
  }
  return out;
}

std::size_t SampledSet::node_count() const {
  std::size_t n = 0;
  for (const auto& o : orbits) n += o.nodes.size();
  return n;
}

namespace {

// Total deck transformation of a reduction move list.
Isometry moves_isometry(const SchottkyGroup& g, const ReduceResult& red) {
  Isometry total;
  for (const auto& [letter, power] : red.moves)
    total = g.letter_matrix(letter).pow(power) * total;
  return total;
}

TangentVector reduce_tangent(const SchottkyGroup& g, const TangentVector& v, int step_cap) {
  ReduceResult red = reduce_to_fd(g, v.base, step_cap);
  if (red.moves.empty()) return v;
  return apply_tangent(moves_isometry(g, red), v);
}

}  // namespace

OrbitSamples closed_geodesic_from_word(const SchottkyGroup& g, const Word& w, double step) {
  require(!w.empty() && is_cyclically_reduced(w), errc::invalid_spec,
          "closed geodesic needs a cyclically reduced word");
  require(step > 0.0, errc::invalid_config, "sampling step must be positive");
  Word prim(w.begin(), w.begin() + primitive_period(w));
  prim = canonical_rotation(prim);

  const Isometry m = g.word_matrix(prim);
  IsometryClass cls = classify_isometry(m, true);
  require(cls.kind == IsoKind::Hyperbolic, errc::not_closed_geodesic,
          "word is not hyperbolic; no closed geodesic");
  require(!cls.axis->xi_minus.at_infinity && !cls.axis->xi_plus.at_infinity,
          errc::not_closed_geodesic, "axis endpoint at infinity");
  const double u = cls.axis->xi_minus.value;
  const double v = cls.axis->xi_plus.value;
  const double ell = *cls.length;

  // Moebius map sending the upward vertical through i to the axis (u -> v).
  Isometry T = v > u ? Isometry(v, u, 1.0, 1.0) : Isometry(v, -u, 1.0, -1.0);

  OrbitSamples out;
  out.word = prim;
  out.ell = ell;
  const int n = static_cast<int>(std::ceil(ell / step));
  const double h = ell / n;
  out.nodes.reserve(n);
  for (int j = 0; j < n; ++j) {
    const double e_s = std::exp(j * h);
    TangentVector node = apply_tangent(T, TangentVector{{0.0, e_s}, M_PI / 2.0});
    out.nodes.push_back(reduce_tangent(g, node, 64));
  }
  return out;
}

namespace {

Word expand_powered(const std::vector<PoweredGen>& gens, const Word& subgroup_word) {
  Word out;
  for (int l : subgroup_word) {
    const PoweredGen& pg = gens[static_cast<std::size_t>(std::abs(l)) - 1];
    const int ambient = l > 0 ? pg.index : -pg.index;
    for (int i = 0; i < pg.power; ++i) out.push_back(ambient);
  }
  return out;
}

std::string word_key(const Word& w) {
  std::string k;
  for (int l : w) k.push_back(static_cast<char>(l + 16));
  return k;
}

// Sample all primitive closed orbits of subgroup words up to sample_depth.
// Inverse words are realized as pointwise flips of their partner's nodes so
// the sample cloud is exactly flip-equivariant.
SampledSet sample_subgroup_core(const SchottkyGroup& g, const InvariantSetSpec& spec,
                                double step) {
  require(!spec.gens.empty(), errc::invalid_spec, "subgroup core needs generators");
  for (const auto& pg : spec.gens) {
    require(pg.index >= 1 && pg.index <= g.rank(), errc::invalid_spec,
            "subgroup generator index out of range");
    require(pg.power >= 1, errc::invalid_spec, "subgroup generator power must be >= 1");
  }
  require(spec.sample_depth >= 1, errc::invalid_config, "sample_depth must be >= 1");

  const int r = static_cast<int>(spec.gens.size());
  std::vector<CyclicClass> classes;
  for (int n = 1; n <= spec.sample_depth; ++n) {
    auto level = enumerate_cyclic_classes(r, n, 100000000);
    classes.insert(classes.end(), level.begin(), level.end());
  }

  SampledSet set;
  std::map<std::string, std::size_t> sampled;  // primitive ambient key -> orbit index
  for (const auto& cls : classes) {
    Word ambient = expand_powered(spec.gens, cls.rep);
    Word prim = canonical_rotation(
        Word(ambient.begin(), ambient.begin() + primitive_period(ambient)));
    const std::string key = word_key(prim);
    if (sampled.count(key)) continue;

    const Word inv_prim = canonical_rotation(inverse_word(prim));
    auto partner = sampled.find(word_key(inv_prim));
    if (partner != sampled.end()) {
      OrbitSamples flipped;
      flipped.word = prim;
      flipped.ell = set.orbits[partner->second].ell;
      for (const auto& node : set.orbits[partner->second].nodes)
        flipped.nodes.push_back(flip(node));
      sampled[key] = set.orbits.size();
      set.orbits.push_back(std::move(flipped));
      continue;
    }

    // Pure powers of a parabolic generator are not closed geodesics; skip.
    if (classify_isometry(g.word_matrix(prim)).kind != IsoKind::Hyperbolic) continue;
    sampled[key] = set.orbits.size();
    set.orbits.push_back(closed_geodesic_from_word(g, prim, step));
  }
  require(!set.orbits.empty(), errc::invalid_spec,
          "subgroup core has no closed geodesics");
  return set;
}

inline HPoint flat_flowed_base(const double* f, double E) {
  const double den = f[2] * f[2] * E * E + f[3] * f[3];
  return {(f[0] * f[2] * E * E + f[1] * f[3]) / den, E / den};
}

}  // namespace

SampledSet sample_invariant_set(const SchottkyGroup& g, const InvariantSetSpec& spec,
                                double step) {
  switch (spec.kind) {
    case InvariantSetSpec::Kind::ClosedOrbit: {
      SampledSet set;
      set.orbits.push_back(closed_geodesic_from_word(g, spec.word, step));
      return set;
    }
    case InvariantSetSpec::Kind::SubgroupCore:
      return sample_subgroup_core(g, spec, step);
    case InvariantSetSpec::Kind::Flipped: {
      require(spec.parts.size() == 1, errc::invalid_spec, "Flipped takes exactly one part");
      SampledSet set = sample_invariant_set(g, spec.parts[0], step);
      for (auto& orbit : set.orbits) {
        orbit.word = canonical_rotation(inverse_word(orbit.word));
        for (auto& node : orbit.nodes) node = flip(node);
      }
      return set;
    }
    case InvariantSetSpec::Kind::Union: {
      require(!spec.parts.empty(), errc::invalid_spec, "Union needs at least one part");
      SampledSet set;
      for (const auto& part : spec.parts) {
        SampledSet sub = sample_invariant_set(g, part, step);
        for (auto& orbit : sub.orbits) set.orbits.push_back(std::move(orbit));
      }
      return set;
    }
  }
  raise(errc::internal, "unhandled set kind");
}

double dist_to_invariant_set(const TangentVector& v, const SampledSet& set,
                             const SchottkyGroup& g, int neighbor_depth, int grid_steps) {
  SetDistanceIndex index(g, set, neighbor_depth, grid_steps);
  return index.query(v);
}

SetDistanceIndex::SetDistanceIndex(const SchottkyGroup& g, const SampledSet& set,
                                   int neighbor_depth, int grid_steps, int cluster_size) {
  require(grid_steps >= 2, errc::invalid_config, "grid_steps must be >= 2");
  require(cluster_size >= 1, errc::invalid_config, "cluster size must be >= 1");
  grid_ = grid_steps;
  egrid_.resize(grid_steps);
  for (int j = 0; j < grid_steps; ++j)
    egrid_[j] = std::exp(static_cast<double>(j) / (grid_steps - 1));

  std::vector<Eigen::Matrix2d> base_frames;
  for (const auto& orbit : set.orbits) {
    const std::size_t begin = base_frames.size();
    for (const auto& node : orbit.nodes) base_frames.push_back(frame_of(node));
    // Clusters never span orbit boundaries.
    for (std::size_t lo = begin; lo < base_frames.size();
         lo += static_cast<std::size_t>(cluster_size)) {
      Cluster c;
      c.begin = lo;
      c.end = std::min(lo + cluster_size, base_frames.size());
      c.center = (c.begin + c.end) / 2;
      clusters_.push_back(c);
    }
  }
  const std::size_t n_nodes = base_frames.size();
  require(n_nodes > 0, errc::invalid_spec, "cannot index an empty sample set");

  // The flow-uniform gap D(u, w) = max over grid times of the base distance
  // between the flowed frames is a metric and is deck-invariant, so one radius
  // per cluster covers every translate.
  auto flow_gap = [&](std::size_t i, std::size_t j) {
    double worst = 0.0;
    for (int t = 0; t < grid_; ++t) {
      const HPoint a = flowed_base(base_frames[i], egrid_[t]);
      const HPoint b = flowed_base(base_frames[j], egrid_[t]);
      worst = std::max(worst, hyp_cosh_excess(a, b));
    }
    return dist_from_excess(worst);
  };
  std::vector<double> cluster_rho(clusters_.size(), 0.0);
  for (std::size_t c = 0; c < clusters_.size(); ++c) {
    double rho = 0.0;
    for (std::size_t i = clusters_[c].begin; i < clusters_[c].end; ++i)
      rho = std::max(rho, flow_gap(i, clusters_[c].center));
    cluster_rho[c] = rho;
    clusters_[c].cosh_rho = std::cosh(rho);
    clusters_[c].sinh_rho = std::sinh(rho);
  }
  // Second pruning tier: runs of consecutive clusters.
  const std::size_t run = 16;
  for (std::size_t lo = 0; lo < clusters_.size(); lo += run) {
    SuperCluster s;
    s.cbegin = lo;
    s.cend = std::min(lo + run, clusters_.size());
    s.center = clusters_[(s.cbegin + s.cend) / 2].center;
    double rho = 0.0;
    for (std::size_t c = s.cbegin; c < s.cend; ++c)
      rho = std::max(rho, flow_gap(clusters_[c].center, s.center) + cluster_rho[c]);
    s.cosh_rho = std::cosh(rho);
    s.sinh_rho = std::sinh(rho);
    supers_.push_back(s);
  }

  const auto neighbors = neighbor_matrices(g, neighbor_depth);
  neighbors_ = neighbors.size();
  frames_.resize(neighbors_ * n_nodes * 4);
  t0_.resize(neighbors_ * n_nodes * 2);
  for (std::size_t w = 0; w < neighbors_; ++w) {
    for (std::size_t i = 0; i < n_nodes; ++i) {
      const Eigen::Matrix2d m = neighbors[w].matrix() * base_frames[i];
      double* f = &frames_[(w * n_nodes + i) * 4];
      f[0] = m(0, 0);
      f[1] = m(0, 1);
      f[2] = m(1, 0);
      f[3] = m(1, 1);
      const HPoint p = flat_flowed_base(f, 1.0);
      t0_[(w * n_nodes + i) * 2] = p.x;
      t0_[(w * n_nodes + i) * 2 + 1] = p.y;
    }
  }
}

namespace {

// Excess form of the lower bound d0 - rho: cosh(d0 - rho) - 1, valid for
// pruning only when d0 >= rho (checked through 1 + e0 >= cosh rho).
inline bool prune_ball(double e0, double cosh_rho, double sinh_rho, double best_excess) {
  if (1.0 + e0 < cosh_rho) return false;
  return (1.0 + e0) * cosh_rho - std::sqrt(e0 * (e0 + 2.0)) * sinh_rho - 1.0 >=
         best_excess;
}

}  // namespace

double SetDistanceIndex::query(const TangentVector& v, double cutoff) const {
  const std::size_t n_nodes = node_count();
  const Eigen::Matrix2d fv = frame_of(v);
  std::vector<HPoint> vbases(grid_);
  for (int j = 0; j < grid_; ++j) vbases[j] = flowed_base(fv, egrid_[j]);
  const HPoint v0 = vbases[0];

  double best_excess = excess_from_dist(cutoff);
  auto excess_to = [&](std::size_t w, std::size_t node) {
    const double* t0 = &t0_[(w * n_nodes + node) * 2];
    return hyp_cosh_excess(v0, {t0[0], t0[1]});
  };
  auto eval_node = [&](std::size_t w, std::size_t i) {
    const double* f = &frames_[(w * n_nodes + i) * 4];
    double worst = 0.0;
    for (int j = 0; j < grid_; ++j) {
      const double ex = hyp_cosh_excess(vbases[j], flat_flowed_base(f, egrid_[j]));
      if (ex > worst) {
        worst = ex;
        if (worst >= best_excess) return;  // cannot beat the current best
      }
    }
    best_excess = worst;
  };

  // Seed the bound from the nearest translated supercluster center.
  std::size_t seed_w = 0, seed_s = 0;
  double seed_e = std::numeric_limits<double>::infinity();
  for (std::size_t w = 0; w < neighbors_; ++w) {
    for (std::size_t s = 0; s < supers_.size(); ++s) {
      const double e = excess_to(w, supers_[s].center);
      if (e < seed_e) {
        seed_e = e;
        seed_w = w;
        seed_s = s;
      }
    }
  }
  eval_node(seed_w, supers_[seed_s].center);

  for (std::size_t w = 0; w < neighbors_; ++w) {
    for (const SuperCluster& sc : supers_) {
      if (prune_ball(excess_to(w, sc.center), sc.cosh_rho, sc.sinh_rho, best_excess))
        continue;
      for (std::size_t c = sc.cbegin; c < sc.cend; ++c) {
        const Cluster& cl = clusters_[c];
        if (prune_ball(excess_to(w, cl.center), cl.cosh_rho, cl.sinh_rho, best_excess))
          continue;
        for (std::size_t i = cl.begin; i < cl.end; ++i) {
          if (excess_to(w, i) >= best_excess) continue;
          eval_node(w, i);
        }
      }
    }
  }
  return dist_from_excess(best_excess);
}

double SetDistanceIndex::query_flipped(const TangentVector& v, double cutoff) const {
  return query(flip(v), cutoff);
}

SetStore::SetStore(const SchottkyGroup& g, double set_step, int neighbor_depth,
                   int grid_steps, int cluster_size)
    : group_(g),
      set_step_(set_step),
      neighbor_depth_(neighbor_depth),
      grid_steps_(grid_steps),
      cluster_size_(cluster_size) {}

std::size_t SetStore::intern_atomic(const InvariantSetSpec& leaf) {
  std::string key;
  if (leaf.kind == InvariantSetSpec::Kind::ClosedOrbit) {
    Word prim(leaf.word.begin(), leaf.word.begin() + primitive_period(leaf.word));
    key = "orbit:" + word_label(canonical_rotation(prim));
  } else {
    std::ostringstream os;
    os << "core:";
    for (const auto& pg : leaf.gens) os << pg.index << "^" << pg.power << ",";
    os << "d" << leaf.sample_depth;
    key = os.str();
  }
  for (std::size_t i = 0; i < keys_.size(); ++i)
    if (keys_[i] == key) return i;

  SampledSet samples;
  if (leaf.kind == InvariantSetSpec::Kind::ClosedOrbit) {
    require(!leaf.word.empty() && is_cyclically_reduced(leaf.word), errc::invalid_spec,
            "closed orbit word must be cyclically reduced");
    samples.orbits.push_back(closed_geodesic_from_word(group_, leaf.word, set_step_));
  } else {
    samples = sample_subgroup_core(group_, leaf, set_step_);
  }
  keys_.push_back(key);
  samples_.push_back(std::move(samples));
  // Core clouds are exactly flip-invariant (flip-shared reversals); orbit
  // clouds are not, even for palindromic classes, at the discretization level.
  symmetric_.push_back(leaf.kind == InvariantSetSpec::Kind::SubgroupCore);
  indexes_.push_back(nullptr);
  return keys_.size() - 1;
}

CompiledSet SetStore::flip_set(const CompiledSet& set) const {
  CompiledSet f = set.flipped();
  for (auto& t : f.terms)
    if (symmetric_[t.atomic]) t.flipped = false;
  std::sort(f.terms.begin(), f.terms.end(), [](const SetTerm& x, const SetTerm& y) {
    return x.atomic != y.atomic ? x.atomic < y.atomic : x.flipped < y.flipped;
  });
  f.terms.erase(std::unique(f.terms.begin(), f.terms.end(),
                            [](const SetTerm& x, const SetTerm& y) {
                              return x.atomic == y.atomic && x.flipped == y.flipped;
                            }),
                f.terms.end());
  return f;
}

CompiledSet SetStore::compile(const InvariantSetSpec& spec) {
  CompiledSet out;
  // Flatten with flip parity pushed to the leaves.
  std::vector<std::pair<const InvariantSetSpec*, bool>> work{{&spec, false}};
  while (!work.empty()) {
    auto [node, flip_parity] = work.back();
    work.pop_back();
    switch (node->kind) {
      case InvariantSetSpec::Kind::Flipped:
        require(node->parts.size() == 1, errc::invalid_spec,
                "flip must wrap exactly one set");
        work.push_back({&node->parts[0], !flip_parity});
        break;
      case InvariantSetSpec::Kind::Union:
        require(!node->parts.empty(), errc::invalid_spec, "empty union");
        for (const auto& p : node->parts) work.push_back({&p, flip_parity});
        break;
      default: {
        const std::size_t atomic = intern_atomic(*node);
        out.terms.push_back({atomic, flip_parity && !symmetric_[atomic]});
      }
    }
  }
  std::sort(out.terms.begin(), out.terms.end(), [](const SetTerm& x, const SetTerm& y) {
    return x.atomic != y.atomic ? x.atomic < y.atomic : x.flipped < y.flipped;
  });
  out.terms.erase(std::unique(out.terms.begin(), out.terms.end(),
                              [](const SetTerm& x, const SetTerm& y) {
                                return x.atomic == y.atomic && x.flipped == y.flipped;
                              }),
                  out.terms.end());
  return out;
}

void SetStore::prepare(const CompiledSet& set) {
  for (const auto& term : set.terms) {
    require(term.atomic < samples_.size(), errc::internal, "atomic set out of range");
    if (!indexes_[term.atomic])
      indexes_[term.atomic] = std::make_unique<SetDistanceIndex>(
          group_, samples_[term.atomic], neighbor_depth_, grid_steps_, cluster_size_);
  }
}

double SetStore::distance(const TangentVector& v, const CompiledSet& set,
                          double cutoff) const {
  require(!set.terms.empty(), errc::invalid_spec, "distance to an empty set");
  double best = cutoff;
  for (const auto& term : set.terms) {
    require(indexes_[term.atomic] != nullptr, errc::internal,
            "set distance queried before prepare()");
    const SetDistanceIndex& idx = *indexes_[term.atomic];
    const double d = term.flipped ? idx.query_flipped(v, best) : idx.query(v, best);
    best = std::min(best, d);
  }
  return best;
}

double SetStore::set_separation(const CompiledSet& a, const CompiledSet& b, double cutoff) {
  prepare(a);
  double best = cutoff;
  for (const auto& term : b.terms) {
    const SampledSet& set = samples_[term.atomic];
    for (const auto& orbit : set.orbits) {
      for (const auto& node : orbit.nodes) {
        const TangentVector probe = term.flipped ? flip(node) : node;
        best = std::min(best, distance(probe, a, best));
      }
    }
  }
  return best;
}

}  // namespace orbitherm
