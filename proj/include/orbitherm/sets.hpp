#pragma once
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "orbitherm/hyperbolic.hpp"
#include "orbitherm/schottky.hpp"

namespace orbitherm {

// Grammar of flow-invariant compact sets: closed orbits, the recurrent core of
// a Schottky subgroup (all closed orbits of short subgroup words), the flip
// image of a set, and finite unions.
struct InvariantSetSpec {
  enum class Kind { ClosedOrbit, SubgroupCore, Flipped, Union };
  Kind kind = Kind::ClosedOrbit;
  Word word;                          // ClosedOrbit
  std::vector<PoweredGen> gens;       // SubgroupCore
  int sample_depth = 3;               // SubgroupCore: max subgroup word length
  std::vector<InvariantSetSpec> parts;  // Union (>=1), Flipped (exactly 1)

  static InvariantSetSpec closed_orbit(Word w);
  static InvariantSetSpec subgroup_core(std::vector<PoweredGen> gens, int depth);
  static InvariantSetSpec flipped(InvariantSetSpec inner);
  static InvariantSetSpec unite(std::vector<InvariantSetSpec> parts);
};

// A canonical form: every spec flattens to a union of possibly-flipped atomic
// leaves (ClosedOrbit / SubgroupCore), with flips pushed to the leaves.
struct SetTerm {
  std::size_t atomic = 0;  // index into SetStore
  bool flipped = false;
};
struct CompiledSet {
  std::vector<SetTerm> terms;
  bool operator==(const CompiledSet& o) const;
  bool flip_symmetric() const;   // set of terms invariant under flipping all
  CompiledSet flipped() const;   // flip every term, renormalized
  std::string key() const;       // canonical id string, e.g. "0|~2|1"
};

// One sampled primitive closed geodesic: nodes at arc-length spacing ell/N
// along one period, reduced to the fundamental domain.
struct OrbitSamples {
  Word word;    // primitive, canonical rotation
  double ell = 0.0;
  std::vector<TangentVector> nodes;
};

// Nodes along one period of the axis of the primitive hyperbolic word w,
// spaced ell/ceil(ell/step) apart, each reduced to the fundamental domain.
OrbitSamples closed_geodesic_from_word(const SchottkyGroup& g, const Word& w, double step);

struct SampledSet {
  std::vector<OrbitSamples> orbits;
  std::size_t node_count() const;
};

// Materializes a spec as explicit samples: closed orbits and subgroup cores
// are sampled at the given arc-length step, Flipped flips every sample, and
// Union concatenates parts.
SampledSet sample_invariant_set(const SchottkyGroup& g, const InvariantSetSpec& spec,
                                double step);

// One-off distance from v to a materialized set (builds a throwaway index).
double dist_to_invariant_set(const TangentVector& v, const SampledSet& set,
                             const SchottkyGroup& g, int neighbor_depth = 2,
                             int grid_steps = 33);

// Distance queries against one sampled atomic set under the quotient bundle
// metric d(v, u) = min over deck words w of max over t in [0,1] of the base
// distance between the flowed frames, with cluster pruning.
class SetDistanceIndex {
 public:
  SetDistanceIndex() = default;
  SetDistanceIndex(const SchottkyGroup& g, const SampledSet& set, int neighbor_depth,
                   int grid_steps, int cluster_size = 16);
  // Smallest sampled quotient bundle distance from v to the set.  If cutoff is
  // finite the search may stop early once the minimum is proven >= cutoff and
  // then returns cutoff.
  double query(const TangentVector& v,
               double cutoff = std::numeric_limits<double>::infinity()) const;
  double query_flipped(const TangentVector& v,
                       double cutoff = std::numeric_limits<double>::infinity()) const;
  std::size_t node_count() const { return t0_.size() / (2 * neighbors_); }

 private:
  std::size_t neighbors_ = 0;
  int grid_ = 0;
  std::vector<double> egrid_;      // e^{t_j}
  std::vector<double> frames_;     // [w][node] row-major 4 doubles (a,b,c,d)
  std::vector<double> t0_;         // [w][node] 2 doubles: base at t=0
  // Two pruning tiers: clusters of consecutive nodes and superclusters of
  // consecutive clusters, each with a flow-uniform covering radius.
  struct Cluster {
    std::size_t begin = 0, end = 0, center = 0;
    double cosh_rho = 1.0, sinh_rho = 0.0;
  };
  struct SuperCluster {
    std::size_t cbegin = 0, cend = 0, center = 0;
    double cosh_rho = 1.0, sinh_rho = 0.0;
  };
  std::vector<Cluster> clusters_;
  std::vector<SuperCluster> supers_;
};

// Dedupes atomic leaves (by canonical content), owns their samples and
// indexes, and compiles specs against the shared pool.
class SetStore {
 public:
  SetStore(const SchottkyGroup& g, double set_step, int neighbor_depth, int grid_steps,
           int cluster_size = 16);
  CompiledSet compile(const InvariantSetSpec& spec);
  const SampledSet& samples(std::size_t atomic) const { return samples_[atomic]; }
  std::size_t atomic_count() const { return samples_.size(); }
  // Subgroup cores carry every orbit together with its reversal, realized as
  // exact pointwise flips, so their sample clouds are flip-invariant and the
  // flipped distance coincides with the plain one.
  bool atomic_flip_symmetric(std::size_t atomic) const { return symmetric_[atomic]; }
  // Flip a compiled set, dropping flips on symmetric atoms (canonical form).
  CompiledSet flip_set(const CompiledSet& set) const;
  // Build the distance indexes for every term of the set.  Must be called
  // before distance(); queries themselves are const and thread-safe.
  void prepare(const CompiledSet& set);
  // Distance from v to a compiled union: min over terms.
  double distance(const TangentVector& v, const CompiledSet& set,
                  double cutoff = std::numeric_limits<double>::infinity()) const;
  // Smallest sampled quotient distance between two compiled sets (every node
  // of b queried against a); a sound disjointness check for r-neighborhoods.
  double set_separation(const CompiledSet& a, const CompiledSet& b, double cutoff);
  const SchottkyGroup& group() const { return group_; }

 private:
  std::size_t intern_atomic(const InvariantSetSpec& leaf);
  const SchottkyGroup& group_;
  double set_step_;
  int neighbor_depth_, grid_steps_, cluster_size_;
  std::vector<std::string> keys_;
  std::vector<SampledSet> samples_;
  std::vector<bool> symmetric_;
  std::vector<std::unique_ptr<SetDistanceIndex>> indexes_;
};

}  // namespace orbitherm
