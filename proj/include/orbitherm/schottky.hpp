#pragma once
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "orbitherm/hyperbolic.hpp"

namespace orbitherm {

// A word is a sequence of signed 1-based letters: +i is generator i, -i its
// inverse.
using Word = std::vector<int>;

inline int inverse_letter(int l) { return -l; }
// Rank used for canonical (lexicographic) order: g1 < g1^-1 < g2 < g2^-1 < ...
inline int letter_rank(int l) { return 2 * (std::abs(l) - 1) + (l < 0 ? 1 : 0); }

bool is_reduced(const Word& w);
bool is_cyclically_reduced(const Word& w);
Word canonical_rotation(const Word& w);
int primitive_period(const Word& w);  // smallest p | n with w invariant under rotation by p
Word word_power(const Word& w, int j);
Word inverse_word(const Word& w);
std::string word_label(const Word& w);

// Number of cyclically reduced words of length n in the free group of rank k.
std::int64_t count_cyclically_reduced(int k, int n);

// All reduced words of length exactly n over rank-k letters.
void enumerate_reduced_words(int k, int n, const std::function<void(const Word&)>& fn);

struct CyclicClass {
  Word rep;  // canonical (lexicographically least) rotation
  int mult;  // primitive period = number of distinct rotations
};

// Cyclic conjugacy classes of cyclically reduced words of length n, sorted.
std::vector<CyclicClass> enumerate_cyclic_classes(int k, int n, std::int64_t word_cap);

struct GeneratorDisks {
  Disk minus;  // g maps the exterior of `minus` onto the interior of `plus`
  Disk plus;
};

struct SchottkyGroup {
  std::vector<Isometry> generators;
  std::vector<Isometry> inverses;
  std::vector<GeneratorDisks> disks;
  HPoint basepoint{0.0, 1.0};
  bool extended = false;
  int parabolic_index = -1;  // 0-based, only in extended mode

  int rank() const { return static_cast<int>(generators.size()); }
  const Isometry& letter_matrix(int l) const {
    return l > 0 ? generators[l - 1] : inverses[-l - 1];
  }
  Isometry word_matrix(const Word& w) const;
};

// Builds a Schottky group on the given generators with disks taken from the
// isometric circles; validates disjointness and the basepoint location.
SchottkyGroup make_schottky(const std::vector<Isometry>& gens, HPoint basepoint = {0.0, 1.0});

// Extended variant: prepends the parabolic z -> z / (s z + 1) whose paired
// disks are tangent at 0, followed by the hyperbolic generators.
SchottkyGroup make_extended_schottky(double s, const std::vector<Isometry>& hyperbolic_gens,
                                     HPoint basepoint = {0.0, 1.0});

// Replaces the hyperbolic generators' disks with user-supplied ones and
// revalidates disjointness and the basepoint location (the parabolic tangent
// pair of an extended group stays derived).
void override_disks(SchottkyGroup& g, const std::vector<GeneratorDisks>& disks);

// Subgroup on powered generators (index is 1-based); disks for powered
// letters are the isometric circles of the powered matrices.
struct PoweredGen {
  int index = 1;
  int power = 1;
};
SchottkyGroup make_subgroup(const SchottkyGroup& g, const std::vector<PoweredGen>& gens);
// Nested family ( h1, h2^{2^n} ).
SchottkyGroup nested_subgroup(const SchottkyGroup& g, int i1, int i2, int n);
SchottkyGroup nested_subgroup(const Isometry& h1, const Isometry& h2, int n,
                              HPoint basepoint = {0.0, 1.0});

struct PingPongReport {
  bool ok = false;
  double min_gap = 0.0;        // smallest boundary gap between distinct disks
  double max_violation = 0.0;  // worst mapping violation observed
  int samples = 0;
  std::string detail;
};
PingPongReport check_ping_pong(const SchottkyGroup& g, int samples_per_gen = 256,
                               std::uint64_t seed = 1);

struct ReduceResult {
  HPoint point;
  // Moves applied, most recent last: (letter, power) with the convention that
  // the reduced point equals  letter^power * ... * z.
  std::vector<std::pair<int, long long>> moves;
  int steps = 0;
};
// Moves z to the fundamental domain (exterior of all disks); each
// power-accelerated move counts as one step against the cap.
ReduceResult reduce_to_fd(const SchottkyGroup& g, HPoint z, int step_cap = 64);

// Reduced words of length <= depth as matrices (identity first); used as the
// neighbor set for quotient distances.
std::vector<Isometry> neighbor_matrices(const SchottkyGroup& g, int depth);

// Distance between the images of z and w on the quotient surface, approximated
// as min over reduced words u, v of length <= depth of d(u z', v w') with z',
// w' the fundamental-domain representatives.
double quotient_point_dist(const HPoint& z, const HPoint& w, const SchottkyGroup& g,
                           int depth = 2);

}  // namespace orbitherm
