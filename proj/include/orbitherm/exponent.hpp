#pragma once
#include <cstdint>
#include <vector>

#include "orbitherm/schottky.hpp"

namespace orbitherm {

struct CriticalExponentEstimate {
  double delta_hat = 0.0;
  double uncertainty = 0.0;
  std::vector<double> shell_roots;  // per-shell-ratio roots, deepest last
  int shells_used = 0;
};

// Partial Poincare series at exponent s, split by word length:
// shells[m] = sum over reduced words of length exactly m of exp(-s * d(o, w o)),
// shells[0] = 1 (the identity), partial = their total.
struct PoincareShellSums {
  std::vector<double> shells;
  double partial = 0.0;
};
PoincareShellSums poincare_shell_sums(const SchottkyGroup& g, double s, int max_len);

// Non-elementary estimate from Poincare shell sums: the root in s of
// S_m(s) = S_{m-1}(s) for the deepest shell pairs, Aitken-accelerated; the
// uncertainty is the spread of the deepest ratio roots.
CriticalExponentEstimate critical_exponent_estimate(const SchottkyGroup& g, int shell_len,
                                                    int threads,
                                                    std::int64_t word_cap = 100000000);

// Elementary (cyclic) estimate from orbital counting along powers: the slope
// log(n2/n1) / (d(o, g^{n2} o) - d(o, g^{n1} o)).
CriticalExponentEstimate cyclic_exponent_estimate(const Isometry& g, int n_max = 256,
                                                  HPoint basepoint = {0.0, 1.0});

}  // namespace orbitherm
