#pragma once
#include <cstddef>
#include <functional>
#include <vector>

namespace orbitherm {

// Runs body(i) for i in [0, n) on up to `threads` workers. Work is handed out
// in contiguous chunks; bodies must only write to per-index slots so results
// are identical for any thread count. Exceptions are captured and rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

// Compensated serial accumulator; used for all reductions that feed reported
// numbers so that results do not depend on summation order surprises.
struct KahanAccumulator {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

inline double kahan_sum(const std::vector<double>& xs) {
  KahanAccumulator acc;
  for (double x : xs) acc.add(x);
  return acc.value();
}

}  // namespace orbitherm
