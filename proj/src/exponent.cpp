#include "orbitherm/exponent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "orbitherm/errors.hpp"
#include "orbitherm/parallel.hpp"

namespace orbitherm {
namespace {

constexpr int kStoredShells = 4;

// Displacements d(o, w o) for all reduced words in the deepest kStoredShells
// shells, laid out per shell in depth-first enumeration order so the layout is
// independent of the thread count.
struct ShellTable {
  int shell_len = 0;
  int first_stored = 0;                        // shallowest stored shell
  std::vector<std::vector<double>> disp;       // disp[m - first_stored]
};

std::int64_t shell_count(int two_k, int m) {
  std::int64_t c = two_k;
  for (int i = 1; i < m; ++i) c *= (two_k - 1);
  return c;
}

ShellTable build_shell_table(const SchottkyGroup& g, int shell_len, int threads,
                             std::int64_t word_cap) {
  const int k = g.rank();
  const int two_k = 2 * k;
  require(shell_len >= 5, errc::invalid_config, "shell_len must be at least 5");
  std::int64_t total = 0;
  for (int m = 1; m <= shell_len; ++m) {
    total += shell_count(two_k, m);
    require(total <= word_cap, errc::resource_limit,
            "shell enumeration exceeds the word cap");
  }

  ShellTable table;
  table.shell_len = shell_len;
  table.first_stored = shell_len - (kStoredShells - 1);
  for (int m = table.first_stored; m <= shell_len; ++m)
    table.disp.emplace_back(static_cast<std::size_t>(shell_count(two_k, m)));

  // Letters in rank order; subtree t is the pair (first letter, second choice).
  std::vector<int> letters;
  for (int i = 1; i <= k; ++i) {
    letters.push_back(i);
    letters.push_back(-i);
  }
  std::sort(letters.begin(), letters.end(),
            [](int a, int b) { return letter_rank(a) < letter_rank(b); });

  const HPoint o = g.basepoint;
  const std::int64_t subtrees = static_cast<std::int64_t>(two_k) * (two_k - 1);
  // Words per subtree at depth m >= 2.
  auto subtree_width = [&](int m) {
    std::int64_t w = 1;
    for (int i = 2; i < m; ++i) w *= (two_k - 1);
    return w;
  };

  parallel_for(static_cast<std::size_t>(subtrees), threads, [&](std::size_t t) {
    const int first = letters[t / (two_k - 1)];
    // Second letter: skip the inverse of the first.
    std::size_t c = t % (two_k - 1), seen = 0;
    int second = 0;
    for (int l : letters) {
      if (l == inverse_letter(first)) continue;
      if (seen == c) { second = l; break; }
      ++seen;
    }

    std::vector<std::int64_t> cursor(kStoredShells);
    for (int m = table.first_stored; m <= shell_len; ++m)
      cursor[m - table.first_stored] = static_cast<std::int64_t>(t) * subtree_width(m);

    struct Node { Isometry mat; int last; int depth; };
    std::vector<Node> stack;
    stack.push_back({g.letter_matrix(first) * g.letter_matrix(second), second, 2});
    while (!stack.empty()) {
      Node node = stack.back();
      stack.pop_back();
      if (node.depth >= table.first_stored) {
        table.disp[node.depth - table.first_stored]
            [cursor[node.depth - table.first_stored]++] = orbit_displacement(node.mat, o);
      }
      if (node.depth == shell_len) continue;
      // Push children in reverse rank order so they pop in rank order.
      for (auto it = letters.rbegin(); it != letters.rend(); ++it) {
        if (*it == inverse_letter(node.last)) continue;
        stack.push_back({node.mat * g.letter_matrix(*it), *it, node.depth + 1});
      }
    }
  });

  // Depth-1 and depth-2 words missed when first_stored <= 2 cannot happen
  // (first_stored = shell_len - 3 >= 2), but depth-2 storage is handled above.
  return table;
}

// log S_m(s) for a stored shell, deterministic: fixed 64-way chunked Kahan
// partial sums combined in order, with a max-shift for stability.
double log_shell_sum(const std::vector<double>& disp, double s, int threads) {
  const std::size_t n = disp.size();
  const double mx = -s * *std::min_element(disp.begin(), disp.end());
  constexpr std::size_t kChunks = 64;
  std::vector<double> partial(kChunks, 0.0);
  parallel_for(kChunks, threads, [&](std::size_t c) {
    const std::size_t lo = n * c / kChunks, hi = n * (c + 1) / kChunks;
    KahanAccumulator acc;
    for (std::size_t i = lo; i < hi; ++i) acc.add(std::exp(-s * disp[i] - mx));
    partial[c] = acc.value();
  });
  KahanAccumulator acc;
  for (double p : partial) acc.add(p);
  return mx + std::log(acc.value());
}

}  // namespace

PoincareShellSums poincare_shell_sums(const SchottkyGroup& g, double s, int max_len) {
  require(max_len >= 0, errc::invalid_config, "max_len must be nonnegative");
  PoincareShellSums sums;
  sums.shells.push_back(1.0);  // the identity word
  const HPoint o = g.basepoint;
  std::vector<std::pair<Isometry, int>> layer;  // (matrix, last letter)
  for (int m = 1; m <= max_len; ++m) {
    std::vector<std::pair<Isometry, int>> next;
    KahanAccumulator acc;
    for (int l = -g.rank(); l <= g.rank(); ++l) {
      if (l == 0) continue;
      if (m == 1) {
        next.emplace_back(g.letter_matrix(l), l);
      } else {
        for (const auto& [mat, last] : layer)
          if (l != inverse_letter(last)) next.emplace_back(mat * g.letter_matrix(l), l);
      }
    }
    for (const auto& [mat, last] : next)
      acc.add(std::exp(-s * orbit_displacement(mat, o)));
    sums.shells.push_back(acc.value());
    layer = std::move(next);
  }
  KahanAccumulator total;
  for (double v : sums.shells) total.add(v);
  sums.partial = total.value();
  return sums;
}

CriticalExponentEstimate critical_exponent_estimate(const SchottkyGroup& g, int shell_len,
                                                    int threads, std::int64_t word_cap) {
  require(g.rank() >= 2, errc::invalid_spec,
          "shell estimate needs a non-elementary group");
  ShellTable table = build_shell_table(g, shell_len, threads, word_cap);

  // Root in s of log(S_m(s)/S_{m-1}(s)) = 0 for the deepest shell pairs.
  auto ratio_root = [&](int m) {
    const auto& top = table.disp[m - table.first_stored];
    const auto& below = table.disp[m - 1 - table.first_stored];
    auto f = [&](double s) {
      return log_shell_sum(top, s, threads) - log_shell_sum(below, s, threads);
    };
    double lo = 0.0, hi = 2.0;
    double flo = f(lo), fhi = f(hi);
    require(flo > 0.0, errc::bracket_failure, "shell ratio not expanding at s=0");
    int grow = 0;
    while (fhi > 0.0) {
      require(++grow <= 6, errc::bracket_failure, "shell ratio root above s range");
      hi *= 2.0;
      fhi = f(hi);
    }
    for (int i = 0; i < 60 && hi - lo > 1e-13; ++i) {
      const double mid = 0.5 * (lo + hi);
      (f(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };

  CriticalExponentEstimate est;
  for (int m = table.first_stored + 1; m <= table.shell_len; ++m)
    est.shell_roots.push_back(ratio_root(m));
  est.shells_used = table.shell_len;

  const auto& r = est.shell_roots;  // three roots, deepest last
  const double d1 = r[r.size() - 2] - r[r.size() - 3];
  const double d2 = r.back() - r[r.size() - 2];
  const double den = d2 - d1;
  double accel = r.back();
  if (std::abs(den) > 1e-14 * (std::abs(d1) + std::abs(d2)) && std::abs(d2) < std::abs(d1))
    accel = r.back() - d2 * d2 / den;
  est.delta_hat = accel;
  const double spread = *std::max_element(r.begin(), r.end()) -
                        *std::min_element(r.begin(), r.end());
  est.uncertainty = std::max({spread, std::abs(accel - r.back()), 1e-12});
  return est;
}

CriticalExponentEstimate cyclic_exponent_estimate(const Isometry& g, int n_max,
                                                  HPoint basepoint) {
  require(n_max >= 8, errc::invalid_config, "cyclic estimate needs n_max >= 8");
  auto disp_at = [&](int n) { return orbit_displacement(g.pow(n), basepoint); };
  auto slope = [&](int n1, int n2) {
    const double gap = disp_at(n2) - disp_at(n1);
    require(gap > 1e-9, errc::estimation_failure,
            "orbit displacements do not grow; no cyclic exponent");
    return std::log(static_cast<double>(n2) / n1) / gap;
  };
  CriticalExponentEstimate est;
  const double coarse = slope(n_max / 4, n_max / 2);
  const double fine = slope(n_max / 2, n_max);
  est.delta_hat = fine;
  est.uncertainty = std::max(std::abs(fine - coarse), 1e-12);
  est.shell_roots = {coarse, fine};
  est.shells_used = n_max;
  return est;
}

}  // namespace orbitherm
