#pragma once

// Brute-force reference for the signed-rank test: ranks by direct counting,
// then every one of the 2^n sign patterns.

#include <cmath>
#include <cstdint>
#include <vector>

namespace vtest {

struct OracleResult {
  double w_plus = 0.0;
  double p_two_sided = 1.0;
  std::size_t n_effective = 0;
};

inline OracleResult brute_force_signed_rank(const std::vector<double>& pre,
                                            const std::vector<double>& post) {
  std::vector<double> d;
  for (std::size_t i = 0; i < pre.size(); ++i) {
    if (post[i] - pre[i] != 0.0) d.push_back(post[i] - pre[i]);
  }
  const std::size_t n = d.size();
  // Twice the mid-rank: 2 * (#smaller) + (#equal including self) + 1.
  std::vector<std::int64_t> r2(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::int64_t smaller = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::fabs(d[j]) < std::fabs(d[i])) ++smaller;
      if (std::fabs(d[j]) == std::fabs(d[i])) ++equal;
    }
    r2[i] = 2 * smaller + equal + 1;
  }
  std::int64_t total2 = 0, obs2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += r2[i];
    if (d[i] > 0) obs2 += r2[i];
  }
  const std::int64_t obs_dev = std::llabs(2 * obs2 - total2);
  std::uint64_t extreme = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    std::int64_t w2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (std::uint64_t{1} << i)) w2 += r2[i];
    }
    if (std::llabs(2 * w2 - total2) >= obs_dev) ++extreme;
  }
  OracleResult out;
  out.n_effective = n;
  out.w_plus = static_cast<double>(obs2) / 2.0;
  out.p_two_sided = static_cast<double>(extreme) / std::ldexp(1.0, static_cast<int>(n));
  if (out.p_two_sided > 1.0) out.p_two_sided = 1.0;
  return out;
}

}  // namespace vtest
