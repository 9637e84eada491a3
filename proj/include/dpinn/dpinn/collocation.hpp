#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dpinn/dpinn/model.hpp"
#include "dpinn/util/random.hpp"

namespace dpinn {

enum class CollocationMode { uniform, random };

inline std::string_view to_string(CollocationMode m) { return m == CollocationMode::random ? "random" : "uniform"; }

inline CollocationMode parse_collocation_mode(std::string_view s) {
  if (s == "uniform") return CollocationMode::uniform;
  if (s == "random") return CollocationMode::random;
  throw Error(ErrorKind::invalid_input, "unknown collocation mode '" + std::string(s) + "'");
}

/// n evenly spaced values on [lo, hi] (with the ends) or strictly inside it.
inline std::vector<double> linspace(Range r, int n, bool include_edges) {
  std::vector<double> v(static_cast<std::size_t>(n));
  if (n == 1) {
    v[0] = include_edges ? r.lo : 0.5 * (r.lo + r.hi);
    return v;
  }
  for (int k = 0; k < n; ++k) {
    v[static_cast<std::size_t>(k)] = include_edges ? r.lo + r.length() * k / (n - 1)
                                                   : r.lo + r.length() * (k + 1) / (n + 1);
  }
  if (include_edges) v.back() = r.hi;
  return v;
}

namespace detail {

inline std::vector<double> axis_samples(Range r, int n, CollocationMode mode, bool include_edges, Rng& rng) {
  if (mode == CollocationMode::uniform) return linspace(r, n, include_edges);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = rng.uniform(r.lo, r.hi);
  if (include_edges) {
    v.front() = r.lo;
    if (n > 1) v.back() = r.hi;
  }
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace detail

/// Collocation points for every block: a tensor product of per-axis samples
/// (x only for steady grids). Random draws are keyed on (seed, call_index,
/// block) so a rerun reproduces them.
inline std::vector<std::vector<Point>> sample_collocation(const BlockGrid& grid, int nbx_pts, int nbt_pts,
                                                          CollocationMode mode, bool include_edges,
                                                          std::uint64_t seed, std::uint64_t call_index = 0) {
  if (nbx_pts < 1 || nbt_pts < 1) throw Error(ErrorKind::invalid_config, "collocation counts must be at least 1");
  const bool two_d = grid.t.length() > 0.0;
  std::vector<std::vector<Point>> out(static_cast<std::size_t>(grid.count()));
  for (int b = 0; b < grid.count(); ++b) {
    Rng rng(derive_seed(seed, {call_index, static_cast<std::uint64_t>(b)}));
    const auto xs = detail::axis_samples(grid.block_x(grid.column(b)), nbx_pts, mode, include_edges, rng);
    auto& pts = out[static_cast<std::size_t>(b)];
    if (!two_d) {
      for (double x : xs) pts.push_back({x, 0.0});
      continue;
    }
    const auto ts = detail::axis_samples(grid.block_t(grid.row(b)), nbt_pts, mode, include_edges, rng);
    pts.reserve(xs.size() * ts.size());
    for (double x : xs)
      for (double t : ts) pts.push_back({x, t});
  }
  return out;
}

}  // namespace dpinn
