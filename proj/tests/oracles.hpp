#pragma once

// Independent reference implementations used by the tests. None of these call
// into the library's algorithms; they work on plain vectors with naive scans.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <vector>

#include "uxpr/volume.hpp"

namespace oracle {

// Zone labeling by breadth-first flood fill.
struct Zones {
  std::vector<int> zone_of;
  std::vector<int> value;
  std::vector<std::size_t> area;
  std::vector<std::set<int>> neighbors;
};

inline Zones flood_zones(const uxpr::Volume& v) {
  const auto& s = v.shape();
  Zones z;
  z.zone_of.assign(v.size(), -1);
  for (std::size_t seed = 0; seed < v.size(); ++seed) {
    if (z.zone_of[seed] >= 0) continue;
    const int id = static_cast<int>(z.value.size());
    z.value.push_back(v[seed]);
    z.area.push_back(0);
    std::deque<std::size_t> queue{seed};
    z.zone_of[seed] = id;
    while (!queue.empty()) {
      const std::size_t i = queue.front();
      queue.pop_front();
      ++z.area[static_cast<std::size_t>(id)];
      uxpr::for_each_neighbor(s, i, [&](std::size_t j) {
        if (z.zone_of[j] < 0 && v[j] == v[i]) {
          z.zone_of[j] = id;
          queue.push_back(j);
        }
      });
    }
  }
  z.neighbors.resize(z.value.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    uxpr::for_each_neighbor(s, i, [&](std::size_t j) {
      const int a = z.zone_of[i], b = z.zone_of[j];
      if (a != b) z.neighbors[static_cast<std::size_t>(a)].insert(b);
    });
  }
  return z;
}

struct ExtremaCount {
  std::size_t maxima = 0;
  std::size_t minima = 0;
  std::size_t small_maxima = 0;  // area <= threshold
  std::size_t small_minima = 0;
};

inline ExtremaCount count_extrema(const uxpr::Volume& v, std::uint64_t threshold = 0) {
  const Zones z = flood_zones(v);
  ExtremaCount c;
  for (std::size_t k = 0; k < z.value.size(); ++k) {
    if (z.neighbors[k].empty()) continue;
    bool above = true, below = true;
    for (int n : z.neighbors[k]) {
      above = above && z.value[k] > z.value[static_cast<std::size_t>(n)];
      below = below && z.value[k] < z.value[static_cast<std::size_t>(n)];
    }
    if (above) {
      ++c.maxima;
      if (z.area[k] <= threshold) ++c.small_maxima;
    }
    if (below) {
      ++c.minima;
      if (z.area[k] <= threshold) ++c.small_minima;
    }
  }
  return c;
}

// 1-D sieve over runs: merge the smallest extremal run (leftmost on ties)
// into its nearest neighbor value, rescanning after every merge.
inline std::vector<int> sieve_runs(std::vector<int> f, std::uint64_t s, bool maxima) {
  for (;;) {
    std::size_t best_start = 0, best_len = 0;
    bool found = false;
    std::size_t i = 0;
    while (i < f.size()) {
      std::size_t j = i;
      while (j < f.size() && f[j] == f[i]) ++j;
      const bool has_l = i > 0, has_r = j < f.size();
      if (has_l || has_r) {
        bool ext = true;
        if (maxima) {
          if (has_l && f[i - 1] >= f[i]) ext = false;
          if (has_r && f[j] >= f[i]) ext = false;
        } else {
          if (has_l && f[i - 1] <= f[i]) ext = false;
          if (has_r && f[j] <= f[i]) ext = false;
        }
        if (ext && j - i <= s && (!found || j - i < best_len)) {
          found = true;
          best_start = i;
          best_len = j - i;
        }
      }
      i = j;
    }
    if (!found) return f;
    const std::size_t a = best_start, b = best_start + best_len;
    int target;
    if (a == 0) {
      target = f[b];
    } else if (b == f.size()) {
      target = f[a - 1];
    } else {
      target = maxima ? std::max(f[a - 1], f[b]) : std::min(f[a - 1], f[b]);
    }
    for (std::size_t k = a; k < b; ++k) f[k] = target;
  }
}

inline std::vector<int> m_filter_1d(const std::vector<int>& f, std::uint64_t s) {
  return sieve_runs(sieve_runs(f, s, true), s, false);
}

// Mann-Whitney statistic by enumerating every positive/negative pair.
inline double pairwise_auroc(const std::vector<int>& labels, const std::vector<double>& scores) {
  double concordant = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] == 1) continue;
      ++pairs;
      if (scores[i] > scores[j]) concordant += 1.0;
      if (scores[i] == scores[j]) concordant += 0.5;
    }
  }
  return concordant / static_cast<double>(pairs);
}

// Per-voxel verdict by listing, for each voxel, the channels that vote for it.
struct VoteSegment {
  int channel;
  std::vector<std::uint32_t> voxels;
  bool electrical;
};

inline std::vector<std::uint8_t> repack_count(const std::vector<VoteSegment>& segs, std::size_t voxel_count) {
  std::vector<std::set<int>> channels(voxel_count);
  for (const auto& s : segs) {
    if (!s.electrical || s.channel <= 0) continue;
    for (auto v : s.voxels) channels[v].insert(s.channel);
  }
  std::vector<std::uint8_t> out(voxel_count);
  for (std::size_t i = 0; i < voxel_count; ++i) out[i] = static_cast<std::uint8_t>(std::min<std::size_t>(2, channels[i].size()));
  return out;
}

}  // namespace oracle
