#include "uxpr/sieve.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "uxpr/error.hpp"

namespace uxpr {

std::string_view filter_name(FilterKind k) noexcept {
  switch (k) {
    case FilterKind::opening:
      return "opening";
    case FilterKind::closing:
      return "closing";
    case FilterKind::m_filter:
      return "m";
    case FilterKind::n_filter:
      return "n";
  }
  return "?";
}

FilterKind parse_filter_kind(std::string_view text) {
  if (text == "o" || text == "opening") return FilterKind::opening;
  if (text == "c" || text == "closing") return FilterKind::closing;
  if (text == "m" || text == "m_filter") return FilterKind::m_filter;
  if (text == "n" || text == "n_filter") return FilterKind::n_filter;
  throw std::invalid_argument("unknown filter kind '" + std::string(text) + "'");
}

ScaleSchedule::ScaleSchedule(std::vector<std::uint64_t> scales) : scales_(std::move(scales)) {
  if (scales_.empty()) throw std::invalid_argument("empty scale schedule");
  for (std::size_t i = 0; i < scales_.size(); ++i) {
    if (scales_[i] < 1) throw std::invalid_argument("scales must be >= 1");
    if (i > 0 && scales_[i] <= scales_[i - 1]) throw std::invalid_argument("scales must be strictly increasing");
  }
}

namespace {

constexpr std::uint32_t kUnset = std::numeric_limits<std::uint32_t>::max();

std::uint32_t find_root(std::vector<std::uint32_t>& zpar, std::uint32_t x) {
  while (zpar[x] != x) {
    zpar[x] = zpar[zpar[x]];
    x = zpar[x];
  }
  return x;
}

// Area opening on a max-tree: every upper-level-set component of area <= scale
// is flattened down to the level of its nearest larger ancestor. This is the
// fixpoint of repeatedly merging a regional maximum of area <= scale into its
// highest neighbor, independent of merge order.
//
// The tree is built tile by tile (union-find over a cache-sized block, in
// tile-local indices) and the tiles are then stitched along their faces by
// merging the ancestor chains of each adjacent voxel pair.

constexpr std::uint32_t kNoNode = kUnset;

struct TileScratch {
  std::vector<std::uint32_t> global;
  std::vector<std::uint8_t> value;
  std::vector<std::uint32_t> order;
  std::vector<std::uint32_t> parent;
  std::vector<std::uint32_t> zpar;
  std::vector<std::uint32_t> repr;
  std::vector<std::uint8_t> rank;
  std::vector<std::uint32_t> area;
};

class MaxTree {
 public:
  MaxTree(std::span<const std::uint8_t> f, const Shape& shape, std::size_t tile_voxels)
      : f_(f), shape_(shape), parent_(f.size()), area_(f.size()) {
    const int rank = shape.rank();
    std::size_t longest = 1;
    for (int a = 0; a < rank; ++a) longest = std::max(longest, shape.extent(a));
    auto edge = static_cast<std::size_t>(std::pow(static_cast<double>(tile_voxels), 1.0 / rank));
    edge = std::clamp<std::size_t>(edge, 1, longest);
    while (edge > 1 && !pow_fits(edge, rank, tile_voxels)) --edge;
    while (edge < longest && pow_fits(edge + 1, rank, tile_voxels)) ++edge;
    for (int a = 0; a < 3; ++a) {
      extent_[a] = a < rank ? shape.extent(a) : 1;
      tile_[a] = a < rank ? std::min(edge, extent_[a]) : 1;
      stride_[a] = a < rank ? shape.stride(a) : 0;
    }
    TileScratch scratch;
    for (std::size_t z = 0; z < extent_[2]; z += tile_[2]) {
      for (std::size_t y = 0; y < extent_[1]; y += tile_[1]) {
        for (std::size_t x = 0; x < extent_[0]; x += tile_[0]) build_tile({x, y, z}, scratch);
      }
    }
    stitch();
  }

  std::vector<std::uint8_t> area_open(std::uint64_t scale) {
    const std::size_t n = f_.size();
    std::vector<std::uint8_t> out(n);
    std::vector<std::uint8_t> resolved(n, 0);
    std::vector<std::uint32_t> pending;
    for (std::size_t p = 0; p < n; ++p) {
      std::uint32_t node = levroot(static_cast<std::uint32_t>(p));
      if (!resolved[node]) {
        pending.clear();
        std::uint8_t value;
        for (;;) {
          if (resolved[node]) {
            value = out[node];
            break;
          }
          if (parent_[node] == node || area_[node] > scale) {
            value = f_[node];
            break;
          }
          pending.push_back(node);
          node = levroot(parent_[node]);
        }
        out[node] = value;
        resolved[node] = 1;
        for (std::uint32_t q : pending) {
          out[q] = value;
          resolved[q] = 1;
        }
        node = levroot(static_cast<std::uint32_t>(p));
      }
      out[p] = out[node];
    }
    return out;
  }

 private:
  static bool pow_fits(std::size_t base, int exp, std::size_t limit) {
    std::size_t v = 1;
    for (int i = 0; i < exp; ++i) {
      if (v > limit / base) return false;
      v *= base;
    }
    return v <= limit;
  }

  void build_tile(std::array<std::size_t, 3> lo, TileScratch& s) {
    std::array<std::size_t, 3> ext{};
    for (int a = 0; a < 3; ++a) ext[a] = std::min(tile_[a], extent_[a] - lo[a]);
    const std::size_t m = ext[0] * ext[1] * ext[2];
    const Shape local = shape_.rank() == 1   ? Shape{ext[0]}
                        : shape_.rank() == 2 ? Shape{ext[0], ext[1]}
                                             : Shape{ext[0], ext[1], ext[2]};
    s.global.resize(m);
    s.value.resize(m);
    std::size_t l = 0;
    for (std::size_t z = 0; z < ext[2]; ++z) {
      for (std::size_t y = 0; y < ext[1]; ++y) {
        const std::size_t row = lo[0] + (lo[1] + y) * stride_[1] + (lo[2] + z) * stride_[2];
        for (std::size_t x = 0; x < ext[0]; ++x, ++l) {
          s.global[l] = static_cast<std::uint32_t>(row + x);
          s.value[l] = f_[row + x];
        }
      }
    }

    // Counting sort, decreasing value, increasing index within a level.
    std::array<std::size_t, 257> start{};
    for (std::size_t i = 0; i < m; ++i) ++start[255 - s.value[i] + 1];
    for (std::size_t i = 1; i < start.size(); ++i) start[i] += start[i - 1];
    s.order.resize(m);
    for (std::size_t i = 0; i < m; ++i) s.order[start[255 - s.value[i]]++] = static_cast<std::uint32_t>(i);

    // Union by rank keeps the sets shallow; repr maps a set root to the tree
    // node that currently represents it.
    s.parent.resize(m);
    s.zpar.assign(m, kUnset);
    s.repr.resize(m);
    s.rank.assign(m, 0);
    for (std::uint32_t p : s.order) {
      s.parent[p] = p;
      s.zpar[p] = p;
      s.repr[p] = p;
      std::uint32_t zp = p;
      for_each_neighbor(local, p, [&](std::size_t q) {
        if (s.zpar[q] == kUnset) return;
        std::uint32_t r = find_root(s.zpar, static_cast<std::uint32_t>(q));
        if (r == zp) return;
        s.parent[s.repr[r]] = p;
        if (s.rank[zp] < s.rank[r]) std::swap(zp, r);
        s.zpar[r] = zp;
        if (s.rank[zp] == s.rank[r]) ++s.rank[zp];
        s.repr[zp] = p;
      });
    }

    // Point every voxel at the canonical element of its node, then sum areas.
    const std::uint32_t root = s.order.back();
    for (auto it = s.order.rbegin(); it != s.order.rend(); ++it) {
      const std::uint32_t p = *it;
      const std::uint32_t q = s.parent[p];
      if (s.value[s.parent[q]] == s.value[q]) s.parent[p] = s.parent[q];
    }
    s.area.assign(m, 1);
    for (std::uint32_t p : s.order) {
      if (p != root) s.area[s.parent[p]] += s.area[p];
    }
    for (std::size_t i = 0; i < m; ++i) {
      parent_[s.global[i]] = s.global[s.parent[i]];
      area_[s.global[i]] = s.area[i];
    }
  }

  std::uint32_t levroot(std::uint32_t x) {
    std::uint32_t r = x;
    while (parent_[r] != r && f_[parent_[r]] == f_[r]) r = parent_[r];
    while (x != r) {
      const std::uint32_t next = parent_[x];
      parent_[x] = r;
      x = next;
    }
    return r;
  }

  std::uint32_t next_node(std::uint32_t x) { return parent_[x] == x ? kNoNode : levroot(parent_[x]); }

  // Adds the edge (x, y) to the forest: the two ancestor chains are merged in
  // decreasing level order, each node gaining the area the other side has at
  // its level.
  void connect(std::uint32_t x, std::uint32_t y) {
    x = levroot(x);
    y = levroot(y);
    std::uint32_t ax = 0, ay = 0;
    std::uint32_t prev = kNoNode;
    const auto link = [&](std::uint32_t node) {
      if (prev != kNoNode) parent_[prev] = node;
      prev = node;
    };
    while (x != y) {
      if (y == kNoNode || (x != kNoNode && f_[x] > f_[y])) {
        ax = area_[x];
        area_[x] += ay;
        const std::uint32_t nx = next_node(x);
        link(x);
        x = nx;
      } else if (x == kNoNode || f_[y] > f_[x]) {
        ay = area_[y];
        area_[y] += ax;
        const std::uint32_t ny = next_node(y);
        link(y);
        y = ny;
      } else {
        ax = area_[x];
        ay = area_[y];
        area_[x] = ax + ay;
        const std::uint32_t nx = next_node(x);
        const std::uint32_t ny = next_node(y);
        parent_[y] = x;
        link(x);
        x = nx;
        y = ny;
      }
    }
    if (x != kNoNode && prev != kNoNode) parent_[prev] = x;
  }

  void stitch() {
    for (int a = 0; a < shape_.rank(); ++a) {
      const int b = a == 0 ? 1 : 0;
      const int c = a == 2 ? 1 : 2;
      for (std::size_t k = tile_[a]; k < extent_[a]; k += tile_[a]) {
        for (std::size_t j = 0; j < extent_[c]; ++j) {
          for (std::size_t i = 0; i < extent_[b]; ++i) {
            const std::size_t p = k * stride_[a] + i * stride_[b] + j * stride_[c];
            connect(static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(p - stride_[a]));
          }
        }
      }
    }
  }

  std::span<const std::uint8_t> f_;
  const Shape& shape_;
  std::array<std::size_t, 3> extent_{};
  std::array<std::size_t, 3> tile_{};
  std::array<std::size_t, 3> stride_{};
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint32_t> area_;
};

std::vector<std::uint8_t> area_open(std::span<const std::uint8_t> f, const Shape& shape, std::uint64_t scale,
                                    std::size_t tile_voxels) {
  if (f.empty()) return {};
  return MaxTree(f, shape, tile_voxels).area_open(scale);
}

std::vector<std::uint8_t> area_close(std::span<const std::uint8_t> f, const Shape& shape, std::uint64_t scale,
                                     std::size_t tile_voxels) {
  std::vector<std::uint8_t> inverted(f.size());
  std::transform(f.begin(), f.end(), inverted.begin(), [](std::uint8_t v) { return 255 - v; });
  auto out = area_open(inverted, shape, scale, tile_voxels);
  std::transform(out.begin(), out.end(), out.begin(), [](std::uint8_t v) { return 255 - v; });
  return out;
}

}  // namespace

Volume apply_filter(const Volume& v, std::uint64_t scale, FilterKind kind, Connectivity c) {
  return apply_filter(v, scale, kind, c, kDefaultTileVoxels);
}

Volume apply_filter(const Volume& v, std::uint64_t scale, FilterKind kind, Connectivity c, std::size_t tile_voxels) {
  if (scale < 1) throw std::invalid_argument("sieve scale must be >= 1");
  if (tile_voxels < 1) throw std::invalid_argument("tile size must be >= 1");
  const std::size_t t = tile_voxels;
  require_connectivity(v.shape(), c);
  const Shape& shape = v.shape();
  std::vector<std::uint8_t> out;
  switch (kind) {
    case FilterKind::opening:
      out = area_open(v.values(), shape, scale, t);
      break;
    case FilterKind::closing:
      out = area_close(v.values(), shape, scale, t);
      break;
    case FilterKind::m_filter:
      out = area_close(area_open(v.values(), shape, scale, t), shape, scale, t);
      break;
    case FilterKind::n_filter:
      out = area_open(area_close(v.values(), shape, scale, t), shape, scale, t);
      break;
  }
  return Volume(shape, std::move(out));
}

Volume SieveDecomposition::reconstruct() const {
  if (lowpass.empty()) return original;
  const Volume& last = lowpass.back();
  std::vector<std::uint8_t> out(last.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    int acc = last[i];
    for (const auto& ch : channels_signed) acc += ch[i];
    if (acc < 0 || acc > 255) throw InvariantError("reconstruction left the [0,255] range");
    out[i] = static_cast<std::uint8_t>(acc);
  }
  return Volume(last.shape(), std::move(out));
}

SieveDecomposition decompose(const Volume& v, const ScaleSchedule& schedule, FilterKind kind, Connectivity c) {
  if (schedule.size() == 0) throw std::invalid_argument("empty scale schedule");
  SieveDecomposition d;
  d.original = v;
  d.schedule = schedule;
  d.filter = kind;
  d.connectivity = c;
  const Volume* previous = &d.original;
  d.lowpass.reserve(schedule.size());
  for (std::uint64_t s : schedule.scales()) {
    Volume next = apply_filter(*previous, s, kind, c);
    std::vector<std::int16_t> diff(next.size());
    for (std::size_t i = 0; i < diff.size(); ++i) {
      diff[i] = static_cast<std::int16_t>(int((*previous)[i]) - int(next[i]));
    }
    d.channels_signed.emplace_back(v.shape(), std::move(diff));
    d.lowpass.push_back(std::move(next));
    previous = &d.lowpass.back();
  }
  return d;
}

Volume abs_channel(const SieveDecomposition& d, std::size_t n) {
  const std::size_t count = d.channels_signed.size();
  if (n < 2 || n > count) {
    throw std::out_of_range("channel " + std::to_string(n) + " outside [2, " + std::to_string(count) + "]");
  }
  const SignedVolume& ch = d.channels_signed[n - 1];
  std::vector<std::uint8_t> out(ch.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int a = ch[i] < 0 ? -ch[i] : ch[i];
    out[i] = static_cast<std::uint8_t>(a);
  }
  return Volume(ch.shape(), std::move(out));
}

namespace {

struct Run {
  std::size_t begin;
  std::size_t end;  // exclusive
  std::uint8_t value;
};

std::vector<Run> runs_of(const std::vector<std::uint8_t>& s) {
  std::vector<Run> runs;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i;
    while (j < s.size() && s[j] == s[i]) ++j;
    runs.push_back({i, j, s[i]});
    i = j;
  }
  return runs;
}

// One pass of the naive sieve: flatten the smallest maximum (or minimum) run of
// length <= scale. Returns false when none is left.
bool naive_step(std::vector<std::uint8_t>& s, std::uint64_t scale, bool maxima) {
  const auto runs = runs_of(s);
  if (runs.size() < 2) return false;
  std::size_t best = runs.size();
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const std::size_t len = runs[r].end - runs[r].begin;
    if (len > scale) continue;
    bool extremal = true;
    if (r > 0) extremal = extremal && (maxima ? runs[r - 1].value < runs[r].value : runs[r - 1].value > runs[r].value);
    if (r + 1 < runs.size()) {
      extremal = extremal && (maxima ? runs[r + 1].value < runs[r].value : runs[r + 1].value > runs[r].value);
    }
    if (!extremal) continue;
    if (best == runs.size() || len < runs[best].end - runs[best].begin) best = r;
  }
  if (best == runs.size()) return false;

  int target = maxima ? -1 : 256;
  if (best > 0) target = runs[best - 1].value;
  if (best + 1 < runs.size()) {
    const int other = runs[best + 1].value;
    if (best == 0) {
      target = other;
    } else {
      target = maxima ? std::max(target, other) : std::min(target, other);
    }
  }
  std::fill(s.begin() + static_cast<std::ptrdiff_t>(runs[best].begin),
            s.begin() + static_cast<std::ptrdiff_t>(runs[best].end), static_cast<std::uint8_t>(target));
  return true;
}

std::vector<std::uint8_t> naive_filter(std::vector<std::uint8_t> s, std::uint64_t scale, bool maxima) {
  while (naive_step(s, scale, maxima)) {
  }
  return s;
}

}  // namespace

std::vector<std::uint8_t> brute_force_sieve_1d(std::span<const std::uint8_t> signal, std::uint64_t scale,
                                               FilterKind kind) {
  if (signal.size() > 64) throw std::invalid_argument("brute-force sieve limited to 64 samples");
  if (scale < 1) throw std::invalid_argument("sieve scale must be >= 1");
  std::vector<std::uint8_t> s(signal.begin(), signal.end());
  switch (kind) {
    case FilterKind::opening:
      return naive_filter(std::move(s), scale, true);
    case FilterKind::closing:
      return naive_filter(std::move(s), scale, false);
    case FilterKind::m_filter:
      return naive_filter(naive_filter(std::move(s), scale, true), scale, false);
    case FilterKind::n_filter:
      return naive_filter(naive_filter(std::move(s), scale, false), scale, true);
  }
  return s;
}

Volume brute_force_sieve_1d(const Volume& signal, std::uint64_t scale, FilterKind kind) {
  if (signal.shape().rank() != 1) throw std::invalid_argument("brute-force sieve accepts 1-D signals only");
  return Volume(signal.shape(), brute_force_sieve_1d(signal.values(), scale, kind));
}

}  // namespace uxpr
