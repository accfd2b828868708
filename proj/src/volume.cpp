#include "uxpr/volume.hpp"

#include <algorithm>
#include <atomic>
#include <iostream>
#include <limits>
#include <numeric>

#include "uxpr/error.hpp"

namespace uxpr {

namespace {
std::atomic<bool> g_warnings{true};

std::uint32_t find_root(std::vector<std::uint32_t>& parent, std::uint32_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}
}  // namespace

void set_warnings_enabled(bool enabled) { g_warnings = enabled; }

void warn(std::string_view message) {
  if (g_warnings) std::cerr << "warning: " << message << '\n';
}

Shape::Shape(std::initializer_list<std::size_t> extents) : Shape(std::vector<std::size_t>(extents)) {}

Shape::Shape(std::vector<std::size_t> extents) : extents_(std::move(extents)) {
  if (extents_.empty() || extents_.size() > 3) {
    throw std::invalid_argument("volumes have 1 to 3 axes, got " + std::to_string(extents_.size()));
  }
  count_ = 1;
  for (std::size_t e : extents_) {
    if (e == 0) throw std::invalid_argument("zero extent in shape");
    if (count_ > std::numeric_limits<VoxelIndex>::max() / e) {
      throw std::invalid_argument("volume too large for 32-bit voxel indices");
    }
    count_ *= e;
  }
  strides_ = {1, 0, 0};
  if (extents_.size() > 1) strides_[1] = extents_[0];
  if (extents_.size() > 2) strides_[2] = extents_[0] * extents_[1];
}

std::array<std::size_t, 3> Shape::coords(std::size_t index) const noexcept {
  std::array<std::size_t, 3> c{0, 0, 0};
  switch (extents_.size()) {
    case 1:
      c[0] = index;
      break;
    case 2:
      c[0] = index % extents_[0];
      c[1] = index / extents_[0];
      break;
    case 3:
      c[0] = index % extents_[0];
      c[1] = (index / extents_[0]) % extents_[1];
      c[2] = index / strides_[2];
      break;
    default:
      break;
  }
  return c;
}

std::string Shape::to_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < extents_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(extents_[i]);
  }
  return s + "]";
}

Connectivity face_connectivity(const Shape& shape) {
  switch (shape.rank()) {
    case 1:
      return Connectivity::two;
    case 2:
      return Connectivity::four;
    default:
      return Connectivity::six;
  }
}

void require_connectivity(const Shape& shape, Connectivity c) {
  if (c != face_connectivity(shape)) {
    throw std::invalid_argument("connectivity " + std::to_string(static_cast<int>(c)) +
                                " does not match a " + std::to_string(shape.rank()) + "-D volume");
  }
}

const LabelInfo* LabelVolume::find(std::uint16_t id) const noexcept {
  for (const auto& info : table) {
    if (info.id == id) return &info;
  }
  return nullptr;
}

void LabelVolume::validate() const {
  std::vector<bool> known(65536, false);
  for (const auto& info : table) {
    if (info.id == 0) throw std::invalid_argument("label id 0 is reserved for background");
    known[info.id] = true;
  }
  for (std::uint16_t l : labels.values()) {
    if (l != 0 && !known[l]) {
      throw std::invalid_argument("label " + std::to_string(l) + " missing from label table");
    }
  }
}

FlatZoneGraph flat_zones(const Volume& v, Connectivity c) {
  const Shape& shape = v.shape();
  require_connectivity(shape, c);
  const std::size_t n = shape.voxel_count();

  std::vector<std::uint32_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0u);
  for (std::size_t i = 0; i < n; ++i) {
    // Forward neighbors only; each adjacent pair is visited once.
    const auto xyz = shape.coords(i);
    for (int axis = 0; axis < shape.rank(); ++axis) {
      if (xyz[static_cast<std::size_t>(axis)] + 1 >= shape.extent(axis)) continue;
      const std::size_t j = i + shape.stride(axis);
      if (v[i] != v[j]) continue;
      std::uint32_t a = find_root(parent, static_cast<std::uint32_t>(i));
      std::uint32_t b = find_root(parent, static_cast<std::uint32_t>(j));
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }

  FlatZoneGraph g;
  g.zone_of_voxel.assign(n, 0);
  std::vector<std::uint32_t> zone_of_root(n, std::numeric_limits<std::uint32_t>::max());
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t r = find_root(parent, static_cast<std::uint32_t>(i));
    if (zone_of_root[r] == std::numeric_limits<std::uint32_t>::max()) {
      zone_of_root[r] = static_cast<std::uint32_t>(g.zones.size());
      g.zones.push_back(FlatZone{v[i], 0, {}});
    }
    const std::uint32_t z = zone_of_root[r];
    g.zone_of_voxel[i] = z;
    ++g.zones[z].area;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto xyz = shape.coords(i);
    for (int axis = 0; axis < shape.rank(); ++axis) {
      if (xyz[static_cast<std::size_t>(axis)] + 1 >= shape.extent(axis)) continue;
      const std::size_t j = i + shape.stride(axis);
      const std::uint32_t a = g.zone_of_voxel[i];
      const std::uint32_t b = g.zone_of_voxel[j];
      if (a == b) continue;
      g.zones[a].neighbors.push_back(b);
      g.zones[b].neighbors.push_back(a);
    }
  }
  for (auto& z : g.zones) {
    std::sort(z.neighbors.begin(), z.neighbors.end());
    z.neighbors.erase(std::unique(z.neighbors.begin(), z.neighbors.end()), z.neighbors.end());
  }
  return g;
}

std::vector<Extremum> extremal_zones(const FlatZoneGraph& g) {
  std::vector<Extremum> out;
  for (std::uint32_t z = 0; z < g.zones.size(); ++z) {
    const FlatZone& zone = g.zones[z];
    if (zone.neighbors.empty()) continue;
    bool above = true;
    bool below = true;
    for (std::uint32_t nb : zone.neighbors) {
      const std::uint8_t nv = g.zones[nb].value;
      above = above && zone.value > nv;
      below = below && zone.value < nv;
    }
    if (above) out.push_back({z, ExtremumKind::maximum});
    if (below) out.push_back({z, ExtremumKind::minimum});
  }
  return out;
}

std::vector<Component> connected_components(const Shape& shape,
                                            const std::function<bool(std::size_t)>& predicate,
                                            Connectivity c) {
  require_connectivity(shape, c);
  const std::size_t n = shape.voxel_count();
  std::vector<bool> seen(n, false);
  std::vector<Component> out;
  std::vector<VoxelIndex> stack;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (seen[seed] || !predicate(seed)) continue;
    Component comp;
    seen[seed] = true;
    stack.push_back(static_cast<VoxelIndex>(seed));
    while (!stack.empty()) {
      const VoxelIndex p = stack.back();
      stack.pop_back();
      comp.push_back(p);
      for_each_neighbor(shape, p, [&](std::size_t q) {
        if (!seen[q] && predicate(q)) {
          seen[q] = true;
          stack.push_back(static_cast<VoxelIndex>(q));
        }
      });
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

std::vector<Component> nonzero_components(const Volume& v, Connectivity c) {
  return connected_components(v.shape(), [&](std::size_t i) { return v[i] != 0; }, c);
}

std::vector<Component> nonzero_components(const SignedVolume& v, Connectivity c) {
  return connected_components(v.shape(), [&](std::size_t i) { return v[i] != 0; }, c);
}

std::size_t overlap_count(std::span<const VoxelIndex> voxels, const LabelVolume& labels, std::uint16_t label) {
  if (label == 0 || labels.find(label) == nullptr) {
    throw std::invalid_argument("unknown label " + std::to_string(label));
  }
  std::size_t count = 0;
  for (VoxelIndex i : voxels) {
    if (i >= labels.labels.size()) throw std::out_of_range("voxel index outside label volume");
    if (labels.labels[i] == label) ++count;
  }
  return count;
}

}  // namespace uxpr
