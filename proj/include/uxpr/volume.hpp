#pragma once

// Dense n-dimensional grids (1 to 3 axes, first axis fastest), flat-zone
// graphs, extremum detection and face-connected component labeling.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace uxpr {

using VoxelIndex = std::uint32_t;

class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> extents);
  explicit Shape(std::vector<std::size_t> extents);

  int rank() const noexcept { return static_cast<int>(extents_.size()); }
  std::size_t extent(int axis) const { return extents_.at(static_cast<std::size_t>(axis)); }
  const std::vector<std::size_t>& extents() const noexcept { return extents_; }
  std::size_t voxel_count() const noexcept { return count_; }
  std::size_t stride(int axis) const { return strides_.at(static_cast<std::size_t>(axis)); }

  /// Coordinates of a voxel index; unused axes are zero.
  std::array<std::size_t, 3> coords(std::size_t index) const noexcept;
  std::size_t index(std::size_t x, std::size_t y = 0, std::size_t z = 0) const noexcept {
    return x + y * strides_[1] + z * strides_[2];
  }

  friend bool operator==(const Shape& a, const Shape& b) { return a.extents_ == b.extents_; }

  std::string to_string() const;

 private:
  std::vector<std::size_t> extents_;
  std::array<std::size_t, 3> strides_{1, 0, 0};
  std::size_t count_ = 0;
};

template <class T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  explicit Grid(Shape shape, T fill = T{}) : shape_(std::move(shape)), data_(shape_.voxel_count(), fill) {}
  Grid(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.voxel_count()) {
      throw std::invalid_argument("grid data length " + std::to_string(data_.size()) +
                                  " does not match shape " + shape_.to_string());
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  friend bool operator==(const Grid& a, const Grid& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  Shape shape_;
  std::vector<T> data_;
};

/// Intensities in [0, 255].
using Volume = Grid<std::uint8_t>;
/// Signed differences in [-255, 255].
using SignedVolume = Grid<std::int16_t>;
using LabelGrid = Grid<std::uint16_t>;

/// Face adjacency only.
enum class Connectivity { two = 2, four = 4, six = 6 };

Connectivity face_connectivity(const Shape& shape);
/// Throws std::invalid_argument unless `c` is the face connectivity of `shape`.
void require_connectivity(const Shape& shape, Connectivity c);

/// Calls fn(neighbor_index) for each face neighbor of voxel `index`.
template <class Fn>
inline void for_each_neighbor(const Shape& shape, std::size_t index, Fn&& fn) {
  const auto c = shape.coords(index);
  for (int axis = 0; axis < shape.rank(); ++axis) {
    const std::size_t stride = shape.stride(axis);
    if (c[static_cast<std::size_t>(axis)] > 0) fn(index - stride);
    if (c[static_cast<std::size_t>(axis)] + 1 < shape.extent(axis)) fn(index + stride);
  }
}

struct LabelInfo {
  std::uint16_t id = 0;
  std::string name;      // device type, e.g. "hair_dryer"
  std::string category;  // five-class group, e.g. "mobile_phone"
  bool electrical = false;
};

struct LabelVolume {
  LabelGrid labels;
  std::vector<LabelInfo> table;

  const LabelInfo* find(std::uint16_t id) const noexcept;
  /// Throws std::invalid_argument when a nonzero voxel label is missing from the table.
  void validate() const;
};

struct FlatZone {
  std::uint8_t value = 0;
  std::size_t area = 0;
  std::vector<std::uint32_t> neighbors;  // sorted, unique
};

struct FlatZoneGraph {
  std::vector<std::uint32_t> zone_of_voxel;
  std::vector<FlatZone> zones;
};

/// Maximal connected equal-valued voxel sets. Zone ids are dense and ordered by
/// the smallest voxel index each zone contains.
FlatZoneGraph flat_zones(const Volume& v, Connectivity c);

enum class ExtremumKind { maximum, minimum };

struct Extremum {
  std::uint32_t zone;
  ExtremumKind kind;
  friend bool operator==(const Extremum&, const Extremum&) = default;
};

/// Zones strictly above (or below) all their neighbors, in zone id order.
std::vector<Extremum> extremal_zones(const FlatZoneGraph& g);

using Component = std::vector<VoxelIndex>;

/// Connected components of voxels satisfying `predicate`. Each component is
/// sorted ascending; components are ordered by their smallest voxel index.
std::vector<Component> connected_components(const Shape& shape,
                                            const std::function<bool(std::size_t)>& predicate,
                                            Connectivity c);
std::vector<Component> nonzero_components(const Volume& v, Connectivity c);
std::vector<Component> nonzero_components(const SignedVolume& v, Connectivity c);

/// Voxels of `voxels` that carry `label` in `labels`. Unknown labels are rejected.
std::size_t overlap_count(std::span<const VoxelIndex> voxels, const LabelVolume& labels, std::uint16_t label);

}  // namespace uxpr
