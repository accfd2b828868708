#include "uxpr/repack.hpp"

#include <algorithm>
#include <map>

#include "uxpr/io.hpp"

namespace uxpr {

RepackMap repack_vote(std::span<const VotedSegment> segments, const Shape& dims) {
  const std::size_t n = dims.voxel_count();
  std::vector<const VotedSegment*> order;
  for (const auto& s : segments) {
    if (s.segment == nullptr) throw std::invalid_argument("null segment in repack");
    if (s.segment->channel > 0) order.push_back(&s);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const VotedSegment* a, const VotedSegment* b) { return a->segment->channel < b->segment->channel; });

  std::vector<std::uint8_t> count(n, 0);
  std::vector<int> last_channel(n, -1);
  for (const VotedSegment* s : order) {
    for (VoxelIndex v : s->segment->voxels) {
      if (v >= n) throw std::out_of_range("segment voxel " + std::to_string(v) + " outside " + dims.to_string());
    }
    if (s->prediction.predicted == kNonElectrical) continue;
    const int ch = s->segment->channel;
    for (VoxelIndex v : s->segment->voxels) {
      if (last_channel[v] == ch) continue;
      last_channel[v] = ch;
      if (count[v] < 2) ++count[v];
    }
  }
  return RepackMap{Volume(dims, std::move(count))};
}

namespace {

struct Projection {
  Shape image;
  int a0;
  int a1;
};

Projection projection_for(const Volume& v, int axis) {
  if (v.shape().rank() != 3) throw std::invalid_argument("projection needs a 3-D volume");
  if (axis < 0 || axis > 2) throw std::invalid_argument("axis must be 0, 1 or 2");
  const int a0 = axis == 0 ? 1 : 0;
  const int a1 = axis == 2 ? 1 : 2;
  return {Shape{v.shape().extent(a0), v.shape().extent(a1)}, a0, a1};
}

template <class Fn>
void for_each_column(const Shape& s, const Projection& p, Fn&& fn) {
  for (std::size_t i = 0; i < s.voxel_count(); ++i) {
    const auto c = s.coords(i);
    fn(p.image.index(c[static_cast<std::size_t>(p.a0)], c[static_cast<std::size_t>(p.a1)]), i);
  }
}

}  // namespace

Volume flatten2d(const Volume& v, int axis) {
  const Projection p = projection_for(v, axis);
  std::vector<std::uint64_t> sums(p.image.voxel_count(), 0);
  for_each_column(v.shape(), p, [&](std::size_t pixel, std::size_t voxel) { sums[pixel] += v[voxel]; });
  const std::uint64_t max_sum = *std::max_element(sums.begin(), sums.end());
  std::vector<std::uint8_t> out(sums.size(), 0);
  if (max_sum > 0) {
    for (std::size_t i = 0; i < sums.size(); ++i) {
      out[i] = static_cast<std::uint8_t>((2 * 255 * sums[i] + max_sum) / (2 * max_sum));
    }
  }
  return Volume(p.image, std::move(out));
}

Volume mip_projection(const Volume& v, int axis) {
  const Projection p = projection_for(v, axis);
  std::vector<std::uint8_t> out(p.image.voxel_count(), 0);
  for_each_column(v.shape(), p,
                  [&](std::size_t pixel, std::size_t voxel) { out[pixel] = std::max(out[pixel], v[voxel]); });
  return Volume(p.image, std::move(out));
}

std::vector<std::vector<VoxelIndex>> project_label_supports(const LabelVolume& labels, int axis) {
  const Volume dummy(labels.labels.shape());
  const Projection p = projection_for(dummy, axis);
  std::map<std::uint16_t, std::vector<bool>> hit;
  for (const auto& info : labels.table) hit[info.id].assign(p.image.voxel_count(), false);
  for_each_column(labels.labels.shape(), p, [&](std::size_t pixel, std::size_t voxel) {
    const std::uint16_t l = labels.labels[voxel];
    if (l == 0) return;
    auto it = hit.find(l);
    if (it != hit.end()) it->second[pixel] = true;
  });
  std::vector<std::vector<VoxelIndex>> out;
  for (const auto& info : labels.table) {
    std::vector<VoxelIndex> px;
    const auto& mask = hit[info.id];
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) px.push_back(static_cast<VoxelIndex>(i));
    }
    out.push_back(std::move(px));
  }
  return out;
}

void render_composite(const std::filesystem::path& dir, const Volume& volume, const RepackMap& map) {
  if (!(volume.shape() == map.verdicts.shape())) throw std::invalid_argument("verdict map dims differ from volume");
  std::filesystem::create_directories(dir);
  static constexpr const char* kNames[3] = {"very_unlikely", "unlikely", "likely"};
  for (int verdict = 0; verdict < 3; ++verdict) {
    Volume masked(volume.shape());
    for (std::size_t i = 0; i < volume.size(); ++i) {
      if (map.verdicts[i] == verdict) masked[i] = volume[i];
    }
    for (int axis = 0; axis < 3; ++axis) {
      const std::string name = std::string("mip_") + "xyz"[axis] + "_" + kNames[verdict] + ".pgm";
      io::write_pgm(dir / name, mip_projection(masked, axis));
    }
  }
}

}  // namespace uxpr
