#pragma once

// Repack: per-voxel fusion of channel predictions, and 2-D projections.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "uxpr/classify.hpp"
#include "uxpr/extract.hpp"
#include "uxpr/volume.hpp"

namespace uxpr {

enum class Verdict : std::uint8_t { very_unlikely = 0, unlikely = 1, likely = 2 };

/// Verdict per voxel stored as u8 (0/1/2).
struct RepackMap {
  Volume verdicts;

  Verdict at(std::size_t i) const { return static_cast<Verdict>(verdicts[i]); }
};

struct VotedSegment {
  const Segment* segment = nullptr;
  Prediction prediction;
};

/// Counts, per voxel, the sieve channels in which some segment covering it is
/// predicted electrical (any class other than non-electrical). Two or more
/// channels: likely; one: unlikely; none: very unlikely. Ground-truth segments
/// (channel 0) do not vote.
RepackMap repack_vote(std::span<const VotedSegment> segments, const Shape& dims);

/// Column sums along `axis`, scaled so the largest column maps to 255
/// (rounded half up). The output keeps the remaining axes in order.
Volume flatten2d(const Volume& v, int axis);

/// Per-column maximum along `axis`.
Volume mip_projection(const Volume& v, int axis);

/// Projects a label volume along `axis`: each label's support becomes the set
/// of columns that contain it. Returns one pixel list per table entry.
std::vector<std::vector<VoxelIndex>> project_label_supports(const LabelVolume& labels, int axis);

/// Writes mip_<axis>_<verdict>.pgm for every axis and verdict: the maximum
/// intensity projection of the voxels carrying that verdict.
void render_composite(const std::filesystem::path& dir, const Volume& volume, const RepackMap& map);

}  // namespace uxpr
