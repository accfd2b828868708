#pragma once

// Unpack and eXtract: scale schedules, channel segments, density histograms
// and overlap-based segment labels.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uxpr/sieve.hpp"
#include "uxpr/volume.hpp"

namespace uxpr {

enum class Task { two_class, five_class };

Task parse_task(std::string_view text);
std::string_view task_name(Task t) noexcept;
int class_count(Task t) noexcept;

/// Class 0 is always non-electrical. Two-class: 1 = electrical. Five-class:
/// 1 mobile_phone, 2 hard_drive, 3 laptop, 4 other_electrical.
inline constexpr int kNonElectrical = 0;
inline constexpr std::array<std::string_view, 5> kFiveClassNames{"non_electrical", "mobile_phone", "hard_drive",
                                                                 "laptop", "other_electrical"};

/// Class of a labeled object under `task`. Electrical labels whose category is
/// not one of the named devices fall into other_electrical.
int class_of(const LabelInfo& info, Task task);

struct Segment {
  std::string bag_id;
  int channel = 0;  // 2..N for sieve channels, 0 for a ground-truth mask
  std::vector<VoxelIndex> voxels;
  std::vector<std::uint8_t> source_values;
  std::optional<int> label;
  std::string kind;  // device type of the dominant overlapping object, if any

  std::size_t area() const noexcept { return voxels.size(); }
};

struct Histogram {
  std::array<std::uint32_t, 256> bins{};

  std::uint64_t total() const noexcept;
  friend bool operator==(const Histogram&, const Histogram&) = default;
};

Histogram segment_histogram(const Segment& seg);
/// Rejects values outside [0, 255].
Histogram histogram_of(std::span<const int> values);

/// n_scales log10-equispaced scales from s_min to s_max, endpoints exact,
/// interior values rounded half up.
ScaleSchedule default_schedule(std::size_t n_scales, std::uint64_t s_min, std::uint64_t s_max);

enum class BoundsMode { bracketing, all };
BoundsMode parse_bounds_mode(std::string_view text);
std::string_view bounds_name(BoundsMode m) noexcept;

/// Connected nonzero sets of every absolute channel 2..N. Under bracketing,
/// a channel-n segment is kept only if S_{n-1} < area <= S_n.
std::vector<Segment> extract_segments(const SieveDecomposition& d, BoundsMode bounds, const std::string& bag_id = {});

/// Same as extract_segments, reading the absolute channels directly.
/// `abs_channels[k]` is channel k + 2.
std::vector<Segment> extract_from_channels(std::span<const Volume> abs_channels, const ScaleSchedule& schedule,
                                           BoundsMode bounds, const std::string& bag_id = {});

/// One segment per nonzero label; features are the original intensities.
std::vector<Segment> ground_truth_segments(const Volume& v, const LabelVolume& labels, Task task,
                                           const std::string& bag_id = {});

struct OverlapLabel {
  int class_id = kNonElectrical;
  std::uint16_t label_id = 0;  // object with the largest overlap, 0 if none
};

/// Electrical if the segment touches any electrical object. Five-class picks
/// the electrical object with the largest overlap, smaller label id on ties.
OverlapLabel auto_label(const Segment& seg, const LabelVolume& labels, Task task);
int auto_label_segment(const Segment& seg, const LabelVolume& labels, Task task);

/// Labels every segment in place (label and kind).
void auto_label_all(std::vector<Segment>& segments, const LabelVolume& labels, Task task);

/// One line of the segment exchange format.
struct SegmentRecord {
  std::size_t id = 0;
  std::string bag;
  int channel = 0;
  std::size_t area = 0;
  std::optional<int> label;
  std::string kind;
  Histogram hist;
};

SegmentRecord to_record(const Segment& seg, std::size_t id);

/// JSON lines: {"id":..,"bag":..,"channel":..,"area":..,"label":..|null,"kind":..,"hist":[256]}
void write_segments_jsonl(std::ostream& out, std::span<const SegmentRecord> records);
std::vector<SegmentRecord> read_segments_jsonl(std::istream& in, const std::string& source);

}  // namespace uxpr
