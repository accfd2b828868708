#include "uxpr/extract.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include "json.hpp"
#include "uxpr/error.hpp"

namespace uxpr {

Task parse_task(std::string_view text) {
  if (text == "two_class") return Task::two_class;
  if (text == "five_class") return Task::five_class;
  throw std::invalid_argument("unknown task '" + std::string(text) + "'");
}

std::string_view task_name(Task t) noexcept { return t == Task::two_class ? "two_class" : "five_class"; }

int class_count(Task t) noexcept { return t == Task::two_class ? 2 : 5; }

int class_of(const LabelInfo& info, Task task) {
  if (!info.electrical) return kNonElectrical;
  if (task == Task::two_class) return 1;
  for (int c = 1; c <= 3; ++c) {
    if (info.category == kFiveClassNames[static_cast<std::size_t>(c)]) return c;
  }
  return 4;
}

std::uint64_t Histogram::total() const noexcept {
  std::uint64_t t = 0;
  for (auto b : bins) t += b;
  return t;
}

Histogram segment_histogram(const Segment& seg) {
  if (seg.voxels.empty()) throw std::invalid_argument("empty segment");
  if (seg.source_values.size() != seg.voxels.size()) {
    throw std::invalid_argument("segment source values do not match its voxels");
  }
  Histogram h;
  for (std::uint8_t v : seg.source_values) ++h.bins[v];
  return h;
}

Histogram histogram_of(std::span<const int> values) {
  Histogram h;
  for (int v : values) {
    if (v < 0 || v > 255) throw std::invalid_argument("intensity " + std::to_string(v) + " outside [0, 255]");
    ++h.bins[static_cast<std::size_t>(v)];
  }
  return h;
}

ScaleSchedule default_schedule(std::size_t n_scales, std::uint64_t s_min, std::uint64_t s_max) {
  if (n_scales < 2) throw std::invalid_argument("a schedule needs at least two scales");
  if (s_min < 1 || s_min >= s_max) throw std::invalid_argument("schedule bounds must satisfy 1 <= s_min < s_max");
  const double lo = std::log10(static_cast<double>(s_min));
  const double hi = std::log10(static_cast<double>(s_max));
  std::vector<std::uint64_t> scales(n_scales);
  scales.front() = s_min;
  scales.back() = s_max;
  for (std::size_t i = 1; i + 1 < n_scales; ++i) {
    const double e = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_scales - 1);
    scales[i] = static_cast<std::uint64_t>(std::floor(std::pow(10.0, e) + 0.5));
  }
  return ScaleSchedule(std::move(scales));
}

BoundsMode parse_bounds_mode(std::string_view text) {
  if (text == "bracketing") return BoundsMode::bracketing;
  if (text == "all") return BoundsMode::all;
  throw std::invalid_argument("unknown bounds mode '" + std::string(text) + "'");
}

std::string_view bounds_name(BoundsMode m) noexcept { return m == BoundsMode::all ? "all" : "bracketing"; }

std::vector<Segment> extract_from_channels(std::span<const Volume> abs_channels, const ScaleSchedule& schedule,
                                           BoundsMode bounds, const std::string& bag_id) {
  if (abs_channels.size() + 1 != schedule.size()) {
    throw std::invalid_argument("expected " + std::to_string(schedule.size() - 1) + " absolute channels");
  }
  std::vector<Segment> out;
  for (std::size_t k = 0; k < abs_channels.size(); ++k) {
    const std::size_t n = k + 2;
    const Volume& ch = abs_channels[k];
    const std::uint64_t lower = schedule.scale(n - 1);
    const std::uint64_t upper = schedule.scale(n);
    for (auto& comp : nonzero_components(ch, face_connectivity(ch.shape()))) {
      const std::uint64_t area = comp.size();
      if (bounds == BoundsMode::bracketing && (area <= lower || area > upper)) continue;
      Segment seg;
      seg.bag_id = bag_id;
      seg.channel = static_cast<int>(n);
      seg.source_values.reserve(comp.size());
      for (VoxelIndex i : comp) seg.source_values.push_back(ch[i]);
      seg.voxels = std::move(comp);
      out.push_back(std::move(seg));
    }
  }
  return out;
}

std::vector<Segment> extract_segments(const SieveDecomposition& d, BoundsMode bounds, const std::string& bag_id) {
  if (d.channels_signed.size() < 2) throw std::invalid_argument("decomposition needs at least two scales");
  std::vector<Volume> channels;
  for (std::size_t n = 2; n <= d.channels_signed.size(); ++n) channels.push_back(abs_channel(d, n));
  return extract_from_channels(channels, d.schedule, bounds, bag_id);
}

std::vector<Segment> ground_truth_segments(const Volume& v, const LabelVolume& labels, Task task,
                                           const std::string& bag_id) {
  if (!(v.shape() == labels.labels.shape())) throw std::invalid_argument("label volume dims differ from volume");
  std::map<std::uint16_t, std::vector<VoxelIndex>> support;
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    if (labels.labels[i] != 0) support[labels.labels[i]].push_back(static_cast<VoxelIndex>(i));
  }
  std::vector<Segment> out;
  for (const auto& info : labels.table) {
    auto it = support.find(info.id);
    if (it == support.end()) {
      warn("label " + std::to_string(info.id) + " (" + info.name + ") has no voxels; skipped");
      continue;
    }
    Segment seg;
    seg.bag_id = bag_id;
    seg.channel = 0;
    seg.voxels = it->second;
    seg.source_values.reserve(seg.voxels.size());
    for (VoxelIndex i : seg.voxels) seg.source_values.push_back(v[i]);
    seg.label = class_of(info, task);
    seg.kind = info.name;
    out.push_back(std::move(seg));
  }
  return out;
}

OverlapLabel auto_label(const Segment& seg, const LabelVolume& labels, Task task) {
  std::map<std::uint16_t, std::size_t> overlap;
  for (VoxelIndex i : seg.voxels) {
    if (i >= labels.labels.size()) throw std::out_of_range("segment voxel outside label volume");
    const std::uint16_t l = labels.labels[i];
    if (l != 0) ++overlap[l];
  }
  OverlapLabel best;
  std::size_t best_count = 0;
  // std::map iterates ids ascending, so strict > keeps the smaller id on ties.
  for (const auto& [id, count] : overlap) {
    const LabelInfo* info = labels.find(id);
    if (info == nullptr) throw std::invalid_argument("label " + std::to_string(id) + " missing from table");
    if (!info->electrical) continue;
    if (count > best_count) {
      best_count = count;
      best = {class_of(*info, task), id};
    }
  }
  return best;
}

int auto_label_segment(const Segment& seg, const LabelVolume& labels, Task task) {
  return auto_label(seg, labels, task).class_id;
}

void auto_label_all(std::vector<Segment>& segments, const LabelVolume& labels, Task task) {
  for (auto& seg : segments) {
    const OverlapLabel l = auto_label(seg, labels, task);
    seg.label = l.class_id;
    if (l.label_id != 0) {
      seg.kind = labels.find(l.label_id)->name;
      continue;
    }
    // Non-electrical: name the non-electrical object with the largest overlap.
    std::map<std::uint16_t, std::size_t> overlap;
    for (VoxelIndex i : seg.voxels) {
      if (labels.labels[i] != 0) ++overlap[labels.labels[i]];
    }
    std::size_t best = 0;
    seg.kind.clear();
    for (const auto& [id, count] : overlap) {
      if (count > best) {
        best = count;
        seg.kind = labels.find(id)->name;
      }
    }
  }
}

SegmentRecord to_record(const Segment& seg, std::size_t id) {
  SegmentRecord r;
  r.id = id;
  r.bag = seg.bag_id;
  r.channel = seg.channel;
  r.area = seg.area();
  r.label = seg.label;
  r.kind = seg.kind;
  r.hist = segment_histogram(seg);
  return r;
}

void write_segments_jsonl(std::ostream& out, std::span<const SegmentRecord> records) {
  for (const auto& r : records) {
    nlohmann::json j;
    j["id"] = r.id;
    j["bag"] = r.bag;
    j["channel"] = r.channel;
    j["area"] = r.area;
    j["label"] = r.label ? nlohmann::json(*r.label) : nlohmann::json(nullptr);
    j["kind"] = r.kind;
    j["hist"] = r.hist.bins;
    out << j.dump() << '\n';
  }
}

std::vector<SegmentRecord> read_segments_jsonl(std::istream& in, const std::string& source) {
  std::vector<SegmentRecord> out;
  std::string line;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    const std::uint64_t line_offset = offset;
    offset += line.size() + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(source, line_offset + (e.byte > 0 ? e.byte - 1 : 0), "malformed segment record");
    }
    try {
      SegmentRecord r;
      r.id = j.value("id", out.size());
      r.bag = j.at("bag").get<std::string>();
      r.channel = j.at("channel").get<int>();
      r.area = j.at("area").get<std::size_t>();
      if (j.contains("label") && !j["label"].is_null()) r.label = j["label"].get<int>();
      r.kind = j.value("kind", std::string{});
      const auto bins = j.at("hist").get<std::vector<std::int64_t>>();
      if (bins.size() != 256) throw std::invalid_argument("histogram must have 256 bins");
      for (std::size_t b = 0; b < 256; ++b) {
        if (bins[b] < 0) throw std::invalid_argument("negative histogram count");
        r.hist.bins[b] = static_cast<std::uint32_t>(bins[b]);
      }
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw InputError(source, line_offset, std::string("bad segment record: ") + e.what());
    }
  }
  return out;
}

}  // namespace uxpr
