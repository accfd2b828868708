#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "uxpr/error.hpp"
#include "uxpr/extract.hpp"
#include "uxpr/rng.hpp"

using namespace uxpr;

namespace {

Volume line(std::vector<std::uint8_t> values) {
  const std::size_t n = values.size();
  return Volume(Shape{n}, std::move(values));
}

LabelVolume two_objects(const Shape& s) {
  return LabelVolume{LabelGrid(s),
                     {{1, "laptop", "laptop", true}, {2, "drive", "hard_drive", true}, {3, "book", "book", false}}};
}

Segment segment_of(std::vector<VoxelIndex> voxels) {
  Segment s;
  s.channel = 2;
  s.source_values.assign(voxels.size(), 1);
  s.voxels = std::move(voxels);
  return s;
}

}  // namespace

TEST_CASE("default schedule") {
  const auto s = default_schedule(5, 4000, 2800000);
  const std::vector<std::uint64_t> printed{4000, 20575, 105830, 544357, 2800000};
  REQUIRE(s.size() == 5);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(std::abs(static_cast<double>(s.scales()[i]) - static_cast<double>(printed[i])) <= 0.001 * printed[i]);
  CHECK(default_schedule(2, 10, 1000).scales() == std::vector<std::uint64_t>{10, 1000});
  CHECK(default_schedule(3, 4, 64).scales() == std::vector<std::uint64_t>{4, 16, 64});
  CHECK(default_schedule(4, 1, 1000).scales() == std::vector<std::uint64_t>{1, 10, 100, 1000});
  CHECK_THROWS_AS(default_schedule(3, 64, 64), std::invalid_argument);
  CHECK_THROWS_AS(default_schedule(3, 100, 10), std::invalid_argument);
  CHECK_THROWS_AS(default_schedule(1, 4, 64), std::invalid_argument);
}

TEST_CASE("extract from the worked decomposition") {
  const auto d = decompose(line({3, 1, 4, 4, 2}), ScaleSchedule({1, 2}), FilterKind::m_filter, Connectivity::two);
  const auto segs = extract_segments(d, BoundsMode::bracketing, "b");
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].channel == 2);
  CHECK(segs[0].voxels == std::vector<VoxelIndex>{0, 1});
  CHECK(segs[0].area() == 2);
  CHECK(segs[0].bag_id == "b");
  const auto h = segment_histogram(segs[0]);
  CHECK(h.bins[3] == 2);
  CHECK(h.total() == 2);

  const auto flat = decompose(Volume(Shape{4, 4}, 6), ScaleSchedule({1, 3}), FilterKind::m_filter, Connectivity::four);
  CHECK(extract_segments(flat, BoundsMode::all).empty());
}

TEST_CASE("bracketing drops out-of-band areas") {
  // channel 2 of schedule [1,2] holding a five-voxel set
  const std::vector<Volume> channels{line({0, 4, 4, 4, 4, 4, 0, 9, 9})};
  const ScaleSchedule sched({1, 2});
  const auto kept = extract_from_channels(channels, sched, BoundsMode::bracketing);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].voxels == std::vector<VoxelIndex>{7, 8});
  CHECK(extract_from_channels(channels, sched, BoundsMode::all).size() == 2);
  CHECK_THROWS_AS(extract_from_channels(std::vector<Volume>{}, sched, BoundsMode::all), std::invalid_argument);
  CHECK(parse_bounds_mode(bounds_name(BoundsMode::all)) == BoundsMode::all);
  CHECK_THROWS_AS(parse_bounds_mode("some"), std::invalid_argument);
}

TEST_CASE("segments cover channel support and respect bounds") {
  Rng rng(8);
  for (int t = 0; t < 40; ++t) {
    Volume v(Shape{10, 9, 8});
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<std::uint8_t>(rng.below(6) * 40);
    const auto d = decompose(v, ScaleSchedule({2, 6, 30, 200}), FilterKind::m_filter, Connectivity::six);
    const auto all = extract_segments(d, BoundsMode::all);
    const auto bracketed = extract_segments(d, BoundsMode::bracketing);
    for (std::size_t n = 2; n <= 4; ++n) {
      const Volume ch = abs_channel(d, n);
      std::vector<int> hit(v.size(), 0);
      for (const auto& s : all) {
        if (s.channel != static_cast<int>(n)) continue;
        for (std::size_t k = 0; k < s.voxels.size(); ++k) {
          ++hit[s.voxels[k]];
          CHECK(s.source_values[k] == ch[s.voxels[k]]);
        }
      }
      for (std::size_t i = 0; i < v.size(); ++i) CHECK(hit[i] == (ch[i] != 0 ? 1 : 0));
    }
    for (const auto& s : bracketed) {
      const auto n = static_cast<std::size_t>(s.channel);
      CHECK(s.area() > d.schedule.scale(n - 1));
      CHECK(s.area() <= d.schedule.scale(n));
    }
  }
}

TEST_CASE("histograms") {
  Segment one = segment_of({4});
  one.source_values = {255};
  CHECK(segment_histogram(one).bins[255] == 1);
  CHECK(segment_histogram(one).total() == 1);
  const std::vector<int> bad{3, 256};
  CHECK_THROWS_AS(histogram_of(bad), std::invalid_argument);
  const std::vector<int> neg{-1};
  CHECK_THROWS_AS(histogram_of(neg), std::invalid_argument);

  Rng rng(4);
  std::vector<int> values(200);
  for (auto& x : values) x = static_cast<int>(rng.below(256));
  const Histogram h = histogram_of(values);
  for (int t = 0; t < 10; ++t) {
    for (std::size_t i = values.size() - 1; i > 0; --i) std::swap(values[i], values[rng.below(i + 1)]);
    CHECK(histogram_of(values) == h);
  }
  CHECK(h.total() == 200);
}

TEST_CASE("ground truth segments") {
  Volume v(Shape{8});
  v[4] = v[5] = 7;
  LabelVolume lv = two_objects(Shape{8});
  lv.labels[4] = lv.labels[5] = 1;
  lv.labels[0] = 3;
  set_warnings_enabled(false);  // label 2 is empty here
  const auto segs = ground_truth_segments(v, lv, Task::two_class, "g");
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].voxels == std::vector<VoxelIndex>{4, 5});
  CHECK(segment_histogram(segs[0]).bins[7] == 2);
  CHECK(segs[0].channel == 0);
  CHECK(segs[0].label == 1);
  CHECK(segs[1].label == 0);
  CHECK(segs[1].kind == "book");

  CHECK(ground_truth_segments(v, two_objects(Shape{8}), Task::two_class).empty());
  set_warnings_enabled(true);
  CHECK_THROWS_AS(ground_truth_segments(Volume(Shape{4}), lv, Task::two_class), std::invalid_argument);
}

TEST_CASE("overlap labeling") {
  LabelVolume lv = two_objects(Shape{30});
  for (VoxelIndex i = 0; i < 5; ++i) lv.labels[i] = 1;        // laptop
  for (VoxelIndex i = 5; i < 14; ++i) lv.labels[i] = 2;       // hard drive
  for (VoxelIndex i = 20; i < 30; ++i) lv.labels[i] = 3;      // non-electrical
  std::vector<VoxelIndex> both(14);
  for (VoxelIndex i = 0; i < 14; ++i) both[i] = i;
  const Segment s = segment_of(both);
  CHECK(auto_label_segment(s, lv, Task::two_class) == 1);
  CHECK(auto_label_segment(s, lv, Task::five_class) == 2);
  CHECK(auto_label(s, lv, Task::five_class).label_id == 2);

  // a single touching voxel is enough
  const Segment touch = segment_of({13, 14, 15, 20});
  CHECK(auto_label_segment(touch, lv, Task::two_class) == 1);
  const Segment none = segment_of({16, 17, 20, 21});
  CHECK(auto_label_segment(none, lv, Task::two_class) == kNonElectrical);
  CHECK(auto_label_segment(none, lv, Task::five_class) == kNonElectrical);

  // equal overlap goes to the smaller label id
  const Segment tie = segment_of({3, 4, 5, 6});
  CHECK(auto_label(tie, lv, Task::five_class).label_id == 1);
  CHECK(auto_label_segment(tie, lv, Task::five_class) == 3);

  std::vector<Segment> segs{s, none};
  auto_label_all(segs, lv, Task::five_class);
  CHECK(segs[0].label == 2);
  CHECK(segs[0].kind == "drive");
  CHECK(segs[1].label == 0);
}

TEST_CASE("class mapping") {
  CHECK(class_of({1, "x", "mobile_phone", true}, Task::five_class) == 1);
  CHECK(class_of({1, "x", "hair_dryer", true}, Task::five_class) == 4);
  CHECK(class_of({1, "x", "laptop", true}, Task::two_class) == 1);
  CHECK(class_of({1, "x", "laptop", false}, Task::five_class) == 0);
  CHECK(class_count(Task::five_class) == 5);
  CHECK(parse_task("two_class") == Task::two_class);
  CHECK_THROWS_AS(parse_task("three_class"), std::invalid_argument);
}

TEST_CASE("segment records round trip through json lines") {
  Segment s = segment_of({1, 2, 3});
  s.bag_id = "bag_007";
  s.source_values = {5, 5, 200};
  s.label = 1;
  s.kind = "laptop";
  std::vector<SegmentRecord> recs{to_record(s, 0), to_record(segment_of({9}), 1)};
  std::stringstream io;
  write_segments_jsonl(io, recs);
  const auto back = read_segments_jsonl(io, "mem");
  REQUIRE(back.size() == 2);
  CHECK(back[0].bag == "bag_007");
  CHECK(back[0].area == 3);
  CHECK(back[0].label == 1);
  CHECK(back[0].kind == "laptop");
  CHECK(back[0].hist == recs[0].hist);
  CHECK_FALSE(back[1].label.has_value());
  CHECK(back[1].id == 1);

  std::istringstream bad("{\"id\":0,\"bag\":\"a\"\n");
  CHECK_THROWS_AS(read_segments_jsonl(bad, "mem"), InputError);
  std::istringstream short_hist("{\"id\":0,\"bag\":\"a\",\"channel\":2,\"area\":1,\"label\":null,\"kind\":\"\",\"hist\":[1]}\n");
  CHECK_THROWS_AS(read_segments_jsonl(short_hist, "mem"), InputError);
}
