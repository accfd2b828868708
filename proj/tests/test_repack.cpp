#include <algorithm>
#include <filesystem>

#include "doctest.h"
#include "oracles.hpp"
#include "uxpr/io.hpp"
#include "uxpr/repack.hpp"
#include "uxpr/rng.hpp"

using namespace uxpr;
namespace fs = std::filesystem;

namespace {

Segment seg(int channel, std::vector<VoxelIndex> voxels) {
  Segment s;
  s.channel = channel;
  s.voxels = std::move(voxels);
  s.source_values.assign(s.voxels.size(), 1);
  return s;
}

Prediction electrical(bool yes) { return Prediction::from_weights(yes ? std::vector<double>{0.1, 0.9} : std::vector<double>{0.9, 0.1}); }

}  // namespace

TEST_CASE("verdict rules") {
  const Shape dims{6};
  const Segment a = seg(2, {0, 1});
  const Segment b = seg(3, {1, 2});
  const Segment c = seg(2, {3, 4});
  const Segment d = seg(2, {4});
  const Segment gt = seg(0, {5});
  const std::vector<VotedSegment> votes{{&a, electrical(true)},
                                        {&b, electrical(true)},
                                        {&c, electrical(true)},
                                        {&d, electrical(true)},
                                        {&gt, electrical(true)}};
  const RepackMap m = repack_vote(votes, dims);
  CHECK(m.at(1) == Verdict::likely);
  CHECK(m.at(0) == Verdict::unlikely);
  CHECK(m.at(2) == Verdict::unlikely);
  CHECK(m.at(4) == Verdict::unlikely);  // same channel twice
  CHECK(m.at(5) == Verdict::very_unlikely);

  const Segment out = seg(2, {6});
  const std::vector<VotedSegment> bad{{&out, electrical(true)}};
  CHECK_THROWS_AS(repack_vote(bad, dims), std::out_of_range);

  // five-class predictions count when not non-electrical
  const std::vector<VotedSegment> multi{{&a, Prediction::from_weights({0.2, 0.1, 0.7, 0.0, 0.0})},
                                        {&b, Prediction::from_weights({0.9, 0.1, 0.0, 0.0, 0.0})}};
  const RepackMap mm = repack_vote(multi, dims);
  CHECK(mm.at(0) == Verdict::unlikely);
  CHECK(mm.at(2) == Verdict::very_unlikely);
}

TEST_CASE("voting equals per-voxel channel counting and is monotone") {
  Rng rng(77);
  for (int t = 0; t < 60; ++t) {
    const Shape dims{static_cast<std::size_t>(rng.range(1, 16)), static_cast<std::size_t>(rng.range(1, 16)),
                     static_cast<std::size_t>(rng.range(1, 16))};
    const std::size_t n = dims.voxel_count();
    std::vector<Segment> segs;
    std::vector<bool> flags;
    const auto count = rng.range(0, 12);
    for (std::int64_t k = 0; k < count; ++k) {
      std::vector<VoxelIndex> vox;
      for (std::size_t i = 0; i < n; ++i)
        if (rng.below(4) == 0) vox.push_back(static_cast<VoxelIndex>(i));
      if (vox.empty()) vox.push_back(0);
      segs.push_back(seg(static_cast<int>(rng.range(2, 5)), vox));
      flags.push_back(rng.below(2) == 1);
    }
    auto run = [&](const std::vector<bool>& f) {
      std::vector<VotedSegment> votes;
      for (std::size_t k = 0; k < segs.size(); ++k) votes.push_back({&segs[k], electrical(f[k])});
      return repack_vote(votes, dims);
    };
    std::vector<oracle::VoteSegment> plain;
    for (std::size_t k = 0; k < segs.size(); ++k) plain.push_back({segs[k].channel, segs[k].voxels, flags[k]});
    const RepackMap m = run(flags);
    CHECK(m.verdicts.data() == oracle::repack_count(plain, n));
    for (std::size_t k = 0; k < segs.size(); ++k) {
      if (flags[k]) continue;
      auto flipped = flags;
      flipped[k] = true;
      const RepackMap up = run(flipped);
      for (std::size_t i = 0; i < n; ++i) CHECK(up.verdicts[i] >= m.verdicts[i]);
    }
  }
}

TEST_CASE("flatten") {
  SUBCASE("uniform columns") {
    const Volume v(Shape{2, 1, 2}, std::vector<std::uint8_t>{1, 1, 3, 3});
    const Volume f = flatten2d(v, 2);
    CHECK(f.shape() == Shape{2, 1});
    CHECK(f.data() == std::vector<std::uint8_t>{255, 255});
  }
  SUBCASE("half-up rounding") {
    const Volume v(Shape{2, 1, 2}, std::vector<std::uint8_t>{1, 4, 3, 4});
    CHECK(flatten2d(v, 2).data() == std::vector<std::uint8_t>{128, 255});
  }
  SUBCASE("zero volume") {
    const Volume f = flatten2d(Volume(Shape{3, 3, 3}), 0);
    for (auto x : f.values()) CHECK(x == 0);
  }
  SUBCASE("max is 255 and mip dominates the mean") {
    Rng rng(3);
    for (int t = 0; t < 30; ++t) {
      Volume v(Shape{static_cast<std::size_t>(rng.range(1, 9)), static_cast<std::size_t>(rng.range(1, 9)),
                     static_cast<std::size_t>(rng.range(1, 9))});
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<std::uint8_t>(rng.below(4) == 0 ? rng.below(256) : 0);
      v[0] = 1;
      for (int axis = 0; axis < 3; ++axis) {
        const Volume f = flatten2d(v, axis);
        CHECK(*std::max_element(f.values().begin(), f.values().end()) == 255);
        const Volume mip = mip_projection(v, axis);
        const auto depth = static_cast<double>(v.shape().extent(axis));
        // recompute column means directly
        std::vector<double> sum(mip.size(), 0.0);
        for (std::size_t i = 0; i < v.size(); ++i) {
          const auto c = v.shape().coords(i);
          std::array<std::size_t, 2> rest{};
          int r = 0;
          for (int a = 0; a < 3; ++a)
            if (a != axis) rest[static_cast<std::size_t>(r++)] = c[static_cast<std::size_t>(a)];
          sum[rest[0] + rest[1] * mip.shape().extent(0)] += v[i];
        }
        for (std::size_t p = 0; p < mip.size(); ++p) CHECK(mip[p] >= sum[p] / depth);
      }
    }
  }
  CHECK_THROWS_AS(flatten2d(Volume(Shape{2, 2, 2}), 3), std::invalid_argument);
  CHECK_THROWS_AS(flatten2d(Volume(Shape{2, 2}), 0), std::invalid_argument);
}

TEST_CASE("maximum intensity projection") {
  const Volume v(Shape{1, 1, 3}, std::vector<std::uint8_t>{0, 200, 17});
  CHECK(mip_projection(v, 2).data() == std::vector<std::uint8_t>{200});
  const Volume flat(Shape{3, 4, 5}, 9);
  for (int axis = 0; axis < 3; ++axis) {
    const Volume img = mip_projection(flat, axis);
    for (auto x : img.values()) CHECK(x == 9);
  }
  CHECK_THROWS_AS(mip_projection(flat, -1), std::invalid_argument);
}

TEST_CASE("projected label supports") {
  LabelVolume lv{LabelGrid(Shape{2, 2, 3}), {{1, "a", "a", true}, {2, "b", "b", false}}};
  lv.labels[lv.labels.shape().index(0, 0, 0)] = 1;
  lv.labels[lv.labels.shape().index(0, 0, 2)] = 1;
  lv.labels[lv.labels.shape().index(1, 1, 1)] = 2;
  const auto sup = project_label_supports(lv, 2);
  REQUIRE(sup.size() == 2);
  CHECK(sup[0] == std::vector<VoxelIndex>{0});
  CHECK(sup[1] == std::vector<VoxelIndex>{3});
}

TEST_CASE("composite render writes one image per axis and verdict") {
  const fs::path dir = fs::temp_directory_path() / "uxpr_render";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Volume v(Shape{4, 3, 2}, 50);
  RepackMap m{Volume(Shape{4, 3, 2})};
  m.verdicts[0] = 2;
  render_composite(dir, v, m);
  std::size_t pgms = 0;
  for (const auto& e : fs::directory_iterator(dir)) pgms += e.path().extension() == ".pgm";
  CHECK(pgms == 9);
  const Volume likely = io::read_pgm(dir / "mip_z_likely.pgm");
  CHECK(likely[0] == 50);
  CHECK_THROWS_AS(render_composite(dir, Volume(Shape{4, 3, 3}), m), std::invalid_argument);
}
