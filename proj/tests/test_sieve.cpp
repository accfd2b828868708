#include <algorithm>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "uxpr/rng.hpp"
#include "uxpr/sieve.hpp"

using namespace uxpr;

namespace {

Volume line(std::vector<std::uint8_t> values) {
  const std::size_t n = values.size();
  return Volume(Shape{n}, std::move(values));
}

std::vector<std::uint8_t> as_vec(const Volume& v) { return {v.values().begin(), v.values().end()}; }

std::vector<int> as_ints(const Volume& v) { return {v.values().begin(), v.values().end()}; }

Volume random_volume(Rng& rng, std::size_t max_edge, int levels) {
  const int rank = static_cast<int>(rng.range(1, 3));
  std::vector<std::size_t> ext;
  for (int a = 0; a < rank; ++a) {
    const std::size_t hi = rank == 1 ? max_edge * max_edge : max_edge;
    ext.push_back(static_cast<std::size_t>(rng.range(1, static_cast<std::int64_t>(hi))));
  }
  Volume v{Shape(ext)};
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<std::uint8_t>(rng.below(static_cast<std::uint64_t>(levels)));
  return v;
}

Volume filt(const Volume& v, std::uint64_t s, FilterKind k) { return apply_filter(v, s, k, face_connectivity(v.shape())); }

constexpr FilterKind kAllKinds[] = {FilterKind::opening, FilterKind::closing, FilterKind::m_filter, FilterKind::n_filter};

}  // namespace

TEST_CASE("filter names parse") {
  CHECK(parse_filter_kind("m") == FilterKind::m_filter);
  CHECK(parse_filter_kind("n_filter") == FilterKind::n_filter);
  CHECK(parse_filter_kind("o") == FilterKind::opening);
  CHECK(parse_filter_kind("closing") == FilterKind::closing);
  CHECK_THROWS_AS(parse_filter_kind("median"), std::invalid_argument);
  for (auto k : kAllKinds) CHECK(parse_filter_kind(filter_name(k)) == k);
}

TEST_CASE("schedules must be strictly increasing and positive") {
  CHECK_NOTHROW(ScaleSchedule({1, 2, 9}));
  CHECK_THROWS_AS(ScaleSchedule({0, 2}), std::invalid_argument);
  CHECK_THROWS_AS(ScaleSchedule({4, 4}), std::invalid_argument);
  CHECK_THROWS_AS(ScaleSchedule({5, 3}), std::invalid_argument);
  CHECK(ScaleSchedule({4, 16}).scale(2) == 16);
}

TEST_CASE("apply_filter worked cases") {
  CHECK(as_vec(filt(line({0, 0, 5, 0, 0}), 1, FilterKind::m_filter)) == std::vector<std::uint8_t>{0, 0, 0, 0, 0});
  CHECK(as_vec(filt(line({3, 1, 4, 4, 2}), 1, FilterKind::m_filter)) == std::vector<std::uint8_t>{1, 1, 4, 4, 4});
  CHECK(as_vec(filt(line({1, 1, 4, 4, 4}), 2, FilterKind::m_filter)) == std::vector<std::uint8_t>{4, 4, 4, 4, 4});
  const Volume flat(Shape{4, 3, 2}, 77);
  for (auto k : kAllKinds)
    for (std::uint64_t s : {1, 5, 1000}) CHECK(filt(flat, s, k) == flat);
  CHECK_THROWS_AS(filt(flat, 0, FilterKind::opening), std::invalid_argument);
  CHECK_THROWS_AS(apply_filter(flat, 1, FilterKind::opening, Connectivity::two), std::invalid_argument);
}

TEST_CASE("1-D filter equals the run-merging oracle") {
  Rng rng(99);
  for (int t = 0; t < 400; ++t) {
    const std::size_t n = static_cast<std::size_t>(rng.range(1, 48));
    std::vector<std::uint8_t> f(n);
    const auto levels = static_cast<std::uint64_t>(rng.range(2, 9));
    for (auto& x : f) x = static_cast<std::uint8_t>(rng.below(levels));
    const std::uint64_t s = static_cast<std::uint64_t>(rng.range(1, 12));
    const Volume v = line(f);
    const std::vector<int> fi(f.begin(), f.end());
    CHECK(as_ints(filt(v, s, FilterKind::opening)) == oracle::sieve_runs(fi, s, true));
    CHECK(as_ints(filt(v, s, FilterKind::closing)) == oracle::sieve_runs(fi, s, false));
    CHECK(as_ints(filt(v, s, FilterKind::m_filter)) == oracle::m_filter_1d(fi, s));
    for (auto k : kAllKinds) CHECK(as_vec(filt(v, s, k)) == brute_force_sieve_1d(std::span<const std::uint8_t>(f), s, k));
  }
}

TEST_CASE("brute force sieve rejects multi-axis input") {
  CHECK_THROWS_AS(brute_force_sieve_1d(Volume(Shape{2, 2}), 1, FilterKind::m_filter), std::invalid_argument);
  const Volume one = line({42});
  CHECK(brute_force_sieve_1d(one, 3, FilterKind::m_filter) == one);
  CHECK(as_vec(brute_force_sieve_1d(line({0, 0, 5, 0, 0}), 1, FilterKind::opening)) ==
        std::vector<std::uint8_t>{0, 0, 0, 0, 0});
}

TEST_CASE("block size does not change the result") {
  Rng rng(17);
  for (int t = 0; t < 150; ++t) {
    const Volume v = random_volume(rng, 12, static_cast<int>(rng.range(2, 40)));
    const auto c = face_connectivity(v.shape());
    const std::uint64_t s = static_cast<std::uint64_t>(rng.range(1, 60));
    for (auto k : kAllKinds) {
      const Volume whole = apply_filter(v, s, k, c, std::size_t{1} << 30);
      for (std::size_t tile : {1, 2, 5, 8, 27, 64}) CHECK(apply_filter(v, s, k, c, tile) == whole);
    }
  }
  CHECK_THROWS_AS(apply_filter(line({1, 2}), 1, FilterKind::opening, Connectivity::two, 0), std::invalid_argument);
}

TEST_CASE("filter properties on random volumes") {
  Rng rng(23);
  for (int t = 0; t < 120; ++t) {
    const Volume v = random_volume(rng, 10, static_cast<int>(rng.range(2, 12)));
    const std::uint64_t s = static_cast<std::uint64_t>(rng.range(1, 30));
    const std::set<std::uint8_t> before(v.values().begin(), v.values().end());
    const Volume open = filt(v, s, FilterKind::opening);
    const Volume close = filt(v, s, FilterKind::closing);
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(open[i] <= v[i]);
      CHECK(close[i] >= v[i]);
    }
    const auto ext = oracle::count_extrema(v);
    for (auto k : kAllKinds) {
      const Volume out = filt(v, s, k);
      CHECK(filt(out, s, k) == out);
      // no new intensity values
      for (auto x : out.values()) CHECK(before.count(x) == 1);
      const auto e = oracle::count_extrema(out, s);
      if (k != FilterKind::closing) CHECK(e.small_maxima == 0);
      if (k != FilterKind::opening) CHECK(e.small_minima == 0);
      CHECK(e.maxima + e.minima <= ext.maxima + ext.minima);
    }
    // composites are the two one-sided filters chained
    CHECK(filt(v, s, FilterKind::m_filter) == filt(open, s, FilterKind::closing));
    CHECK(filt(v, s, FilterKind::n_filter) == filt(close, s, FilterKind::opening));
  }
}

TEST_CASE("decompose worked case") {
  const Volume v = line({3, 1, 4, 4, 2});
  const auto d = decompose(v, ScaleSchedule({1, 2}), FilterKind::m_filter, Connectivity::two);
  REQUIRE(d.lowpass.size() == 2);
  REQUIRE(d.channels_signed.size() == 2);
  CHECK(as_vec(d.lowpass[0]) == std::vector<std::uint8_t>{1, 1, 4, 4, 4});
  CHECK(as_vec(d.lowpass[1]) == std::vector<std::uint8_t>{4, 4, 4, 4, 4});
  CHECK(d.channels_signed[0].data() == std::vector<std::int16_t>{2, 0, 0, 0, -2});
  CHECK(d.channels_signed[1].data() == std::vector<std::int16_t>{-3, -3, 0, 0, 0});
  CHECK(d.reconstruct() == v);
  CHECK(as_vec(abs_channel(d, 2)) == std::vector<std::uint8_t>{3, 3, 0, 0, 0});
  CHECK_THROWS_AS(abs_channel(d, 1), std::out_of_range);
  CHECK_THROWS_AS(abs_channel(d, 3), std::out_of_range);
}

TEST_CASE("constant volumes decompose to zero channels") {
  const Volume v(Shape{6, 6}, 31);
  const auto d = decompose(v, ScaleSchedule({1, 4, 20}), FilterKind::n_filter, Connectivity::four);
  for (const auto& ch : d.channels_signed)
    for (auto x : ch.values()) CHECK(x == 0);
  CHECK(d.reconstruct() == v);
}

TEST_CASE("decomposition telescopes exactly and stays causal") {
  Rng rng(41);
  for (int t = 0; t < 60; ++t) {
    const Volume v = random_volume(rng, 12, static_cast<int>(rng.range(2, 256)));
    const auto c = face_connectivity(v.shape());
    for (auto k : kAllKinds) {
      const auto d = decompose(v, ScaleSchedule({2, 8, 64, 512}), k, c);
      CHECK(d.reconstruct() == v);
      std::size_t prev = SIZE_MAX;
      for (std::size_t n = 0; n < d.lowpass.size(); ++n) {
        const Volume& before = n == 0 ? v : d.lowpass[n - 1];
        CHECK(filt(before, d.schedule.scale(n + 1), k) == d.lowpass[n]);
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(d.channels_signed[n][i] == before[i] - d.lowpass[n][i]);
        const auto e = oracle::count_extrema(d.lowpass[n]);
        CHECK(e.maxima + e.minima <= prev);
        prev = e.maxima + e.minima;
      }
    }
  }
}

TEST_CASE("one-sided filters absorb smaller scales") {
  Rng rng(53);
  for (int t = 0; t < 80; ++t) {
    const Volume v = random_volume(rng, 8, 5);
    const std::uint64_t s = static_cast<std::uint64_t>(rng.range(2, 14));
    for (auto k : {FilterKind::opening, FilterKind::closing}) {
      Volume dense = v;
      for (std::uint64_t q = 1; q <= s; ++q) dense = filt(dense, q, k);
      CHECK(dense == filt(v, s, k));
    }
  }
}
