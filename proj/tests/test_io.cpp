#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "uxpr/error.hpp"
#include "uxpr/io.hpp"
#include "uxpr/rng.hpp"

using namespace uxpr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("uxpr_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("uxv round trip for every dtype") {
  Rng rng(3);
  Volume u8(Shape{5, 4, 3});
  SignedVolume i16(Shape{7, 2});
  LabelGrid u16(Shape{9});
  for (std::size_t i = 0; i < u8.size(); ++i) u8[i] = static_cast<std::uint8_t>(rng.below(256));
  for (std::size_t i = 0; i < i16.size(); ++i) i16[i] = static_cast<std::int16_t>(rng.range(-255, 255));
  for (std::size_t i = 0; i < u16.size(); ++i) u16[i] = static_cast<std::uint16_t>(rng.below(65536));

  std::stringstream a, b, c;
  io::write_uxv(a, u8);
  io::write_uxv(b, i16);
  io::write_uxv(c, u16);
  CHECK(a.str().rfind("UXV1\n{\"dims\":[5,4,3],\"dtype\":\"u8\"}\n", 0) == 0);
  CHECK(io::read_uxv_u8(a, "a") == u8);
  CHECK(io::read_uxv_i16(b, "b") == i16);
  CHECK(io::read_uxv_u16(c, "c") == u16);
}

TEST_CASE("i16 payload is little endian two's complement") {
  SignedVolume v(Shape{2}, std::vector<std::int16_t>{-2, 258});
  std::stringstream s;
  io::write_uxv(s, v);
  const std::string bytes = s.str();
  const std::string tail = bytes.substr(bytes.size() - 4);
  CHECK(static_cast<unsigned char>(tail[0]) == 0xFE);
  CHECK(static_cast<unsigned char>(tail[1]) == 0xFF);
  CHECK(static_cast<unsigned char>(tail[2]) == 0x02);
  CHECK(static_cast<unsigned char>(tail[3]) == 0x01);
}

TEST_CASE("malformed uxv reports source and offset") {
  auto read = [](const std::string& text) {
    std::istringstream in(text);
    return io::read_uxv_u8(in, "mem");
  };
  CHECK_THROWS_AS(read("UXV2\n"), InputError);
  CHECK_THROWS_AS(read("UXV1\n{\"dims\":[2],\"dtype\":\"u8\"\n"), InputError);
  CHECK_THROWS_AS(read("UXV1\n{\"dims\":[2],\"dtype\":\"i16\"}\nabcd"), InputError);
  try {
    read("UXV1\n{\"dims\":[4],\"dtype\":\"u8\"}\nab");
    FAIL("truncated data accepted");
  } catch (const InputError& e) {
    CHECK(e.source() == "mem");
    CHECK(e.offset() == 33);
  }
  // out-of-range signed voxels
  std::string bad = "UXV1\n{\"dims\":[1],\"dtype\":\"i16\"}\n";
  bad += std::string("\x00\x01", 2);
  std::istringstream in(bad);
  CHECK_THROWS_AS(io::read_uxv_i16(in, "mem"), InputError);
}

TEST_CASE("label volume with sidecar table") {
  const fs::path dir = scratch("labels");
  LabelVolume lv{LabelGrid(Shape{3, 3}), {{1, "phone", "mobile_phone", true}, {2, "book", "book", false}}};
  lv.labels[4] = 1;
  lv.labels[5] = 2;
  io::write_label_volume(dir / "l.uxv", dir / "l.json", lv);
  const auto back = io::read_label_volume(dir / "l.uxv", dir / "l.json");
  CHECK(back.labels == lv.labels);
  REQUIRE(back.table.size() == 2);
  CHECK(back.table[0].name == "phone");
  CHECK(back.table[0].category == "mobile_phone");
  CHECK(back.table[0].electrical);
  CHECK_FALSE(back.table[1].electrical);

  io::write_text(dir / "broken.json", "{\"labels\":[{\"id\":1}");
  CHECK_THROWS_AS(io::read_label_volume(dir / "l.uxv", dir / "broken.json"), InputError);
  CHECK_THROWS_AS(io::read_volume(dir / "missing.uxv"), InputError);
}

TEST_CASE("pgm round trip") {
  const fs::path dir = scratch("pgm");
  Volume img(Shape{3, 2}, std::vector<std::uint8_t>{0, 10, 255, 7, 8, 9});
  io::write_pgm(dir / "x.pgm", img);
  CHECK(io::read_pgm(dir / "x.pgm") == img);
  std::ifstream in(dir / "x.pgm", std::ios::binary);
  std::string magic;
  in >> magic;
  CHECK(magic == "P5");
  CHECK_THROWS_AS(io::write_pgm(dir / "y.pgm", Volume(Shape{2, 2, 2})), std::invalid_argument);
}

TEST_CASE("json parse errors carry offsets") {
  const fs::path dir = scratch("json");
  io::write_text(dir / "a.json", "{\"a\": [1, 2,, 3]}");
  try {
    io::read_json(dir / "a.json");
    FAIL("bad json accepted");
  } catch (const InputError& e) {
    CHECK(e.offset() > 0);
    CHECK(std::string(e.what()).find("a.json") != std::string::npos);
  }
}
