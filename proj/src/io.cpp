#include "uxpr/io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "uxpr/error.hpp"

namespace uxpr::io {

namespace {

constexpr std::string_view kMagic = "UXV1";

template <class T>
constexpr std::string_view dtype_of() {
  if constexpr (std::is_same_v<T, std::uint8_t>) return "u8";
  if constexpr (std::is_same_v<T, std::int16_t>) return "i16";
  if constexpr (std::is_same_v<T, std::uint16_t>) return "u16";
}

template <class T>
void write_grid(std::ostream& out, const Grid<T>& g) {
  nlohmann::json header;
  header["dims"] = g.shape().extents();
  header["dtype"] = dtype_of<T>();
  out << kMagic << '\n' << header.dump() << '\n';
  if constexpr (sizeof(T) == 1) {
    out.write(reinterpret_cast<const char*>(g.values().data()), static_cast<std::streamsize>(g.size()));
  } else {
    std::string buf(g.size() * 2, '\0');
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto u = static_cast<std::uint16_t>(g[i]);
      buf[2 * i] = static_cast<char>(u & 0xFF);
      buf[2 * i + 1] = static_cast<char>(u >> 8);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw std::runtime_error("write failed");
}

template <class T>
Grid<T> read_grid(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw InputError(source, 0, "missing UXV1 magic line");
  const std::uint64_t header_offset = kMagic.size() + 1;
  if (!std::getline(in, line)) throw InputError(source, header_offset, "missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(source, header_offset + (e.byte > 0 ? e.byte - 1 : 0), "malformed JSON header");
  }
  const std::uint64_t data_offset = header_offset + line.size() + 1;
  std::vector<std::size_t> dims;
  std::string dtype;
  try {
    dims = header.at("dims").get<std::vector<std::size_t>>();
    dtype = header.at("dtype").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw InputError(source, header_offset, "header needs integer \"dims\" and string \"dtype\"");
  }
  if (dtype != dtype_of<T>()) {
    throw InputError(source, header_offset,
                     "dtype \"" + dtype + "\" where \"" + std::string(dtype_of<T>()) + "\" was expected");
  }
  Shape shape;
  try {
    shape = Shape(dims);
  } catch (const std::invalid_argument& e) {
    throw InputError(source, header_offset, e.what());
  }
  const std::size_t n = shape.voxel_count();
  std::string buf(n * sizeof(T), '\0');
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  const auto got = static_cast<std::uint64_t>(in.gcount());
  if (got != buf.size()) {
    throw InputError(source, data_offset + got,
                     "truncated voxel data: expected " + std::to_string(buf.size()) + " bytes");
  }
  std::vector<T> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    if constexpr (sizeof(T) == 1) {
      data[i] = static_cast<T>(static_cast<unsigned char>(buf[i]));
    } else {
      const auto lo = static_cast<std::uint16_t>(static_cast<unsigned char>(buf[2 * i]));
      const auto hi = static_cast<std::uint16_t>(static_cast<unsigned char>(buf[2 * i + 1]));
      data[i] = static_cast<T>(static_cast<std::uint16_t>(lo | (hi << 8)));
      if constexpr (std::is_same_v<T, std::int16_t>) {
        if (data[i] < -255 || data[i] > 255) {
          throw InputError(source, data_offset + 2 * i, "signed voxel outside [-255, 255]");
        }
      }
    }
  }
  return Grid<T>(std::move(shape), std::move(data));
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path.string(), 0, "cannot open file");
  return in;
}

template <class T>
void write_grid_file(const fs::path& path, const Grid<T>& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_grid(out, g);
}

}  // namespace

void write_uxv(std::ostream& out, const Volume& v) { write_grid(out, v); }
void write_uxv(std::ostream& out, const SignedVolume& v) { write_grid(out, v); }
void write_uxv(std::ostream& out, const LabelGrid& v) { write_grid(out, v); }

Volume read_uxv_u8(std::istream& in, const std::string& source) { return read_grid<std::uint8_t>(in, source); }
SignedVolume read_uxv_i16(std::istream& in, const std::string& source) {
  return read_grid<std::int16_t>(in, source);
}
LabelGrid read_uxv_u16(std::istream& in, const std::string& source) { return read_grid<std::uint16_t>(in, source); }

void write_uxv(const fs::path& path, const Volume& v) { write_grid_file(path, v); }
void write_uxv(const fs::path& path, const SignedVolume& v) { write_grid_file(path, v); }
void write_uxv(const fs::path& path, const LabelGrid& v) { write_grid_file(path, v); }

Volume read_volume(const fs::path& path) {
  auto in = open_in(path);
  return read_uxv_u8(in, path.string());
}

SignedVolume read_signed_volume(const fs::path& path) {
  auto in = open_in(path);
  return read_uxv_i16(in, path.string());
}

LabelGrid read_label_grid(const fs::path& path) {
  auto in = open_in(path);
  return read_uxv_u16(in, path.string());
}

nlohmann::json label_table_json(const LabelVolume& labels) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& info : labels.table) {
    arr.push_back({{"id", info.id}, {"name", info.name}, {"class", info.category}, {"electrical", info.electrical}});
  }
  return {{"labels", arr}};
}

void write_label_volume(const fs::path& uxv_path, const fs::path& json_path, const LabelVolume& labels) {
  write_uxv(uxv_path, labels.labels);
  write_json(json_path, label_table_json(labels));
}

LabelVolume read_label_volume(const fs::path& uxv_path, const fs::path& json_path) {
  LabelVolume lv;
  lv.labels = read_label_grid(uxv_path);
  const nlohmann::json doc = read_json(json_path);
  try {
    for (const auto& item : doc.at("labels")) {
      LabelInfo info;
      info.id = item.at("id").get<std::uint16_t>();
      info.name = item.at("name").get<std::string>();
      info.category = item.at("class").get<std::string>();
      info.electrical = item.at("electrical").get<bool>();
      lv.table.push_back(std::move(info));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(json_path.string(), 0, std::string("bad label table: ") + e.what());
  }
  try {
    lv.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(uxv_path.string(), 0, e.what());
  }
  return lv;
}

void write_pgm(const fs::path& path, const Volume& image) {
  if (image.shape().rank() != 2) throw std::invalid_argument("PGM output needs a 2-D image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "P5\n" << image.shape().extent(0) << ' ' << image.shape().extent(1) << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.values().data()), static_cast<std::streamsize>(image.size()));
}

Volume read_pgm(const fs::path& path) {
  auto in = open_in(path);
  std::string magic;
  std::size_t w = 0;
  std::size_t h = 0;
  int maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || !in || maxval != 255) throw InputError(path.string(), 0, "not a P5 PGM with maxval 255");
  in.get();
  const auto offset = static_cast<std::uint64_t>(in.tellg());
  std::vector<std::uint8_t> data(w * h);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (static_cast<std::size_t>(in.gcount()) != data.size()) {
    throw InputError(path.string(), offset + static_cast<std::uint64_t>(in.gcount()), "truncated PGM");
  }
  return Volume(Shape{w, h}, std::move(data));
}

nlohmann::json read_json(const fs::path& path) {
  auto in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string(), e.byte > 0 ? e.byte - 1 : 0, "malformed JSON");
  }
}

void write_json(const fs::path& path, const nlohmann::json& doc) { write_text(path, doc.dump(2) + "\n"); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
}

void write_decomposition(const fs::path& dir, const SieveDecomposition& d, const std::string& original_ref) {
  fs::create_directories(dir);
  nlohmann::json files;
  nlohmann::json lowpass = nlohmann::json::array();
  nlohmann::json channels = nlohmann::json::array();
  for (std::size_t n = 1; n <= d.lowpass.size(); ++n) {
    const std::string name = "lowpass_" + std::to_string(n) + ".uxv";
    write_uxv(dir / name, d.lowpass[n - 1]);
    lowpass.push_back(name);
  }
  for (std::size_t n = 2; n <= d.channels_signed.size(); ++n) {
    const std::string name = "channel_" + std::to_string(n) + ".uxv";
    write_uxv(dir / name, d.channels_signed[n - 1]);
    channels.push_back(name);
  }
  files["original"] = original_ref;
  files["lowpass"] = lowpass;
  files["channels"] = channels;
  nlohmann::json manifest;
  manifest["scales"] = d.schedule.scales();
  manifest["filter"] = filter_name(d.filter);
  manifest["connectivity"] = static_cast<int>(d.connectivity);
  manifest["dims"] = d.original.shape().extents();
  manifest["files"] = files;
  write_json(dir / "manifest.json", manifest);
}

}  // namespace uxpr::io
