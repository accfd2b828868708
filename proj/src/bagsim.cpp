#include "uxpr/bagsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "uxpr/error.hpp"
#include "uxpr/io.hpp"

namespace uxpr {

std::size_t PoolObject::support_size() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(voxels.values().begin(), voxels.values().end(), [](std::uint8_t v) { return v != 0; }));
}

namespace {

using Extent = std::array<std::size_t, 3>;

std::size_t scaled(double scale, std::int64_t v) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(v) * scale)));
}

Extent draw_extent(Rng& rng, double scale, std::array<std::int64_t, 6> ranges) {
  return {scaled(scale, rng.range(ranges[0], ranges[1])), scaled(scale, rng.range(ranges[2], ranges[3])),
          scaled(scale, rng.range(ranges[4], ranges[5]))};
}

struct Canvas {
  Extent ext;
  Volume vol;
  explicit Canvas(Extent e) : ext(e), vol(Shape{e[0], e[1], e[2]}) {}

  template <class Fn>
  void each(Fn&& fn) {
    for (std::size_t z = 0; z < ext[2]; ++z)
      for (std::size_t y = 0; y < ext[1]; ++y)
        for (std::size_t x = 0; x < ext[0]; ++x) fn(x, y, z, vol[vol.shape().index(x, y, z)]);
  }
};

bool inside_ellipsoid(const Extent& e, std::size_t x, std::size_t y, std::size_t z) {
  double s = 0.0;
  const std::array<std::size_t, 3> p{x, y, z};
  for (int a = 0; a < 3; ++a) {
    const double r = static_cast<double>(e[a]) / 2.0;
    const double d = (static_cast<double>(p[a]) + 0.5 - r) / r;
    s += d * d;
  }
  return s <= 1.0;
}

void fill_body(Canvas& c, bool ellipsoid, std::uint8_t value) {
  c.each([&](std::size_t x, std::size_t y, std::size_t z, std::uint8_t& v) {
    if (!ellipsoid || inside_ellipsoid(c.ext, x, y, z)) v = value;
  });
}

// Overwrites supported voxels of the box [lo, lo + size) with `value`.
void paint_box(Canvas& c, Extent lo, Extent size, std::uint8_t value) {
  for (std::size_t z = lo[2]; z < std::min(c.ext[2], lo[2] + size[2]); ++z)
    for (std::size_t y = lo[1]; y < std::min(c.ext[1], lo[1] + size[1]); ++y)
      for (std::size_t x = lo[0]; x < std::min(c.ext[0], lo[0] + size[0]); ++x) {
        auto& v = c.vol[c.vol.shape().index(x, y, z)];
        if (v != 0) v = value;
      }
}

Extent random_origin(Rng& rng, const Extent& ext, const Extent& size) {
  Extent lo{};
  for (int a = 0; a < 3; ++a) lo[a] = ext[a] > size[a] ? static_cast<std::size_t>(rng.below(ext[a] - size[a] + 1)) : 0;
  return lo;
}

// Center-most supported voxel; guarantees electrical phantoms keep a bright voxel.
Extent center_of(const Extent& ext) { return {ext[0] / 2, ext[1] / 2, ext[2] / 2}; }

PoolObject make_electrical(Rng& rng, std::size_t index, double scale) {
  static constexpr std::array<std::string_view, 6> kCycle{"other_electrical", "mobile_phone", "other_electrical",
                                                          "hard_drive",       "other_electrical", "laptop"};
  static constexpr std::array<std::string_view, 4> kOther{"hair_dryer", "flashlight", "charger", "shaver"};
  const std::string category(kCycle[index % kCycle.size()]);

  Extent ext;
  bool ellipsoid = false;
  std::string name = category;
  if (category == "mobile_phone") {
    ext = draw_extent(rng, scale, {10, 14, 6, 8, 3, 4});
  } else if (category == "hard_drive") {
    ext = draw_extent(rng, scale, {10, 13, 8, 10, 3, 4});
  } else if (category == "laptop") {
    ext = draw_extent(rng, scale, {20, 24, 14, 17, 3, 4});
  } else {
    ext = draw_extent(rng, scale, {7, 14, 7, 14, 7, 14});
    ellipsoid = rng.below(2) == 1;
    name = std::string(kOther[rng.below(kOther.size())]);
  }

  Canvas c(ext);
  fill_body(c, ellipsoid, static_cast<std::uint8_t>(rng.range(140, 175)));

  const auto blocks = rng.range(1, 3);
  for (std::int64_t b = 0; b < blocks; ++b) {
    Extent size{};
    for (int a = 0; a < 3; ++a) size[a] = std::min(ext[a], scaled(scale, rng.range(3, 5)));
    Extent lo = b == 0 ? Extent{} : random_origin(rng, ext, size);
    if (b == 0) {
      // The first block straddles the center so it survives any body shape.
      const Extent mid = center_of(ext);
      for (int a = 0; a < 3; ++a) lo[a] = mid[a] >= size[a] / 2 ? mid[a] - size[a] / 2 : 0;
    }
    paint_box(c, lo, size, static_cast<std::uint8_t>(rng.range(200, 255)));
  }

  // Filament along the longest axis.
  const int axis = static_cast<int>(std::max_element(ext.begin(), ext.end()) - ext.begin());
  const auto len = std::max<std::size_t>(2, ext[axis] * static_cast<std::size_t>(rng.range(60, 90)) / 100);
  Extent lo = random_origin(rng, ext, {1, 1, 1});
  lo[axis] = (ext[axis] - len) / 2;
  Extent size{1, 1, 1};
  size[axis] = len;
  paint_box(c, lo, size, static_cast<std::uint8_t>(rng.range(200, 255)));

  return PoolObject{std::move(c.vol), std::move(name), category, true};
}

PoolObject make_non_electrical(Rng& rng, double scale) {
  static constexpr std::array<std::string_view, 5> kKinds{"clothing", "book", "bottle", "shoe", "toiletries"};
  const std::string name(kKinds[rng.below(kKinds.size())]);
  const Extent ext = draw_extent(rng, scale, {6, 18, 6, 18, 6, 18});
  const bool ellipsoid = rng.below(2) == 1;
  const auto base = rng.range(30, 110);

  Canvas c(ext);
  fill_body(c, ellipsoid, static_cast<std::uint8_t>(base));
  if (rng.below(2) == 1) {
    Extent size{};
    for (int a = 0; a < 3; ++a) size[a] = std::max<std::size_t>(1, ext[a] / 2);
    const auto delta = rng.range(5, 12) * (rng.below(2) == 1 ? 1 : -1);
    const auto inner = std::clamp<std::int64_t>(base + delta, 1, 120);
    paint_box(c, random_origin(rng, ext, size), size, static_cast<std::uint8_t>(inner));
  }
  return PoolObject{std::move(c.vol), name, "non_electrical", false};
}

}  // namespace

std::vector<PoolObject> generate_phantom_pool(const PhantomSpec& spec, std::uint64_t seed) {
  if (!(spec.size_scale > 0.0)) throw std::invalid_argument("phantom size scale must be positive");
  std::vector<PoolObject> pool;
  pool.reserve(spec.electrical + spec.non_electrical);
  for (std::size_t i = 0; i < spec.electrical; ++i) {
    Rng rng(seed, 2 * i + 1);
    pool.push_back(make_electrical(rng, i, spec.size_scale));
  }
  for (std::size_t i = 0; i < spec.non_electrical; ++i) {
    Rng rng(seed, 2 * i + 2);
    pool.push_back(make_non_electrical(rng, spec.size_scale));
  }
  return pool;
}

EulerAngles random_angles(Rng& rng) {
  const double two_pi = 2.0 * std::numbers::pi;
  const double x = rng.uniform() * two_pi;
  const double y = rng.uniform() * two_pi;
  const double z = rng.uniform() * two_pi;
  return {x, y, z};
}

PoolObject rotate_object(const PoolObject& o, const EulerAngles& angles) {
  const Shape& shape = o.voxels.shape();
  if (shape.rank() != 3) throw std::invalid_argument("pool objects must be 3-D");
  const Extent e{shape.extent(0), shape.extent(1), shape.extent(2)};

  const double cx = std::cos(angles.x), sx = std::sin(angles.x);
  const double cy = std::cos(angles.y), sy = std::sin(angles.y);
  const double cz = std::cos(angles.z), sz = std::sin(angles.z);
  // R = Rz * Ry * Rx
  const double r[3][3] = {{cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx},
                          {sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx},
                          {-sy, cy * sx, cy * cx}};

  const std::size_t max_extent = std::max({e[0], e[1], e[2]});
  const auto diag = static_cast<std::size_t>(std::ceil(std::sqrt(3.0) * static_cast<double>(max_extent)));
  Extent out_ext{};
  for (int a = 0; a < 3; ++a) {
    // Same parity as the source axis keeps axis-aligned rotations exact.
    const std::size_t pad = diag > e[a] ? (diag - e[a] + 1) / 2 : 0;
    out_ext[a] = e[a] + 2 * pad;
  }

  Volume out(Shape{out_ext[0], out_ext[1], out_ext[2]});
  Extent lo{out_ext[0], out_ext[1], out_ext[2]};
  Extent hi{0, 0, 0};
  bool any = false;
  for (std::size_t z = 0; z < out_ext[2]; ++z)
    for (std::size_t y = 0; y < out_ext[1]; ++y)
      for (std::size_t x = 0; x < out_ext[0]; ++x) {
        const double rel[3] = {static_cast<double>(x) - (static_cast<double>(out_ext[0]) - 1.0) / 2.0,
                               static_cast<double>(y) - (static_cast<double>(out_ext[1]) - 1.0) / 2.0,
                               static_cast<double>(z) - (static_cast<double>(out_ext[2]) - 1.0) / 2.0};
        std::array<std::size_t, 3> src{};
        bool inside = true;
        for (int a = 0; a < 3 && inside; ++a) {
          // Inverse rotation is the transpose.
          const double p = r[0][a] * rel[0] + r[1][a] * rel[1] + r[2][a] * rel[2] +
                           (static_cast<double>(e[a]) - 1.0) / 2.0;
          const double q = std::floor(p + 0.5);
          if (q < 0.0 || q >= static_cast<double>(e[a])) inside = false;
          src[a] = inside ? static_cast<std::size_t>(q) : 0;
        }
        if (!inside) continue;
        const std::uint8_t v = o.voxels[shape.index(src[0], src[1], src[2])];
        if (v == 0) continue;
        out[out.shape().index(x, y, z)] = v;
        any = true;
        const Extent p{x, y, z};
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::min(lo[a], p[a]);
          hi[a] = std::max(hi[a], p[a]);
        }
      }
  if (!any) throw InvariantError("rotation produced an empty object");

  const Extent size{hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1};
  Volume cropped(Shape{size[0], size[1], size[2]});
  for (std::size_t z = 0; z < size[2]; ++z)
    for (std::size_t y = 0; y < size[1]; ++y)
      for (std::size_t x = 0; x < size[0]; ++x) {
        cropped[cropped.shape().index(x, y, z)] = out[out.shape().index(x + lo[0], y + lo[1], z + lo[2])];
      }
  return PoolObject{std::move(cropped), o.name, o.category, o.electrical};
}

Bag pack_objects(std::span<const PoolObject> pool, std::span<const std::size_t> selection, std::uint64_t seed,
                 const PackParams& params) {
  if (params.dims.rank() != 3) throw std::invalid_argument("bags are 3-D");
  if (params.attempts < 1) throw std::invalid_argument("at least one placement attempt is required");
  Bag bag;
  bag.seed = seed;
  bag.volume = Volume(params.dims);
  bag.labels.labels = LabelGrid(params.dims);
  const Shape& dims = params.dims;

  for (std::size_t k = 0; k < selection.size(); ++k) {
    const std::size_t index = selection[k];
    if (index >= pool.size()) throw std::out_of_range("pool index out of range");
    Rng rng(seed, k + 1);
    Placement pl;
    pl.object = index;
    pl.angles = random_angles(rng);
    const PoolObject obj = rotate_object(pool[index], pl.angles);
    const Shape& os = obj.voxels.shape();

    bool fits = true;
    for (int a = 0; a < 3; ++a) fits = fits && os.extent(a) <= dims.extent(a);
    bool placed = false;
    for (int attempt = 0; fits && attempt < params.attempts && !placed; ++attempt) {
      std::array<std::size_t, 3> off{};
      for (int a = 0; a < 3; ++a) off[a] = static_cast<std::size_t>(rng.below(dims.extent(a) - os.extent(a) + 1));
      bool clear = true;
      for (std::size_t i = 0; i < obj.voxels.size() && clear; ++i) {
        if (obj.voxels[i] == 0) continue;
        const auto c = os.coords(i);
        clear = bag.labels.labels[dims.index(c[0] + off[0], c[1] + off[1], c[2] + off[2])] == 0;
      }
      if (!clear) continue;
      const auto label = static_cast<std::uint16_t>(bag.placed.size() + 1);
      for (std::size_t i = 0; i < obj.voxels.size(); ++i) {
        if (obj.voxels[i] == 0) continue;
        const auto c = os.coords(i);
        const std::size_t j = dims.index(c[0] + off[0], c[1] + off[1], c[2] + off[2]);
        bag.volume[j] = obj.voxels[i];
        bag.labels.labels[j] = label;
      }
      pl.offset = off;
      pl.label = label;
      bag.labels.table.push_back({label, obj.name, obj.category, obj.electrical});
      placed = true;
    }
    (placed ? bag.placed : bag.skipped).push_back(pl);
  }
  return bag;
}

Bag pack_bag(std::span<const PoolObject> pool, std::uint64_t seed, const PackParams& params) {
  if (pool.empty()) throw std::invalid_argument("cannot pack from an empty pool");
  Rng rng(seed, 0);
  std::vector<std::size_t> selection;
  if (pool.size() >= params.object_count) {
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < params.object_count; ++i) {
      std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
      selection.push_back(idx[i]);
    }
  } else {
    for (std::size_t i = 0; i < params.object_count; ++i) selection.push_back(rng.below(pool.size()));
  }
  return pack_objects(pool, selection, seed, params);
}

namespace io {

void write_pool(const std::filesystem::path& manifest, std::span<const PoolObject> pool) {
  const auto dir = manifest.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  nlohmann::json objects = nlohmann::json::array();
  for (std::size_t i = 0; i < pool.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "object_%04zu.uxv", i);
    write_uxv(dir / name, pool[i].voxels);
    objects.push_back({{"file", name},
                       {"name", pool[i].name},
                       {"class", pool[i].category},
                       {"electrical", pool[i].electrical}});
  }
  write_json(manifest, {{"format", "uxpr-pool"}, {"version", 1}, {"objects", objects}});
}

std::vector<PoolObject> read_pool(const std::filesystem::path& manifest) {
  const nlohmann::json doc = read_json(manifest);
  std::vector<PoolObject> pool;
  try {
    for (const auto& item : doc.at("objects")) {
      PoolObject o;
      o.voxels = read_volume(manifest.parent_path() / item.at("file").get<std::string>());
      o.name = item.at("name").get<std::string>();
      o.category = item.at("class").get<std::string>();
      o.electrical = item.at("electrical").get<bool>();
      pool.push_back(std::move(o));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(manifest.string(), 0, std::string("bad pool manifest: ") + e.what());
  }
  return pool;
}

namespace {
nlohmann::json placement_json(const Placement& p, std::span<const PoolObject> pool) {
  return {{"object", p.object},
          {"name", p.object < pool.size() ? pool[p.object].name : std::string{}},
          {"angles", {p.angles.x, p.angles.y, p.angles.z}},
          {"offset", p.offset},
          {"label", p.label}};
}
}  // namespace

void write_bag(const std::filesystem::path& dir, const Bag& bag, std::span<const PoolObject> pool,
               const PackParams& params) {
  std::filesystem::create_directories(dir);
  write_uxv(dir / "volume.uxv", bag.volume);
  write_label_volume(dir / "labels.uxv", dir / "labels.json", bag.labels);
  nlohmann::json placed = nlohmann::json::array();
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& p : bag.placed) placed.push_back(placement_json(p, pool));
  for (const auto& p : bag.skipped) skipped.push_back(placement_json(p, pool));
  nlohmann::json doc = {{"seed", bag.seed},
                        {"dims", params.dims.extents()},
                        {"object_count", params.object_count},
                        {"attempts", params.attempts},
                        {"selection", "uniform without replacement (with replacement if pool is smaller)"},
                        {"rotation", "euler xyz uniform in [0, 2pi), nearest-neighbor resampling"},
                        {"intensities", "copied from the nearest source voxel"},
                        {"rng", "mt19937_64 seeded by splitmix64(seed, stream); stream 0 selection, k+1 object k"},
                        {"placements", placed},
                        {"skipped", skipped}};
  write_json(dir / "bag.json", doc);
}

Bag read_bag(const std::filesystem::path& dir) {
  Bag bag;
  bag.volume = read_volume(dir / "volume.uxv");
  bag.labels = read_label_volume(dir / "labels.uxv", dir / "labels.json");
  if (!(bag.volume.shape() == bag.labels.labels.shape())) {
    throw InputError((dir / "labels.uxv").string(), 0, "label dims differ from volume dims");
  }
  if (std::filesystem::exists(dir / "bag.json")) {
    const auto doc = read_json(dir / "bag.json");
    bag.seed = doc.value("seed", std::uint64_t{0});
    for (const auto& p : doc.value("placements", nlohmann::json::array())) {
      Placement pl;
      pl.object = p.at("object").get<std::size_t>();
      const auto a = p.at("angles").get<std::vector<double>>();
      if (a.size() == 3) pl.angles = {a[0], a[1], a[2]};
      pl.offset = p.at("offset").get<std::array<std::size_t, 3>>();
      pl.label = p.at("label").get<std::uint16_t>();
      bag.placed.push_back(pl);
    }
  }
  return bag;
}

}  // namespace io

}  // namespace uxpr
