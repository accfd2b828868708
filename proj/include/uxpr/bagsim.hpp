#pragma once

// Phantom object pool and the simulated-bag packer.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uxpr/rng.hpp"
#include "uxpr/volume.hpp"

namespace uxpr {

/// A 3-D object in a tight box. Support is the set of nonzero voxels.
struct PoolObject {
  Volume voxels;
  std::string name;      // device type
  std::string category;  // five-class group
  bool electrical = false;

  std::size_t support_size() const noexcept;
};

struct PhantomSpec {
  std::size_t electrical = 10;
  std::size_t non_electrical = 20;
  /// Multiplies every phantom extent; 1.0 suits 64^3 bags, 8.0 suits 512^3.
  double size_scale = 1.0;
};

/// Electrical phantoms: a casing of intensity 140..175 enclosing 1-3 blocks and
/// a one-voxel filament of intensity >= 200. Non-electrical phantoms: boxes or
/// ellipsoids of intensity <= 120, some with a low-contrast inner region.
/// Electrical categories cycle other_electrical, mobile_phone,
/// other_electrical, hard_drive, other_electrical, laptop.
std::vector<PoolObject> generate_phantom_pool(const PhantomSpec& spec, std::uint64_t seed);

/// Rotations about x, then y, then z (radians).
struct EulerAngles {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

EulerAngles random_angles(Rng& rng);

/// Rotates about the object center with nearest-neighbor resampling and crops
/// to the rotated support.
PoolObject rotate_object(const PoolObject& o, const EulerAngles& angles);

struct Placement {
  std::size_t object = 0;  // pool index
  EulerAngles angles;
  std::array<std::size_t, 3> offset{0, 0, 0};
  std::uint16_t label = 0;  // 0 when the object could not be placed
};

struct Bag {
  Volume volume;
  LabelVolume labels;
  std::vector<Placement> placed;   // accepted placements only
  std::vector<Placement> skipped;  // abandoned after every attempt failed
  std::uint64_t seed = 0;
};

struct PackParams {
  std::size_t object_count = 20;
  int attempts = 5;
  Shape dims{64, 64, 64};
};

/// Draws object_count pool objects (without replacement unless the pool is
/// smaller), rotates each at random and tries `attempts` random offsets,
/// keeping the first that overlaps no placed voxel. Objects may touch.
Bag pack_bag(std::span<const PoolObject> pool, std::uint64_t seed, const PackParams& params);

/// Packs exactly the listed pool objects in order.
Bag pack_objects(std::span<const PoolObject> pool, std::span<const std::size_t> selection, std::uint64_t seed,
                 const PackParams& params);

namespace io {
void write_pool(const std::filesystem::path& manifest, std::span<const PoolObject> pool);
std::vector<PoolObject> read_pool(const std::filesystem::path& manifest);

/// volume.uxv, labels.uxv, labels.json and bag.json (provenance).
void write_bag(const std::filesystem::path& dir, const Bag& bag, std::span<const PoolObject> pool,
               const PackParams& params);
/// Reads the volume and labels of a bag directory.
Bag read_bag(const std::filesystem::path& dir);
}  // namespace io

}  // namespace uxpr
