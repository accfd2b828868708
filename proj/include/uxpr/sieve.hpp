#pragma once

// Scale-space sieve: idempotent extremum-removal filters over flat zones,
// the cascaded decomposition and its exact signed reconstruction.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uxpr/volume.hpp"

namespace uxpr {

enum class FilterKind { opening, closing, m_filter, n_filter };

std::string_view filter_name(FilterKind k) noexcept;
/// Accepts "o"/"opening", "c"/"closing", "m"/"m_filter", "n"/"n_filter".
FilterKind parse_filter_kind(std::string_view text);

/// Strictly increasing scales, all >= 1. Scales are areas (1-D/2-D) or volumes (3-D).
class ScaleSchedule {
 public:
  ScaleSchedule() = default;
  explicit ScaleSchedule(std::vector<std::uint64_t> scales);

  const std::vector<std::uint64_t>& scales() const noexcept { return scales_; }
  std::size_t size() const noexcept { return scales_.size(); }
  /// 1-based, matching channel numbering.
  std::uint64_t scale(std::size_t n) const { return scales_.at(n - 1); }

  friend bool operator==(const ScaleSchedule&, const ScaleSchedule&) = default;

 private:
  std::vector<std::uint64_t> scales_;
};

struct SieveDecomposition {
  Volume original;
  std::vector<Volume> lowpass;               // f_{S_1} .. f_{S_N}
  std::vector<SignedVolume> channels_signed;  // channel n (1-based) at index n-1
  ScaleSchedule schedule;
  FilterKind filter = FilterKind::m_filter;
  Connectivity connectivity = Connectivity::six;

  /// Final low-pass plus every signed channel.
  Volume reconstruct() const;
};

/// Removes every extremal zone of area <= scale (maxima for opening, minima for
/// closing), iterated to a fixpoint. Runs in near-linear time on a union-find
/// component tree.
Volume apply_filter(const Volume& v, std::uint64_t scale, FilterKind kind, Connectivity c);

/// Voxels per block when building the component tree. Only speed depends on it.
inline constexpr std::size_t kDefaultTileVoxels = 32768;
Volume apply_filter(const Volume& v, std::uint64_t scale, FilterKind kind, Connectivity c, std::size_t tile_voxels);

SieveDecomposition decompose(const Volume& v, const ScaleSchedule& schedule, FilterKind kind, Connectivity c);

/// |channel n| for n in [2, N].
Volume abs_channel(const SieveDecomposition& d, std::size_t n);

/// Reference 1-D sieve: repeatedly flattens the smallest qualifying extremum
/// (ties to the leftmost) by rescanning the signal. Length <= 64; rejects
/// volumes with more than one axis.
Volume brute_force_sieve_1d(const Volume& signal, std::uint64_t scale, FilterKind kind);
std::vector<std::uint8_t> brute_force_sieve_1d(std::span<const std::uint8_t> signal, std::uint64_t scale,
                                               FilterKind kind);

}  // namespace uxpr
