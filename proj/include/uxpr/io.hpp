#pragma once

// UXV1 volume files, label tables, binary PGM images and decomposition
// manifests.
//
// UXV1 layout:
//   UXV1\n
//   {"dims":[X,Y,Z],"dtype":"u8"|"i16"|"u16"}\n
//   raw voxels, first axis fastest, multi-byte types little-endian.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "json.hpp"
#include "uxpr/sieve.hpp"
#include "uxpr/volume.hpp"

namespace uxpr::io {

namespace fs = std::filesystem;

void write_uxv(std::ostream& out, const Volume& v);
void write_uxv(std::ostream& out, const SignedVolume& v);
void write_uxv(std::ostream& out, const LabelGrid& v);

/// `source` names the stream in error messages.
Volume read_uxv_u8(std::istream& in, const std::string& source);
SignedVolume read_uxv_i16(std::istream& in, const std::string& source);
LabelGrid read_uxv_u16(std::istream& in, const std::string& source);

void write_uxv(const fs::path& path, const Volume& v);
void write_uxv(const fs::path& path, const SignedVolume& v);
void write_uxv(const fs::path& path, const LabelGrid& v);
Volume read_volume(const fs::path& path);
SignedVolume read_signed_volume(const fs::path& path);
LabelGrid read_label_grid(const fs::path& path);

nlohmann::json label_table_json(const LabelVolume& labels);
void write_label_volume(const fs::path& uxv_path, const fs::path& json_path, const LabelVolume& labels);
LabelVolume read_label_volume(const fs::path& uxv_path, const fs::path& json_path);

/// 2-D u8 grid as P5 with maxval 255. Width is the first axis.
void write_pgm(const fs::path& path, const Volume& image);
Volume read_pgm(const fs::path& path);

/// Reads a whole JSON document, reporting parse failures with byte offsets.
nlohmann::json read_json(const fs::path& path);
void write_json(const fs::path& path, const nlohmann::json& doc);
void write_text(const fs::path& path, const std::string& text);

/// lowpass_<n>.uxv (u8), channel_<n>.uxv (i16, n = 2..N) and manifest.json.
/// Channel 1 is the input minus lowpass_1 and is recovered from `original_ref`.
void write_decomposition(const fs::path& dir, const SieveDecomposition& d, const std::string& original_ref);

}  // namespace uxpr::io
