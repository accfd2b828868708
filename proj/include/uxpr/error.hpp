#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace uxpr {

/// Malformed or inconsistent data read from a file or stream. Carries the
/// source name and the byte offset at which parsing failed.
class InputError : public std::runtime_error {
 public:
  InputError(std::string source, std::uint64_t offset, const std::string& message)
      : std::runtime_error(source + " (byte " + std::to_string(offset) + "): " + message),
        source_(std::move(source)),
        offset_(offset) {}

  const std::string& source() const noexcept { return source_; }
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::string source_;
  std::uint64_t offset_;
};

/// An internal consistency check failed. Never expected on valid input.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

void set_warnings_enabled(bool enabled);
void warn(std::string_view message);

}  // namespace uxpr
