#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace avq {

// A file could not be opened, read or written.
class io_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Malformed binary payload. Carries the byte offset of the first bad record.
class format_error : public io_error {
  public:
    format_error(const std::string& what, std::uint64_t byte_offset)
        : io_error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset_(byte_offset) {}

    std::uint64_t byte_offset() const noexcept { return offset_; }

  private:
    std::uint64_t offset_;
};

}  // namespace avq
