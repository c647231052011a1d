#pragma once

// Little-endian encoding helpers shared by the binary container formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>

#include "maskpipe/errors.hpp"

namespace maskpipe::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

/// Sequential reader over an in-memory byte buffer; reports the byte offset of
/// any truncation.
class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string context)
      : bytes_(bytes), context_(std::move(context)) {}

  template <typename T>
  T get() {
    require(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take(std::size_t n) {
    require(n);
    auto view = bytes_.substr(pos_, n);
    pos_ += n;
    return view;
  }

  void expect_magic(std::string_view magic) {
    if (bytes_.size() < magic.size() || bytes_.substr(0, magic.size()) != magic) {
      throw FormatError(context_ + ": bad magic at byte offset 0, expected \"" +
                        std::string(magic) + "\"");
    }
    pos_ = magic.size();
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void require(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(context_ + ": truncated at byte offset " + std::to_string(pos_) +
                        " (need " + std::to_string(n) + " more bytes, have " +
                        std::to_string(bytes_.size() - pos_) + ")");
    }
  }

  std::string_view bytes_;
  std::string context_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace maskpipe::detail
