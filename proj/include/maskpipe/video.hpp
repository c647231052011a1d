#pragma once

// MDVS raw video container: "MDVS", u32 version (1), u32 width, u32 height,
// u32 fps_num, u32 fps_den, u64 frame_count, then frame_count RGB24 frames.
// All integers little-endian.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "maskpipe/image.hpp"

namespace maskpipe {

struct StreamInfo {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t fps_num = 30;
  std::uint32_t fps_den = 1;
  std::uint64_t frame_count = 0;

  std::size_t frame_bytes() const { return static_cast<std::size_t>(width) * height * 3; }
  double fps() const { return static_cast<double>(fps_num) / fps_den; }
  friend bool operator==(const StreamInfo&, const StreamInfo&) = default;
};

inline constexpr std::size_t kStreamHeaderBytes = 32;

/// Pull-style sequential frame source.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual const StreamInfo& info() const = 0;
  /// Fills `frame` and returns true, or returns false at the end.
  virtual bool next(Image& frame) = 0;
};

class FrameSink {
 public:
  virtual ~FrameSink() = default;
  virtual void write(const Image& frame) = 0;
};

/// Throws IoError if the file is missing and FormatError on a bad header,
/// truncation (with the byte offset), or trailing bytes.
class StreamReader : public FrameSource {
 public:
  explicit StreamReader(const std::filesystem::path& path);
  const StreamInfo& info() const override { return info_; }
  bool next(Image& frame) override;

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  StreamInfo info_;
  std::uint64_t delivered_ = 0;
};

/// Writes the header up front and patches frame_count on close().
/// Frames with other dimensions are a FormatError.
class StreamWriter : public FrameSink {
 public:
  StreamWriter(const std::filesystem::path& path, const StreamInfo& info);
  ~StreamWriter() override;
  void write(const Image& frame) override;
  void close();
  std::uint64_t frames_written() const { return written_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  StreamInfo info_;
  std::uint64_t written_ = 0;
};

class MemorySource : public FrameSource {
 public:
  /// Takes width, height and frame_count from the frames unless `info` is
  /// given explicitly.
  MemorySource(std::vector<Image> frames, std::uint32_t fps_num = 30, std::uint32_t fps_den = 1);
  MemorySource(std::vector<Image> frames, const StreamInfo& info);
  const StreamInfo& info() const override { return info_; }
  bool next(Image& frame) override;

 private:
  std::vector<Image> frames_;
  StreamInfo info_;
  std::size_t pos_ = 0;
};

class MemorySink : public FrameSink {
 public:
  void write(const Image& frame) override { frames.push_back(frame); }
  std::vector<Image> frames;
};

class NullSink : public FrameSink {
 public:
  void write(const Image&) override { ++count; }
  std::uint64_t count = 0;
};

std::string encode_stream_header(const StreamInfo& info);
/// Validates magic, version, and nonzero dimensions and rates.
StreamInfo decode_stream_header(std::string_view bytes);

StreamReader open_stream(const std::filesystem::path& path);
void write_stream(const std::filesystem::path& path, const StreamInfo& info,
                  const std::vector<Image>& frames);
std::vector<Image> read_all_frames(const std::filesystem::path& path, StreamInfo* info = nullptr);

/// Writes frame_000000.<ext>, frame_000001.<ext>, ... into `dir`; returns the
/// number of frames.
std::uint64_t export_frames(FrameSource& in, const std::filesystem::path& dir, ImageFormat format);
/// Packs every .png/.ppm file of `dir`, in name order, into one stream.
void import_frames(const std::filesystem::path& dir, const std::filesystem::path& out,
                   std::uint32_t fps_num, std::uint32_t fps_den);

}  // namespace maskpipe
