#include "maskpipe/video.hpp"

#include <algorithm>
#include <cstdio>

#include "binary_io.hpp"
#include "maskpipe/errors.hpp"

namespace maskpipe {
namespace {

constexpr std::uint32_t kVersion = 1;

void check_frame(const Image& frame, const StreamInfo& info, const std::string& context) {
  if (frame.width != static_cast<int>(info.width) || frame.height != static_cast<int>(info.height)) {
    throw FormatError(context + ": frame is " + std::to_string(frame.width) + "x" +
                      std::to_string(frame.height) + " but the stream is " +
                      std::to_string(info.width) + "x" + std::to_string(info.height));
  }
}

}  // namespace

std::string encode_stream_header(const StreamInfo& info) {
  std::string out = "MDVS";
  detail::put<std::uint32_t>(out, kVersion);
  detail::put<std::uint32_t>(out, info.width);
  detail::put<std::uint32_t>(out, info.height);
  detail::put<std::uint32_t>(out, info.fps_num);
  detail::put<std::uint32_t>(out, info.fps_den);
  detail::put<std::uint64_t>(out, info.frame_count);
  return out;
}

StreamInfo decode_stream_header(std::string_view bytes) {
  detail::ByteReader r(bytes, "MDVS header");
  r.expect_magic("MDVS");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw FormatError("MDVS: unsupported version " + std::to_string(version) +
                      " at byte offset 4");
  }
  StreamInfo info;
  info.width = r.get<std::uint32_t>();
  info.height = r.get<std::uint32_t>();
  info.fps_num = r.get<std::uint32_t>();
  info.fps_den = r.get<std::uint32_t>();
  info.frame_count = r.get<std::uint64_t>();
  if (info.width == 0 || info.height == 0 || info.width > 1u << 16 || info.height > 1u << 16) {
    throw FormatError("MDVS: invalid dimensions " + std::to_string(info.width) + "x" +
                      std::to_string(info.height) + " at byte offset 8");
  }
  if (info.fps_num == 0 || info.fps_den == 0) {
    throw FormatError("MDVS: invalid frame rate at byte offset 16");
  }
  return info;
}

StreamReader::StreamReader(const std::filesystem::path& path)
    : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw IoError("cannot open stream " + path.string());
  std::string header(kStreamHeaderBytes, '\0');
  in_.read(header.data(), static_cast<std::streamsize>(header.size()));
  header.resize(static_cast<std::size_t>(in_.gcount()));
  try {
    info_ = decode_stream_header(header);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

bool StreamReader::next(Image& frame) {
  if (delivered_ == info_.frame_count) {
    if (in_.peek() != std::char_traits<char>::eof()) {
      throw FormatError(path_.string() + ": trailing bytes at byte offset " +
                        std::to_string(kStreamHeaderBytes + delivered_ * info_.frame_bytes()));
    }
    return false;
  }
  if (frame.width != static_cast<int>(info_.width) || frame.height != static_cast<int>(info_.height)) {
    frame = Image(static_cast<int>(info_.width), static_cast<int>(info_.height));
  }
  const std::size_t n = info_.frame_bytes();
  in_.read(reinterpret_cast<char*>(frame.pixels.data()), static_cast<std::streamsize>(n));
  const auto got = static_cast<std::size_t>(in_.gcount());
  if (got != n) {
    throw FormatError(path_.string() + ": truncated at byte offset " +
                      std::to_string(kStreamHeaderBytes + delivered_ * n + got) + " in frame " +
                      std::to_string(delivered_) + " of " + std::to_string(info_.frame_count));
  }
  ++delivered_;
  return true;
}

StreamWriter::StreamWriter(const std::filesystem::path& path, const StreamInfo& info)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), info_(info) {
  if (!out_) throw IoError("cannot create stream " + path.string());
  info_.frame_count = 0;
  const std::string header = encode_stream_header(info_);
  out_.write(header.data(), static_cast<std::streamsize>(header.size()));
}

StreamWriter::~StreamWriter() {
  try {
    close();
  } catch (...) {
  }
}

void StreamWriter::write(const Image& frame) {
  if (!out_.is_open()) throw IoError(path_.string() + ": write after close");
  check_frame(frame, info_, path_.string());
  out_.write(reinterpret_cast<const char*>(frame.pixels.data()),
             static_cast<std::streamsize>(frame.pixels.size()));
  if (!out_) throw IoError("write failed on " + path_.string());
  ++written_;
}

void StreamWriter::close() {
  if (!out_.is_open()) return;
  std::string count;
  detail::put<std::uint64_t>(count, written_);
  out_.seekp(kStreamHeaderBytes - sizeof(std::uint64_t));
  out_.write(count.data(), static_cast<std::streamsize>(count.size()));
  out_.close();
  if (out_.fail()) throw IoError("cannot finish stream " + path_.string());
}

MemorySource::MemorySource(std::vector<Image> frames, std::uint32_t fps_num,
                           std::uint32_t fps_den)
    : frames_(std::move(frames)) {
  if (!frames_.empty()) {
    info_.width = static_cast<std::uint32_t>(frames_.front().width);
    info_.height = static_cast<std::uint32_t>(frames_.front().height);
  }
  info_.fps_num = fps_num;
  info_.fps_den = fps_den;
  info_.frame_count = frames_.size();
}

MemorySource::MemorySource(std::vector<Image> frames, const StreamInfo& info)
    : frames_(std::move(frames)), info_(info) {}

bool MemorySource::next(Image& frame) {
  if (pos_ == frames_.size()) return false;
  frame = frames_[pos_++];
  return true;
}

StreamReader open_stream(const std::filesystem::path& path) { return StreamReader(path); }

void write_stream(const std::filesystem::path& path, const StreamInfo& info,
                  const std::vector<Image>& frames) {
  StreamWriter w(path, info);
  for (const auto& f : frames) w.write(f);
  w.close();
}

std::vector<Image> read_all_frames(const std::filesystem::path& path, StreamInfo* info) {
  StreamReader r(path);
  if (info) *info = r.info();
  std::vector<Image> frames;
  Image frame;
  while (r.next(frame)) frames.push_back(frame);
  return frames;
}

std::uint64_t export_frames(FrameSource& in, const std::filesystem::path& dir,
                            ImageFormat format) {
  std::filesystem::create_directories(dir);
  Image frame;
  std::uint64_t n = 0;
  while (in.next(frame)) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06llu", static_cast<unsigned long long>(n));
    write_image(dir / (std::string(name) + extension(format)), frame, format);
    ++n;
  }
  return n;
}

void import_frames(const std::filesystem::path& dir, const std::filesystem::path& out,
                   std::uint32_t fps_num, std::uint32_t fps_den) {
  if (!std::filesystem::is_directory(dir)) throw IoError("no such directory " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".png" || ext == ".ppm")) files.push_back(e.path());
  }
  if (files.empty()) throw IoError("no .png or .ppm frames in " + dir.string());
  std::sort(files.begin(), files.end());
  const Image first = read_image(files.front());
  StreamInfo info{static_cast<std::uint32_t>(first.width), static_cast<std::uint32_t>(first.height),
                  fps_num, fps_den, 0};
  StreamWriter w(out, info);
  w.write(first);
  for (std::size_t i = 1; i < files.size(); ++i) w.write(read_image(files[i]));
  w.close();
}

}  // namespace maskpipe
