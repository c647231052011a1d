#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "maskpipe/geometry.hpp"
#include "maskpipe/image.hpp"
#include "maskpipe/labels.hpp"
#include "maskpipe/rng.hpp"

namespace maskpipe {

struct VocObject {
  std::string name;
  int class_id = 0;
  int xmin = 0;
  int ymin = 0;
  int xmax = 0;
  int ymax = 0;
  std::string pose = "Unspecified";
  int truncated = 0;
  int occluded = 0;
  int difficult = 0;

  friend bool operator==(const VocObject&, const VocObject&) = default;
};

struct VocAnnotation {
  std::string folder = "images";
  std::string filename;
  int width = 0;
  int height = 0;
  int depth = 3;
  int segmented = 0;
  std::vector<VocObject> objects;

  friend bool operator==(const VocAnnotation&, const VocAnnotation&) = default;
};

/// Parses one PASCAL VOC annotation document. Throws ParseError (with the
/// line) for malformed XML, InvalidAnnotationError for unknown class names,
/// missing fields or boxes with xmin >= xmax, ymin >= ymax or outside the image.
VocAnnotation parse_voc(std::string_view xml, const LabelCatalog& labels = LabelCatalog::mask_task());
std::string serialize_voc(const VocAnnotation& annotation);

VocAnnotation read_voc(const std::filesystem::path& path,
                       const LabelCatalog& labels = LabelCatalog::mask_task());
/// Every *.xml file of a directory, in filename order. Throws IoError when the
/// directory is missing or holds no annotations.
std::vector<VocAnnotation> read_voc_dir(const std::filesystem::path& dir,
                                        const LabelCatalog& labels = LabelCatalog::mask_task());

/// Pixel columns [xmin, xmax) and rows [ymin, ymax), clamped to the image.
PixelRect pixel_rect(const VocObject& object, int width, int height);
/// The object box in normalized coordinates.
BBox normalized_box(const VocObject& object, int width, int height);
std::vector<LabeledBox> truth_boxes(const VocAnnotation& annotation);

/// One object cut out of its source image.
struct SliceSample {
  std::string image_id;
  PixelRect crop;
  int class_id = 0;
  Image pixels;
};

struct SliceSet {
  std::vector<SliceSample> slices;
  std::vector<std::size_t> histogram;
};

using ImageLoader = std::function<Image(const std::string& filename)>;

/// Reads `<dir>/<filename>`; throws IoError naming the file when absent.
ImageLoader directory_loader(std::filesystem::path dir);

/// One slice per annotated object, cropped exactly to its box.
SliceSet build_slices(std::span<const VocAnnotation> annotations, const ImageLoader& load,
                      int classes = 3);

std::vector<std::size_t> class_histogram(std::span<const int> class_ids, int classes);

/// Keeps min(count, cap) items of every class, chosen uniformly without
/// replacement under `seed`. Returned indices are ascending.
std::vector<std::size_t> undersample_indices(std::span<const int> class_ids, std::size_t cap,
                                             std::uint64_t seed);

template <typename T, typename ClassOf>
std::vector<T> undersample(std::span<const T> items, std::size_t cap, std::uint64_t seed,
                           ClassOf class_of) {
  std::vector<int> ids;
  ids.reserve(items.size());
  for (const T& item : items) ids.push_back(class_of(item));
  std::vector<T> out;
  for (std::size_t i : undersample_indices(ids, cap, seed)) out.push_back(items[i]);
  return out;
}

inline std::vector<SliceSample> undersample(std::span<const SliceSample> items, std::size_t cap,
                                            std::uint64_t seed) {
  return undersample(items, cap, seed, [](const SliceSample& s) { return s.class_id; });
}

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// round(n / 5); n / 5 never lands on .5 for integer n.
std::size_t validation_size(std::size_t n);

/// Seeded shuffle of [0, n) into a 4:1 train/validation partition. Both
/// index lists are returned ascending.
SplitIndices split_4to1(std::size_t n, std::uint64_t seed);

/// Splits groups (e.g. source images) 4:1 and sends every item with its group,
/// so no group straddles the two sides.
SplitIndices split_by_group(std::span<const std::string> groups, std::uint64_t seed);

/// A line of the slice manifest (tab separated, '#' comments):
/// image_id, class_id, x0, y0, x1, y1, crop path relative to the manifest.
struct ManifestRecord {
  std::string image_id;
  int class_id = 0;
  PixelRect box;
  std::string crop_path;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

std::string format_manifest(std::span<const ManifestRecord> records);
std::vector<ManifestRecord> parse_manifest(std::string_view text);

/// Writes crops to `<dir>/crops/` and the manifest to `<dir>/manifest.tsv`.
std::vector<ManifestRecord> write_slices(const std::filesystem::path& dir,
                                         std::span<const SliceSample> slices, ImageFormat format);
/// Loads a manifest and its crops.
std::vector<SliceSample> read_slices(const std::filesystem::path& manifest_path);

}  // namespace maskpipe
