#include "maskpipe/dataset_voc.hpp"

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <map>
#include <random>
#include <sstream>

#include "binary_io.hpp"
#include "maskpipe/errors.hpp"

namespace maskpipe {

namespace pt = boost::property_tree;

namespace {

template <typename T>
T field(const pt::ptree& node, const std::string& path, const std::string& where) {
  const auto child = node.get_child_optional(path);
  if (!child) throw InvalidAnnotationError(where + ": missing <" + path + ">");
  try {
    return child->get_value<T>();
  } catch (const pt::ptree_bad_data&) {
    throw InvalidAnnotationError(where + ": bad value \"" + child->data() + "\" for <" + path + ">");
  }
}

template <typename T>
T optional_field(const pt::ptree& node, const std::string& path, T fallback) {
  return node.get<T>(path, fallback);
}

void check_box(const VocObject& o, const VocAnnotation& a) {
  const std::string where = a.filename + " object \"" + o.name + "\"";
  if (o.xmin >= o.xmax || o.ymin >= o.ymax) {
    throw InvalidAnnotationError(where + ": invalid box (" + std::to_string(o.xmin) + ", " +
                                 std::to_string(o.ymin) + ", " + std::to_string(o.xmax) + ", " +
                                 std::to_string(o.ymax) + ")");
  }
  if (o.xmin < 0 || o.ymin < 0 || o.xmax > a.width || o.ymax > a.height) {
    throw InvalidAnnotationError(where + ": invalid box, outside the " + std::to_string(a.width) +
                                 "x" + std::to_string(a.height) + " image");
  }
}

}  // namespace

VocAnnotation parse_voc(std::string_view xml, const LabelCatalog& labels) {
  pt::ptree tree;
  std::istringstream in{std::string(xml)};
  try {
    pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError("malformed VOC XML at line " + std::to_string(e.line()) + ": " + e.message());
  }
  const auto root = tree.get_child_optional("annotation");
  if (!root) throw ParseError("VOC XML has no <annotation> root");

  VocAnnotation a;
  a.folder = optional_field<std::string>(*root, "folder", "");
  a.filename = field<std::string>(*root, "filename", "annotation");
  const std::string where = a.filename;
  a.width = field<int>(*root, "size.width", where);
  a.height = field<int>(*root, "size.height", where);
  a.depth = optional_field<int>(*root, "size.depth", 3);
  a.segmented = optional_field<int>(*root, "segmented", 0);
  if (a.width <= 0 || a.height <= 0) throw InvalidAnnotationError(where + ": non-positive image size");

  for (const auto& [key, node] : *root) {
    if (key != "object") continue;
    VocObject o;
    o.name = field<std::string>(node, "name", where);
    const auto id = labels.find(o.name);
    if (!id) throw InvalidAnnotationError(where + ": unknown class name \"" + o.name + "\"");
    o.class_id = *id;
    o.pose = optional_field<std::string>(node, "pose", "Unspecified");
    o.truncated = optional_field<int>(node, "truncated", 0);
    o.occluded = optional_field<int>(node, "occluded", 0);
    o.difficult = optional_field<int>(node, "difficult", 0);
    o.xmin = field<int>(node, "bndbox.xmin", where);
    o.ymin = field<int>(node, "bndbox.ymin", where);
    o.xmax = field<int>(node, "bndbox.xmax", where);
    o.ymax = field<int>(node, "bndbox.ymax", where);
    check_box(o, a);
    a.objects.push_back(std::move(o));
  }
  return a;
}

namespace {

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string serialize_voc(const VocAnnotation& a) {
  std::ostringstream x;
  x << "<annotation>\n"
    << "    <folder>" << escape_xml(a.folder) << "</folder>\n"
    << "    <filename>" << escape_xml(a.filename) << "</filename>\n"
    << "    <size>\n"
    << "        <width>" << a.width << "</width>\n"
    << "        <height>" << a.height << "</height>\n"
    << "        <depth>" << a.depth << "</depth>\n"
    << "    </size>\n"
    << "    <segmented>" << a.segmented << "</segmented>\n";
  for (const auto& o : a.objects) {
    x << "    <object>\n"
      << "        <name>" << escape_xml(o.name) << "</name>\n"
      << "        <pose>" << escape_xml(o.pose) << "</pose>\n"
      << "        <truncated>" << o.truncated << "</truncated>\n"
      << "        <occluded>" << o.occluded << "</occluded>\n"
      << "        <difficult>" << o.difficult << "</difficult>\n"
      << "        <bndbox>\n"
      << "            <xmin>" << o.xmin << "</xmin>\n"
      << "            <ymin>" << o.ymin << "</ymin>\n"
      << "            <xmax>" << o.xmax << "</xmax>\n"
      << "            <ymax>" << o.ymax << "</ymax>\n"
      << "        </bndbox>\n"
      << "    </object>\n";
  }
  x << "</annotation>\n";
  return x.str();
}

VocAnnotation read_voc(const std::filesystem::path& path, const LabelCatalog& labels) {
  try {
    return parse_voc(detail::read_file(path), labels);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const InvalidAnnotationError& e) {
    throw InvalidAnnotationError(path.string() + ": " + e.what());
  }
}

std::vector<VocAnnotation> read_voc_dir(const std::filesystem::path& dir, const LabelCatalog& labels) {
  if (!std::filesystem::is_directory(dir)) throw IoError("annotation directory " + dir.string() + " not found");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".xml") files.push_back(entry.path());
  }
  if (files.empty()) throw IoError("no .xml annotations in " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<VocAnnotation> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(read_voc(f, labels));
  return out;
}

PixelRect pixel_rect(const VocObject& o, int width, int height) {
  return {std::clamp(o.xmin, 0, width), std::clamp(o.ymin, 0, height), std::clamp(o.xmax, 0, width),
          std::clamp(o.ymax, 0, height)};
}

BBox normalized_box(const VocObject& o, int width, int height) {
  return clip_to_unit({static_cast<double>(o.xmin) / width, static_cast<double>(o.ymin) / height,
                       static_cast<double>(o.xmax) / width, static_cast<double>(o.ymax) / height});
}

std::vector<LabeledBox> truth_boxes(const VocAnnotation& a) {
  std::vector<LabeledBox> out;
  for (const auto& o : a.objects) out.push_back({normalized_box(o, a.width, a.height), o.class_id});
  return out;
}

ImageLoader directory_loader(std::filesystem::path dir) {
  return [dir = std::move(dir)](const std::string& filename) {
    const auto path = dir / filename;
    if (!std::filesystem::exists(path)) throw IoError("missing image file " + path.string());
    return read_image(path);
  };
}

SliceSet build_slices(std::span<const VocAnnotation> annotations, const ImageLoader& load, int classes) {
  SliceSet out;
  out.histogram.assign(static_cast<std::size_t>(classes), 0);
  for (const auto& a : annotations) {
    if (a.objects.empty()) continue;
    const Image img = load(a.filename);
    if (img.width != a.width || img.height != a.height) {
      throw InvalidAnnotationError(a.filename + ": annotation says " + std::to_string(a.width) + "x" +
                                   std::to_string(a.height) + " but the image is " +
                                   std::to_string(img.width) + "x" + std::to_string(img.height));
    }
    for (const auto& o : a.objects) {
      if (o.class_id < 0 || o.class_id >= classes) throw InvalidAnnotationError("class id out of range");
      SliceSample s;
      s.image_id = a.filename;
      s.crop = pixel_rect(o, img.width, img.height);
      s.class_id = o.class_id;
      s.pixels = crop(img, s.crop);
      ++out.histogram[static_cast<std::size_t>(o.class_id)];
      out.slices.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<std::size_t> class_histogram(std::span<const int> class_ids, int classes) {
  std::vector<std::size_t> h(static_cast<std::size_t>(classes), 0);
  for (int c : class_ids) {
    if (c < 0 || c >= classes) throw DimensionError("class id " + std::to_string(c) + " out of range");
    ++h[static_cast<std::size_t>(c)];
  }
  return h;
}

std::vector<std::size_t> undersample_indices(std::span<const int> class_ids, std::size_t cap,
                                             std::uint64_t seed) {
  if (cap == 0) throw ConfigError("undersample cap must be >= 1");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < class_ids.size(); ++i) by_class[class_ids[i]].push_back(i);

  std::mt19937_64 engine(seed);
  std::vector<std::size_t> keep;
  for (const auto& [cls, members] : by_class) {
    for (std::size_t j : sample_indices(members.size(), cap, engine)) keep.push_back(members[j]);
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

std::size_t validation_size(std::size_t n) { return (n + 2) / 5; }

SplitIndices split_4to1(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 engine(seed);
  shuffle(order, engine);
  const std::size_t n_val = validation_size(n);
  SplitIndices out;
  out.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  out.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  return out;
}

SplitIndices split_by_group(std::span<const std::string> groups, std::uint64_t seed) {
  std::vector<std::string> unique;
  std::map<std::string, std::size_t> index_of;
  for (const auto& g : groups) {
    if (index_of.emplace(g, unique.size()).second) unique.push_back(g);
  }
  const SplitIndices group_split = split_4to1(unique.size(), seed);
  std::vector<bool> is_val(unique.size(), false);
  for (std::size_t g : group_split.validation) is_val[g] = true;
  SplitIndices out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    (is_val[index_of.at(groups[i])] ? out.validation : out.train).push_back(i);
  }
  return out;
}

std::string format_manifest(std::span<const ManifestRecord> records) {
  std::string out = "# image_id\tclass_id\tx0\ty0\tx1\ty1\tcrop\n";
  for (const auto& r : records) {
    out += r.image_id + '\t' + std::to_string(r.class_id) + '\t' + std::to_string(r.box.x0) + '\t' +
           std::to_string(r.box.y0) + '\t' + std::to_string(r.box.x1) + '\t' +
           std::to_string(r.box.y1) + '\t' + r.crop_path + '\n';
  }
  return out;
}

std::vector<ManifestRecord> parse_manifest(std::string_view text) {
  std::vector<ManifestRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1) {
      cols.push_back(line.substr(start, tab - start));
    }
    cols.push_back(line.substr(start));
    if (cols.size() != 7) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": expected 7 tab-separated fields");
    }
    try {
      ManifestRecord r;
      r.image_id = cols[0];
      r.class_id = std::stoi(cols[1]);
      r.box = {std::stoi(cols[2]), std::stoi(cols[3]), std::stoi(cols[4]), std::stoi(cols[5])};
      r.crop_path = cols[6];
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": bad integer field");
    }
  }
  return out;
}

std::vector<ManifestRecord> write_slices(const std::filesystem::path& dir,
                                         std::span<const SliceSample> slices, ImageFormat format) {
  std::filesystem::create_directories(dir / "crops");
  std::vector<ManifestRecord> records;
  std::map<std::string, int> per_image;
  for (const auto& s : slices) {
    const int k = per_image[s.image_id]++;
    const std::string stem = std::filesystem::path(s.image_id).stem().string();
    const std::string rel = "crops/" + stem + "_" + std::to_string(k) + extension(format);
    write_image(dir / rel, s.pixels, format);
    records.push_back({s.image_id, s.class_id, s.crop, rel});
  }
  detail::write_file(dir / "manifest.tsv", format_manifest(records));
  return records;
}

std::vector<SliceSample> read_slices(const std::filesystem::path& manifest_path) {
  const auto records = parse_manifest(detail::read_file(manifest_path));
  const auto base = manifest_path.parent_path();
  std::vector<SliceSample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back({r.image_id, r.box, r.class_id, read_image(base / r.crop_path)});
  }
  return out;
}

}  // namespace maskpipe
