#include "maskpipe/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "maskpipe/errors.hpp"
#include "maskpipe/rng.hpp"

namespace maskpipe {
namespace {

constexpr std::array<std::pair<Transform, const char*>, 9> kTransformNames{{
    {Transform::Rotation, "rotation"},
    {Transform::Translation, "translation"},
    {Transform::Scale, "scale"},
    {Transform::Flip, "flip"},
    {Transform::Hue, "hue"},
    {Transform::Brightness, "brightness"},
    {Transform::Saturation, "saturation"},
    {Transform::Invert, "invert"},
    {Transform::Blur, "blur"},
}};

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

double draw(CounterRng& rng, const Interval& r) { return rng.uniform(r.lo, r.hi); }

void check_interval(const Interval& r, const char* name) {
  if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
    throw ConfigError(std::string("augmentation range ") + name + " is empty");
  }
}

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ConfigError(std::string(name) + " must lie in [0, 1]");
  }
}

Image mirror(const Image& img) {
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::uint8_t* s = img.at(img.width - 1 - x, y);
      std::copy(s, s + 3, out.at(x, y));
    }
  }
  return out;
}

// Mirror with the edge sample repeated (abc|cba), which keeps the blurred
// image's sum equal to the input's.
int reflect(int i, int n) {
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

// h in degrees [0, 360), s and v in [0, 1].
void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0 ? d / mx : 0.0;
  if (d == 0) {
    h = 0;
  } else if (mx == r) {
    h = 60.0 * std::fmod((g - b) / d + 6.0, 6.0);
  } else if (mx == g) {
    h = 60.0 * ((b - r) / d + 2.0);
  } else {
    h = 60.0 * ((r - g) / d + 4.0);
  }
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r1 = 0, g1 = 0, b1 = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r1 = c; g1 = x; break;
    case 1: r1 = x; g1 = c; break;
    case 2: g1 = c; b1 = x; break;
    case 3: g1 = x; b1 = c; break;
    case 4: r1 = x; b1 = c; break;
    default: r1 = c; b1 = x; break;
  }
  const double m = v - c;
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

}  // namespace

void AugmentationPlan::set_enabled(Transform t, bool on) {
  if (on) {
    enabled |= static_cast<unsigned>(t);
  } else {
    enabled &= ~static_cast<unsigned>(t);
  }
}

void AugmentationPlan::validate() const {
  check_interval(rotation_degrees, "rotation_degrees");
  check_interval(translation_fraction, "translation_fraction");
  check_interval(scale, "scale");
  check_interval(hue_degrees, "hue_degrees");
  check_interval(brightness, "brightness");
  check_interval(saturation, "saturation");
  check_interval(blur_sigma, "blur_sigma");
  if (scale.lo <= 0) throw ConfigError("scale range must be positive");
  if (brightness.lo <= 0) throw ConfigError("brightness range must be positive");
  if (saturation.lo <= 0) throw ConfigError("saturation range must be positive");
  if (blur_sigma.lo < 0) throw ConfigError("blur_sigma range must be non-negative");
  check_probability(flip_probability, "flip_probability");
  check_probability(invert_probability, "invert_probability");
  if ((enabled & ~kAllTransforms) != 0) throw ConfigError("unknown transform bits");
}

AnnotatedImage affine(const AnnotatedImage& in, const AffineParams& p) {
  if (!(p.scale > 0) || !std::isfinite(p.scale)) {
    throw InvalidGeometryError("affine scale must be positive");
  }
  const double w = in.image.width;
  const double h = in.image.height;
  const double theta = p.rotation_degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  const double cx = w / 2.0;
  const double cy = h / 2.0;
  const double tx = p.translate_x * w;
  const double ty = p.translate_y * h;
  const bool identity = p.rotation_degrees == 0.0 && p.translate_x == 0.0 &&
                        p.translate_y == 0.0 && p.scale == 1.0;

  AnnotatedImage out;
  if (identity) {
    out = in;
  } else {
    out.image = Image(in.image.width, in.image.height);
    const Image& src = in.image;
    for (int y = 0; y < src.height; ++y) {
      for (int x = 0; x < src.width; ++x) {
        const double qx = x + 0.5 - cx - tx;
        const double qy = y + 0.5 - cy - ty;
        const double px = (cs * qx + sn * qy) / p.scale + cx - 0.5;
        const double py = (-sn * qx + cs * qy) / p.scale + cy - 0.5;
        const double fx0 = std::floor(px);
        const double fy0 = std::floor(py);
        if (fx0 < -1 || fy0 < -1 || fx0 >= src.width || fy0 >= src.height) continue;
        const int x0 = static_cast<int>(fx0);
        const int y0 = static_cast<int>(fy0);
        const double fx = px - fx0;
        const double fy = py - fy0;
        double acc[3] = {0, 0, 0};
        for (int dy = 0; dy <= 1; ++dy) {
          for (int dx = 0; dx <= 1; ++dx) {
            const int sx = x0 + dx;
            const int sy = y0 + dy;
            if (sx < 0 || sy < 0 || sx >= src.width || sy >= src.height) continue;
            const double wgt = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy);
            const std::uint8_t* s = src.at(sx, sy);
            for (int c = 0; c < 3; ++c) acc[c] += wgt * s[c];
          }
        }
        std::uint8_t* d = out.image.at(x, y);
        for (int c = 0; c < 3; ++c) d[c] = to_byte(acc[c]);
      }
    }
    for (const auto& lb : in.boxes) {
      double lo_x = INFINITY, lo_y = INFINITY, hi_x = -INFINITY, hi_y = -INFINITY;
      for (double bx : {lb.box.x1, lb.box.x2}) {
        for (double by : {lb.box.y1, lb.box.y2}) {
          const double rx = bx * w - cx;
          const double ry = by * h - cy;
          const double mx = (cs * rx - sn * ry) * p.scale + cx + tx;
          const double my = (sn * rx + cs * ry) * p.scale + cy + ty;
          lo_x = std::min(lo_x, mx / w);
          hi_x = std::max(hi_x, mx / w);
          lo_y = std::min(lo_y, my / h);
          hi_y = std::max(hi_y, my / h);
        }
      }
      const BBox clipped = clip_to_unit({lo_x, lo_y, hi_x, hi_y});
      if (clipped.x2 > clipped.x1 && clipped.y2 > clipped.y1) {
        out.boxes.push_back({clipped, lb.class_id});
      }
    }
  }

  if (p.flip) {
    out.image = mirror(out.image);
    for (auto& lb : out.boxes) {
      lb.box = {1.0 - lb.box.x2, lb.box.y1, 1.0 - lb.box.x1, lb.box.y2};
    }
  }
  return out;
}

Image color(const Image& img, const ColorParams& p) {
  if (!(p.brightness > 0) || !(p.saturation > 0)) {
    throw ConfigError("brightness and saturation factors must be positive");
  }
  Image out = img;
  const std::size_t n = out.pixels.size() / 3;
  if (p.hue_degrees != 0.0 || p.saturation != 1.0) {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint8_t* px = out.pixels.data() + 3 * i;
      double h, s, v;
      rgb_to_hsv(px[0] / 255.0, px[1] / 255.0, px[2] / 255.0, h, s, v);
      h = std::fmod(h + p.hue_degrees, 360.0);
      if (h < 0) h += 360.0;
      s = std::min(1.0, s * p.saturation);
      double r, g, b;
      hsv_to_rgb(h, s, v, r, g, b);
      px[0] = to_byte(r * 255.0);
      px[1] = to_byte(g * 255.0);
      px[2] = to_byte(b * 255.0);
    }
  }
  if (p.brightness != 1.0) {
    for (auto& v : out.pixels) v = to_byte(v * p.brightness);
  }
  if (p.invert) {
    for (auto& v : out.pixels) v = static_cast<std::uint8_t>(255 - v);
  }
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma >= 0) || !std::isfinite(sigma)) throw ConfigError("blur sigma must be >= 0");
  if (sigma == 0) return {1.0};
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + r)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

Image gaussian_blur(const Image& img, double sigma) {
  const std::vector<double> k = gaussian_kernel(sigma);
  if (k.size() == 1 || img.empty()) return img;
  const int r = static_cast<int>(k.size() / 2);
  const int w = img.width;
  const int h = img.height;
  std::vector<double> tmp(img.pixels.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int j = -r; j <= r; ++j) {
          acc += k[static_cast<std::size_t>(j + r)] * img.at(reflect(x + j, w), y)[c];
        }
        tmp[img.index(x, y) + static_cast<std::size_t>(c)] = acc;
      }
    }
  }
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int j = -r; j <= r; ++j) {
          acc += k[static_cast<std::size_t>(j + r)] *
                 tmp[img.index(x, reflect(y + j, h)) + static_cast<std::size_t>(c)];
        }
        out.at(x, y)[c] = to_byte(acc);
      }
    }
  }
  return out;
}

AugmentParams draw_params(const AugmentationPlan& plan, std::uint64_t index) {
  CounterRng rng(plan.seed, index);
  const double rotation = draw(rng, plan.rotation_degrees);
  const double tx = draw(rng, plan.translation_fraction);
  const double ty = draw(rng, plan.translation_fraction);
  const double scale = draw(rng, plan.scale);
  const bool flip = rng.bernoulli(plan.flip_probability);
  const double hue = draw(rng, plan.hue_degrees);
  const double brightness = draw(rng, plan.brightness);
  const double saturation = draw(rng, plan.saturation);
  const bool invert = rng.bernoulli(plan.invert_probability);
  const double sigma = draw(rng, plan.blur_sigma);

  AugmentParams p;
  if (plan.is_enabled(Transform::Rotation)) p.affine.rotation_degrees = rotation;
  if (plan.is_enabled(Transform::Translation)) {
    p.affine.translate_x = tx;
    p.affine.translate_y = ty;
  }
  if (plan.is_enabled(Transform::Scale)) p.affine.scale = scale;
  if (plan.is_enabled(Transform::Flip)) p.affine.flip = flip;
  if (plan.is_enabled(Transform::Hue)) p.color.hue_degrees = hue;
  if (plan.is_enabled(Transform::Brightness)) p.color.brightness = brightness;
  if (plan.is_enabled(Transform::Saturation)) p.color.saturation = saturation;
  if (plan.is_enabled(Transform::Invert)) p.color.invert = invert;
  if (plan.is_enabled(Transform::Blur)) p.blur_sigma = sigma;
  return p;
}

AnnotatedImage apply_params(const AnnotatedImage& in, const AugmentParams& p) {
  AnnotatedImage out = affine(in, p.affine);
  out.image = gaussian_blur(color(out.image, p.color), p.blur_sigma);
  return out;
}

AnnotatedImage apply_plan(const AnnotatedImage& in, const AugmentationPlan& plan,
                          std::uint64_t index) {
  plan.validate();
  return apply_params(in, draw_params(plan, index));
}

SliceSample apply_plan(const SliceSample& in, const AugmentationPlan& plan, std::uint64_t index) {
  SliceSample out = in;
  out.pixels = apply_plan(AnnotatedImage{in.pixels, {}}, plan, index).image;
  return out;
}

std::string serialize_plan(const AugmentationPlan& plan) {
  ConfigSection s{"augment", 0, {}};
  const auto add = [&](const char* key, std::string value) {
    s.entries.push_back({key, std::move(value), 0});
  };
  const auto interval = [](const Interval& r) {
    return format_real(r.lo) + "," + format_real(r.hi);
  };
  std::string names;
  for (const auto& [t, name] : kTransformNames) {
    if (!plan.is_enabled(t)) continue;
    if (!names.empty()) names += ",";
    names += name;
  }
  add("seed", std::to_string(plan.seed));
  add("transforms", names.empty() ? "none" : names);
  add("rotation_degrees", interval(plan.rotation_degrees));
  add("translation_fraction", interval(plan.translation_fraction));
  add("scale", interval(plan.scale));
  add("hue_degrees", interval(plan.hue_degrees));
  add("brightness", interval(plan.brightness));
  add("saturation", interval(plan.saturation));
  add("blur_sigma", interval(plan.blur_sigma));
  add("flip_probability", format_real(plan.flip_probability));
  add("invert_probability", format_real(plan.invert_probability));
  return serialize_sections({s});
}

AugmentationPlan plan_from_section(const ConfigSection& section) {
  AugmentationPlan plan;
  const auto interval = [](const ConfigEntry& e) {
    const auto v = parse_real_list(e);
    if (v.size() != 2) {
      throw ConfigError("line " + std::to_string(e.line) + ": " + e.key +
                        " needs two numbers lo,hi");
    }
    return Interval{v[0], v[1]};
  };
  for (const auto& e : section.entries) {
    if (e.key == "seed") {
      plan.seed = parse_uint(e);
    } else if (e.key == "transforms") {
      plan.enabled = 0;
      if (normalize_key(e.value) == "none") continue;
      std::string_view rest = e.value;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string name = normalize_key(rest.substr(0, comma));
        rest.remove_prefix(comma == std::string_view::npos ? rest.size() : comma + 1);
        const auto it = std::find_if(kTransformNames.begin(), kTransformNames.end(),
                                     [&](const auto& tn) { return name == tn.second; });
        if (it == kTransformNames.end()) {
          throw ConfigError("line " + std::to_string(e.line) + ": unknown transform '" + name +
                            "'");
        }
        plan.set_enabled(it->first, true);
      }
    } else if (e.key == "rotation_degrees") {
      plan.rotation_degrees = interval(e);
    } else if (e.key == "translation_fraction") {
      plan.translation_fraction = interval(e);
    } else if (e.key == "scale") {
      plan.scale = interval(e);
    } else if (e.key == "hue_degrees") {
      plan.hue_degrees = interval(e);
    } else if (e.key == "brightness") {
      plan.brightness = interval(e);
    } else if (e.key == "saturation") {
      plan.saturation = interval(e);
    } else if (e.key == "blur_sigma") {
      plan.blur_sigma = interval(e);
    } else if (e.key == "flip_probability") {
      plan.flip_probability = parse_real(e);
    } else if (e.key == "invert_probability") {
      plan.invert_probability = parse_real(e);
    } else {
      throw ConfigError("line " + std::to_string(e.line) + ": unknown augment key '" + e.key +
                        "'");
    }
  }
  plan.validate();
  return plan;
}

AugmentationPlan parse_plan(std::string_view text) {
  for (const auto& s : parse_sections(text)) {
    if (s.name == "augment") return plan_from_section(s);
  }
  return AugmentationPlan{};
}

}  // namespace maskpipe
