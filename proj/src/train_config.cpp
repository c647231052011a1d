#include "maskpipe/train_config.hpp"

#include <fstream>
#include <sstream>

#include "maskpipe/errors.hpp"

namespace maskpipe {
namespace {

bool is_net_section(const std::string& name) {
  return name.empty() || name == "net" || name == "network";
}

int to_int(const ConfigEntry& e) {
  const long v = parse_int(e);
  if (v < INT32_MIN || v > INT32_MAX) {
    throw ConfigError("line " + std::to_string(e.line) + ": " + e.key + " out of range");
  }
  return static_cast<int>(v);
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += format_real(v);
    } else {
      out += std::to_string(v);
    }
  }
  return out;
}

void apply(TrainConfig& cfg, const ConfigEntry& e, std::vector<std::string>& warnings) {
  const std::string& k = e.key;
  if (k == "batch") cfg.batch = to_int(e);
  else if (k == "width") cfg.width = to_int(e);
  else if (k == "height") cfg.height = to_int(e);
  else if (k == "channels") cfg.channels = to_int(e);
  else if (k == "momentum") cfg.momentum = parse_real(e);
  else if (k == "decay") cfg.decay = parse_real(e);
  else if (k == "angle") cfg.angle = parse_real(e);
  else if (k == "saturation") cfg.saturation = parse_real(e);
  else if (k == "exposure") cfg.exposure = parse_real(e);
  else if (k == "hue") cfg.hue = parse_real(e);
  else if (k == "learning_rate") cfg.learning_rate = parse_real(e);
  else if (k == "burn_in") cfg.burn_in = to_int(e);
  else if (k == "max_batches") cfg.max_batches = to_int(e);
  else if (k == "policy") cfg.policy = e.value;
  else if (k == "alpha") cfg.loss.alpha = parse_real(e);
  else if (k == "beta") cfg.loss.beta = parse_real(e);
  else if (k == "steps") {
    cfg.steps.clear();
    for (long v : parse_int_list(e)) cfg.steps.push_back(static_cast<int>(v));
  } else if (k == "scales") {
    cfg.scales = parse_real_list(e);
  } else {
    warnings.push_back("line " + std::to_string(e.line) + ": unknown key '" + k + "' ignored");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (width <= 0 || height <= 0) throw ConfigError("width and height must be positive");
  if (batch <= 0 || channels <= 0) throw ConfigError("batch and channels must be positive");
  if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
  if (burn_in < 0 || max_batches < 0) throw ConfigError("burn_in and max_batches must be >= 0");
  if (burn_in > max_batches) {
    throw ConfigError("burn_in " + std::to_string(burn_in) + " exceeds max_batches " +
                      std::to_string(max_batches));
  }
  if (policy != "steps" && policy != "constant") {
    throw ConfigError("unsupported policy '" + policy + "' (expected steps or constant)");
  }
  for (std::size_t i = 1; i < steps.size(); ++i) {
    if (steps[i] <= steps[i - 1]) throw ConfigError("steps must be strictly increasing");
  }
  if (scales.size() != steps.size()) {
    throw ConfigError("scales has " + std::to_string(scales.size()) + " entries but steps has " +
                      std::to_string(steps.size()));
  }
  loss.validate();
}

bool operator==(const TrainConfig& a, const TrainConfig& b) {
  return a.batch == b.batch && a.width == b.width && a.height == b.height &&
         a.channels == b.channels && a.momentum == b.momentum && a.decay == b.decay &&
         a.angle == b.angle && a.saturation == b.saturation && a.exposure == b.exposure &&
         a.hue == b.hue && a.learning_rate == b.learning_rate && a.burn_in == b.burn_in &&
         a.max_batches == b.max_batches && a.policy == b.policy && a.steps == b.steps &&
         a.scales == b.scales && a.loss.alpha == b.loss.alpha && a.loss.beta == b.loss.beta &&
         a.extra_sections == b.extra_sections;
}

ParsedConfig parse_config(std::string_view text) {
  ParsedConfig out;
  bool seen_net = false;
  for (auto& section : parse_sections(text)) {
    if (!is_net_section(section.name) || (seen_net && !section.name.empty())) {
      out.config.extra_sections.push_back(std::move(section));
      continue;
    }
    if (!section.name.empty()) seen_net = true;
    for (const auto& e : section.entries) apply(out.config, e, out.warnings);
  }
  out.config.validate();
  return out;
}

ParsedConfig read_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string serialize_config(const TrainConfig& cfg) {
  ConfigSection net{"net", 0, {}};
  const auto add = [&](const char* key, std::string value) {
    net.entries.push_back({key, std::move(value), 0});
  };
  add("batch", std::to_string(cfg.batch));
  add("width", std::to_string(cfg.width));
  add("height", std::to_string(cfg.height));
  add("channels", std::to_string(cfg.channels));
  add("momentum", format_real(cfg.momentum));
  add("decay", format_real(cfg.decay));
  add("angle", format_real(cfg.angle));
  add("saturation", format_real(cfg.saturation));
  add("exposure", format_real(cfg.exposure));
  add("hue", format_real(cfg.hue));
  add("learning_rate", format_real(cfg.learning_rate));
  add("burn_in", std::to_string(cfg.burn_in));
  add("max_batches", std::to_string(cfg.max_batches));
  add("policy", cfg.policy);
  add("steps", join(cfg.steps));
  add("scales", join(cfg.scales));
  add("alpha", format_real(cfg.loss.alpha));
  add("beta", format_real(cfg.loss.beta));

  std::vector<ConfigSection> sections{std::move(net)};
  sections.insert(sections.end(), cfg.extra_sections.begin(), cfg.extra_sections.end());
  return serialize_sections(sections);
}

double lr_at(const TrainConfig& cfg, int iteration) {
  if (iteration < 0 || iteration > cfg.max_batches) {
    throw ConfigError("iteration " + std::to_string(iteration) + " outside [0, " +
                      std::to_string(cfg.max_batches) + "]");
  }
  if (iteration < cfg.burn_in) {
    const double t = static_cast<double>(iteration) / cfg.burn_in;
    return cfg.learning_rate * t * t * t * t;
  }
  double lr = cfg.learning_rate;
  if (cfg.policy == "steps") {
    for (std::size_t j = 0; j < cfg.steps.size(); ++j) {
      if (cfg.steps[j] <= iteration) lr *= cfg.scales[j];
    }
  }
  return lr;
}

}  // namespace maskpipe
