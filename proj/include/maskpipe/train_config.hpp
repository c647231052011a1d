#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "maskpipe/config_text.hpp"
#include "maskpipe/loss.hpp"

namespace maskpipe {

/// Training hyperparameters from a [net] block. Defaults are the detector
/// run's values.
struct TrainConfig {
  int batch = 8;
  int width = 512;
  int height = 512;
  int channels = 3;
  double momentum = 0.9;
  double decay = 0.0005;
  double angle = 0.0;
  double saturation = 1.5;
  double exposure = 1.5;
  double hue = 0.1;
  double learning_rate = 0.001;
  int burn_in = 100;
  int max_batches = 5000;
  std::string policy = "steps";
  std::vector<int> steps{4000, 4500};
  std::vector<double> scales{0.1, 0.1};
  LossWeights loss;
  /// Every other section, kept verbatim.
  std::vector<ConfigSection> extra_sections;

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;

  friend bool operator==(const TrainConfig& a, const TrainConfig& b);
};

struct ParsedConfig {
  TrainConfig config;
  std::vector<std::string> warnings;
};

/// Keys outside any section and inside [net] or [network] fill the config.
/// Unknown keys there become warnings.
ParsedConfig parse_config(std::string_view text);
ParsedConfig read_config(const std::string& path);
std::string serialize_config(const TrainConfig& cfg);

/// Learning rate at `iteration`: a quartic ramp while iteration < burn_in,
/// then the base rate times every scale whose step has been reached.
double lr_at(const TrainConfig& cfg, int iteration);

}  // namespace maskpipe
