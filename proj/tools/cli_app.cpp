#include "cli_app.hpp"

#include <spdlog/logger.h>
#include <spdlog/sinks/ostream_sink.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "maskpipe/augment.hpp"
#include "maskpipe/dataset_voc.hpp"
#include "maskpipe/detector.hpp"
#include "maskpipe/embedder.hpp"
#include "maskpipe/episode.hpp"
#include "maskpipe/errors.hpp"
#include "maskpipe/labels.hpp"
#include "maskpipe/loss.hpp"
#include "maskpipe/metrics.hpp"
#include "maskpipe/pipeline.hpp"
#include "maskpipe/train_config.hpp"
#include "maskpipe/video.hpp"

namespace maskpipe::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("maskpipe", sink);
  logger->set_pattern("[%l] %v");
  logger->set_level(spdlog::level::warn);
  const char* env = std::getenv("MASKPIPE_LOG");
  if (env && *env) {
    const std::string wanted(env);
    const auto level = spdlog::level::from_str(wanted);
    if (level == spdlog::level::off && wanted != "off") {
      logger->warn("MASKPIPE_LOG={} is not a log level; using warn", wanted);
    } else {
      logger->set_level(level);
    }
  }
  return logger;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    part.erase(0, part.find_first_not_of(" \t"));
    part.erase(part.find_last_not_of(" \t") + 1);
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

ImageFormat parse_format(const std::string& name) {
  if (name == "png") return ImageFormat::Png;
  if (name == "ppm") return ImageFormat::Ppm;
  throw ConfigError("unknown image format '" + name + "' (expected png or ppm)");
}

std::pair<std::uint32_t, std::uint32_t> parse_fps(const std::string& text) {
  const auto slash = text.find('/');
  try {
    std::size_t used = 0;
    const unsigned long num = std::stoul(text.substr(0, slash), &used);
    unsigned long den = 1;
    if (slash != std::string::npos) den = std::stoul(text.substr(slash + 1));
    if (num == 0 || den == 0 || num > UINT32_MAX || den > UINT32_MAX) throw std::out_of_range("");
    return {static_cast<std::uint32_t>(num), static_cast<std::uint32_t>(den)};
  } catch (const std::logic_error&) {
    throw ConfigError("frame rate '" + text + "' is not N or N/D with positive integers");
  }
}

std::string fixed_one(double v) {
  std::string s = format_number(v);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fewshot::DistanceMode parse_distance(const std::string& s) {
  if (s == "mahalanobis") return fewshot::DistanceMode::Mahalanobis;
  if (s == "euclidean") return fewshot::DistanceMode::Euclidean;
  throw ConfigError("unknown distance '" + s + "'");
}

fewshot::CovarianceMode parse_covariance(const std::string& s) {
  if (s == "blended") return fewshot::CovarianceMode::Blended;
  if (s == "ridge") return fewshot::CovarianceMode::RidgeOnly;
  throw ConfigError("unknown covariance mode '" + s + "'");
}

struct ModelSpecOptions {
  std::string spec = "synthetic";
  double conf_thresh = 0.25;
  double iou_thresh = 0.45;
  bool class_agnostic = false;
};

std::shared_ptr<DetectorModel> make_model(const ModelSpecOptions& o) {
  const auto colon = o.spec.find(':');
  const std::string kind = o.spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : o.spec.substr(colon + 1);
  if (kind == "synthetic" && arg.empty()) return std::make_shared<SyntheticDetector>();
  if (kind == "stub") {
    double ms = 0;
    try {
      ms = std::stod(arg);
    } catch (const std::logic_error&) {
      throw ConfigError("model spec stub:<ms> needs a number, got '" + o.spec + "'");
    }
    if (!(ms >= 0)) throw ConfigError("stub cost must be >= 0");
    return std::make_shared<FixedCostModel>(
        std::chrono::nanoseconds(static_cast<std::int64_t>(ms * 1e6)));
  }
  if (kind == "playback" && !arg.empty()) {
    DecodeOptions d;
    d.conf_threshold = o.conf_thresh;
    d.iou_threshold = o.iou_thresh;
    d.class_aware = !o.class_agnostic;
    return std::make_shared<PlaybackDetector>(arg, default_anchors(), d,
                                              LabelCatalog::mask_task().names());
  }
  throw ConfigError("unknown model spec '" + o.spec +
                    "' (expected synthetic, stub:<ms> or playback:<dir>)");
}

struct EpisodeInputs {
  std::string slices;
  std::string train;
  std::string validation;
  std::string train_emb;
  std::string validation_emb;
  bool by_image = false;
  std::uint64_t seed = 0;
};

EmbeddingSplit load_split(const EpisodeInputs& in, spdlog::logger& log) {
  const int modes = !in.slices.empty() + (!in.train.empty() || !in.validation.empty()) +
                    (!in.train_emb.empty() || !in.validation_emb.empty());
  if (modes != 1) {
    throw ConfigError(
        "give exactly one of --slices, --train/--validation, or --train-emb/--validation-emb");
  }
  if (!in.train_emb.empty() || !in.validation_emb.empty()) {
    if (in.train_emb.empty() || in.validation_emb.empty()) {
      throw ConfigError("--train-emb and --validation-emb go together");
    }
    return {read_embeddings(in.train_emb), read_embeddings(in.validation_emb)};
  }
  FewShotRoutine routine(std::make_shared<BaselineEmbedder>());
  if (!in.slices.empty()) {
    const auto slices = read_slices(in.slices);
    SplitIndices split;
    if (in.by_image) {
      std::vector<std::string> groups;
      for (const auto& s : slices) groups.push_back(s.image_id);
      split = split_by_group(groups, in.seed);
    } else {
      split = split_4to1(slices.size(), in.seed);
    }
    std::vector<SliceSample> train, validation;
    for (auto i : split.train) train.push_back(slices[i]);
    for (auto i : split.validation) validation.push_back(slices[i]);
    log.info("split {} slices into {} train / {} validation", slices.size(), train.size(),
             validation.size());
    return routine.embed(train, validation);
  }
  if (in.train.empty() || in.validation.empty()) {
    throw ConfigError("--train and --validation go together");
  }
  const auto train = read_slices(in.train);
  const auto validation = read_slices(in.validation);
  return routine.embed(train, validation);
}

std::map<std::string, std::vector<Detection>> read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read predictions " + path.string());
  std::map<std::string, std::vector<Detection>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      auto& dets = out[j.at("image").get<std::string>()];
      for (const auto& d : j.at("detections")) {
        dets.push_back({{d.at("x1").get<double>(), d.at("y1").get<double>(),
                         d.at("x2").get<double>(), d.at("y2").get<double>()},
                        d.at("conf").get<double>(),
                        d.at("class_id").get<int>()});
      }
    } catch (const json::exception& e) {
      throw ParseError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

class Cli {
 public:
  Cli(std::ostream& out, std::ostream& err) : os_(out), err_(err), log_(make_logger(err)) {
    build();
  }

  int run(const std::vector<std::string>& args) {
    try {
      std::vector<std::string> reversed(args.rbegin(), args.rend());
      app_.parse(reversed);
    } catch (const CLI::CallForHelp&) {
      os_ << help_for_current();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      os_ << app_.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      err_ << "error: " << e.what() << "\n";
      return 1;
    }
    try {
      if (action_) action_();
      return 0;
    } catch (const Error& e) {
      err_ << "error: " << e.what() << "\n";
      return e.category() == ErrorCategory::Io ? 2 : 1;
    } catch (const fs::filesystem_error& e) {
      err_ << "error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      err_ << "error: " << e.what() << "\n";
      return 1;
    }
  }

  std::vector<std::string> paths() {
    std::vector<std::string> out{""};
    collect(&app_, "", out);
    return out;
  }

  std::string help(const std::string& path) {
    CLI::App* app = &app_;
    std::stringstream words(path);
    std::string w;
    while (words >> w) app = app->get_subcommand(w);
    return help_of(app);
  }

 private:
  static void collect(CLI::App* app, const std::string& prefix, std::vector<std::string>& out) {
    for (CLI::App* sub : app->get_subcommands({})) {
      const std::string path = prefix.empty() ? sub->get_name() : prefix + " " + sub->get_name();
      out.push_back(path);
      collect(sub, path, out);
    }
  }

  static std::string help_of(CLI::App* app) {
    std::string prefix;
    for (CLI::App* p = app->get_parent(); p != nullptr; p = p->get_parent()) {
      prefix = prefix.empty() ? p->get_name() : p->get_name() + " " + prefix;
    }
    return app->help(prefix);
  }

  std::string help_for_current() {
    CLI::App* app = &app_;
    while (true) {
      const auto subs = app->get_subcommands();
      if (subs.empty()) break;
      app = subs.front();
    }
    return help_of(app);
  }

  CLI::App* command(CLI::App* parent, const std::string& name, const std::string& description,
                    std::function<void()> body) {
    CLI::App* sub = parent->add_subcommand(name, description);
    sub->callback([this, body = std::move(body)] { action_ = body; });
    return sub;
  }

  void add_seed(CLI::App* sub) {
    sub->add_option("--seed", seed_, "Seed for every random choice")->capture_default_str();
  }

  void build() {
    app_.name("maskpipe");
    app_.description("Face-mask detection toolkit: datasets, evaluation, video annotation.");
    app_.require_subcommand(1);
    app_.get_formatter()->column_width(36);
    app_.footer("Set MASKPIPE_LOG=debug|info|warn|error|off for log output on stderr.");
    build_dataset();
    build_eval();
    build_annotate();
    build_bench();
    build_loss();
    build_config();
    build_stream();
  }

  void build_dataset() {
    CLI::App* ds = app_.add_subcommand("dataset", "VOC annotations and slice datasets");
    ds->require_subcommand(1);

    auto* build = command(ds, "build-slices", "Cut every annotated object into a slice dataset",
                          [this] { dataset_build_slices(); });
    build->add_option("--voc", voc_dir_, "Directory of VOC .xml annotations")->required();
    build->add_option("--images", images_dir_, "Directory holding the annotated images")
        ->required();
    build->add_option("--out", out_, "Output directory (crops/ and manifest.tsv)")->required();
    build->add_option("--format", format_, "Crop image format: png or ppm")->capture_default_str();

    auto* stats = command(ds, "stats", "Class histogram and imbalance ratio",
                          [this] { dataset_stats(); });
    stats->add_option("--voc", voc_dir_, "Directory of VOC .xml annotations")->required();
    stats->add_flag("--csv", csv_, "Print class,count CSV instead of text");

    auto* under = command(ds, "undersample", "Cap every class at the same number of slices",
                          [this] { dataset_undersample(); });
    under->add_option("--manifest", manifest_, "Slice manifest to read")->required();
    under->add_option("--cap", cap_, "Per-class cap")->required();
    under->add_option("--out", out_, "Output slice directory")->required();
    under->add_option("--format", format_, "Crop image format: png or ppm")->capture_default_str();
    add_seed(under);

    auto* split = command(ds, "split", "4:1 train/validation split into two slice directories",
                          [this] { dataset_split(); });
    split->add_option("--manifest", manifest_, "Slice manifest to read")->required();
    split->add_option("--out", out_, "Output directory (train/ and validation/)")->required();
    split->add_flag("--by-image", by_image_, "Keep all slices of one image on the same side");
    split->add_option("--format", format_, "Crop image format: png or ppm")->capture_default_str();
    add_seed(split);

    auto* embed = command(ds, "embed", "Embed slices with the baseline feature extractor",
                          [this] { dataset_embed(); });
    embed->add_option("--manifest", manifest_, "Slice manifest to read")->required();
    embed->add_option("--out", out_, "Output embedding file (.memb)")->required();

    auto* aug = command(ds, "augment", "Write augmented copies of a slice dataset",
                        [this] { dataset_augment(); });
    aug->add_option("--manifest", manifest_, "Slice manifest to read")->required();
    aug->add_option("--out", out_, "Output slice directory")->required();
    aug->add_option("--cfg", cfg_, "Config file whose [augment] section sets the plan");
    aug->add_option("--copies", copies_, "Augmented copies per slice")->capture_default_str();
    aug->add_option("--format", format_, "Crop image format: png or ppm")->capture_default_str();
    seed_option_ = aug->add_option("--seed", seed_, "Plan seed (overrides the config)");
  }

  void add_episode_inputs(CLI::App* sub) {
    sub->add_option("--slices", episode_.slices, "Slice manifest, split 4:1 with --seed");
    sub->add_flag("--by-image", episode_.by_image, "Split --slices by source image");
    sub->add_option("--train", episode_.train, "Support pool slice manifest");
    sub->add_option("--validation", episode_.validation, "Query slice manifest");
    sub->add_option("--train-emb", episode_.train_emb, "Support pool embeddings (.memb)");
    sub->add_option("--validation-emb", episode_.validation_emb, "Query embeddings (.memb)");
    sub->add_option("--epsilon", epsilon_, "Covariance ridge")->capture_default_str();
    sub->add_option("--cap", cap_, "Undersample the support pool to this per-class cap");
    sub->add_option("--distance", distance_, "mahalanobis or euclidean")->capture_default_str();
    sub->add_option("--covariance", covariance_, "blended or ridge")->capture_default_str();
    sub->add_option("--out", out_, "Directory for report files");
    add_seed(sub);
  }

  void build_eval() {
    CLI::App* ev = app_.add_subcommand("eval", "Evaluation reports");
    ev->require_subcommand(1);

    auto* det = command(ev, "detections", "Precision, recall and F1 of predicted boxes",
                        [this] { eval_detections(); });
    det->add_option("--pred", pred_, "Predictions, one JSON object per image per line")
        ->required();
    det->add_option("--truth", voc_dir_, "Directory of VOC .xml annotations")->required();
    det->add_option("--iou-thresh", iou_thresh_, "IoU needed for a match")->capture_default_str();
    det->add_option("--conf-thresh", conf_thresh_, "Ignore predictions below this confidence")
        ->capture_default_str();
    det->add_option("--method", method_, "Row label in the report")->capture_default_str();
    det->add_option("--out", out_, "Directory for metrics.csv and per_class.csv");
    iou_thresh_ = 0.5;
    conf_thresh_ = 0.0;

    auto* ep = command(ev, "episodic", "One few-shot episode at a fixed support size",
                       [this] { eval_episodic(); });
    ep->add_option("--support-size", support_size_, "Supports per class, or full")
        ->capture_default_str();
    add_episode_inputs(ep);

    auto* sw = command(ev, "sweep", "Few-shot accuracy across support sizes",
                       [this] { eval_sweep(); });
    sw->add_option("--sizes", sizes_, "Comma-separated support sizes")->capture_default_str();
    sw->add_option("--column", column_, "Accuracy column header")->capture_default_str();
    add_episode_inputs(sw);
  }

  void add_model_options(CLI::App* sub) {
    sub->add_option("--model", model_.spec, "synthetic, stub:<ms> or playback:<dir>")
        ->capture_default_str();
    sub->add_option("--skip", skip_, "Run the model on every k-th frame")->capture_default_str();
    sub->add_flag("--track", track_, "Extrapolate boxes between model calls");
    sub->add_option("--conf-thresh", model_.conf_thresh, "Playback decode confidence threshold")
        ->capture_default_str();
    sub->add_option("--iou-thresh", model_.iou_thresh, "Playback decode NMS threshold")
        ->capture_default_str();
    sub->add_flag("--class-agnostic", model_.class_agnostic,
                  "Playback NMS suppresses across classes");
  }

  void build_annotate() {
    auto* an = command(&app_, "annotate", "Detect, track and draw on a video stream",
                       [this] { annotate(); });
    an->add_option("--in", in_, "Input .mdvs stream")->required();
    an->add_option("--out", out_, "Output .mdvs stream")->required();
    an->add_option("--sidecar", sidecar_, "Detections sidecar (default <out>.jsonl)");
    add_model_options(an);
    an->add_option("--track-iou", track_iou_, "Tracker association IoU")->capture_default_str();
    an->add_option("--max-age", max_age_, "Frames a track survives unseen")->capture_default_str();
    an->add_option("--refine", refine_, "Pixel search radius for tracked boxes (0 = off)")
        ->capture_default_str();
    an->add_option("--queue", queue_, "Stage queue capacity (1 = sequential)")
        ->capture_default_str();
  }

  void build_bench() {
    auto* b = command(&app_, "bench", "Time the annotation pipeline", [this] { bench(); });
    b->add_option("--in", in_, "Input .mdvs stream")->required();
    add_model_options(b);
  }

  void build_loss() {
    CLI::App* loss = app_.add_subcommand("loss", "Detection loss tools");
    loss->require_subcommand(1);
    auto* check = command(loss, "check", "Compare the analytic loss gradient with finite differences",
                          [this] { loss_check(); });
    check->add_option("--cfg", cfg_, "Config file supplying alpha and beta");
    alpha_option_ = check->add_option("--alpha", alpha_, "Classification weight");
    beta_option_ = check->add_option("--beta", beta_, "Objectness weight");
    check->add_option("--grids", grids_, "Random grids to check")->capture_default_str();
    check->add_option("--step", step_, "Finite-difference step")->capture_default_str();
    add_seed(check);
  }

  void build_config() {
    CLI::App* cfg = app_.add_subcommand("config", "Training configuration files");
    cfg->require_subcommand(1);
    auto* show = command(cfg, "show", "Parse, validate and echo a config", [this] { config_show(); });
    show->add_option("--cfg", cfg_, "Config file")->required();
    show->add_option("--at", iterations_, "Comma-separated iterations to print the learning rate for");
  }

  void build_stream() {
    CLI::App* st = app_.add_subcommand("stream", ".mdvs stream utilities");
    st->require_subcommand(1);

    auto* synth = command(st, "synth", "Render a synthetic scene", [this] { stream_synth(); });
    synth->add_option("--out", out_, "Output .mdvs stream")->required();
    synth->add_option("--frames", frames_, "Frame count")->capture_default_str();
    synth->add_option("--width", width_, "Frame width")->capture_default_str();
    synth->add_option("--height", height_, "Frame height")->capture_default_str();
    synth->add_option("--objects", objects_, "Moving objects")->capture_default_str();
    synth->add_option("--fps", fps_, "Frame rate, N or N/D")->capture_default_str();
    add_seed(synth);

    auto* info = command(st, "info", "Print a stream header", [this] { stream_info(); });
    info->add_option("--in", in_, "Input .mdvs stream")->required();

    auto* exp = command(st, "export", "Write every frame as an image file", [this] { stream_export(); });
    exp->add_option("--in", in_, "Input .mdvs stream")->required();
    exp->add_option("--out", out_, "Output directory")->required();
    exp->add_option("--format", format_, "png or ppm")->capture_default_str();

    auto* imp = command(st, "import", "Pack a directory of frames into a stream",
                        [this] { stream_import(); });
    imp->add_option("--in", in_, "Directory of .png/.ppm frames")->required();
    imp->add_option("--out", out_, "Output .mdvs stream")->required();
    imp->add_option("--fps", fps_, "Frame rate, N or N/D")->capture_default_str();
  }

  // dataset

  void dataset_build_slices() {
    const auto annotations = read_voc_dir(voc_dir_);
    log_->info("read {} annotations from {}", annotations.size(), voc_dir_);
    const SliceSet set = build_slices(annotations, directory_loader(images_dir_));
    write_slices(out_, set.slices, parse_format(format_));
    os_ << "slices: " << set.slices.size() << "\n";
    print_histogram(set.histogram);
  }

  void print_histogram(const std::vector<std::size_t>& histogram) {
    const auto& labels = LabelCatalog::mask_task();
    for (int c = 0; c < labels.size(); ++c) {
      os_ << labels.name(c) << ": " << histogram[static_cast<std::size_t>(c)] << "\n";
    }
  }

  void dataset_stats() {
    const auto annotations = read_voc_dir(voc_dir_);
    std::vector<int> ids;
    for (const auto& a : annotations) {
      for (const auto& o : a.objects) ids.push_back(o.class_id);
    }
    const auto& labels = LabelCatalog::mask_task();
    const auto h = class_histogram(ids, labels.size());
    if (csv_) {
      os_ << "class,count\n";
      for (int c = 0; c < labels.size(); ++c) os_ << labels.name(c) << "," << h[static_cast<std::size_t>(c)] << "\n";
      return;
    }
    os_ << "images: " << annotations.size() << "\n";
    os_ << "objects: " << ids.size() << "\n";
    print_histogram(h);
    std::string counts;
    for (auto n : h) counts += (counts.empty() ? "" : " / ") + std::to_string(n);
    os_ << "counts: " << counts << "\n";
    const auto [lo, hi] = std::minmax_element(h.begin(), h.end());
    os_ << "imbalance ratio: "
         << (*lo == 0 ? std::string("inf")
                      : format_number(static_cast<double>(*hi) / static_cast<double>(*lo), 2))
         << "\n";
  }

  void dataset_undersample() {
    if (cap_ == 0) throw ConfigError("--cap must be positive");
    const auto slices = read_slices(manifest_);
    const auto kept = undersample(std::span<const SliceSample>(slices), cap_, seed_);
    write_slices(out_, kept, parse_format(format_));
    std::vector<int> ids;
    for (const auto& s : kept) ids.push_back(s.class_id);
    os_ << "slices: " << slices.size() << " -> " << kept.size() << "\n";
    print_histogram(class_histogram(ids, LabelCatalog::mask_task().size()));
  }

  void dataset_split() {
    const auto slices = read_slices(manifest_);
    SplitIndices split;
    if (by_image_) {
      std::vector<std::string> groups;
      for (const auto& s : slices) groups.push_back(s.image_id);
      split = split_by_group(groups, seed_);
    } else {
      split = split_4to1(slices.size(), seed_);
    }
    std::vector<SliceSample> train, validation;
    for (auto i : split.train) train.push_back(slices[i]);
    for (auto i : split.validation) validation.push_back(slices[i]);
    write_slices(fs::path(out_) / "train", train, parse_format(format_));
    write_slices(fs::path(out_) / "validation", validation, parse_format(format_));
    os_ << "train: " << train.size() << "\nvalidation: " << validation.size() << "\n";
  }

  void dataset_embed() {
    const auto slices = read_slices(manifest_);
    const BaselineEmbedder embedder;
    std::vector<LabeledEmbedding> records;
    for (const auto& s : slices) records.push_back({s.class_id, embedder.embed(s.pixels)});
    write_embeddings(out_, records);
    os_ << "embeddings: " << records.size() << " x " << embedder.dimension() << "\n";
  }

  void dataset_augment() {
    AugmentationPlan plan = cfg_.empty() ? AugmentationPlan{} : parse_plan(read_text(cfg_));
    if (seed_option_->count() > 0) plan.seed = seed_;
    plan.validate();
    if (copies_ < 1) throw ConfigError("--copies must be at least 1");
    const auto slices = read_slices(manifest_);
    std::vector<SliceSample> out;
    for (std::size_t i = 0; i < slices.size(); ++i) {
      for (int k = 0; k < copies_; ++k) {
        out.push_back(apply_plan(slices[i], plan, i * static_cast<std::uint64_t>(copies_) +
                                                      static_cast<std::uint64_t>(k)));
      }
    }
    write_slices(out_, out, parse_format(format_));
    os_ << "augmented slices: " << out.size() << "\n";
  }

  // eval

  void eval_detections() {
    const auto annotations = read_voc_dir(voc_dir_);
    auto predictions = read_predictions(pred_);
    const auto& labels = LabelCatalog::mask_task();
    DetectionCounts counts(static_cast<std::size_t>(labels.size()));
    for (const auto& a : annotations) {
      std::vector<Detection> pred;
      if (const auto it = predictions.find(a.filename); it != predictions.end()) {
        for (const auto& d : it->second) {
          if (d.confidence >= conf_thresh_) pred.push_back(d);
        }
        predictions.erase(it);
      }
      for (const auto& d : pred) {
        if (!is_valid(d.box) || d.class_id < 0 || d.class_id >= labels.size()) {
          throw ConfigError("invalid predicted box for image " + a.filename);
        }
      }
      accumulate(counts, match_detections(pred, truth_boxes(a), iou_thresh_, labels.size()));
    }
    if (!predictions.empty()) {
      throw ConfigError("predictions for an image without annotation: " + predictions.begin()->first);
    }
    const PrfReport prf = precision_recall_f1(counts);
    const std::vector<MethodResult> rows{{method_, prf.macro.precision, prf.macro.f1, std::nullopt}};
    ReportTable summary = method_table(rows);
    summary.decimals = {4, 4, 2};
    ReportTable per_class{"Class", {"TP", "FP", "FN", "Precision", "Recall", "F1"}, {0, 0, 0, 4, 4, 4}, {}};
    for (int c = 0; c < labels.size(); ++c) {
      const auto& k = counts[static_cast<std::size_t>(c)];
      const auto& s = prf.per_class[static_cast<std::size_t>(c)];
      per_class.rows.push_back({labels.display_name(c),
                                {static_cast<double>(k.tp), static_cast<double>(k.fp),
                                 static_cast<double>(k.fn), s.precision, s.recall, s.f1}});
    }
    per_class.rows.push_back({"Macro", {std::nullopt, std::nullopt, std::nullopt, prf.macro.precision,
                                        prf.macro.recall, prf.macro.f1}});
    per_class.rows.push_back({"Micro", {std::nullopt, std::nullopt, std::nullopt, prf.micro.precision,
                                        prf.micro.recall, prf.micro.f1}});
    os_ << render_text(summary) << "\n" << render_text(per_class);
    if (!out_dir().empty()) {
      write_text(fs::path(out_) / "metrics.csv", render_method_csv(rows));
      write_text(fs::path(out_) / "per_class.csv", render_csv(per_class));
    }
  }

  std::string out_dir() const { return out_; }

  EpisodeConfig episode_config() {
    EpisodeConfig c;
    c.seed = seed_;
    c.epsilon = epsilon_;
    c.distance = parse_distance(distance_);
    c.covariance = parse_covariance(covariance_);
    if (cap_ > 0) c.undersample_cap = cap_;
    return c;
  }

  void eval_episodic() {
    EpisodeInputs in = episode_;
    in.seed = seed_;
    EpisodeConfig config = episode_config();
    config.support_size = SupportSize::parse(support_size_);
    const EmbeddingSplit split = load_split(in, *log_);
    const auto& labels = LabelCatalog::mask_task();
    const EpisodeReport report = run_episode(split, config, labels);
    const std::string text = render_episode(report, labels);
    os_ << text;
    if (!out_.empty()) {
      write_text(fs::path(out_) / "report.txt", text);
      write_text(fs::path(out_) / "confusion.csv", confusion_csv(report.confusion, labels.names()));
    }
  }

  void eval_sweep() {
    EpisodeInputs in = episode_;
    in.seed = seed_;
    std::vector<SupportSize> sizes;
    for (const auto& s : split_list(sizes_)) sizes.push_back(SupportSize::parse(s));
    const EmbeddingSplit split = load_split(in, *log_);
    const auto rows = sweep_support_sizes(split, sizes, episode_config());
    const ReportTable table = sweep_table(rows, column_);
    os_ << render_text(table);
    if (!out_.empty()) {
      write_text(fs::path(out_) / "sweep.txt", render_text(table));
      write_text(fs::path(out_) / "sweep.csv", render_csv(table));
    }
  }

  // video

  void annotate() {
    auto model = make_model(model_);
    StreamReader reader(in_);
    StreamWriter writer(out_, reader.info());
    const std::string sidecar_path = sidecar_.empty() ? out_ + ".jsonl" : sidecar_;
    std::ofstream sidecar(sidecar_path);
    if (!sidecar) throw IoError("cannot write sidecar " + sidecar_path);
    PipelineOptions o;
    o.skip = skip_;
    o.track = track_;
    o.tracker.iou_threshold = track_iou_;
    o.tracker.max_age = max_age_;
    if (refine_ > 0) o.refiner = make_ncc_refiner(refine_);
    o.queue_capacity = queue_;
    o.keep_records = false;
    const auto r = run_pipeline(reader, *model, writer, o, &sidecar);
    writer.close();
    sidecar.close();
    if (!sidecar) throw IoError("failed writing sidecar " + sidecar_path);
    log_->info("model calls: {} for {} frames at skip {} (ceil = {})", r.model_calls, r.frames,
               skip_, expected_model_calls(r.frames, skip_));
    os_ << "frames: " << r.frames << "\nmodel calls: " << r.model_calls << "\nsidecar: "
         << sidecar_path << "\n";
  }

  void bench() {
    auto model = make_model(model_);
    StreamReader reader(in_);
    os_ << render_bench(pipeline_bench(reader, *model, skip_, track_));
  }

  // loss and config

  void loss_check() {
    LossWeights w;
    if (!cfg_.empty()) w = read_config(cfg_).config.loss;
    if (alpha_option_->count() > 0) w.alpha = alpha_;
    if (beta_option_->count() > 0) w.beta = beta_;
    w.validate();
    const auto report = gradient_check(w, grids_, seed_, step_);
    os_ << "alpha=" << fixed_one(w.alpha) << " beta=" << fixed_one(w.beta) << "\n";
    os_ << "grids: " << report.grids << "\nentries: " << report.entries << "\n";
    os_ << "max relative error: " << format_number(report.max_relative_error) << "\n";
    if (!(report.max_relative_error < 1e-4)) {
      throw ConfigError("gradient check failed: max relative error " +
                        format_number(report.max_relative_error) + " >= 1e-4");
    }
  }

  void config_show() {
    const auto parsed = read_config(cfg_);
    for (const auto& w : parsed.warnings) log_->warn("{}: {}", cfg_, w);
    os_ << serialize_config(parsed.config);
    for (const auto& s : split_list(iterations_)) {
      int it = 0;
      try {
        it = std::stoi(s);
      } catch (const std::logic_error&) {
        throw ConfigError("--at expects integers, got '" + s + "'");
      }
      os_ << "lr@" << it << "=" << format_number(lr_at(parsed.config, it)) << "\n";
    }
  }

  // streams

  void stream_synth() {
    if (width_ < 1 || height_ < 1) throw ConfigError("--width and --height must be positive");
    SceneSpec spec = random_scene(seed_, width_, height_, frames_, objects_);
    std::tie(spec.fps_num, spec.fps_den) = parse_fps(fps_);
    SceneSource src(spec);
    StreamWriter w(out_, src.info());
    Image frame;
    while (src.next(frame)) w.write(frame);
    w.close();
    os_ << "frames: " << w.frames_written() << "\n";
  }

  void stream_info() {
    const StreamReader r(in_);
    const StreamInfo& i = r.info();
    os_ << "width: " << i.width << "\nheight: " << i.height << "\nfps: " << i.fps_num << "/"
         << i.fps_den << "\nframes: " << i.frame_count << "\n";
  }

  void stream_export() {
    StreamReader r(in_);
    os_ << "frames: " << export_frames(r, out_, parse_format(format_)) << "\n";
  }

  void stream_import() {
    const auto [num, den] = parse_fps(fps_);
    import_frames(in_, out_, num, den);
    os_ << "frames: " << StreamReader(out_).info().frame_count << "\n";
  }

  std::ostream& os_;
  std::ostream& err_;
  std::shared_ptr<spdlog::logger> log_;
  CLI::App app_;
  std::function<void()> action_;

  std::uint64_t seed_ = 0;
  std::string cfg_;
  std::string out_;
  std::string in_;
  std::string voc_dir_;
  std::string images_dir_;
  std::string manifest_;
  std::string format_ = "png";
  std::string pred_;
  std::string method_ = "model";
  std::string sidecar_;
  std::string support_size_ = "full";
  std::string sizes_ = "50,100,500,full";
  std::string column_ = "Accuracy";
  std::string distance_ = "mahalanobis";
  std::string covariance_ = "blended";
  std::string iterations_;
  std::string fps_ = "30";
  bool csv_ = false;
  bool by_image_ = false;
  bool track_ = false;
  std::size_t cap_ = 0;
  int copies_ = 1;
  double epsilon_ = 1e-3;
  double iou_thresh_ = 0.5;
  double conf_thresh_ = 0.0;
  double track_iou_ = 0.3;
  int max_age_ = 30;
  int refine_ = 0;
  std::size_t queue_ = 1;
  int skip_ = 1;
  double alpha_ = 1.25;
  double beta_ = 1.0;
  int grids_ = 100;
  double step_ = 1e-5;
  std::uint64_t frames_ = 30;
  int width_ = 320;
  int height_ = 240;
  int objects_ = 3;
  ModelSpecOptions model_;
  EpisodeInputs episode_;
  CLI::Option* seed_option_ = nullptr;
  CLI::Option* alpha_option_ = nullptr;
  CLI::Option* beta_option_ = nullptr;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Cli cli(out, err);
  return cli.run(args);
}

std::vector<std::string> command_paths() {
  std::ostringstream sink;
  Cli cli(sink, sink);
  return cli.paths();
}

std::string help_text(const std::string& path) {
  std::ostringstream sink;
  Cli cli(sink, sink);
  return cli.help(path);
}

}  // namespace maskpipe::cli
