#include "maskpipe/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <sstream>

#include "maskpipe/errors.hpp"

namespace maskpipe {

void ConfusionMatrix::add(int truth, int predicted, std::int64_t n) {
  if (truth < 0 || truth >= classes() || predicted < 0 || predicted >= classes()) {
    throw DimensionError("confusion matrix index out of range");
  }
  counts_(truth, predicted) += n;
}

double ConfusionMatrix::accuracy() const {
  const auto n = total();
  return n == 0 ? 0.0 : static_cast<double>(counts_.trace()) / static_cast<double>(n);
}

DetectionCounts match_detections(std::span<const Detection> pred,
                                 std::span<const LabeledBox> truth, double iou_threshold,
                                 int classes) {
  DetectionCounts out(static_cast<std::size_t>(classes));
  const auto check_class = [classes](int c) {
    if (c < 0 || c >= classes) throw DimensionError("class id " + std::to_string(c) + " out of range");
  };

  std::vector<Detection> order(pred.begin(), pred.end());
  std::stable_sort(order.begin(), order.end(), ranks_before);
  std::vector<bool> matched(truth.size(), false);

  for (const Detection& p : order) {
    check_class(p.class_id);
    std::optional<std::size_t> best;
    double best_iou = -1.0;
    for (std::size_t t = 0; t < truth.size(); ++t) {
      if (matched[t] || truth[t].class_id != p.class_id) continue;
      const double v = iou(p.box, truth[t].box);
      if (v >= iou_threshold && v > best_iou) {
        best_iou = v;
        best = t;
      }
    }
    auto& c = out[static_cast<std::size_t>(p.class_id)];
    if (best) {
      matched[*best] = true;
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  for (std::size_t t = 0; t < truth.size(); ++t) {
    check_class(truth[t].class_id);
    if (!matched[t]) ++out[static_cast<std::size_t>(truth[t].class_id)].fn;
  }
  return out;
}

void accumulate(DetectionCounts& a, const DetectionCounts& b) {
  if (a.size() < b.size()) a.resize(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    a[i].tp += b[i].tp;
    a[i].fp += b[i].fp;
    a[i].fn += b[i].fn;
  }
}

DetectionCounts counts_from_confusion(const ConfusionMatrix& m) {
  const auto& k = m.counts();
  DetectionCounts out(static_cast<std::size_t>(m.classes()));
  for (int c = 0; c < m.classes(); ++c) {
    out[static_cast<std::size_t>(c)] = {k(c, c), k.col(c).sum() - k(c, c), k.row(c).sum() - k(c, c)};
  }
  return out;
}

PrfScore precision_recall_f1(const ClassCounts& c) {
  PrfScore s;
  const auto ratio = [&s](std::int64_t num, std::int64_t den) {
    if (den == 0) {
      s.undefined = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  s.precision = ratio(c.tp, c.tp + c.fp);
  s.recall = ratio(c.tp, c.tp + c.fn);
  if (s.precision + s.recall > 0.0) {
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  } else {
    s.f1 = 0.0;
  }
  return s;
}

PrfReport precision_recall_f1(const DetectionCounts& counts) {
  PrfReport r;
  ClassCounts pooled;
  for (const auto& c : counts) {
    r.per_class.push_back(precision_recall_f1(c));
    pooled.tp += c.tp;
    pooled.fp += c.fp;
    pooled.fn += c.fn;
  }
  if (!r.per_class.empty()) {
    const double n = static_cast<double>(r.per_class.size());
    for (const auto& s : r.per_class) {
      r.macro.precision += s.precision / n;
      r.macro.recall += s.recall / n;
      r.macro.f1 += s.f1 / n;
      r.macro.undefined = r.macro.undefined || s.undefined;
    }
  }
  r.micro = precision_recall_f1(pooled);
  return r;
}

SpeedReport make_speed_report(std::size_t images, double wall_ms) {
  if (images == 0) throw ConfigError("speed report needs at least one image");
  return {images, wall_ms, 100.0 * wall_ms / static_cast<double>(images)};
}

SpeedReport speed_bench(const std::function<void(std::size_t)>& worker, std::size_t images,
                        int repetitions) {
  if (images == 0) throw ConfigError("speed_bench needs at least one image");
  if (repetitions < 1) throw ConfigError("speed_bench needs at least one repetition");

  const auto pass = [&] {
    for (std::size_t i = 0; i < images; ++i) {
      try {
        worker(i);
      } catch (const std::exception& e) {
        throw ModelError("worker failed on image " + std::to_string(i) + ": " + e.what());
      }
    }
  };

  pass();  // warm-up
  std::vector<double> timings;
  for (int r = 0; r < repetitions; ++r) {
    const auto start = std::chrono::steady_clock::now();
    pass();
    const auto stop = std::chrono::steady_clock::now();
    timings.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  std::sort(timings.begin(), timings.end());
  const std::size_t mid = timings.size() / 2;
  const double median =
      timings.size() % 2 ? timings[mid] : 0.5 * (timings[mid - 1] + timings[mid]);
  return make_speed_report(images, median);
}

std::string format_number(double v, int decimals) {
  char buf[64];
  const auto res = decimals >= 0
                       ? std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, decimals)
                       : std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

ReportTable method_table(std::span<const MethodResult> rows) {
  ReportTable t{"Method", {"Precision", "F1", "Speed"}, {}, {}};
  for (const auto& r : rows) t.rows.push_back({r.method, {r.precision, r.f1, r.speed_ms_per_100}});
  return t;
}

namespace {

std::vector<std::vector<std::string>> cells(const ReportTable& table) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> header{table.label_header};
  header.insert(header.end(), table.columns.begin(), table.columns.end());
  out.push_back(std::move(header));
  for (const auto& row : table.rows) {
    std::vector<std::string> line{row.label};
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      const bool present = c < row.values.size() && row.values[c].has_value();
      const int decimals = c < table.decimals.size() ? table.decimals[c] : -1;
      line.push_back(present ? format_number(*row.values[c], decimals) : std::string());
    }
    out.push_back(std::move(line));
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + '"';
}

std::string join_csv(const std::vector<std::vector<std::string>>& grid) {
  std::string out;
  for (const auto& line : grid) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i) out += ',';
      out += csv_field(line[i]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace

std::string render_text(const ReportTable& table) {
  const auto grid = cells(table);
  std::vector<std::size_t> width(grid.front().size(), 0);
  for (const auto& line : grid) {
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  }
  std::string out;
  for (const auto& line : grid) {
    std::string text;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const std::string pad(width[i] - line[i].size(), ' ');
      if (i == 0) {
        text += line[i] + pad;
      } else {
        text += "  " + pad + line[i];
      }
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    out += text + '\n';
  }
  return out;
}

std::string render_csv(const ReportTable& table) { return join_csv(cells(table)); }

std::string render_method_csv(std::span<const MethodResult> rows) {
  ReportTable t = method_table(rows);
  t.label_header = "method";
  t.columns = {"precision", "f1", "speed_ms_per_100"};
  return render_csv(t);
}

std::string confusion_csv(const ConfusionMatrix& m, std::span<const std::string> names) {
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"truth\\predicted"};
  for (int c = 0; c < m.classes(); ++c) {
    header.push_back(c < static_cast<int>(names.size()) ? names[static_cast<std::size_t>(c)]
                                                        : std::to_string(c));
  }
  grid.push_back(header);
  for (int r = 0; r < m.classes(); ++r) {
    std::vector<std::string> line{header[static_cast<std::size_t>(r) + 1]};
    for (int c = 0; c < m.classes(); ++c) line.push_back(std::to_string(m.counts()(r, c)));
    grid.push_back(std::move(line));
  }
  return join_csv(grid);
}

}  // namespace maskpipe
