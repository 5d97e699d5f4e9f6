#include "trussseg/eval.hpp"

#include "trussseg/error.hpp"
#include "trussseg/io.hpp"
#include "trussseg/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

namespace trussseg {

namespace {

void check_pair(std::size_t a, std::size_t b)
{
  if (a != b)
    throw Error(ErrorCode::LengthMismatch, "lengths differ: " + std::to_string(a) + " vs " + std::to_string(b));
  if (a == 0)
    throw Error(ErrorCode::Empty, "nothing to evaluate");
}

std::optional<double> ratio(double num, double den)
{
  if (den == 0)
    return std::nullopt;
  return num / den;
}

std::string fmt(double v)
{
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt(const std::optional<double>& v)
{
  return v ? fmt(*v) : std::string();
}

nlohmann::ordered_json to_json(const std::optional<double>& v)
{
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json to_json(const MetricMean& m)
{
  return { { "mean", to_json(m.mean) }, { "defined", m.defined }, { "undefined", m.undefined } };
}

/// Counts per candidate via one descending sweep over distinct scores.
std::vector<ThresholdSearchPoint> sweep(std::span<const double> scores, const Mask& truth)
{
  check_pair(scores.size(), truth.size());
  std::size_t pos = 0;
  for (auto t : truth)
    pos += t ? 1 : 0;
  const std::size_t neg = truth.size() - pos;
  if (pos == 0 || neg == 0)
    throw Error(ErrorCode::SingleClass, "threshold selection needs both classes in the truth");
  for (double s : scores) {
    if (!std::isfinite(s))
      throw Error(ErrorCode::TypeError, "scores must be finite");
  }

  std::vector<std::pair<double, std::uint8_t>> sorted(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    sorted[i] = { scores[i], truth[i] ? std::uint8_t{ 1 } : std::uint8_t{ 0 } };
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  const std::vector<double> thresholds = candidate_thresholds(scores);
  std::vector<ThresholdSearchPoint> curve(thresholds.size());
  // Walk from the highest threshold (nothing positive) downwards.
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t cursor = 0;
  for (std::size_t c = thresholds.size(); c-- > 0;) {
    const double thr = thresholds[c];
    while (cursor < sorted.size() && sorted[cursor].first >= thr) {
      (sorted[cursor].second ? tp : fp) += 1;
      ++cursor;
    }
    ThresholdSearchPoint& p = curve[c];
    p.threshold = thr;
    p.tpr = static_cast<double>(tp) / static_cast<double>(pos);
    p.fpr = static_cast<double>(fp) / static_cast<double>(neg);
    p.recall = p.tpr;
    p.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    p.f1 = p.precision + p.recall > 0 ? 2 * p.precision * p.recall / (p.precision + p.recall) : 0.0;
    p.gmean = std::sqrt(p.tpr * (1 - p.fpr));
  }
  return curve;
}

template<class Objective>
ThresholdSelection select(std::span<const double> scores, const Mask& truth, Objective objective)
{
  ThresholdSelection out;
  out.curve = sweep(scores, truth);
  std::size_t best = 0;
  for (std::size_t i = 1; i < out.curve.size(); ++i) {
    if (objective(out.curve[i]) > objective(out.curve[best]))
      best = i;
  }
  out.best = out.curve[best];
  out.threshold = out.best.threshold;
  return out;
}

} // namespace

ConfusionMatrix confusion(const Mask& prediction, const Mask& truth)
{
  check_pair(prediction.size(), truth.size());
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const bool p = prediction[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t)
      ++cm.tp;
    else if (p)
      ++cm.fp;
    else if (t)
      ++cm.fn;
    else
      ++cm.tn;
  }
  return cm;
}

CloudMetrics metrics(const ConfusionMatrix& cm)
{
  const auto tp = static_cast<double>(cm.tp);
  const auto fp = static_cast<double>(cm.fp);
  const auto tn = static_cast<double>(cm.tn);
  const auto fn = static_cast<double>(cm.fn);
  CloudMetrics m;
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  if (m.precision && m.recall) {
    const double sum = *m.precision + *m.recall;
    m.f1 = sum > 0 ? 2 * *m.precision * *m.recall / sum : 0.0;
  }
  m.iou = ratio(tp, tp + fp + fn);
  const auto background_iou = ratio(tn, tn + fn + fp);
  if (m.iou && background_iou)
    m.two_class_miou = 0.5 * (*m.iou + *background_iou);
  return m;
}

std::vector<double> candidate_thresholds(std::span<const double> scores)
{
  std::vector<double> unique(scores.begin(), scores.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  std::vector<double> out;
  if (unique.empty())
    return out;
  out.reserve(unique.size() + 1);
  out.push_back(unique.front() - 1.0);
  for (std::size_t i = 1; i < unique.size(); ++i)
    out.push_back(0.5 * (unique[i - 1] + unique[i]));
  out.push_back(unique.back() + 1.0);
  return out;
}

ThresholdSelection select_threshold_roc(std::span<const double> scores, const Mask& truth)
{
  return select(scores, truth, [](const ThresholdSearchPoint& p) { return p.gmean; });
}

ThresholdSelection select_threshold_pr(std::span<const double> scores, const Mask& truth)
{
  return select(scores, truth, [](const ThresholdSearchPoint& p) { return p.f1; });
}

LatencyStats latency_stats(std::vector<double> samples)
{
  LatencyStats s;
  s.samples = samples.size();
  if (samples.empty())
    return s;
  std::sort(samples.begin(), samples.end());
  double sum = 0;
  for (double v : samples)
    sum += v;
  s.mean_ms = sum / static_cast<double>(samples.size());
  const std::size_t n = samples.size();
  s.median_ms = n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  // Nearest-rank percentile.
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  s.p95_ms = samples[std::clamp<std::size_t>(rank, 1, n) - 1];
  return s;
}

DatasetReport aggregate(std::vector<CloudEvaluation> clouds)
{
  std::sort(clouds.begin(), clouds.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  DatasetReport r;
  auto accumulate = [&](MetricMean& mm, auto get) {
    double sum = 0;
    for (const auto& c : clouds) {
      if (const auto v = get(c.metrics)) {
        sum += *v;
        ++mm.defined;
      } else {
        ++mm.undefined;
      }
    }
    if (mm.defined)
      mm.mean = sum / static_cast<double>(mm.defined);
  };
  accumulate(r.precision, [](const CloudMetrics& m) { return m.precision; });
  accumulate(r.recall, [](const CloudMetrics& m) { return m.recall; });
  accumulate(r.f1, [](const CloudMetrics& m) { return m.f1; });
  accumulate(r.iou, [](const CloudMetrics& m) { return m.iou; });
  accumulate(r.two_class_miou, [](const CloudMetrics& m) { return m.two_class_miou; });
  std::vector<double> latencies;
  for (const auto& c : clouds) {
    r.totals += c.cm;
    if (c.latency_ms)
      latencies.push_back(*c.latency_ms);
  }
  r.latency = latency_stats(std::move(latencies));
  r.clouds = std::move(clouds);
  return r;
}

DatasetReport evaluate_pipeline(std::span<const NamedCloud> clouds, const PipelineConfig& cfg, unsigned jobs)
{
  std::vector<CloudEvaluation> evals(clouds.size());
  parallel_for(clouds.size(), jobs, [&](std::size_t i) {
    const auto& nc = clouds[i];
    const SegmentationOutput seg = run_pipeline(nc.cloud, cfg);
    CloudEvaluation& e = evals[i];
    e.name = nc.name;
    e.cm = confusion(seg.prediction, nc.cloud.truss_mask());
    e.metrics = metrics(e.cm);
    e.latency_ms = seg.latency.total_ms;
  });
  DatasetReport r = aggregate(std::move(evals));
  r.mode = mode_name(cfg);
  return r;
}

DatasetReport evaluate_directories(const std::filesystem::path& pred_dir, const std::filesystem::path& truth_dir)
{
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(pred_dir, ec))
    throw Error(ErrorCode::IoError, "prediction directory " + pred_dir.string() + " does not exist");
  if (!fs::is_directory(truth_dir, ec))
    throw Error(ErrorCode::IoError, "truth directory " + truth_dir.string() + " does not exist");

  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(pred_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pcd")
      names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());

  std::vector<CloudEvaluation> evals;
  std::vector<std::string> errors;
  std::string first_unmatched;
  for (const auto& name : names) {
    const fs::path truth_path = truth_dir / name;
    if (!fs::exists(truth_path)) {
      if (first_unmatched.empty())
        first_unmatched = name;
      errors.push_back(name + ": no matching truth file in " + truth_dir.string());
      continue;
    }
    try {
      const PcdTable pred = parse_pcd(read_file(pred_dir / name));
      const auto* column = pred.column("pred");
      if (!column)
        throw Error(ErrorCode::MissingAttributes, "prediction file lacks a pred field");
      Mask prediction(column->size());
      for (std::size_t i = 0; i < column->size(); ++i)
        prediction[i] = (*column)[i] > 0.5 ? 1 : 0;
      const LabeledCloud truth = read_pcd(truth_path);
      CloudEvaluation e;
      e.name = name;
      e.cm = confusion(prediction, truth.truss_mask());
      e.metrics = metrics(e.cm);
      const fs::path latency_path = pred_dir / (fs::path(name).stem().string() + ".latency.json");
      if (fs::exists(latency_path)) {
        const auto j = nlohmann::json::parse(read_file(latency_path), nullptr, false);
        if (!j.is_discarded() && j.contains("total_ms") && j["total_ms"].is_number())
          e.latency_ms = j["total_ms"].get<double>();
      }
      evals.push_back(std::move(e));
    } catch (const Error& err) {
      errors.push_back(name + ": " + err.what());
    }
  }
  if (evals.empty()) {
    if (!first_unmatched.empty())
      throw Error(ErrorCode::IoError, "no truth file matches " + first_unmatched);
    if (!errors.empty())
      throw Error(ErrorCode::IoError, errors.front());
    throw Error(ErrorCode::IoError, "no prediction files in " + pred_dir.string());
  }
  DatasetReport r = aggregate(std::move(evals));
  r.errors = std::move(errors);
  if (!first_unmatched.empty())
    r.errors.insert(r.errors.begin(), "first unmatched file: " + first_unmatched);
  return r;
}

LatencyStats time_pipeline(std::span<const NamedCloud> clouds, const PipelineConfig& cfg, int repeats)
{
  if (repeats < 1)
    throw Error(ErrorCode::RangeError, "repeats must be >= 1");
  std::vector<double> samples;
  samples.reserve(clouds.size() * static_cast<std::size_t>(repeats));
  for (int r = 0; r < repeats; ++r) {
    for (const auto& nc : clouds) {
      const auto start = std::chrono::steady_clock::now();
      const auto out = run_pipeline(nc.cloud, cfg);
      const auto stop = std::chrono::steady_clock::now();
      (void)out;
      samples.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    }
  }
  return latency_stats(std::move(samples));
}

std::string report_csv(const DatasetReport& r)
{
  std::string out = "file,TP,FP,TN,FN,precision,recall,f1,iou,latency_ms\n";
  for (const auto& c : r.clouds) {
    out += c.name + "," + std::to_string(c.cm.tp) + "," + std::to_string(c.cm.fp) + "," + std::to_string(c.cm.tn) +
           "," + std::to_string(c.cm.fn) + "," + fmt(c.metrics.precision) + "," + fmt(c.metrics.recall) + "," +
           fmt(c.metrics.f1) + "," + fmt(c.metrics.iou) + "," + fmt(c.latency_ms) + "\n";
  }
  out += "MEAN," + std::to_string(r.totals.tp) + "," + std::to_string(r.totals.fp) + "," +
         std::to_string(r.totals.tn) + "," + std::to_string(r.totals.fn) + "," + fmt(r.precision.mean) + "," +
         fmt(r.recall.mean) + "," + fmt(r.f1.mean) + "," + fmt(r.iou.mean) + "," +
         (r.latency.samples ? fmt(r.latency.mean_ms) : std::string()) + "\n";
  return out;
}

std::string report_json(const DatasetReport& r)
{
  nlohmann::ordered_json j;
  j["mode"] = r.mode;
  j["clouds"] = r.clouds.size();
  j["mean"] = { { "precision", to_json(r.precision) },
                { "recall", to_json(r.recall) },
                { "f1", to_json(r.f1) },
                { "miou", to_json(r.iou) },
                { "two_class_miou", to_json(r.two_class_miou) } };
  j["totals"] = { { "TP", r.totals.tp }, { "FP", r.totals.fp }, { "TN", r.totals.tn }, { "FN", r.totals.fn } };
  j["latency_ms"] = { { "samples", r.latency.samples },
                      { "mean", r.latency.mean_ms },
                      { "median", r.latency.median_ms },
                      { "p95", r.latency.p95_ms } };
  j["config_fingerprint"] = r.config_fingerprint;
  auto per = nlohmann::ordered_json::array();
  for (const auto& c : r.clouds) {
    per.push_back({ { "file", c.name },
                    { "TP", c.cm.tp },
                    { "FP", c.cm.fp },
                    { "TN", c.cm.tn },
                    { "FN", c.cm.fn },
                    { "precision", to_json(c.metrics.precision) },
                    { "recall", to_json(c.metrics.recall) },
                    { "f1", to_json(c.metrics.f1) },
                    { "iou", to_json(c.metrics.iou) },
                    { "two_class_miou", to_json(c.metrics.two_class_miou) },
                    { "latency_ms", to_json(c.latency_ms) } });
  }
  j["per_cloud"] = std::move(per);
  j["errors"] = r.errors;
  return j.dump(2) + "\n";
}

std::string threshold_curve_csv(const ThresholdSelection& s)
{
  std::string out = "threshold,tpr,fpr,precision,recall,f1,gmean\n";
  for (const auto& p : s.curve) {
    out += fmt(p.threshold) + "," + fmt(p.tpr) + "," + fmt(p.fpr) + "," + fmt(p.precision) + "," + fmt(p.recall) +
           "," + fmt(p.f1) + "," + fmt(p.gmean) + "\n";
  }
  return out;
}

std::pair<std::vector<double>, Mask> read_score_csv(const std::filesystem::path& path)
{
  const std::string text = read_file(path);
  std::vector<double> scores;
  Mask truth;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  int score_col = 0;
  int truth_col = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty() || line[0] == '#')
      continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ','))
      cells.push_back(cell);
    if (scores.empty() && truth.empty() && line_no == 1 && !cells.empty() && !cells[0].empty() &&
        std::isalpha(static_cast<unsigned char>(cells[0][0]))) {
      for (int i = 0; i < static_cast<int>(cells.size()); ++i) {
        if (cells[i] == "score")
          score_col = i;
        else if (cells[i] == "truth")
          truth_col = i;
      }
      continue;
    }
    if (static_cast<int>(cells.size()) <= std::max(score_col, truth_col))
      throw Error(ErrorCode::TypeError, path.string() + ":" + std::to_string(line_no) + ": expected score,truth");
    double s = 0;
    double t = 0;
    const auto& sc = cells[static_cast<std::size_t>(score_col)];
    const auto& tc = cells[static_cast<std::size_t>(truth_col)];
    const auto r1 = std::from_chars(sc.data(), sc.data() + sc.size(), s);
    const auto r2 = std::from_chars(tc.data(), tc.data() + tc.size(), t);
    if (r1.ec != std::errc() || r2.ec != std::errc())
      throw Error(ErrorCode::TypeError, path.string() + ":" + std::to_string(line_no) + ": non-numeric value");
    scores.push_back(s);
    truth.push_back(t > 0.5 ? 1 : 0);
  }
  return { std::move(scores), std::move(truth) };
}

} // namespace trussseg
