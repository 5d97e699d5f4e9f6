#pragma once

#include "trussseg/geom.hpp"
#include "trussseg/segment.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace trussseg {

/// Positive class is structure.
struct ConfusionMatrix
{
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  [[nodiscard]] std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  ConfusionMatrix& operator+=(const ConfusionMatrix& o) noexcept
  {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
};

/// Empty optionals are undefined (zero denominator).
struct CloudMetrics
{
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  /// TP / (TP + FP + FN), reported as "mIoU".
  std::optional<double> iou;
  /// Mean of the structure and background IoUs.
  std::optional<double> two_class_miou;
};

/// Throws LengthMismatch or Empty.
ConfusionMatrix confusion(const Mask& prediction, const Mask& truth);
CloudMetrics metrics(const ConfusionMatrix& cm);

struct ThresholdSearchPoint
{
  double threshold = 0;
  double tpr = 0;
  double fpr = 0;
  double precision = 0; // 0 when nothing is predicted positive
  double recall = 0;
  double f1 = 0;
  double gmean = 0;
};

struct ThresholdSelection
{
  double threshold = 0;
  ThresholdSearchPoint best;
  /// Ascending threshold.
  std::vector<ThresholdSearchPoint> curve;
};

/// Candidate thresholds: min - 1, the midpoints between consecutive distinct
/// scores, and max + 1, ascending. A point is positive when score >= threshold.
std::vector<double> candidate_thresholds(std::span<const double> scores);

/// Maximises gmean = sqrt(TPR (1 - FPR)); ties go to the smallest threshold.
/// Throws SingleClass, LengthMismatch or Empty.
ThresholdSelection select_threshold_roc(std::span<const double> scores, const Mask& truth);
/// Same candidates, maximising F1.
ThresholdSelection select_threshold_pr(std::span<const double> scores, const Mask& truth);

struct LatencyStats
{
  std::size_t samples = 0;
  double mean_ms = 0;
  double median_ms = 0;
  double p95_ms = 0;
};

LatencyStats latency_stats(std::vector<double> samples_ms);

struct CloudEvaluation
{
  std::string name;
  ConfusionMatrix cm;
  CloudMetrics metrics;
  std::optional<double> latency_ms;
};

struct MetricMean
{
  std::optional<double> mean;
  std::size_t defined = 0;
  std::size_t undefined = 0;
};

struct DatasetReport
{
  std::string mode;
  std::vector<CloudEvaluation> clouds; // sorted by name
  MetricMean precision;
  MetricMean recall;
  MetricMean f1;
  MetricMean iou;
  MetricMean two_class_miou;
  ConfusionMatrix totals;
  LatencyStats latency;
  std::string config_fingerprint;
  std::vector<std::string> errors; // per-file failures, not fatal
};

/// Unweighted means over clouds, each metric skipping its undefined clouds.
/// Clouds are sorted by name first, so the result ignores input order.
DatasetReport aggregate(std::vector<CloudEvaluation> clouds);

struct NamedCloud
{
  std::string name;
  LabeledCloud cloud;
};

/// Runs the pipeline on every cloud against its face labels.
DatasetReport evaluate_pipeline(std::span<const NamedCloud> clouds, const PipelineConfig& cfg, unsigned jobs = 1);

/// Pairs <pred_dir>/<name>.pcd (field `pred`) with <truth_dir>/<name>.pcd
/// (field `label`); <pred_dir>/<stem>.latency.json supplies latency when
/// present. Unmatched or unreadable files land in `errors`; IoError only when
/// nothing could be paired.
DatasetReport evaluate_directories(const std::filesystem::path& pred_dir, const std::filesystem::path& truth_dir);

/// Wall-clock per-cloud latency over `repeats` passes, single threaded inside
/// the pipeline when cfg.jobs == 1.
LatencyStats time_pipeline(std::span<const NamedCloud> clouds, const PipelineConfig& cfg, int repeats);

/// One row per cloud, then a MEAN row (totals for counts, means for metrics).
std::string report_csv(const DatasetReport& report);
std::string report_json(const DatasetReport& report);

std::string threshold_curve_csv(const ThresholdSelection& selection);

/// Reads `score,truth` CSV (header optional). Throws IoError / TypeError.
std::pair<std::vector<double>, Mask> read_score_csv(const std::filesystem::path& path);

} // namespace trussseg
