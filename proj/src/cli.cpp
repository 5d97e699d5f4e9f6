#include "trussseg/cli.hpp"

#include "trussseg/config.hpp"
#include "trussseg/error.hpp"
#include "trussseg/eval.hpp"
#include "trussseg/io.hpp"
#include "trussseg/parallel.hpp"
#include "trussseg/segment.hpp"
#include "trussseg/synth.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>

namespace trussseg {

namespace fs = std::filesystem;

namespace {

/// Raised for bad arguments that CLI11 cannot catch by itself.
struct UsageError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct CommonOptions
{
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  bool deterministic = false;
};

std::optional<std::string> env(const char* name)
{
  if (const char* v = std::getenv(name); v != nullptr && *v != '\0')
    return std::string(v);
  return std::nullopt;
}

template<class T>
T parse_env_number(const char* name, const std::string& text)
{
  T value{};
  const auto r = std::from_chars(text.data(), text.data() + text.size(), value);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size())
    throw UsageError(std::string(name) + " must be a non-negative integer, got '" + text + "'");
  return value;
}

std::optional<std::uint64_t> effective_seed(const CommonOptions& o)
{
  if (o.seed)
    return o.seed;
  if (auto v = env("TRUSSSEG_SEED"))
    return parse_env_number<std::uint64_t>("TRUSSSEG_SEED", *v);
  return std::nullopt;
}

unsigned effective_jobs(const CommonOptions& o)
{
  if (o.jobs)
    return resolve_jobs(*o.jobs);
  if (auto v = env("TRUSSSEG_JOBS"))
    return resolve_jobs(parse_env_number<unsigned>("TRUSSSEG_JOBS", *v));
  return resolve_jobs(0);
}

/// Config plus --set overrides. Bad overrides are usage errors; a bad file is
/// a runtime failure.
RunConfig load_run_config(const CommonOptions& o)
{
  RunConfig cfg = o.config.empty() ? RunConfig{} : resolve_config(o.config);
  for (const auto& kv : o.overrides) {
    try {
      apply_override(cfg, kv);
    } catch (const Error& e) {
      throw UsageError(std::string("--set ") + kv + ": " + e.what());
    }
  }
  return cfg;
}

void add_common(CLI::App& cmd, CommonOptions& o, bool with_config_required)
{
  auto* c = cmd.add_option("-c,--config", o.config, "Preset name (" + [] {
    std::string names;
    for (const auto& n : preset_names())
      names += (names.empty() ? "" : ", ") + n;
    return names;
  }() + ") or config file");
  if (with_config_required)
    c->required();
  cmd.add_option("--set", o.overrides, "Override a config key (key=value), repeatable");
  cmd.add_option("--seed", o.seed, "Seed (overrides TRUSSSEG_SEED and the config)");
  cmd.add_option("-j,--jobs", o.jobs, "Worker threads, 0 = all cores (overrides TRUSSSEG_JOBS)");
  cmd.add_flag("--deterministic", o.deterministic, "Omit wall-clock timings so outputs are byte-identical");
}

/// A dataset root holds clouds/; otherwise the directory itself is used.
fs::path cloud_dir(const fs::path& dir)
{
  if (fs::is_directory(dir / "clouds"))
    return dir / "clouds";
  return dir;
}

std::vector<fs::path> list_pcd(const fs::path& dir)
{
  std::error_code ec;
  if (!fs::is_directory(dir, ec))
    throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pcd")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw Error(ErrorCode::IoError, "no .pcd files in " + dir.string());
  return files;
}

std::string pct(const std::optional<double>& v)
{
  if (!v)
    return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << *v * 100.0 << "%";
  return s.str();
}

std::string ms(const LatencyStats& l)
{
  if (l.samples == 0)
    return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << l.mean_ms << " ms";
  return s.str();
}

std::string latency_json(const std::string& file, const std::string& mode, const SegmentationOutput& seg, bool deterministic)
{
  nlohmann::ordered_json j;
  j["file"] = file;
  j["mode"] = mode;
  j["points"] = seg.prediction.size();
  j["structure_points"] = std::count(seg.prediction.begin(), seg.prediction.end(), std::uint8_t{ 1 });
  j["warnings"] = seg.warnings;
  if (!deterministic) {
    j["coarse_ms"] = seg.latency.coarse_ms;
    j["normals_ms"] = seg.latency.normals_ms;
    j["region_growing_ms"] = seg.latency.region_growing_ms;
    j["classify_ms"] = seg.latency.classify_ms;
    j["density_ms"] = seg.latency.density_ms;
    j["total_ms"] = seg.latency.total_ms;
  }
  return j.dump(2) + "\n";
}

/// Segments every cloud under `in` into `out`; returns the failure count.
std::size_t segment_directory(const RunConfig& cfg,
                              const fs::path& in,
                              const fs::path& out,
                              unsigned jobs,
                              bool deterministic,
                              std::ostream& err)
{
  const auto files = list_pcd(cloud_dir(in));
  fs::create_directories(out);
  PipelineConfig pipeline = cfg.pipeline;
  pipeline.jobs = 1; // files run in parallel instead
  const std::string mode = mode_name(pipeline);

  std::mutex log_mutex;
  std::vector<std::uint8_t> failed(files.size(), 0);
  parallel_for(files.size(), jobs, [&](std::size_t i) {
    const std::string name = files[i].filename().string();
    try {
      const LabeledCloud cloud = read_pcd(files[i]);
      const SegmentationOutput seg = run_pipeline(cloud, pipeline);
      write_file(out / name, encode_prediction_pcd(cloud, seg.prediction, cfg.dataset.pcd_mode));
      write_file(out / (files[i].stem().string() + ".latency.json"), latency_json(name, mode, seg, deterministic));
    } catch (const std::exception& e) {
      failed[i] = 1;
      const std::lock_guard lock(log_mutex);
      err << "segment: " << name << ": " << e.what() << "\n";
    }
  });

  nlohmann::ordered_json run;
  run["mode"] = mode;
  run["eigen_mode"] = std::string(to_string(pipeline.eigen_mode));
  run["stage_mode"] = std::string(to_string(pipeline.stage_mode));
  run["config_fingerprint"] = config_fingerprint(cfg);
  run["files"] = files.size();
  write_file(out / "run.json", run.dump(2) + "\n");
  return static_cast<std::size_t>(std::count(failed.begin(), failed.end(), std::uint8_t{ 1 }));
}

DatasetReport evaluate_and_write(const fs::path& pred, const fs::path& truth, const fs::path& report_dir, std::ostream& err)
{
  DatasetReport report = evaluate_directories(pred, cloud_dir(truth));
  if (fs::exists(pred / "run.json")) {
    const auto run = nlohmann::json::parse(read_file(pred / "run.json"), nullptr, false);
    if (!run.is_discarded()) {
      report.mode = run.value("mode", "");
      report.config_fingerprint = run.value("config_fingerprint", "");
    }
  }
  for (const auto& e : report.errors)
    err << "evaluate: " << e << "\n";
  fs::create_directories(report_dir);
  write_file(report_dir / "report.csv", report_csv(report));
  write_file(report_dir / "report.json", report_json(report));
  return report;
}

void print_table_header(std::ostream& out)
{
  out << std::left << std::setw(8) << "Mode" << std::right << std::setw(10) << "F1" << std::setw(10) << "mIoU"
      << std::setw(14) << "Latency" << "\n";
}

void print_table_row(std::ostream& out, const DatasetReport& r)
{
  out << std::left << std::setw(8) << (r.mode.empty() ? "-" : r.mode) << std::right << std::setw(10) << pct(r.f1.mean)
      << std::setw(10) << pct(r.iou.mean) << std::setw(14) << ms(r.latency) << "\n";
}

// ---------------------------------------------------------------------------

int cmd_generate(const CommonOptions& o, const std::string& out_dir, std::optional<std::size_t> n, std::ostream& out)
{
  if (n && *n == 0)
    throw UsageError("--n must be at least 1");
  RunConfig cfg = load_run_config(o);
  if (n)
    cfg.dataset.n_scans = *n;
  if (auto s = effective_seed(o))
    cfg.dataset.seed = *s;
  const fs::path root = out_dir.empty() ? fs::path(cfg.dataset.out_dir) : fs::path(out_dir);
  if (root.empty())
    throw UsageError("generate needs --out (or dataset.out_dir)");
  cfg.validate();
  const auto records = generate_dataset(cfg.dataset_spec(), root, effective_jobs(o));
  write_file(root / "config.cfg", serialize_config(cfg));
  out << "generated " << records.size() << " scans in " << root.string() << " (spec " << spec_hash(cfg) << ")\n";
  return kExitOk;
}

int cmd_segment(const CommonOptions& o,
                const std::string& in,
                const std::string& out_dir,
                const std::string& mode,
                std::ostream& out,
                std::ostream& err)
{
  RunConfig cfg = load_run_config(o);
  try {
    apply_mode(mode, cfg.pipeline);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (auto s = effective_seed(o))
    cfg.pipeline.ransac_seed = *s;
  const std::size_t failures = segment_directory(cfg, in, out_dir, effective_jobs(o), o.deterministic, err);
  out << "segmented " << in << " -> " << out_dir << " (mode " << mode_name(cfg.pipeline) << ")";
  if (failures)
    out << ", " << failures << " file(s) failed";
  out << "\n";
  return failures ? kExitFailure : kExitOk;
}

int cmd_evaluate(const std::string& pred, const std::string& truth, const std::string& report_dir, std::ostream& out, std::ostream& err)
{
  const DatasetReport r = evaluate_and_write(pred, truth, report_dir.empty() ? fs::path(pred) : fs::path(report_dir), err);
  print_table_header(out);
  print_table_row(out, r);
  return r.errors.empty() ? kExitOk : kExitFailure;
}

int cmd_sweep(const CommonOptions& o, const std::string& in, const std::string& out_dir, std::ostream& out, std::ostream& err)
{
  RunConfig cfg = load_run_config(o);
  if (auto s = effective_seed(o))
    cfg.pipeline.ransac_seed = *s;
  const unsigned jobs = effective_jobs(o);
  const fs::path root(out_dir);
  fs::create_directories(root);

  std::vector<DatasetReport> reports;
  std::size_t failures = 0;
  for (const auto& m : all_modes()) {
    RunConfig mode_cfg = cfg;
    apply_mode(m.name, mode_cfg.pipeline);
    const fs::path dir = root / std::string(m.name);
    failures += segment_directory(mode_cfg, in, dir, jobs, o.deterministic, err);
    reports.push_back(evaluate_and_write(dir, in, dir, err));
    failures += reports.back().errors.size();
  }

  std::string csv = "mode,clouds,precision,recall,f1,miou,two_class_miou,mean_latency_ms\n";
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  auto num = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  auto cell = [](const std::optional<double>& v) {
    if (!v)
      return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return std::string(buf);
  };
  for (const auto& r : reports) {
    const std::optional<double> lat = r.latency.samples ? std::optional<double>(r.latency.mean_ms) : std::nullopt;
    csv += r.mode + "," + std::to_string(r.clouds.size()) + "," + cell(r.precision.mean) + "," + cell(r.recall.mean) +
           "," + cell(r.f1.mean) + "," + cell(r.iou.mean) + "," + cell(r.two_class_miou.mean) + "," + cell(lat) + "\n";
    nlohmann::ordered_json j;
    j["mode"] = r.mode;
    j["clouds"] = r.clouds.size();
    j["precision"] = num(r.precision.mean);
    j["recall"] = num(r.recall.mean);
    j["f1"] = num(r.f1.mean);
    j["miou"] = num(r.iou.mean);
    j["two_class_miou"] = num(r.two_class_miou.mean);
    j["mean_latency_ms"] = num(lat);
    rows.push_back(j);
  }
  nlohmann::ordered_json summary;
  summary["config_fingerprint"] = config_fingerprint(cfg);
  summary["modes"] = rows;
  write_file(root / "sweep.csv", csv);
  write_file(root / "sweep.json", summary.dump(2) + "\n");

  print_table_header(out);
  for (const auto& r : reports)
    print_table_row(out, r);
  return failures ? kExitFailure : kExitOk;
}

int cmd_threshold(const std::string& scores_path, const std::string& method, const std::string& curve_path, std::ostream& out)
{
  const auto [scores, truth] = read_score_csv(scores_path);
  const ThresholdSelection sel =
    method == "roc" ? select_threshold_roc(scores, truth) : select_threshold_pr(scores, truth);
  out << std::setprecision(10) << "method " << method << "\n"
      << "threshold " << sel.threshold << "\n"
      << "tpr " << sel.best.tpr << "\n"
      << "fpr " << sel.best.fpr << "\n"
      << "precision " << sel.best.precision << "\n"
      << "recall " << sel.best.recall << "\n"
      << "f1 " << sel.best.f1 << "\n"
      << "gmean " << sel.best.gmean << "\n"
      << "candidates " << sel.curve.size() << "\n";
  if (!curve_path.empty())
    write_file(curve_path, threshold_curve_csv(sel));
  return kExitOk;
}

Mask column_mask(const PcdTable& table, std::string_view field, const std::string& path)
{
  const auto* col = table.column(field);
  if (col == nullptr)
    throw Error(ErrorCode::MissingAttributes, path + " has no '" + std::string(field) + "' field");
  Mask m(col->size());
  std::transform(col->begin(), col->end(), m.begin(), [](double v) { return static_cast<std::uint8_t>(v > 0.5); });
  return m;
}

int cmd_export(const std::string& cloud_path,
               const std::string& pred_path,
               const std::string& truth_path,
               const std::string& ply_path,
               std::ostream& out)
{
  const PcdTable cloud_table = parse_pcd(read_file(cloud_path));
  const LabeledCloud cloud = cloud_from_table(cloud_table);
  Mask prediction;
  if (pred_path.empty()) {
    prediction = column_mask(cloud_table, "pred", cloud_path);
  } else {
    prediction = column_mask(parse_pcd(read_file(pred_path)), "pred", pred_path);
  }
  if (prediction.size() != cloud.size())
    throw Error(ErrorCode::LengthMismatch, "prediction has " + std::to_string(prediction.size()) + " points, cloud has " + std::to_string(cloud.size()));
  std::optional<Mask> truth;
  if (!truth_path.empty()) {
    truth = read_pcd(truth_path).truss_mask();
    if (truth->size() != cloud.size())
      throw Error(ErrorCode::LengthMismatch, "truth has " + std::to_string(truth->size()) + " points, cloud has " + std::to_string(cloud.size()));
  }
  export_ply_colored(cloud, prediction, truth ? &*truth : nullptr, ply_path);
  out << "wrote " << cloud.size() << " vertices to " << ply_path << (truth ? "" : " (prediction only)") << "\n";
  return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{ "Truss structure segmentation of LiDAR point clouds" };
  app.require_subcommand(1);
  app.set_version_flag("--version", "trussseg 1.0.0");

  CommonOptions gen_opts;
  std::string gen_out;
  std::optional<std::size_t> gen_n;
  auto* gen = app.add_subcommand("generate", "Generate a labelled synthetic dataset");
  add_common(*gen, gen_opts, true);
  gen->add_option("-o,--out", gen_out, "Dataset root");
  gen->add_option("-n,--n", gen_n, "Number of scans");

  CommonOptions seg_opts;
  std::string seg_in;
  std::string seg_out;
  std::string seg_mode = "H";
  auto* seg = app.add_subcommand("segment", "Segment every cloud of a directory");
  add_common(*seg, seg_opts, false);
  seg->add_option("-i,--in", seg_in, "Input directory (dataset root or PCD directory)")->required();
  seg->add_option("-o,--out", seg_out, "Prediction directory")->required();
  seg->add_option("-m,--mode", seg_mode, "R, M, H, WF, WC_R, WC_M or WC_H")->capture_default_str();

  std::string ev_pred;
  std::string ev_truth;
  std::string ev_report;
  auto* ev = app.add_subcommand("evaluate", "Score predictions against ground truth");
  ev->add_option("-p,--pred", ev_pred, "Prediction directory")->required();
  ev->add_option("-t,--truth", ev_truth, "Ground-truth directory")->required();
  ev->add_option("-r,--report", ev_report, "Report directory (default: the prediction directory)");

  CommonOptions sw_opts;
  std::string sw_in;
  std::string sw_out;
  auto* sw = app.add_subcommand("sweep", "Run and evaluate all seven modes");
  add_common(*sw, sw_opts, false);
  sw->add_option("-i,--in", sw_in, "Input directory")->required();
  sw->add_option("-o,--out", sw_out, "Output root, one subdirectory per mode")->required();

  std::string th_scores;
  std::string th_method = "roc";
  std::string th_curve;
  auto* th = app.add_subcommand("threshold", "Pick a score threshold by ROC or PR");
  th->add_option("-s,--scores", th_scores, "CSV with score,truth columns")->required();
  th->add_option("-m,--method", th_method, "roc or pr")->check(CLI::IsMember({ "roc", "pr" }))->capture_default_str();
  th->add_option("-o,--out", th_curve, "Curve CSV");

  std::string ex_cloud;
  std::string ex_pred;
  std::string ex_truth;
  std::string ex_out;
  auto* ex = app.add_subcommand("export", "Write a coloured PLY for inspection");
  ex->add_option("--cloud", ex_cloud, "Cloud PCD (a prediction PCD carries its own pred field)")->required();
  ex->add_option("--pred", ex_pred, "PCD with a pred field, if not in --cloud");
  ex->add_option("--truth", ex_truth, "Ground-truth PCD; omitted gives a two-colour export");
  ex->add_option("-o,--out", ex_out, "PLY path")->required();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args)
    argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (gen->parsed())
      return cmd_generate(gen_opts, gen_out, gen_n, out);
    if (seg->parsed())
      return cmd_segment(seg_opts, seg_in, seg_out, seg_mode, out, err);
    if (ev->parsed())
      return cmd_evaluate(ev_pred, ev_truth, ev_report, out, err);
    if (sw->parsed())
      return cmd_sweep(sw_opts, sw_in, sw_out, out, err);
    if (th->parsed())
      return cmd_threshold(th_scores, th_method, th_curve, out);
    if (ex->parsed())
      return cmd_export(ex_cloud, ex_pred, ex_truth, ex_out, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

} // namespace trussseg
