#include "trussseg/config.hpp"

#include "trussseg/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <utility>

namespace trussseg {

namespace {

struct Entry
{
  std::string section;
  std::string key;
  std::function<void(RunConfig&, std::string_view value, const std::string& where)> set;
  std::function<std::string(const RunConfig&)> get;

  [[nodiscard]] std::string qualified() const { return section + "." + key; }
};

struct Bound
{
  double value;
  bool inclusive;
};
constexpr Bound kNoLower{ -HUGE_VAL, true };
constexpr Bound kNoUpper{ HUGE_VAL, true };

std::string fmt_double(double v)
{
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string describe(Bound lo, Bound hi)
{
  if (lo.value == -HUGE_VAL && hi.value == HUGE_VAL)
    return "any value";
  if (hi.value == HUGE_VAL)
    return std::string("must be ") + (lo.inclusive ? ">= " : "> ") + fmt_double(lo.value);
  if (lo.value == -HUGE_VAL)
    return std::string("must be ") + (hi.inclusive ? "<= " : "< ") + fmt_double(hi.value);
  return std::string("must be in ") + (lo.inclusive ? "[" : "(") + fmt_double(lo.value) + ", " +
         fmt_double(hi.value) + (hi.inclusive ? "]" : ")");
}

bool within(double v, Bound lo, Bound hi)
{
  const bool above = lo.inclusive ? v >= lo.value : v > lo.value;
  const bool below = hi.inclusive ? v <= hi.value : v < hi.value;
  return above && below;
}

[[noreturn]] void type_error(const std::string& where, const Entry& e, std::string_view value, const char* expected)
{
  throw Error(ErrorCode::TypeError,
              where + ": " + e.qualified() + " expects " + expected + ", got '" + std::string(value) + "'");
}

[[noreturn]] void range_error(const std::string& where, const Entry& e, std::string_view value, const std::string& rule)
{
  throw Error(ErrorCode::RangeError, where + ": " + e.qualified() + " = " + std::string(value) + " out of range: " + rule);
}

template<class T>
bool parse_exact(std::string_view s, T& out)
{
  if (!s.empty() && s.front() == '+')
    s.remove_prefix(1);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size() && !s.empty();
}

using RealRef = double& (*)(RunConfig&);
using IntRef = int& (*)(RunConfig&);
using SizeRef = std::size_t& (*)(RunConfig&);
using U64Ref = std::uint64_t& (*)(RunConfig&);
using BoolRef = bool& (*)(RunConfig&);
using StringRef = std::string& (*)(RunConfig&);

RunConfig& mut(const RunConfig& c)
{
  return const_cast<RunConfig&>(c);
}

Entry real(std::string sec, std::string key, RealRef ref, Bound lo = kNoLower, Bound hi = kNoUpper)
{
  Entry e{ std::move(sec), std::move(key), {}, {} };
  e.set = [ref, lo, hi, e](RunConfig& c, std::string_view v, const std::string& where) {
    double d = 0;
    if (!parse_exact(v, d) || !std::isfinite(d))
      type_error(where, e, v, "a finite real");
    if (!within(d, lo, hi))
      range_error(where, e, v, describe(lo, hi));
    ref(c) = d;
  };
  e.get = [ref](const RunConfig& c) { return fmt_double(ref(mut(c))); };
  return e;
}

Entry integer(std::string sec, std::string key, IntRef ref, long lo, long hi)
{
  Entry e{ std::move(sec), std::move(key), {}, {} };
  e.set = [ref, lo, hi, e](RunConfig& c, std::string_view v, const std::string& where) {
    long n = 0;
    if (!parse_exact(v, n))
      type_error(where, e, v, "an integer");
    if (n < lo || n > hi)
      range_error(where, e, v, describe({ static_cast<double>(lo), true }, { static_cast<double>(hi), true }));
    ref(c) = static_cast<int>(n);
  };
  e.get = [ref](const RunConfig& c) { return std::to_string(ref(mut(c))); };
  return e;
}

Entry count(std::string sec, std::string key, SizeRef ref, std::size_t lo)
{
  Entry e{ std::move(sec), std::move(key), {}, {} };
  e.set = [ref, lo, e](RunConfig& c, std::string_view v, const std::string& where) {
    std::size_t n = 0;
    if (!parse_exact(v, n)) {
      long probe = 0;
      if (parse_exact(v, probe))
        range_error(where, e, v, "must be >= " + std::to_string(lo));
      type_error(where, e, v, "a non-negative integer");
    }
    if (n < lo)
      range_error(where, e, v, "must be >= " + std::to_string(lo));
    ref(c) = n;
  };
  e.get = [ref](const RunConfig& c) { return std::to_string(ref(mut(c))); };
  return e;
}

Entry seed(std::string sec, std::string key, U64Ref ref)
{
  Entry e{ std::move(sec), std::move(key), {}, {} };
  e.set = [ref, e](RunConfig& c, std::string_view v, const std::string& where) {
    std::uint64_t n = 0;
    if (!parse_exact(v, n))
      type_error(where, e, v, "an unsigned 64-bit integer");
    ref(c) = n;
  };
  e.get = [ref](const RunConfig& c) { return std::to_string(ref(mut(c))); };
  return e;
}

Entry boolean(std::string sec, std::string key, BoolRef ref)
{
  Entry e{ std::move(sec), std::move(key), {}, {} };
  e.set = [ref, e](RunConfig& c, std::string_view v, const std::string& where) {
    if (v == "true" || v == "1" || v == "yes" || v == "on")
      ref(c) = true;
    else if (v == "false" || v == "0" || v == "no" || v == "off")
      ref(c) = false;
    else
      type_error(where, e, v, "true or false");
  };
  e.get = [ref](const RunConfig& c) { return std::string(ref(mut(c)) ? "true" : "false"); };
  return e;
}

Entry text(std::string sec, std::string key, StringRef ref)
{
  Entry e{ std::move(sec), std::move(key), {}, {} };
  e.set = [ref](RunConfig& c, std::string_view v, const std::string&) { ref(c) = std::string(v); };
  e.get = [ref](const RunConfig& c) { return ref(mut(c)); };
  return e;
}

template<class E>
Entry choice(std::string sec, std::string key, E& (*ref)(RunConfig&), std::vector<std::pair<std::string, E>> options)
{
  Entry e{ std::move(sec), std::move(key), {}, {} };
  e.set = [ref, options, e](RunConfig& c, std::string_view v, const std::string& where) {
    std::string valid;
    for (const auto& [name, value] : options) {
      if (name == v) {
        ref(c) = value;
        return;
      }
      valid += (valid.empty() ? "" : "|") + name;
    }
    type_error(where, e, v, ("one of " + valid).c_str());
  };
  e.get = [ref, options](const RunConfig& c) {
    for (const auto& [name, value] : options) {
      if (value == ref(mut(c)))
        return name;
    }
    return std::string("?");
  };
  return e;
}

#define FIELD(expr) +[](RunConfig& c) -> decltype(auto) { return (c.expr); }

constexpr Bound gt0{ 0.0, false };
constexpr Bound ge0{ 0.0, true };

const std::vector<Entry>& schema()
{
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> s;
    // [sensor]
    s.push_back(integer("sensor", "v_resolution", FIELD(sensor.v_resolution), 1, 1 << 16));
    s.push_back(integer("sensor", "h_resolution", FIELD(sensor.h_resolution), 1, 1 << 16));
    s.push_back(real("sensor", "min_range", FIELD(sensor.min_range), gt0));
    s.push_back(real("sensor", "max_range", FIELD(sensor.max_range), gt0));
    s.push_back(real("sensor", "v_fov", FIELD(sensor.v_fov), gt0, { 180, true }));
    s.push_back(real("sensor", "h_fov", FIELD(sensor.h_fov), gt0, { 360, true }));
    s.push_back(real("sensor", "noise_sigma", FIELD(sensor.noise_sigma), ge0));
    s.push_back(seed("sensor", "seed", FIELD(sensor.seed)));
    // [truss]
    s.push_back(boolean("truss", "enabled", FIELD(truss_enabled)));
    s.push_back(integer("truss", "nx", FIELD(truss.node_counts[0]), 2, 10000));
    s.push_back(integer("truss", "ny", FIELD(truss.node_counts[1]), 2, 10000));
    s.push_back(integer("truss", "nz", FIELD(truss.node_counts[2]), 2, 10000));
    s.push_back(real("truss", "bar_length", FIELD(truss.bar_length), gt0));
    s.push_back(real("truss", "bar_width", FIELD(truss.bar_width), gt0));
    s.push_back(boolean("truss", "crossed", FIELD(truss.crossed)));
    s.push_back(choice<LabelMode>(
      "truss", "label_mode", FIELD(truss.label_mode), { { "per_face", LabelMode::PerFace }, { "per_bar", LabelMode::PerBar } }));
    // [scene]
    s.push_back(real("scene", "ground_amplitude", FIELD(scene.ground.amplitude), ge0));
    s.push_back(real("scene", "ground_wavelength", FIELD(scene.ground.wavelength), gt0));
    s.push_back(real("scene", "ground_half_size", FIELD(scene.ground.half_size), gt0));
    s.push_back(integer("scene", "tree_count", FIELD(scene.trees.count), 0, 100000));
    s.push_back(real("scene", "tree_scale_min", FIELD(scene.trees.scale_min), gt0));
    s.push_back(real("scene", "tree_scale_max", FIELD(scene.trees.scale_max), gt0));
    s.push_back(real("scene", "tree_placement_half_size", FIELD(scene.trees.placement_half_size), gt0));
    s.push_back(real("scene", "tree_clearance", FIELD(scene.trees.clearance), ge0));
    s.push_back(integer("scene", "box_count", FIELD(scene.boxes.count), 0, 100000));
    s.push_back(real("scene", "box_length_min", FIELD(scene.boxes.length_min), gt0));
    s.push_back(real("scene", "box_length_max", FIELD(scene.boxes.length_max), gt0));
    s.push_back(real("scene", "box_width_min", FIELD(scene.boxes.width_min), gt0));
    s.push_back(real("scene", "box_width_max", FIELD(scene.boxes.width_max), gt0));
    s.push_back(real("scene", "box_placement_half_size", FIELD(scene.boxes.placement_half_size), gt0));
    s.push_back(real("scene", "box_height_max", FIELD(scene.boxes.height_max), gt0));
    s.push_back(seed("scene", "seed", FIELD(scene.seed)));
    // [pose]
    s.push_back(choice<PoseMode>("pose",
                                 "mode",
                                 FIELD(pose.mode),
                                 { { "within_structure", PoseMode::RandomWithinStructure },
                                   { "fixed", PoseMode::FixedPositionRandomOrientation } }));
    s.push_back(real("pose", "x", FIELD(pose.fixed_position.x())));
    s.push_back(real("pose", "y", FIELD(pose.fixed_position.y())));
    s.push_back(real("pose", "z", FIELD(pose.fixed_position.z())));
    s.push_back(real("pose", "max_tilt_deg", FIELD(pose.max_tilt_deg), ge0, { 90, true }));
    s.push_back(real("pose", "height_min", FIELD(pose.height_min), ge0));
    s.push_back(real("pose", "height_max", FIELD(pose.height_max), ge0));
    s.push_back(real("pose", "clearance", FIELD(pose.clearance), ge0));
    // [pipeline]
    s.push_back(real("pipeline", "voxel_leaf", FIELD(pipeline.voxel_leaf), gt0));
    s.push_back(real("pipeline", "ransac_threshold", FIELD(pipeline.ransac_threshold), gt0));
    s.push_back(integer("pipeline", "ransac_iterations", FIELD(pipeline.ransac_iterations), 1, 100000000));
    s.push_back(seed("pipeline", "ransac_seed", FIELD(pipeline.ransac_seed)));
    s.push_back(integer("pipeline", "normal_k", FIELD(pipeline.normal_k), 3, 100000));
    s.push_back(real("pipeline", "rg_angle_threshold", FIELD(pipeline.rg_angle_threshold), gt0, { 90, false }));
    s.push_back(real("pipeline", "rg_curvature_threshold", FIELD(pipeline.rg_curvature_threshold), gt0));
    s.push_back(integer("pipeline", "rg_min_cluster", FIELD(pipeline.rg_min_cluster), 1, 100000000));
    s.push_back(choice<EigenMode>("pipeline",
                                  "eigen_mode",
                                  FIELD(pipeline.eigen_mode),
                                  { { "ratio", EigenMode::Ratio },
                                    { "magnitude", EigenMode::Magnitude },
                                    { "hybrid", EigenMode::Hybrid } }));
    s.push_back(real("pipeline", "ratio_threshold", FIELD(pipeline.ratio_threshold), gt0, { 1, true }));
    s.push_back(real("pipeline", "magnitude_threshold", FIELD(pipeline.magnitude_threshold), gt0));
    s.push_back(real("pipeline", "density_radius", FIELD(pipeline.density_radius), gt0));
    s.push_back(integer("pipeline", "density_min_points", FIELD(pipeline.density_min_points), 0, 100000000));
    s.push_back(choice<StageMode>("pipeline",
                                  "stage_mode",
                                  FIELD(pipeline.stage_mode),
                                  { { "full", StageMode::Full },
                                    { "without_fine", StageMode::WithoutFine },
                                    { "without_coarse", StageMode::WithoutCoarse } }));
    s.push_back(boolean("pipeline", "normals_on_whole_cloud", FIELD(pipeline.normals_on_whole_cloud)));
    s.push_back(boolean("pipeline", "density_count_structure_only", FIELD(pipeline.density_count_structure_only)));
    // [dataset]
    s.push_back(count("dataset", "n_scans", FIELD(dataset.n_scans), 1));
    s.push_back(seed("dataset", "seed", FIELD(dataset.seed)));
    s.push_back(choice<PcdMode>(
      "dataset", "pcd_mode", FIELD(dataset.pcd_mode), { { "binary", PcdMode::Binary }, { "ascii", PcdMode::Ascii } }));
    s.push_back(boolean("dataset", "randomize_scene_per_scan", FIELD(dataset.randomize_scene_per_scan)));
    s.push_back(text("dataset", "out_dir", FIELD(dataset.out_dir)));
    s.push_back(text("dataset", "in_dir", FIELD(dataset.in_dir)));
    return s;
  }();
  return entries;
}

#undef FIELD

std::string_view trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

const Entry& find_entry(std::string_view section, std::string_view key, const std::string& where)
{
  std::string_view sec = section;
  std::string_view name = key;
  if (const auto dot = key.find('.'); dot != std::string_view::npos) {
    sec = key.substr(0, dot);
    name = key.substr(dot + 1);
  }
  if (!sec.empty()) {
    for (const auto& e : schema()) {
      if (e.section == sec && e.key == name)
        return e;
    }
    throw Error(ErrorCode::UnknownKey, where + ": unknown key '" + std::string(key) + "' in section [" + std::string(sec) + "]");
  }
  const Entry* found = nullptr;
  for (const auto& e : schema()) {
    if (e.key != name)
      continue;
    if (found)
      throw Error(ErrorCode::UnknownKey,
                  where + ": key '" + std::string(key) + "' is ambiguous outside a section (qualify it, e.g. " +
                    found->qualified() + ")");
    found = &e;
  }
  if (!found)
    throw Error(ErrorCode::UnknownKey, where + ": unknown key '" + std::string(key) + "'");
  return *found;
}

void assign(RunConfig& cfg, std::string_view section, std::string_view line, const std::string& where)
{
  const auto eq = line.find('=');
  if (eq == std::string_view::npos)
    throw Error(ErrorCode::TypeError, where + ": expected 'key = value', got '" + std::string(line) + "'");
  const std::string_view key = trim(line.substr(0, eq));
  std::string_view value = trim(line.substr(eq + 1));
  if (key.empty())
    throw Error(ErrorCode::TypeError, where + ": missing key before '='");
  if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
    value = value.substr(1, value.size() - 2);
  const Entry& e = find_entry(section, key, where);
  e.set(cfg, value, where);
}

std::uint64_t fnv1a(std::string_view s)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

const std::map<std::string, std::string, std::less<>>& presets()
{
  static const std::map<std::string, std::string, std::less<>> p = {
    { "ortho",
      "# Orthogonal test structure, 10 m x 8 m x 18 m.\n"
      "[truss]\nnx = 6\nny = 5\nnz = 10\ncrossed = false\n"
      "[scene]\ntree_count = 24\ntree_placement_half_size = 28\nseed = 11\n"
      "[pose]\nmode = within_structure\nmax_tilt_deg = 0\nheight_min = 1.5\nheight_max = 8\n"
      "[dataset]\nn_scans = 50\nseed = 7\n" },
    { "crossed",
      "# Crossed test structure, 40 m x 8 m x 4 m.\n"
      "[truss]\nnx = 21\nny = 5\nnz = 3\ncrossed = true\n"
      "[scene]\ntree_count = 24\ntree_placement_half_size = 32\nseed = 12\n"
      "[pose]\nmode = within_structure\nmax_tilt_deg = 0\nheight_min = 1.5\n"
      "[dataset]\nn_scans = 50\nseed = 8\n" },
    { "training",
      "# Randomised parallelepipeds and trees around a fixed sensor.\n"
      "[truss]\nenabled = false\n"
      "[scene]\ntree_count = 10\nbox_count = 40\nbox_length_min = 0.5\nbox_length_max = 4\n"
      "box_width_min = 0.05\nbox_width_max = 0.3\nbox_placement_half_size = 12\n"
      "[pose]\nmode = fixed\nx = 0\ny = 0\nz = 1.5\nmax_tilt_deg = 15\n"
      "[dataset]\nn_scans = 100\nrandomize_scene_per_scan = true\n" },
    { "flat",
      "# Flat empty ground, fixed sensor two metres up.\n"
      "[truss]\nenabled = false\n"
      "[scene]\nground_amplitude = 0\n"
      "[pose]\nmode = fixed\nx = 0\ny = 0\nz = 2\n"
      "[dataset]\nn_scans = 1\n" },
  };
  return p;
}

} // namespace

SceneSpec RunConfig::scene_spec() const
{
  SceneSpec s = scene;
  if (truss_enabled)
    s.structure = truss;
  else
    s.structure.reset();
  if (pose.mode == PoseMode::FixedPositionRandomOrientation)
    s.keep_clear = pose.fixed_position;
  return s;
}

DatasetSpec RunConfig::dataset_spec() const
{
  DatasetSpec d;
  d.scene = scene_spec();
  d.sensor = sensor;
  d.pose = pose;
  d.n_scans = dataset.n_scans;
  d.seed = dataset.seed;
  d.randomize_scene_per_scan = dataset.randomize_scene_per_scan;
  d.pcd_mode = dataset.pcd_mode;
  d.spec_hash = spec_hash(*this);
  return d;
}

void RunConfig::validate() const
{
  try {
    sensor.validate();
    if (truss_enabled)
      truss.validate();
    scene_spec().validate();
    pipeline.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::RangeError)
      throw;
    throw Error(ErrorCode::RangeError, e.what());
  }
  if (!truss_enabled && pose.mode == PoseMode::RandomWithinStructure)
    throw Error(ErrorCode::RangeError, "pose.mode = within_structure needs truss.enabled = true");
}

RunConfig parse_config(std::string_view text, std::string_view origin)
{
  RunConfig cfg;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos)
      eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty())
      continue;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']')
        throw Error(ErrorCode::TypeError, where + ": malformed section header '" + std::string(line) + "'");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      bool known = false;
      for (const auto& e : schema())
        known = known || e.section == section;
      if (!known)
        throw Error(ErrorCode::UnknownKey, where + ": unknown section [" + section + "]");
      continue;
    }
    assign(cfg, section, line, where);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path)
{
  return parse_config(read_file(path), path.string());
}

void apply_override(RunConfig& cfg, std::string_view assignment)
{
  RunConfig copy = cfg;
  assign(copy, "", trim(assignment), "override");
  copy.validate();
  cfg = std::move(copy);
}

std::string serialize_config(const RunConfig& cfg)
{
  std::string out;
  std::string section;
  for (const auto& e : schema()) {
    if (e.section != section) {
      if (!section.empty())
        out += "\n";
      section = e.section;
      out += "[" + section + "]\n";
    }
    out += e.key + " = " + e.get(cfg) + "\n";
  }
  return out;
}

namespace {

std::string hash_keys(const RunConfig& cfg, bool with_pipeline)
{
  std::string material;
  for (const auto& e : schema()) {
    if ((!with_pipeline && (e.section == "pipeline" || e.key == "n_scans")) || e.key == "out_dir" || e.key == "in_dir")
      continue;
    material += e.qualified() + "=" + e.get(cfg) + "\n";
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(material)));
  return buf;
}

} // namespace

std::string spec_hash(const RunConfig& cfg)
{
  return hash_keys(cfg, false);
}

std::string config_fingerprint(const RunConfig& cfg)
{
  return hash_keys(cfg, true);
}

bool has_preset(std::string_view name)
{
  return presets().find(name) != presets().end();
}

RunConfig preset_config(std::string_view name)
{
  const auto it = presets().find(name);
  if (it == presets().end())
    throw Error(ErrorCode::UnknownKey, "unknown preset '" + std::string(name) + "'");
  return parse_config(it->second, "preset:" + std::string(name));
}

std::vector<std::string> preset_names()
{
  std::vector<std::string> out;
  for (const auto& [name, text] : presets())
    out.push_back(name);
  return out;
}

RunConfig resolve_config(const std::string& name_or_path)
{
  std::error_code ec;
  if (std::filesystem::exists(name_or_path, ec))
    return load_config(name_or_path);
  if (has_preset(name_or_path))
    return preset_config(name_or_path);
  throw Error(ErrorCode::IoError, "no config file or preset named '" + name_or_path + "'");
}

} // namespace trussseg
