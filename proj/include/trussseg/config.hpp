#pragma once

#include "trussseg/io.hpp"
#include "trussseg/segment.hpp"
#include "trussseg/synth.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace trussseg {

struct DatasetSection
{
  std::size_t n_scans = 50;
  std::uint64_t seed = 0;
  PcdMode pcd_mode = PcdMode::Binary;
  bool randomize_scene_per_scan = false;
  std::string out_dir;
  std::string in_dir;
};

/// Everything a run needs. Text form:
///
///     # comment
///     [pipeline]
///     voxel_leaf = 0.1
///     eigen_mode = hybrid
///
/// Keys may also be written fully qualified (`pipeline.voxel_leaf = 0.1`) or
/// bare when the name is unique across sections. Absent keys keep defaults.
struct RunConfig
{
  SensorConfig sensor;
  bool truss_enabled = true;
  TrussSpec truss;
  SceneSpec scene; // `structure` is rebuilt from truss/truss_enabled
  PoseSpec pose;
  PipelineConfig pipeline;
  DatasetSection dataset;

  [[nodiscard]] SceneSpec scene_spec() const;
  [[nodiscard]] DatasetSpec dataset_spec() const;
  /// Throws RangeError on cross-field violations.
  void validate() const;
};

/// Throws UnknownKey, TypeError or RangeError with `origin:line` and the key.
RunConfig parse_config(std::string_view text, std::string_view origin = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// `key=value` (qualified or unique bare key); same checks as a file line.
void apply_override(RunConfig& cfg, std::string_view assignment);

/// Every key of every section, in schema order. parse(serialize(c)) == c.
std::string serialize_config(const RunConfig& cfg);

/// FNV-1a over the serialized scene-defining sections, as 16 hex digits.
std::string spec_hash(const RunConfig& cfg);
/// FNV-1a over every key except directories, as 16 hex digits.
std::string config_fingerprint(const RunConfig& cfg);

/// Built-in configurations: ortho, crossed, training, flat.
bool has_preset(std::string_view name);
RunConfig preset_config(std::string_view name);
std::vector<std::string> preset_names();

/// A preset name or a file path.
RunConfig resolve_config(const std::string& name_or_path);

} // namespace trussseg
