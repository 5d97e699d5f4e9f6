#pragma once

#include "trussseg/geom.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trussseg {

enum class EigenMode { Ratio, Magnitude, Hybrid };
enum class StageMode { Full, WithoutFine, WithoutCoarse };

struct PipelineConfig
{
  double voxel_leaf = 0.1;        // m
  double ransac_threshold = 0.5;  // m
  int ransac_iterations = 1000;
  std::uint64_t ransac_seed = 0;
  int normal_k = 30;
  double rg_angle_threshold = 5.0;      // degrees
  double rg_curvature_threshold = 0.04; // unitless
  int rg_min_cluster = 10;
  EigenMode eigen_mode = EigenMode::Hybrid;
  double ratio_threshold = 0.3;     // lambda1 / lambda2
  double magnitude_threshold = 0.5; // m along v2
  double density_radius = 0.25;     // m
  int density_min_points = 10;
  StageMode stage_mode = StageMode::Full;
  /// Estimate fine-step normals on the whole cloud instead of the coarse ground.
  bool normals_on_whole_cloud = false;
  /// Count only structure-marked neighbours in the density filter.
  bool density_count_structure_only = false;
  /// Worker threads for per-point stages; results do not depend on it.
  unsigned jobs = 1;

  /// Throws RangeError naming the offending field.
  void validate() const;
};

/// Points p with |normal . p + offset| <= threshold are inliers.
struct Plane
{
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;

  [[nodiscard]] double signed_distance(const Vec3& p) const { return normal.dot(p) + offset; }
  [[nodiscard]] double distance(const Vec3& p) const { return std::abs(signed_distance(p)); }
};

enum class Verdict { Ground, Structure };

struct Cluster
{
  IndexSet members;
  EigenDecomp stats;
  double ratio = 0.0;           // lambda1 / lambda2, 0 when lambda2 == 0
  double extent_along_v2 = 0.0; // m
  Verdict verdict = Verdict::Ground;
};

struct StageLatency
{
  double coarse_ms = 0;
  double normals_ms = 0;
  double region_growing_ms = 0;
  double classify_ms = 0;
  double density_ms = 0;
  double total_ms = 0;
};

struct SegmentationOutput
{
  Mask prediction; // 1 = structure
  std::optional<Plane> plane;
  IndexSet coarse_ground;
  IndexSet coarse_structure;
  std::vector<Cluster> clusters;
  IndexSet density_removed;
  StageLatency latency;
  std::vector<std::string> warnings;
};

struct RansacResult
{
  Plane plane;
  IndexSet inliers;
};

/// Best of `iterations` seeded three-point hypotheses by inlier count, first
/// found on ties. Throws DegenerateCloud when the points span no plane.
RansacResult ransac_plane(std::span<const Vec3> points, double threshold, int iterations, std::uint64_t seed);

struct CoarseSplit
{
  std::optional<Plane> plane;
  IndexSet ground;
  IndexSet structure;
  double inlier_fraction = 0.0; // on the voxel cloud
  bool ground_found = false;
};

/// RANSAC on the voxelised cloud, then every original point within the
/// threshold is coarse ground. Below 5% voxel inliers the ground is reported
/// missing and every point is structure.
CoarseSplit coarse_split(const LabeledCloud& cloud, const PipelineConfig& cfg);

/// Seeded region growing restricted to `subset`. normals and curvature are
/// indexed like `points`. Growth compares each neighbour with the current
/// seed's normal; clusters below rg_min_cluster are dropped.
std::vector<Cluster> region_grow(std::span<const Vec3> points,
                                 std::span<const Index> subset,
                                 std::span<const Vec3> normals,
                                 std::span<const double> curvature,
                                 const PipelineConfig& cfg);

/// Fills stats, ratio and extent_along_v2 from the members.
void compute_cluster_stats(std::span<const Vec3> points, Cluster& cluster);

Verdict classify_cluster(const Cluster& cluster, const PipelineConfig& cfg);
Verdict classify_cluster(const Cluster& cluster, EigenMode mode, const PipelineConfig& cfg);

/// Demotes structure points with fewer than density_min_points neighbours
/// (self excluded) within density_radius. Never promotes.
Mask density_filter(std::span<const Vec3> points, const Mask& structure, const PipelineConfig& cfg);

SegmentationOutput run_pipeline(const LabeledCloud& cloud, const PipelineConfig& cfg);

/// Table-style mode names: R, M, H (Full), WF, WC_R, WC_M, WC_H.
struct ModeName
{
  std::string_view name;
  StageMode stage;
  EigenMode eigen;
};
std::span<const ModeName> all_modes();
/// Throws RangeError listing the valid names.
void apply_mode(std::string_view name, PipelineConfig& cfg);
std::string mode_name(const PipelineConfig& cfg);

std::string_view to_string(EigenMode mode);
std::string_view to_string(StageMode mode);

} // namespace trussseg
