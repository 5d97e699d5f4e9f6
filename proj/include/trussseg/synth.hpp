#pragma once

#include "trussseg/geom.hpp"
#include "trussseg/io.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace trussseg {

// ---------------------------------------------------------------------------
// Parametric descriptions

struct SensorConfig
{
  int v_resolution = 128;
  int h_resolution = 512;
  double min_range = 0.05;  // m
  double max_range = 30.0;  // m
  double v_fov = 45.0;      // degrees, centred on the horizon
  double h_fov = 360.0;     // degrees
  double noise_sigma = 0.008; // m, along the ray
  std::uint64_t seed = 0;

  /// Throws InvalidSpec.
  void validate() const;
  [[nodiscard]] std::size_t ray_count() const
  {
    return static_cast<std::size_t>(v_resolution) * static_cast<std::size_t>(h_resolution);
  }
};

enum class LabelMode { PerBar, PerFace };

struct TrussSpec
{
  std::array<int, 3> node_counts{ 6, 5, 10 };
  double bar_length = 2.0; // node spacing, m
  double bar_width = 0.15; // square cross-section, m
  bool crossed = false;
  LabelMode label_mode = LabelMode::PerFace;

  void validate() const;
  /// Node-to-node span along each axis.
  [[nodiscard]] Vec3 span() const;
};

struct Aabb
{
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  [[nodiscard]] bool contains(const Vec3& p) const
  {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  void grow(const Vec3& p)
  {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void grow(const Aabb& b)
  {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
};

/// Face order: -x, +x, -y, +y, -z, +z in the box frame.
struct OrientedBox
{
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Constant(0.5);
  Mat3 rotation = Mat3::Identity(); // columns are the box axes in world
  std::array<std::uint32_t, 6> face_labels{};
};

/// Vertical solid cylinder with caps.
struct Cylinder
{
  Vec3 base_center = Vec3::Zero();
  double radius = 0.2;
  double height = 3.0;
  std::uint32_t label = 0;
};

/// Axis-aligned ellipsoid.
struct Ellipsoid
{
  Vec3 center = Vec3::Zero();
  Vec3 radii = Vec3::Ones();
  std::uint32_t label = 0;
};

/// z = amplitude * sin(2 pi x / wavelength) * sin(2 pi y / wavelength) over
/// the square |x|, |y| <= half_size.
struct Heightfield
{
  double amplitude = 0.2;
  double wavelength = 10.0;
  double half_size = 60.0;
  std::uint32_t label = 0;

  [[nodiscard]] double height(double x, double y) const;
  /// Upper bound on |grad height|.
  [[nodiscard]] double lipschitz() const;
};

using Primitive = std::variant<OrientedBox, Cylinder, Ellipsoid, Heightfield>;

Aabb bounds_of(const Primitive& primitive);

struct Ray
{
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitX(); // unit
};

struct Hit
{
  double t = 0.0;
  std::uint32_t label = 0;
  std::size_t primitive = 0;
};

/// Closest entry intersection with t in [t_min, t_max]. Rays starting inside a
/// solid report no hit for it.
std::optional<Hit> intersect(const Ray& ray, const OrientedBox& box, double t_min, double t_max);
std::optional<Hit> intersect(const Ray& ray, const Cylinder& cylinder, double t_min, double t_max);
std::optional<Hit> intersect(const Ray& ray, const Ellipsoid& ellipsoid, double t_min, double t_max);
std::optional<Hit> intersect(const Ray& ray, const Heightfield& ground, double t_min, double t_max);
std::optional<Hit> intersect(const Ray& ray, const Primitive& primitive, double t_min, double t_max);

/// Signed distance from `p` to the surface, used to check hit residuals.
double surface_residual(const Primitive& primitive, const Vec3& p);

/// Immutable collection of labelled solids with a BVH for closest-hit queries.
class Scene
{
public:
  Scene() = default;
  explicit Scene(std::vector<Primitive> primitives, std::optional<Aabb> structure_bounds = std::nullopt);

  [[nodiscard]] const std::vector<Primitive>& primitives() const noexcept { return primitives_; }
  [[nodiscard]] const std::optional<Aabb>& structure_bounds() const noexcept { return structure_bounds_; }
  [[nodiscard]] bool empty() const noexcept { return primitives_.empty(); }

  [[nodiscard]] std::optional<Hit> intersect(const Ray& ray, double t_max) const;
  /// True when `p` lies inside, or within `clearance` of, a solid box, cylinder
  /// or ellipsoid (conservatively via the box frame / bounding volume).
  [[nodiscard]] bool near_solid(const Vec3& p, double clearance) const;

private:
  struct Node
  {
    Aabb box;
    int left = -1; // leaf when < 0
    int right = -1;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
  };
  int build(std::uint32_t begin, std::uint32_t end);

  std::vector<Primitive> primitives_;
  std::vector<Aabb> bounds_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::optional<Aabb> structure_bounds_;
};

// ---------------------------------------------------------------------------
// Construction

/// Bars of the nx*ny*nz node grid in the structure frame (node (0,0,0) at the
/// origin), then one diagonal per exterior lateral panel when crossed.
std::vector<OrientedBox> build_truss(const TrussSpec& spec);

/// Highest face label used by build_truss(spec).
std::uint32_t truss_label_count(const TrussSpec& spec);

struct GroundSpec
{
  double amplitude = 0.2;
  double wavelength = 10.0;
  double half_size = 60.0;
};

struct TreeSpec
{
  int count = 0;
  double scale_min = 0.7;
  double scale_max = 1.3;
  /// Trees are placed in |x|, |y| <= placement_half_size, outside the
  /// structure footprint grown by clearance.
  double placement_half_size = 25.0;
  double clearance = 1.5;
};

/// Randomised parallelepipeds labelled like bars (six sequential face labels).
struct BoxFieldSpec
{
  int count = 0;
  double length_min = 0.5;
  double length_max = 4.0;
  double width_min = 0.05;
  double width_max = 0.3;
  double placement_half_size = 12.0;
  double height_max = 4.0; // centre height above ground
};

struct SceneSpec
{
  std::optional<TrussSpec> structure;
  GroundSpec ground;
  TreeSpec trees;
  BoxFieldSpec boxes;
  /// Boxes keep this spherical clearance around it free, so the sensor is
  /// never embedded in one.
  Vec3 keep_clear = Vec3(0, 0, 1.5);
  double keep_clear_radius = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Ground, the truss centred on the origin and resting on z = 0, then trees and
/// boxes at seeded poses. Same spec, same primitive list.
Scene build_scene(const SceneSpec& spec);

enum class PoseMode { FixedPositionRandomOrientation, RandomWithinStructure };

struct PoseSpec
{
  PoseMode mode = PoseMode::RandomWithinStructure;
  Vec3 fixed_position = Vec3(0, 0, 1.5);
  /// Yaw is always uniform; roll and pitch are uniform in +-max_tilt.
  double max_tilt_deg = 0.0;
  /// Raises the lower bound of the sampled height; <= 0 disables.
  double height_min = 0.0;
  /// Caps the sampled height inside the structure bounds; <= 0 disables.
  double height_max = 0.0;
  /// Minimum distance to any solid when sampling within a structure.
  double clearance = 0.3;
};

/// Throws InvalidBounds when the within-structure box is degenerate.
Pose sample_sensor_pose(const PoseSpec& spec,
                        const std::optional<Aabb>& bounds,
                        std::uint64_t seed,
                        const Scene* scene = nullptr);

/// Casts v_resolution * h_resolution rays from `pose`. Points come back in
/// the sensor frame, channel-major, with noise drawn from per-ray substreams
/// of `noise_seed`.
LabeledCloud raycast_scan(const Scene& scene,
                          const Pose& pose,
                          const SensorConfig& cfg,
                          std::uint64_t noise_seed,
                          unsigned jobs = 1);
LabeledCloud raycast_scan(const Scene& scene, const Pose& pose, const SensorConfig& cfg);

/// Unit ray direction of channel `v`, azimuth step `h`, in the sensor frame.
Vec3 beam_direction(const SensorConfig& cfg, int v, int h);

// ---------------------------------------------------------------------------
// Datasets

struct DatasetSpec
{
  SceneSpec scene;
  SensorConfig sensor;
  PoseSpec pose;
  std::size_t n_scans = 1;
  std::uint64_t seed = 0;
  /// Rebuild the scene for every scan (training-style data).
  bool randomize_scene_per_scan = false;
  PcdMode pcd_mode = PcdMode::Binary;
  std::string spec_hash;
};

struct ManifestRecord
{
  std::string file; // relative to the dataset root
  std::uint64_t seed = 0;
  Pose pose;
  std::string spec_hash;
};

/// Deterministic scan `index` of a dataset; `static_scene` is used unless the
/// scene is randomised per scan.
LabeledCloud simulate_scan(const DatasetSpec& spec,
                           const Scene& static_scene,
                           std::size_t index,
                           Pose* pose_out = nullptr,
                           unsigned jobs = 1);

/// Writes <out>/clouds/scan_%05u.pcd and <out>/manifest.json-lines (last).
std::vector<ManifestRecord> generate_dataset(const DatasetSpec& spec,
                                             const std::filesystem::path& out_dir,
                                             unsigned jobs = 1);

std::string manifest_line(const ManifestRecord& record);

} // namespace trussseg
