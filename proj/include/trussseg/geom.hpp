#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace trussseg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Index = std::uint32_t;
/// Sorted ascending, no duplicates.
using IndexSet = std::vector<Index>;
/// One byte per point, 0 or 1.
using Mask = std::vector<std::uint8_t>;

/// Rigid transform from the sensor frame to the world frame.
struct Pose
{
  Vec3 translation = Vec3::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();

  [[nodiscard]] Vec3 to_world(const Vec3& p) const { return rotation * p + translation; }
  [[nodiscard]] Vec3 to_sensor(const Vec3& p) const
  {
    return rotation.conjugate() * (p - translation);
  }
};

/// Scan in the sensor frame. face_label 0 is background, >= 1 a structure face.
/// normals and curvature are either empty or sized like points.
struct LabeledCloud
{
  std::vector<Vec3> points;
  std::vector<std::uint32_t> face_label;
  Pose sensor_pose;
  std::vector<Vec3> normals;
  std::vector<double> curvature;

  [[nodiscard]] std::size_t size() const noexcept { return points.size(); }
  [[nodiscard]] bool empty() const noexcept { return points.empty(); }
  /// Binary truss ground truth: face_label != 0.
  [[nodiscard]] Mask truss_mask() const;
  /// Throws InvalidSpec on length mismatch or a non-unit quaternion.
  void validate() const;
};

struct Covariance
{
  Vec3 centroid = Vec3::Zero();
  Mat3 matrix = Mat3::Zero();
};

/// Ascending eigenvalues with matching unit eigenvectors.
struct EigenDecomp
{
  Vec3 eigenvalues = Vec3::Zero();
  std::array<Vec3, 3> eigenvectors{ Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ() };
  Vec3 centroid = Vec3::Zero();

  [[nodiscard]] double curvature() const;
};

/// lambda0 / (lambda0 + lambda1 + lambda2), 0 when every eigenvalue is 0.
double surface_curvature(const Vec3& eigenvalues);

/// Population covariance (1/k normalisation) of points[subset].
Covariance covariance(std::span<const Vec3> points, std::span<const Index> subset);
Covariance covariance(std::span<const Vec3> points);

/// Cyclic Jacobi eigensolver for a symmetric 3x3 matrix. Round-off negative
/// eigenvalues are clamped to 0.
EigenDecomp eigen_sym3(const Mat3& c);

/// covariance followed by eigen_sym3, centroid filled in.
EigenDecomp analyze(std::span<const Vec3> points, std::span<const Index> subset);

struct NormalEstimate
{
  std::vector<Vec3> normals;
  std::vector<double> curvature;
};

/// PCA normals over the k nearest neighbours (point itself included), each
/// flipped to face `viewpoint`.
NormalEstimate estimate_normals(std::span<const Vec3> points,
                                int k,
                                const Vec3& viewpoint = Vec3::Zero(),
                                unsigned jobs = 1);
NormalEstimate estimate_normals(const LabeledCloud& cloud,
                                int k,
                                const Vec3& viewpoint = Vec3::Zero(),
                                unsigned jobs = 1);

/// One point per occupied voxel floor(coord / leaf), at the centroid of its
/// members, carrying the majority label (ties to the lowest label). Output is
/// ordered by voxel key.
LabeledCloud voxel_downsample(const LabeledCloud& cloud, double leaf);

/// max(p.d) - min(p.d) over points[subset].
double extent_along(std::span<const Vec3> points,
                    std::span<const Index> subset,
                    const Vec3& direction);

/// 0..n-1
IndexSet iota_indices(std::size_t n);

} // namespace trussseg
