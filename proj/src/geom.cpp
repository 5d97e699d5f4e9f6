#include "trussseg/geom.hpp"

#include "trussseg/error.hpp"
#include "trussseg/parallel.hpp"
#include "trussseg/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace trussseg {

Mask LabeledCloud::truss_mask() const
{
  Mask mask(face_label.size());
  for (std::size_t i = 0; i < face_label.size(); ++i)
    mask[i] = face_label[i] != 0 ? 1 : 0;
  return mask;
}

void LabeledCloud::validate() const
{
  const auto n = points.size();
  if (face_label.size() != n)
    throw Error(ErrorCode::InvalidSpec, "face_label length differs from point count");
  if (!normals.empty() && normals.size() != n)
    throw Error(ErrorCode::InvalidSpec, "normals length differs from point count");
  if (!curvature.empty() && curvature.size() != n)
    throw Error(ErrorCode::InvalidSpec, "curvature length differs from point count");
  if (std::abs(sensor_pose.rotation.norm() - 1.0) > 1e-6)
    throw Error(ErrorCode::InvalidSpec, "sensor quaternion is not unit length");
}

double surface_curvature(const Vec3& eigenvalues)
{
  const double sum = eigenvalues.sum();
  if (!(sum > 0))
    return 0.0;
  return std::clamp(eigenvalues[0] / sum, 0.0, 1.0 / 3.0);
}

double EigenDecomp::curvature() const
{
  return surface_curvature(eigenvalues);
}

Covariance covariance(std::span<const Vec3> points, std::span<const Index> subset)
{
  if (subset.empty())
    throw Error(ErrorCode::EmptySubset, "covariance of an empty subset");
  Covariance out;
  for (Index i : subset)
    out.centroid += points[i];
  const double inv_k = 1.0 / static_cast<double>(subset.size());
  out.centroid *= inv_k;
  double xx = 0, xy = 0, xz = 0, yy = 0, yz = 0, zz = 0;
  for (Index i : subset) {
    const Vec3 d = points[i] - out.centroid;
    xx += d.x() * d.x();
    xy += d.x() * d.y();
    xz += d.x() * d.z();
    yy += d.y() * d.y();
    yz += d.y() * d.z();
    zz += d.z() * d.z();
  }
  out.matrix << xx, xy, xz, xy, yy, yz, xz, yz, zz;
  out.matrix *= inv_k;
  return out;
}

Covariance covariance(std::span<const Vec3> points)
{
  const auto all = iota_indices(points.size());
  return covariance(points, all);
}

EigenDecomp eigen_sym3(const Mat3& c)
{
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      if (!(std::abs(c(i, j) - c(j, i)) <= 1e-9 * scale))
        throw Error(ErrorCode::NotSymmetric,
                    "entry (" + std::to_string(i) + "," + std::to_string(j) + ") differs from its transpose");
    }
  }

  Mat3 a = 0.5 * (c + c.transpose());
  Mat3 v = Mat3::Identity();
  for (int sweep = 0; sweep < 64; ++sweep) {
    const double off = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
    const double diag = a.diagonal().squaredNorm();
    if (off == 0.0 || off <= 1e-36 * diag)
      break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0)
          continue;
        // Rotation zeroing a(p,q), in the numerically stable tangent form.
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double cs = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * cs;
        for (int r = 0; r < 3; ++r) {
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = cs * arp - sn * arq;
          a(r, q) = sn * arp + cs * arq;
        }
        for (int r = 0; r < 3; ++r) {
          const double apr = a(p, r);
          const double aqr = a(q, r);
          a(p, r) = cs * apr - sn * aqr;
          a(q, r) = sn * apr + cs * aqr;
        }
        for (int r = 0; r < 3; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = cs * vrp - sn * vrq;
          v(r, q) = sn * vrp + cs * vrq;
        }
      }
    }
  }

  std::array<int, 3> order{ 0, 1, 2 };
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    return a(i, i) < a(j, j) || (a(i, i) == a(j, j) && i < j);
  });
  EigenDecomp out;
  for (int j = 0; j < 3; ++j) {
    out.eigenvalues[j] = std::max(0.0, a(order[j], order[j]));
    out.eigenvectors[j] = v.col(order[j]).normalized();
  }
  return out;
}

EigenDecomp analyze(std::span<const Vec3> points, std::span<const Index> subset)
{
  const Covariance cov = covariance(points, subset);
  EigenDecomp out = eigen_sym3(cov.matrix);
  out.centroid = cov.centroid;
  return out;
}

NormalEstimate estimate_normals(std::span<const Vec3> points, int k, const Vec3& viewpoint, unsigned jobs)
{
  if (k < 3)
    throw Error(ErrorCode::TooFewPoints, "normal estimation needs k >= 3, got " + std::to_string(k));
  if (points.size() < static_cast<std::size_t>(k))
    throw Error(ErrorCode::TooFewPoints,
                "cloud has " + std::to_string(points.size()) + " points, fewer than k = " + std::to_string(k));

  const KdTree tree(points);
  NormalEstimate out;
  out.normals.resize(points.size());
  out.curvature.resize(points.size());
  const auto count = static_cast<std::size_t>(k);
  parallel_for(points.size(), jobs, [&](std::size_t i) {
    thread_local std::vector<Neighbor> neighbors;
    thread_local std::vector<Index> members;
    tree.knn(points[i], count, neighbors);
    members.clear();
    for (const auto& nb : neighbors)
      members.push_back(nb.index);
    const EigenDecomp eig = analyze(points, members);
    Vec3 normal = eig.eigenvectors[0];
    if (normal.dot(viewpoint - points[i]) < 0)
      normal = -normal;
    out.normals[i] = normal;
    out.curvature[i] = eig.curvature();
  });
  return out;
}

NormalEstimate estimate_normals(const LabeledCloud& cloud, int k, const Vec3& viewpoint, unsigned jobs)
{
  return estimate_normals(cloud.points, k, viewpoint, jobs);
}

LabeledCloud voxel_downsample(const LabeledCloud& cloud, double leaf)
{
  if (!(leaf > 0))
    throw Error(ErrorCode::NonPositiveLeaf, "voxel leaf must be positive, got " + std::to_string(leaf));

  struct Keyed
  {
    std::array<std::int64_t, 3> key;
    Index index;
  };
  std::vector<Keyed> keyed(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    keyed[i] = { { static_cast<std::int64_t>(std::floor(p.x() / leaf)),
                   static_cast<std::int64_t>(std::floor(p.y() / leaf)),
                   static_cast<std::int64_t>(std::floor(p.z() / leaf)) },
                 static_cast<Index>(i) };
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    return a.key < b.key || (a.key == b.key && a.index < b.index);
  });

  const bool has_labels = cloud.face_label.size() == cloud.size();
  LabeledCloud out;
  out.sensor_pose = cloud.sensor_pose;
  std::vector<std::uint32_t> labels;
  for (std::size_t begin = 0; begin < keyed.size();) {
    std::size_t end = begin;
    Vec3 sum = Vec3::Zero();
    labels.clear();
    while (end < keyed.size() && keyed[end].key == keyed[begin].key) {
      sum += cloud.points[keyed[end].index];
      labels.push_back(has_labels ? cloud.face_label[keyed[end].index] : 0u);
      ++end;
    }
    out.points.push_back(sum / static_cast<double>(end - begin));

    std::sort(labels.begin(), labels.end());
    std::uint32_t best = labels.front();
    std::size_t best_run = 0;
    for (std::size_t r = 0; r < labels.size();) {
      std::size_t s = r;
      while (s < labels.size() && labels[s] == labels[r])
        ++s;
      if (s - r > best_run) {
        best_run = s - r;
        best = labels[r];
      }
      r = s;
    }
    out.face_label.push_back(best);
    begin = end;
  }
  return out;
}

double extent_along(std::span<const Vec3> points, std::span<const Index> subset, const Vec3& direction)
{
  if (subset.empty())
    throw Error(ErrorCode::EmptySubset, "extent of an empty subset");
  if (std::abs(direction.norm() - 1.0) > 1e-6)
    throw Error(ErrorCode::NonUnitDirection, "direction must be unit length");
  double lo = points[subset.front()].dot(direction);
  double hi = lo;
  for (Index i : subset) {
    const double s = points[i].dot(direction);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return hi - lo;
}

IndexSet iota_indices(std::size_t n)
{
  IndexSet out(n);
  std::iota(out.begin(), out.end(), Index{ 0 });
  return out;
}

} // namespace trussseg
