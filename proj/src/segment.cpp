#include "trussseg/segment.hpp"

#include "trussseg/error.hpp"
#include "trussseg/parallel.hpp"
#include "trussseg/random.hpp"
#include "trussseg/spatial_index.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <deque>
#include <numbers>

namespace trussseg {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since)
{
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

void range_check(bool ok, const char* key, const std::string& rule)
{
  if (!ok)
    throw Error(ErrorCode::RangeError, std::string(key) + " " + rule);
}

constexpr std::array<ModeName, 7> kModes{ {
  { "R", StageMode::Full, EigenMode::Ratio },
  { "M", StageMode::Full, EigenMode::Magnitude },
  { "H", StageMode::Full, EigenMode::Hybrid },
  { "WF", StageMode::WithoutFine, EigenMode::Hybrid },
  { "WC_R", StageMode::WithoutCoarse, EigenMode::Ratio },
  { "WC_M", StageMode::WithoutCoarse, EigenMode::Magnitude },
  { "WC_H", StageMode::WithoutCoarse, EigenMode::Hybrid },
} };

IndexSet mask_to_indices(const Mask& mask, std::uint8_t value)
{
  IndexSet out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] == value)
      out.push_back(static_cast<Index>(i));
  }
  return out;
}

} // namespace

void PipelineConfig::validate() const
{
  range_check(voxel_leaf > 0, "voxel_leaf", "must be > 0");
  range_check(ransac_threshold > 0, "ransac_threshold", "must be > 0");
  range_check(ransac_iterations >= 1, "ransac_iterations", "must be >= 1");
  range_check(normal_k >= 3, "normal_k", "must be >= 3");
  range_check(rg_angle_threshold > 0 && rg_angle_threshold < 90, "rg_angle_threshold", "must be in (0, 90) degrees");
  range_check(rg_curvature_threshold > 0, "rg_curvature_threshold", "must be > 0");
  range_check(rg_min_cluster >= 1, "rg_min_cluster", "must be >= 1");
  range_check(ratio_threshold > 0 && ratio_threshold <= 1, "ratio_threshold", "must be in (0, 1]");
  range_check(magnitude_threshold > 0, "magnitude_threshold", "must be > 0");
  range_check(density_radius > 0, "density_radius", "must be > 0");
  range_check(density_min_points >= 0, "density_min_points", "must be >= 0");
}

RansacResult ransac_plane(std::span<const Vec3> points, double threshold, int iterations, std::uint64_t seed)
{
  if (!(threshold > 0))
    throw Error(ErrorCode::RangeError, "ransac threshold must be > 0");
  if (points.size() < 3)
    throw Error(ErrorCode::DegenerateCloud, "RANSAC needs at least three points");
  {
    const EigenDecomp eig = eigen_sym3(covariance(points).matrix);
    if (!(eig.eigenvalues[1] > 1e-14 * std::max(1.0, eig.eigenvalues[2])))
      throw Error(ErrorCode::DegenerateCloud, "points are collinear or coincident");
  }

  Rng rng(derive_seed(seed, 0x5ac));
  const auto n = static_cast<std::uint64_t>(points.size());
  std::optional<Plane> best;
  std::size_t best_count = 0;
  for (int it = 0; it < iterations; ++it) {
    const auto i0 = rng.below(n);
    auto i1 = rng.below(n - 1);
    if (i1 >= i0)
      ++i1;
    // Draw from the n - 2 remaining slots, stepping over the first two picks.
    auto i2 = rng.below(n - 2);
    if (i2 >= std::min(i0, i1))
      ++i2;
    if (i2 >= std::max(i0, i1))
      ++i2;
    const Vec3& a = points[i0];
    const Vec3 ab = points[i1] - a;
    const Vec3 ac = points[i2] - a;
    const Vec3 cross = ab.cross(ac);
    const double norm = cross.norm();
    if (!(norm > 1e-12 * ab.norm() * ac.norm()) || norm == 0.0)
      continue;
    Plane candidate;
    candidate.normal = cross / norm;
    candidate.offset = -candidate.normal.dot(a);
    std::size_t count = 0;
    for (const auto& p : points)
      count += candidate.distance(p) <= threshold ? 1 : 0;
    if (count > best_count) {
      best_count = count;
      best = candidate;
    }
  }
  if (!best)
    throw Error(ErrorCode::DegenerateCloud, "no non-degenerate RANSAC sample was drawn");

  RansacResult out;
  out.plane = *best;
  if (out.plane.offset < 0) {
    out.plane.normal = -out.plane.normal;
    out.plane.offset = -out.plane.offset;
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (out.plane.distance(points[i]) <= threshold)
      out.inliers.push_back(static_cast<Index>(i));
  }
  return out;
}

CoarseSplit coarse_split(const LabeledCloud& cloud, const PipelineConfig& cfg)
{
  if (cloud.empty())
    throw Error(ErrorCode::EmptyCloud, "coarse split of an empty cloud");
  const LabeledCloud voxels = voxel_downsample(cloud, cfg.voxel_leaf);
  const RansacResult fit = ransac_plane(voxels.points, cfg.ransac_threshold, cfg.ransac_iterations, cfg.ransac_seed);

  CoarseSplit out;
  out.inlier_fraction = static_cast<double>(fit.inliers.size()) / static_cast<double>(voxels.size());
  if (out.inlier_fraction < 0.05) {
    out.structure = iota_indices(cloud.size());
    return out;
  }
  out.ground_found = true;
  out.plane = fit.plane;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (fit.plane.distance(cloud.points[i]) <= cfg.ransac_threshold)
      out.ground.push_back(static_cast<Index>(i));
    else
      out.structure.push_back(static_cast<Index>(i));
  }
  return out;
}

void compute_cluster_stats(std::span<const Vec3> points, Cluster& cluster)
{
  cluster.stats = analyze(points, cluster.members);
  const double l1 = cluster.stats.eigenvalues[1];
  const double l2 = cluster.stats.eigenvalues[2];
  cluster.ratio = l2 > 0 ? l1 / l2 : 0.0;
  cluster.extent_along_v2 = extent_along(points, cluster.members, cluster.stats.eigenvectors[2]);
}

std::vector<Cluster> region_grow(std::span<const Vec3> points,
                                 std::span<const Index> subset,
                                 std::span<const Vec3> normals,
                                 std::span<const double> curvature,
                                 const PipelineConfig& cfg)
{
  std::vector<Cluster> clusters;
  if (subset.empty())
    return clusters;
  if (normals.size() != points.size() || curvature.size() != points.size())
    throw Error(ErrorCode::LengthMismatch, "region growing needs normals and curvature for every point");

  std::vector<Vec3> local(subset.size());
  for (std::size_t i = 0; i < subset.size(); ++i)
    local[i] = points[subset[i]];
  const KdTree tree(local);

  std::vector<Index> order(subset.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    order[i] = static_cast<Index>(i);
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    const double ca = curvature[subset[a]];
    const double cb = curvature[subset[b]];
    return ca < cb || (ca == cb && a < b);
  });

  const double cos_threshold = std::cos(cfg.rg_angle_threshold * std::numbers::pi / 180.0);
  const auto k = static_cast<std::size_t>(std::max(1, cfg.normal_k));
  std::vector<std::uint8_t> assigned(subset.size(), 0);
  std::vector<Neighbor> neighbors;
  std::deque<Index> seeds;
  std::vector<Index> region;

  for (Index start : order) {
    if (assigned[start])
      continue;
    region.assign(1, start);
    assigned[start] = 1;
    seeds.assign(1, start);
    while (!seeds.empty()) {
      const Index current = seeds.front();
      seeds.pop_front();
      const Vec3& seed_normal = normals[subset[current]];
      tree.knn(local[current], k, neighbors);
      for (const auto& nb : neighbors) {
        if (assigned[nb.index])
          continue;
        const Index global = subset[nb.index];
        if (std::abs(seed_normal.dot(normals[global])) < cos_threshold)
          continue;
        assigned[nb.index] = 1;
        region.push_back(nb.index);
        if (curvature[global] <= cfg.rg_curvature_threshold)
          seeds.push_back(nb.index);
      }
    }
    if (region.size() < static_cast<std::size_t>(cfg.rg_min_cluster))
      continue;
    Cluster c;
    c.members.reserve(region.size());
    for (Index r : region)
      c.members.push_back(subset[r]);
    std::sort(c.members.begin(), c.members.end());
    compute_cluster_stats(points, c);
    clusters.push_back(std::move(c));
  }
  return clusters;
}

Verdict classify_cluster(const Cluster& cluster, EigenMode mode, const PipelineConfig& cfg)
{
  if (!(cluster.stats.eigenvalues[2] > 0))
    return Verdict::Ground;
  const bool slender = cluster.ratio <= cfg.ratio_threshold;
  const bool short_enough = cluster.extent_along_v2 <= cfg.magnitude_threshold;
  bool structure = false;
  switch (mode) {
    case EigenMode::Ratio: structure = slender; break;
    case EigenMode::Magnitude: structure = short_enough; break;
    case EigenMode::Hybrid: structure = slender && short_enough; break;
  }
  return structure ? Verdict::Structure : Verdict::Ground;
}

Verdict classify_cluster(const Cluster& cluster, const PipelineConfig& cfg)
{
  return classify_cluster(cluster, cfg.eigen_mode, cfg);
}

Mask density_filter(std::span<const Vec3> points, const Mask& structure, const PipelineConfig& cfg)
{
  if (structure.size() != points.size())
    throw Error(ErrorCode::LengthMismatch, "density filter mask length differs from point count");
  Mask out = structure;
  const IndexSet marked = mask_to_indices(structure, 1);
  if (marked.empty())
    return out;

  std::vector<Vec3> reference;
  std::span<const Vec3> indexed = points;
  if (cfg.density_count_structure_only) {
    reference.reserve(marked.size());
    for (Index i : marked)
      reference.push_back(points[i]);
    indexed = reference;
  }
  const KdTree tree(indexed);
  // The query point itself is always within the radius, hence the +1.
  const auto needed = static_cast<std::size_t>(cfg.density_min_points) + 1;
  parallel_for(marked.size(), cfg.jobs, [&](std::size_t m) {
    const Index i = marked[m];
    if (!tree.radius_has_at_least(points[i], cfg.density_radius, needed))
      out[i] = 0;
  });
  return out;
}

SegmentationOutput run_pipeline(const LabeledCloud& cloud, const PipelineConfig& cfg)
{
  cfg.validate();
  if (cloud.empty())
    throw Error(ErrorCode::EmptyCloud, "segmentation of an empty cloud");
  const auto total_start = Clock::now();
  SegmentationOutput out;
  const std::size_t n = cloud.size();
  Mask structure(n, 0);

  IndexSet fine_subset;
  if (cfg.stage_mode != StageMode::WithoutCoarse) {
    const auto t = Clock::now();
    CoarseSplit split = coarse_split(cloud, cfg);
    out.latency.coarse_ms = elapsed_ms(t);
    if (!split.ground_found)
      out.warnings.push_back("GroundNotFound: RANSAC inlier fraction " + std::to_string(split.inlier_fraction) +
                             " below 0.05, every point kept as structure");
    out.plane = split.plane;
    for (Index i : split.structure)
      structure[i] = 1;
    out.coarse_ground = std::move(split.ground);
    out.coarse_structure = std::move(split.structure);
    if (cfg.stage_mode == StageMode::Full)
      fine_subset = out.coarse_ground;
  } else {
    fine_subset = iota_indices(n);
  }

  if (cfg.stage_mode != StageMode::WithoutFine && fine_subset.size() >= 3) {
    auto t = Clock::now();
    std::vector<Vec3> normals(n, Vec3::Zero());
    std::vector<double> curvature(n, 0.0);
    const bool whole = cfg.normals_on_whole_cloud || fine_subset.size() == n;
    if (whole) {
      const int k = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg.normal_k), n));
      auto est = estimate_normals(cloud.points, std::max(3, k), Vec3::Zero(), cfg.jobs);
      normals = std::move(est.normals);
      curvature = std::move(est.curvature);
    } else {
      std::vector<Vec3> local(fine_subset.size());
      for (std::size_t i = 0; i < fine_subset.size(); ++i)
        local[i] = cloud.points[fine_subset[i]];
      const int k = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg.normal_k), local.size()));
      auto est = estimate_normals(local, std::max(3, k), Vec3::Zero(), cfg.jobs);
      for (std::size_t i = 0; i < fine_subset.size(); ++i) {
        normals[fine_subset[i]] = est.normals[i];
        curvature[fine_subset[i]] = est.curvature[i];
      }
    }
    out.latency.normals_ms = elapsed_ms(t);

    t = Clock::now();
    out.clusters = region_grow(cloud.points, fine_subset, normals, curvature, cfg);
    out.latency.region_growing_ms = elapsed_ms(t);

    t = Clock::now();
    for (auto& c : out.clusters) {
      c.verdict = classify_cluster(c, cfg);
      if (c.verdict == Verdict::Structure) {
        for (Index i : c.members)
          structure[i] = 1;
      }
    }
    out.latency.classify_ms = elapsed_ms(t);
  }

  const auto t = Clock::now();
  out.prediction = density_filter(cloud.points, structure, cfg);
  for (std::size_t i = 0; i < n; ++i) {
    if (structure[i] && !out.prediction[i])
      out.density_removed.push_back(static_cast<Index>(i));
  }
  out.latency.density_ms = elapsed_ms(t);
  out.latency.total_ms = elapsed_ms(total_start);
  return out;
}

std::span<const ModeName> all_modes()
{
  return kModes;
}

void apply_mode(std::string_view name, PipelineConfig& cfg)
{
  for (const auto& m : kModes) {
    if (m.name == name) {
      cfg.stage_mode = m.stage;
      cfg.eigen_mode = m.eigen;
      return;
    }
  }
  std::string valid;
  for (const auto& m : kModes) {
    if (!valid.empty())
      valid += ", ";
    valid += m.name;
  }
  throw Error(ErrorCode::RangeError, "unknown mode '" + std::string(name) + "' (valid: " + valid + ")");
}

std::string mode_name(const PipelineConfig& cfg)
{
  if (cfg.stage_mode == StageMode::WithoutFine)
    return "WF";
  for (const auto& m : kModes) {
    if (m.stage == cfg.stage_mode && m.eigen == cfg.eigen_mode)
      return std::string(m.name);
  }
  return "?";
}

std::string_view to_string(EigenMode mode)
{
  switch (mode) {
    case EigenMode::Ratio: return "ratio";
    case EigenMode::Magnitude: return "magnitude";
    case EigenMode::Hybrid: return "hybrid";
  }
  return "?";
}

std::string_view to_string(StageMode mode)
{
  switch (mode) {
    case StageMode::Full: return "full";
    case StageMode::WithoutFine: return "without_fine";
    case StageMode::WithoutCoarse: return "without_coarse";
  }
  return "?";
}

} // namespace trussseg
