#include "trussseg/synth.hpp"

#include "trussseg/error.hpp"
#include "trussseg/parallel.hpp"
#include "trussseg/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace trussseg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double deg2rad(double d)
{
  return d * std::numbers::pi / 180.0;
}

void require(bool ok, const std::string& what)
{
  if (!ok)
    throw Error(ErrorCode::InvalidSpec, what);
}

/// Slab test against an axis-aligned box; returns the overlap of [t0, t1].
bool clip_to_box(const Vec3& lo, const Vec3& hi, const Ray& ray, double& t0, double& t1)
{
  for (int a = 0; a < 3; ++a) {
    const double d = ray.direction[a];
    const double o = ray.origin[a];
    if (d == 0.0) {
      if (o < lo[a] || o > hi[a])
        return false;
      continue;
    }
    double ta = (lo[a] - o) / d;
    double tb = (hi[a] - o) / d;
    if (ta > tb)
      std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1)
      return false;
  }
  return true;
}

/// Smaller root of a t^2 + b t + c = 0 that is >= t_min, if any.
std::optional<double> entry_root(double a, double b, double c)
{
  if (a <= 0)
    return std::nullopt;
  const double disc = b * b - 4 * a * c;
  if (disc < 0)
    return std::nullopt;
  const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  double r0 = q / a;
  double r1 = q != 0 ? c / q : r0;
  if (r0 > r1)
    std::swap(r0, r1);
  return r0;
}

Eigen::Quaterniond random_rotation(Rng& rng)
{
  // Shoemake's uniform unit quaternion.
  const double u1 = rng.uniform();
  const double u2 = rng.uniform() * 2 * std::numbers::pi;
  const double u3 = rng.uniform() * 2 * std::numbers::pi;
  const double a = std::sqrt(1 - u1);
  const double b = std::sqrt(u1);
  return Eigen::Quaterniond(a * std::sin(u2), a * std::cos(u2), b * std::sin(u3), b * std::cos(u3)).normalized();
}

} // namespace

// ---------------------------------------------------------------------------

void SensorConfig::validate() const
{
  require(v_resolution >= 1 && h_resolution >= 1, "sensor resolutions must be >= 1");
  require(min_range > 0 && min_range < max_range, "sensor needs 0 < min_range < max_range");
  require(v_fov > 0 && v_fov <= 180, "sensor v_fov must be in (0, 180]");
  require(h_fov > 0 && h_fov <= 360, "sensor h_fov must be in (0, 360]");
  require(noise_sigma >= 0, "sensor noise_sigma must be >= 0");
}

void TrussSpec::validate() const
{
  for (int n : node_counts)
    require(n >= 2, "truss node counts must be >= 2 per axis");
  require(bar_length > 0 && bar_width > 0, "truss bar dimensions must be positive");
  require(bar_width < bar_length, "truss bar_width must be smaller than bar_length");
}

Vec3 TrussSpec::span() const
{
  return Vec3(node_counts[0] - 1, node_counts[1] - 1, node_counts[2] - 1) * bar_length;
}

double Heightfield::height(double x, double y) const
{
  if (amplitude == 0.0)
    return 0.0;
  const double k = 2 * std::numbers::pi / wavelength;
  return amplitude * std::sin(k * x) * std::sin(k * y);
}

double Heightfield::lipschitz() const
{
  return std::abs(amplitude) * 2 * std::numbers::pi / wavelength;
}

Aabb bounds_of(const Primitive& primitive)
{
  return std::visit(
    [](const auto& p) -> Aabb {
      using T = std::decay_t<decltype(p)>;
      Aabb b;
      if constexpr (std::is_same_v<T, OrientedBox>) {
        const Vec3 r = p.rotation.cwiseAbs() * p.half_extents;
        b.lo = p.center - r;
        b.hi = p.center + r;
      } else if constexpr (std::is_same_v<T, Cylinder>) {
        b.lo = p.base_center - Vec3(p.radius, p.radius, 0);
        b.hi = p.base_center + Vec3(p.radius, p.radius, p.height);
      } else if constexpr (std::is_same_v<T, Ellipsoid>) {
        b.lo = p.center - p.radii;
        b.hi = p.center + p.radii;
      } else {
        const double a = std::abs(p.amplitude);
        b.lo = Vec3(-p.half_size, -p.half_size, -a);
        b.hi = Vec3(p.half_size, p.half_size, a);
      }
      return b;
    },
    primitive);
}

// ---------------------------------------------------------------------------
// Intersections

std::optional<Hit> intersect(const Ray& ray, const OrientedBox& box, double t_min, double t_max)
{
  const Vec3 o = box.rotation.transpose() * (ray.origin - box.center);
  const Vec3 d = box.rotation.transpose() * ray.direction;
  const Vec3& h = box.half_extents;
  if ((o.array().abs() < h.array()).all())
    return std::nullopt;
  double t_near = -kInf;
  double t_far = kInf;
  int face = -1;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (std::abs(o[a]) > h[a])
        return std::nullopt;
      continue;
    }
    const double t1 = (-h[a] - o[a]) / d[a];
    const double t2 = (h[a] - o[a]) / d[a];
    const double entry = std::min(t1, t2);
    const double exit = std::max(t1, t2);
    if (entry > t_near) {
      t_near = entry;
      face = d[a] > 0 ? 2 * a : 2 * a + 1;
    }
    t_far = std::min(t_far, exit);
  }
  if (face < 0 || t_near > t_far || t_near < t_min || t_near > t_max)
    return std::nullopt;
  return Hit{ t_near, box.face_labels[static_cast<std::size_t>(face)], 0 };
}

std::optional<Hit> intersect(const Ray& ray, const Cylinder& cyl, double t_min, double t_max)
{
  const Vec3 o = ray.origin - cyl.base_center;
  const Vec3& d = ray.direction;
  const double r2 = cyl.radius * cyl.radius;
  if (o.x() * o.x() + o.y() * o.y() < r2 && o.z() > 0 && o.z() < cyl.height)
    return std::nullopt;

  double best = kInf;
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a > 0) {
    const double b = 2 * (o.x() * d.x() + o.y() * d.y());
    const double c = o.x() * o.x() + o.y() * o.y() - r2;
    if (const auto t = entry_root(a, b, c)) {
      const double z = o.z() + *t * d.z();
      if (z >= 0 && z <= cyl.height && *t >= t_min)
        best = *t;
    }
  }
  if (d.z() != 0) {
    // Entry cap: the bottom when travelling up, the top when travelling down.
    const double zc = d.z() > 0 ? 0.0 : cyl.height;
    const double t = (zc - o.z()) / d.z();
    const double x = o.x() + t * d.x();
    const double y = o.y() + t * d.y();
    if (t >= t_min && x * x + y * y <= r2)
      best = std::min(best, t);
  }
  if (!(best <= t_max))
    return std::nullopt;
  return Hit{ best, cyl.label, 0 };
}

std::optional<Hit> intersect(const Ray& ray, const Ellipsoid& ell, double t_min, double t_max)
{
  const Vec3 o = (ray.origin - ell.center).cwiseQuotient(ell.radii);
  const Vec3 d = ray.direction.cwiseQuotient(ell.radii);
  const double c = o.squaredNorm() - 1.0;
  if (c < 0)
    return std::nullopt;
  const auto t = entry_root(d.squaredNorm(), 2 * o.dot(d), c);
  if (!t || *t < t_min || *t > t_max)
    return std::nullopt;
  return Hit{ *t, ell.label, 0 };
}

std::optional<Hit> intersect(const Ray& ray, const Heightfield& ground, double t_min, double t_max)
{
  const double a = std::abs(ground.amplitude);
  const double pad = 1e-9;
  double t0 = t_min;
  double t1 = t_max;
  if (!clip_to_box(Vec3(-ground.half_size, -ground.half_size, -a - pad),
                   Vec3(ground.half_size, ground.half_size, a + pad),
                   ray,
                   t0,
                   t1))
    return std::nullopt;

  const Vec3& o = ray.origin;
  const Vec3& d = ray.direction;
  auto gap = [&](double t) {
    return o.z() + t * d.z() - ground.height(o.x() + t * d.x(), o.y() + t * d.y());
  };
  // |d gap / dt| <= bound, so stepping by gap / bound never skips a crossing.
  const double bound = std::abs(d.z()) + ground.lipschitz() * std::hypot(d.x(), d.y());
  double t = t0;
  double g = gap(t);
  if (g < 0)
    return std::nullopt;
  if (g == 0)
    return Hit{ t, ground.label, 0 };
  if (bound == 0)
    return std::nullopt;

  constexpr double kMinStep = 1e-3;
  for (int iter = 0; iter < 100000 && t < t1; ++iter) {
    const double tn = std::min(t1, t + std::max(g / bound, kMinStep));
    const double gn = gap(tn);
    if (gn <= 0) {
      double lo = t;
      double hi = tn;
      double glo = g;
      double ghi = gn;
      for (int b = 0; b < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++b) {
        const double mid = 0.5 * (lo + hi);
        const double gm = gap(mid);
        if (gm > 0) {
          lo = mid;
          glo = gm;
        } else {
          hi = mid;
          ghi = gm;
        }
      }
      const double root = std::abs(glo) < std::abs(ghi) ? lo : hi;
      return Hit{ root, ground.label, 0 };
    }
    t = tn;
    g = gn;
  }
  return std::nullopt;
}

std::optional<Hit> intersect(const Ray& ray, const Primitive& primitive, double t_min, double t_max)
{
  return std::visit([&](const auto& p) { return intersect(ray, p, t_min, t_max); }, primitive);
}

double surface_residual(const Primitive& primitive, const Vec3& p)
{
  return std::visit(
    [&](const auto& prim) -> double {
      using T = std::decay_t<decltype(prim)>;
      if constexpr (std::is_same_v<T, OrientedBox>) {
        const Vec3 q = (prim.rotation.transpose() * (p - prim.center)).cwiseAbs() - prim.half_extents;
        const double outside = q.cwiseMax(0.0).norm();
        return outside + std::min(q.maxCoeff(), 0.0);
      } else if constexpr (std::is_same_v<T, Cylinder>) {
        const Vec3 o = p - prim.base_center;
        const double dr = std::hypot(o.x(), o.y()) - prim.radius;
        const double dz = std::max(-o.z(), o.z() - prim.height);
        return std::hypot(std::max(dr, 0.0), std::max(dz, 0.0)) + std::min(std::max(dr, dz), 0.0);
      } else if constexpr (std::is_same_v<T, Ellipsoid>) {
        return ((p - prim.center).cwiseQuotient(prim.radii).norm() - 1.0) * prim.radii.maxCoeff();
      } else {
        return p.z() - prim.height(p.x(), p.y());
      }
    },
    primitive);
}

// ---------------------------------------------------------------------------
// Scene

Scene::Scene(std::vector<Primitive> primitives, std::optional<Aabb> structure_bounds)
  : primitives_(std::move(primitives))
  , structure_bounds_(structure_bounds)
{
  bounds_.reserve(primitives_.size());
  for (const auto& p : primitives_)
    bounds_.push_back(bounds_of(p));
  order_.resize(primitives_.size());
  for (std::uint32_t i = 0; i < order_.size(); ++i)
    order_[i] = i;
  if (!primitives_.empty())
    build(0, static_cast<std::uint32_t>(order_.size()));
}

int Scene::build(std::uint32_t begin, std::uint32_t end)
{
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Aabb box;
  Aabb centers;
  for (auto i = begin; i < end; ++i) {
    box.grow(bounds_[order_[i]]);
    centers.grow(0.5 * (bounds_[order_[i]].lo + bounds_[order_[i]].hi));
  }
  nodes_[id].box = box;
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (end - begin <= 4)
    return id;
  int axis = 0;
  (centers.hi - centers.lo).maxCoeff(&axis);
  const auto mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](auto a, auto b) {
    const double ca = bounds_[a].lo[axis] + bounds_[a].hi[axis];
    const double cb = bounds_[b].lo[axis] + bounds_[b].hi[axis];
    return ca < cb || (ca == cb && a < b);
  });
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::optional<Hit> Scene::intersect(const Ray& ray, double t_max) const
{
  if (nodes_.empty())
    return std::nullopt;
  std::optional<Hit> best;
  double best_t = t_max;
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    double t0 = 0.0;
    double t1 = best_t;
    if (!clip_to_box(node.box.lo, node.box.hi, ray, t0, t1))
      continue;
    if (node.left < 0) {
      for (auto i = node.begin; i < node.end; ++i) {
        const auto idx = order_[i];
        auto hit = trussseg::intersect(ray, primitives_[idx], 0.0, best_t);
        if (hit && (!best || hit->t < best->t || (hit->t == best->t && idx < best->primitive))) {
          hit->primitive = idx;
          best = hit;
          best_t = hit->t;
        }
      }
      continue;
    }
    stack[top++] = node.right;
    stack[top++] = node.left;
  }
  return best;
}

bool Scene::near_solid(const Vec3& p, double clearance) const
{
  for (const auto& prim : primitives_) {
    if (surface_residual(prim, p) < clearance)
      return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Construction

std::uint32_t truss_label_count(const TrussSpec& spec)
{
  const std::uint32_t bars = static_cast<std::uint32_t>(build_truss(spec).size());
  return spec.label_mode == LabelMode::PerFace ? 6 * bars : bars;
}

std::vector<OrientedBox> build_truss(const TrussSpec& spec)
{
  spec.validate();
  const int nx = spec.node_counts[0];
  const int ny = spec.node_counts[1];
  const int nz = spec.node_counts[2];
  const double len = spec.bar_length;
  const double hw = 0.5 * spec.bar_width;
  std::vector<OrientedBox> bars;

  auto node = [&](int i, int j, int k) -> Vec3 { return Vec3(i, j, k) * len; };
  auto add_axis_bar = [&](const Vec3& a, const Vec3& b, int axis) {
    OrientedBox box;
    box.center = 0.5 * (a + b);
    box.half_extents = Vec3::Constant(hw);
    box.half_extents[axis] = 0.5 * len;
    bars.push_back(box);
  };

  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i + 1 < nx; ++i)
        add_axis_bar(node(i, j, k), node(i + 1, j, k), 0);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j + 1 < ny; ++j)
      for (int i = 0; i < nx; ++i)
        add_axis_bar(node(i, j, k), node(i, j + 1, k), 1);
  for (int k = 0; k + 1 < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        add_axis_bar(node(i, j, k), node(i, j, k + 1), 2);

  if (spec.crossed) {
    auto add_diagonal = [&](const Vec3& a, const Vec3& b, const Vec3& panel_normal) {
      OrientedBox box;
      const Vec3 axis = (b - a).normalized();
      box.center = 0.5 * (a + b);
      box.half_extents = Vec3(0.5 * (b - a).norm(), hw, hw);
      box.rotation.col(0) = axis;
      box.rotation.col(1) = panel_normal;
      box.rotation.col(2) = axis.cross(panel_normal);
      bars.push_back(box);
    };
    // Exterior XZ panels (j = 0 and j = ny-1), alternating direction.
    for (int j : { 0, ny - 1 }) {
      for (int k = 0; k + 1 < nz; ++k) {
        for (int i = 0; i + 1 < nx; ++i) {
          if ((i + k) % 2 == 0)
            add_diagonal(node(i, j, k), node(i + 1, j, k + 1), Vec3::UnitY());
          else
            add_diagonal(node(i + 1, j, k), node(i, j, k + 1), Vec3::UnitY());
        }
      }
    }
    // Exterior YZ panels (i = 0 and i = nx-1).
    for (int i : { 0, nx - 1 }) {
      for (int k = 0; k + 1 < nz; ++k) {
        for (int j = 0; j + 1 < ny; ++j) {
          if ((j + k) % 2 == 0)
            add_diagonal(node(i, j, k), node(i, j + 1, k + 1), Vec3::UnitX());
          else
            add_diagonal(node(i, j + 1, k), node(i, j, k + 1), Vec3::UnitX());
        }
      }
    }
  }

  std::uint32_t next = 1;
  for (auto& bar : bars) {
    for (auto& label : bar.face_labels)
      label = spec.label_mode == LabelMode::PerFace ? next++ : next;
    if (spec.label_mode == LabelMode::PerBar)
      ++next;
  }
  return bars;
}

void SceneSpec::validate() const
{
  if (structure)
    structure->validate();
  require(ground.wavelength > 0 && ground.half_size > 0, "ground wavelength and half_size must be positive");
  require(trees.count >= 0 && boxes.count >= 0, "distractor counts must be >= 0");
  require(trees.scale_min > 0 && trees.scale_min <= trees.scale_max, "tree scale bounds must satisfy 0 < min <= max");
  require(trees.placement_half_size > 0 && trees.clearance >= 0, "tree placement bounds must be positive");
  require(boxes.length_min > 0 && boxes.length_min <= boxes.length_max, "box length bounds must satisfy 0 < min <= max");
  require(boxes.width_min > 0 && boxes.width_min <= boxes.width_max, "box width bounds must satisfy 0 < min <= max");
  require(boxes.placement_half_size > 0 && boxes.height_max > 0, "box placement bounds must be positive");
  require(keep_clear_radius >= 0, "keep_clear_radius must be >= 0");
}

Scene build_scene(const SceneSpec& spec)
{
  spec.validate();
  std::vector<Primitive> prims;
  Heightfield ground;
  ground.amplitude = spec.ground.amplitude;
  ground.wavelength = spec.ground.wavelength;
  ground.half_size = spec.ground.half_size;
  prims.emplace_back(ground);

  std::optional<Aabb> structure_bounds;
  std::uint32_t next_label = 1;
  if (spec.structure) {
    const Vec3 span = spec.structure->span();
    const Vec3 offset(-0.5 * span.x(), -0.5 * span.y(), 0.5 * spec.structure->bar_width);
    Aabb b;
    for (auto bar : build_truss(*spec.structure)) {
      bar.center += offset;
      b.grow(bounds_of(bar));
      for (auto l : bar.face_labels)
        next_label = std::max(next_label, l + 1);
      prims.emplace_back(bar);
    }
    structure_bounds = b;
  }

  Rng rng(derive_seed(spec.seed, 0x7ee5));
  const auto& trees = spec.trees;
  for (int n = 0; n < trees.count; ++n) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      const double s = rng.uniform(trees.scale_min, trees.scale_max);
      const double x = rng.uniform(-trees.placement_half_size, trees.placement_half_size);
      const double y = rng.uniform(-trees.placement_half_size, trees.placement_half_size);
      const double canopy_r = 1.5 * s;
      if (structure_bounds) {
        const double m = trees.clearance + canopy_r;
        if (x > structure_bounds->lo.x() - m && x < structure_bounds->hi.x() + m &&
            y > structure_bounds->lo.y() - m && y < structure_bounds->hi.y() + m)
          continue;
      }
      if (std::hypot(x - spec.keep_clear.x(), y - spec.keep_clear.y()) < canopy_r + spec.keep_clear_radius)
        continue;
      const double z0 = ground.height(x, y);
      Cylinder trunk;
      trunk.base_center = Vec3(x, y, z0 - 0.3);
      trunk.radius = 0.15 * s;
      trunk.height = 3.0 * s + 0.3;
      Ellipsoid canopy;
      canopy.center = Vec3(x, y, z0 + 3.0 * s + 0.9 * s);
      canopy.radii = Vec3(canopy_r, canopy_r, 1.8 * s);
      prims.emplace_back(trunk);
      prims.emplace_back(canopy);
      break;
    }
  }

  const auto& bf = spec.boxes;
  for (int n = 0; n < bf.count; ++n) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      OrientedBox box;
      const double length = rng.uniform(bf.length_min, bf.length_max);
      const double width = rng.uniform(bf.width_min, bf.width_max);
      box.half_extents = Vec3(0.5 * length, 0.5 * width, 0.5 * width);
      box.rotation = random_rotation(rng).toRotationMatrix();
      const double x = rng.uniform(-bf.placement_half_size, bf.placement_half_size);
      const double y = rng.uniform(-bf.placement_half_size, bf.placement_half_size);
      const double lift = rng.uniform(0.5 * width, std::max(0.5 * width, bf.height_max));
      box.center = Vec3(x, y, ground.height(x, y) + lift);
      if (surface_residual(box, spec.keep_clear) < spec.keep_clear_radius)
        continue;
      for (auto& l : box.face_labels)
        l = next_label++;
      prims.emplace_back(box);
      break;
    }
  }
  return Scene(std::move(prims), structure_bounds);
}

Pose sample_sensor_pose(const PoseSpec& spec, const std::optional<Aabb>& bounds, std::uint64_t seed, const Scene* scene)
{
  Rng rng(derive_seed(seed, 0x905e));
  auto orientation = [&] {
    const double tilt = deg2rad(spec.max_tilt_deg);
    const double yaw = rng.uniform(0.0, 2 * std::numbers::pi);
    const double pitch = tilt > 0 ? rng.uniform(-tilt, tilt) : 0.0;
    const double roll = tilt > 0 ? rng.uniform(-tilt, tilt) : 0.0;
    return Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
                              Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .normalized();
  };

  Pose pose;
  if (spec.mode == PoseMode::FixedPositionRandomOrientation) {
    pose.translation = spec.fixed_position;
    pose.rotation = orientation();
    return pose;
  }

  if (!bounds)
    throw Error(ErrorCode::InvalidBounds, "within-structure pose sampling needs structure bounds");
  Vec3 lo = bounds->lo;
  Vec3 hi = bounds->hi;
  if (spec.height_min > 0)
    lo.z() = std::max(lo.z(), spec.height_min);
  if (spec.height_max > 0)
    hi.z() = std::min(hi.z(), spec.height_max);
  if (!((hi.array() > lo.array()).all()) || !lo.allFinite() || !hi.allFinite())
    throw Error(ErrorCode::InvalidBounds, "within-structure pose bounds are degenerate");

  for (int attempt = 0; attempt < 10000; ++attempt) {
    const Vec3 p(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()), rng.uniform(lo.z(), hi.z()));
    if (scene && scene->near_solid(p, spec.clearance))
      continue;
    pose.translation = p;
    pose.rotation = orientation();
    return pose;
  }
  throw Error(ErrorCode::InvalidBounds, "no sensor position clear of solids inside the structure bounds");
}

// ---------------------------------------------------------------------------
// Ray casting

Vec3 beam_direction(const SensorConfig& cfg, int v, int h)
{
  const double elevation =
    cfg.v_resolution == 1 ? 0.0 : deg2rad(-0.5 * cfg.v_fov + v * cfg.v_fov / (cfg.v_resolution - 1));
  const double azimuth = deg2rad(h * cfg.h_fov / cfg.h_resolution);
  return Vec3(std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
}

LabeledCloud raycast_scan(const Scene& scene, const Pose& pose, const SensorConfig& cfg, std::uint64_t noise_seed, unsigned jobs)
{
  cfg.validate();
  LabeledCloud out;
  out.sensor_pose = pose;
  if (scene.empty())
    return out;

  const Mat3 rot = pose.rotation.toRotationMatrix();
  const std::size_t n_rays = cfg.ray_count();
  // range < 0 marks a discarded ray.
  std::vector<double> range(n_rays, -1.0);
  std::vector<std::uint32_t> label(n_rays, 0);
  const auto h_res = static_cast<std::size_t>(cfg.h_resolution);
  parallel_for(static_cast<std::size_t>(cfg.v_resolution), jobs, [&](std::size_t v) {
    for (std::size_t h = 0; h < h_res; ++h) {
      const std::size_t r = v * h_res + h;
      const Vec3 dir = rot * beam_direction(cfg, static_cast<int>(v), static_cast<int>(h));
      const auto hit = scene.intersect(Ray{ pose.translation, dir }, cfg.max_range);
      if (!hit || hit->t < cfg.min_range || hit->t > cfg.max_range)
        continue;
      double t = hit->t;
      if (cfg.noise_sigma > 0) {
        Rng rng(derive_seed(noise_seed, r));
        t += cfg.noise_sigma * rng.normal();
      }
      range[r] = std::max(t, 0.0);
      label[r] = hit->label;
    }
  });

  for (std::size_t r = 0; r < n_rays; ++r) {
    if (range[r] < 0)
      continue;
    const int v = static_cast<int>(r / h_res);
    const int h = static_cast<int>(r % h_res);
    out.points.push_back(beam_direction(cfg, v, h) * range[r]);
    out.face_label.push_back(label[r]);
  }
  return out;
}

LabeledCloud raycast_scan(const Scene& scene, const Pose& pose, const SensorConfig& cfg)
{
  return raycast_scan(scene, pose, cfg, cfg.seed);
}

// ---------------------------------------------------------------------------
// Datasets

LabeledCloud simulate_scan(const DatasetSpec& spec, const Scene& static_scene, std::size_t index, Pose* pose_out, unsigned jobs)
{
  const std::uint64_t scan_seed = derive_seed(spec.seed, index);
  Scene local;
  const Scene* scene = &static_scene;
  if (spec.randomize_scene_per_scan) {
    SceneSpec s = spec.scene;
    s.seed = derive_seed(scan_seed, 1);
    local = build_scene(s);
    scene = &local;
  }
  const Pose pose = sample_sensor_pose(spec.pose, scene->structure_bounds(), derive_seed(scan_seed, 2), scene);
  if (pose_out)
    *pose_out = pose;
  return raycast_scan(*scene, pose, spec.sensor, derive_seed(scan_seed ^ spec.sensor.seed, 3), jobs);
}

std::string manifest_line(const ManifestRecord& record)
{
  nlohmann::ordered_json j;
  j["file"] = record.file;
  j["seed"] = record.seed;
  const auto& t = record.pose.translation;
  const auto& q = record.pose.rotation;
  j["pose"] = { { "translation", { t.x(), t.y(), t.z() } }, { "rotation_wxyz", { q.w(), q.x(), q.y(), q.z() } } };
  j["spec_hash"] = record.spec_hash;
  return j.dump();
}

std::vector<ManifestRecord> generate_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir, unsigned jobs)
{
  if (spec.n_scans < 1)
    throw Error(ErrorCode::InvalidSpec, "a dataset needs at least one scan");
  spec.sensor.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "clouds", ec);
  if (ec)
    throw Error(ErrorCode::IoError, "cannot create " + (out_dir / "clouds").string() + ": " + ec.message());

  const Scene static_scene = spec.randomize_scene_per_scan ? Scene() : build_scene(spec.scene);
  std::vector<ManifestRecord> records(spec.n_scans);
  parallel_for(spec.n_scans, jobs, [&](std::size_t i) {
    char name[32];
    std::snprintf(name, sizeof name, "scan_%05zu.pcd", i);
    ManifestRecord& rec = records[i];
    rec.file = std::string("clouds/") + name;
    rec.seed = derive_seed(spec.seed, i);
    rec.spec_hash = spec.spec_hash;
    const LabeledCloud cloud = simulate_scan(spec, static_scene, i, &rec.pose);
    write_pcd(cloud, out_dir / rec.file, spec.pcd_mode);
  });

  std::string manifest;
  for (const auto& rec : records)
    manifest += manifest_line(rec) + "\n";
  write_file(out_dir / "manifest.json-lines", manifest);
  return records;
}

} // namespace trussseg
