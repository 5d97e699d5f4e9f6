#include "support.hpp"

#include "trussseg/error.hpp"
#include "trussseg/io.hpp"
#include "trussseg/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>

using namespace trussseg;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Minimum-distance hit over every primitive, ties to the lowest index.
std::optional<Hit> brute_intersect(const Scene& scene, const Ray& ray, double t_max)
{
  std::optional<Hit> best;
  const auto& prims = scene.primitives();
  for (std::size_t i = 0; i < prims.size(); ++i) {
    auto h = intersect(ray, prims[i], 0.0, t_max);
    if (h && (!best || h->t < best->t)) {
      h->primitive = i;
      best = h;
    }
  }
  return best;
}

double min_residual(const Scene& scene, const Vec3& p)
{
  double best = kInf;
  for (const auto& prim : scene.primitives())
    best = std::min(best, std::abs(surface_residual(prim, p)));
  return best;
}

Scene random_small_scene(Rng& rng)
{
  std::vector<Primitive> prims;
  Heightfield ground;
  ground.amplitude = rng.uniform(0, 0.4);
  ground.wavelength = rng.uniform(3, 12);
  ground.half_size = 20;
  prims.emplace_back(ground);
  std::uint32_t label = 1;
  const int n = 3 + static_cast<int>(rng.below(10));
  for (int i = 0; i < n; ++i) {
    const Vec3 c(rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(0.5, 4));
    switch (rng.below(3)) {
      case 0: {
        OrientedBox b;
        b.center = c;
        b.half_extents = Vec3(rng.uniform(0.05, 2), rng.uniform(0.05, 2), rng.uniform(0.05, 2));
        b.rotation = test_support::random_rotation(rng);
        for (auto& l : b.face_labels)
          l = label++;
        prims.emplace_back(b);
        break;
      }
      case 1: {
        Cylinder cyl;
        cyl.base_center = Vec3(c.x(), c.y(), -0.3);
        cyl.radius = rng.uniform(0.1, 1);
        cyl.height = rng.uniform(0.5, 5);
        prims.emplace_back(cyl);
        break;
      }
      default: {
        Ellipsoid e;
        e.center = c;
        e.radii = Vec3(rng.uniform(0.2, 2), rng.uniform(0.2, 2), rng.uniform(0.2, 2));
        prims.emplace_back(e);
        break;
      }
    }
  }
  return Scene(std::move(prims));
}

bool same_primitive(const Primitive& a, const Primitive& b)
{
  if (a.index() != b.index())
    return false;
  const Aabb ba = bounds_of(a);
  const Aabb bb = bounds_of(b);
  return ba.lo == bb.lo && ba.hi == bb.hi;
}

} // namespace

TEST_CASE("truss bar counts follow the grid formula")
{
  TrussSpec s;
  s.node_counts = { 2, 2, 2 };
  const auto bars = build_truss(s);
  CHECK(bars.size() == 12);
  std::set<std::uint32_t> labels;
  for (const auto& b : bars)
    labels.insert(b.face_labels.begin(), b.face_labels.end());
  CHECK(labels.size() == 72);
  CHECK(*labels.begin() == 1);
  CHECK(*labels.rbegin() == 72);
  CHECK(truss_label_count(s) == 72);

  s.label_mode = LabelMode::PerBar;
  const auto per_bar = build_truss(s);
  for (std::size_t i = 0; i < per_bar.size(); ++i)
    for (auto l : per_bar[i].face_labels)
      CHECK(l == i + 1);
  CHECK(truss_label_count(s) == 12);

  for (const auto& nodes : { std::array<int, 3>{ 6, 5, 10 }, std::array<int, 3>{ 3, 4, 2 } }) {
    TrussSpec t;
    t.node_counts = nodes;
    const int nx = nodes[0], ny = nodes[1], nz = nodes[2];
    const int axis_bars = (nx - 1) * ny * nz + nx * (ny - 1) * nz + nx * ny * (nz - 1);
    CHECK(build_truss(t).size() == static_cast<std::size_t>(axis_bars));
    t.crossed = true;
    const int lateral = 2 * (nx - 1) * (nz - 1) + 2 * (ny - 1) * (nz - 1);
    CHECK(build_truss(t).size() == static_cast<std::size_t>(axis_bars + lateral));
  }
}

TEST_CASE("truss spec validation")
{
  TrussSpec s;
  s.node_counts = { 2, 1, 2 };
  CHECK_THROWS_AS(build_truss(s), Error);
  try {
    (void)build_truss(s);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidSpec);
  }
  TrussSpec w;
  w.bar_width = 2.0;
  CHECK_THROWS_AS(w.validate(), Error);
}

TEST_CASE("test structure footprints")
{
  TrussSpec ortho;
  ortho.node_counts = { 6, 5, 10 };
  CHECK(ortho.span().isApprox(Vec3(10, 8, 18)));
  TrussSpec crossed;
  crossed.node_counts = { 21, 5, 3 };
  crossed.crossed = true;
  CHECK(crossed.span().isApprox(Vec3(40, 8, 4)));

  SceneSpec spec;
  spec.structure = ortho;
  const Scene scene = build_scene(spec);
  REQUIRE(scene.structure_bounds());
  const Vec3 extent = scene.structure_bounds()->hi - scene.structure_bounds()->lo;
  CHECK((extent - Vec3(10.15, 8.15, 18.15)).norm() <= 1e-9);
  CHECK(std::abs(scene.structure_bounds()->lo.z()) <= 1e-12);
  CHECK(std::abs(scene.structure_bounds()->lo.x() + scene.structure_bounds()->hi.x()) <= 1e-12);
}

TEST_CASE("diagonal bars span their panel")
{
  TrussSpec s;
  s.node_counts = { 3, 2, 2 };
  s.crossed = true;
  const auto bars = build_truss(s);
  int diagonals = 0;
  for (const auto& b : bars) {
    if (b.rotation.isIdentity(0.0))
      continue;
    ++diagonals;
    CHECK(b.half_extents.x() == doctest::Approx(std::sqrt(2.0)));
    CHECK((b.rotation.transpose() * b.rotation - Mat3::Identity()).norm() <= 1e-12);
  }
  CHECK(diagonals == 2 * 2 * 1 + 2 * 1 * 1);
}

TEST_CASE("scene construction")
{
  SceneSpec bare;
  const Scene ground_only = build_scene(bare);
  REQUIRE(ground_only.primitives().size() == 1);
  CHECK(std::holds_alternative<Heightfield>(ground_only.primitives()[0]));
  CHECK_FALSE(ground_only.structure_bounds());

  SceneSpec spec;
  spec.structure = TrussSpec{};
  spec.trees.count = 5;
  spec.boxes.count = 4;
  spec.seed = 77;
  const Scene a = build_scene(spec);
  const Scene b = build_scene(spec);
  REQUIRE(a.primitives().size() == b.primitives().size());
  for (std::size_t i = 0; i < a.primitives().size(); ++i)
    CHECK(same_primitive(a.primitives()[i], b.primitives()[i]));
  spec.seed = 78;
  const Scene c = build_scene(spec);
  bool differs = c.primitives().size() != a.primitives().size();
  for (std::size_t i = 0; !differs && i < a.primitives().size(); ++i)
    differs = !same_primitive(a.primitives()[i], c.primitives()[i]);
  CHECK(differs);
}

TEST_CASE("structure labels are unique, consecutive and start at 1")
{
  SceneSpec spec;
  spec.structure = TrussSpec{};
  spec.structure->node_counts = { 3, 3, 3 };
  spec.trees.count = 4;
  const Scene scene = build_scene(spec);
  std::vector<std::uint32_t> labels;
  for (const auto& p : scene.primitives()) {
    if (const auto* box = std::get_if<OrientedBox>(&p))
      labels.insert(labels.end(), box->face_labels.begin(), box->face_labels.end());
    else if (const auto* cyl = std::get_if<Cylinder>(&p))
      CHECK(cyl->label == 0);
    else if (const auto* ell = std::get_if<Ellipsoid>(&p))
      CHECK(ell->label == 0);
  }
  std::sort(labels.begin(), labels.end());
  for (std::size_t i = 0; i < labels.size(); ++i)
    CHECK(labels[i] == i + 1);
}

TEST_CASE("random parallelepipeds respect their bounds")
{
  SceneSpec spec;
  spec.boxes.count = 20;
  spec.boxes.length_min = 0.5;
  spec.boxes.length_max = 4;
  spec.boxes.width_min = 0.05;
  spec.boxes.width_max = 0.3;
  spec.seed = 5;
  const Scene scene = build_scene(spec);
  int boxes = 0;
  for (const auto& p : scene.primitives()) {
    const auto* box = std::get_if<OrientedBox>(&p);
    if (!box)
      continue;
    ++boxes;
    std::array<double, 3> dims{ 2 * box->half_extents.x(), 2 * box->half_extents.y(), 2 * box->half_extents.z() };
    std::sort(dims.begin(), dims.end());
    CHECK(dims[2] >= 0.5 - 1e-12);
    CHECK(dims[2] <= 4 + 1e-12);
    CHECK(dims[0] >= 0.05 - 1e-12);
    CHECK(dims[1] <= 0.3 + 1e-12);
    CHECK((box->rotation.transpose() * box->rotation - Mat3::Identity()).norm() <= 1e-9);
    for (auto l : box->face_labels)
      CHECK(l >= 1);
  }
  CHECK(boxes == 20);
}

TEST_CASE("sensor pose sampling")
{
  PoseSpec fixed;
  fixed.mode = PoseMode::FixedPositionRandomOrientation;
  fixed.fixed_position = Vec3(1, 2, 3);
  fixed.max_tilt_deg = 20;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Pose p = sample_sensor_pose(fixed, std::nullopt, s);
    CHECK(p.translation == Vec3(1, 2, 3));
    CHECK(std::abs(p.rotation.norm() - 1) <= 1e-12);
    const double tilt = std::acos(std::clamp((p.rotation * Vec3::UnitZ()).z(), -1.0, 1.0));
    CHECK(tilt <= std::numbers::pi * 20 * std::sqrt(2.0) / 180 + 1e-9);
  }

  Aabb bounds;
  bounds.lo = Vec3(-5, -4, 0);
  bounds.hi = Vec3(5, 4, 18);
  PoseSpec within;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Pose p = sample_sensor_pose(within, bounds, s);
    CHECK(bounds.contains(p.translation));
    const Pose again = sample_sensor_pose(within, bounds, s);
    CHECK(again.translation == p.translation);
    CHECK(again.rotation.coeffs() == p.rotation.coeffs());
  }
  within.height_min = 1.5;
  within.height_max = 8;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const double z = sample_sensor_pose(within, bounds, s).translation.z();
    CHECK(z >= 1.5);
    CHECK(z <= 8);
  }

  Aabb flat = bounds;
  flat.hi.z() = flat.lo.z();
  CHECK_THROWS_AS(sample_sensor_pose(PoseSpec{}, flat, 1), Error);
  CHECK_THROWS_AS(sample_sensor_pose(PoseSpec{}, std::nullopt, 1), Error);
  try {
    (void)sample_sensor_pose(PoseSpec{}, flat, 1);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidBounds);
  }
}

TEST_CASE("within-structure poses keep their clearance")
{
  SceneSpec spec;
  spec.structure = TrussSpec{};
  const Scene scene = build_scene(spec);
  PoseSpec pose;
  pose.clearance = 0.3;
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Pose p = sample_sensor_pose(pose, scene.structure_bounds(), s, &scene);
    for (const auto& prim : scene.primitives())
      CHECK(surface_residual(prim, p.translation) >= 0.3);
  }
}

TEST_CASE("beam directions")
{
  SensorConfig cfg;
  const double lo = -22.5 * std::numbers::pi / 180;
  CHECK(std::asin(beam_direction(cfg, 0, 0).z()) == doctest::Approx(lo));
  CHECK(std::asin(beam_direction(cfg, 127, 0).z()) == doctest::Approx(-lo));
  const Vec3 d = beam_direction(cfg, 64, 128);
  CHECK(std::atan2(d.y(), d.x()) == doctest::Approx(std::numbers::pi / 2));
  CHECK(d.norm() == doctest::Approx(1.0));
  SensorConfig one;
  one.v_resolution = 1;
  CHECK(beam_direction(one, 0, 0).z() == 0.0);
}

TEST_CASE("lowest channel over flat ground")
{
  SceneSpec spec;
  spec.ground.amplitude = 0;
  const Scene scene = build_scene(spec);
  Pose pose;
  pose.translation = Vec3(0, 0, 2);
  SensorConfig cfg;
  cfg.noise_sigma = 0;
  const LabeledCloud cloud = raycast_scan(scene, pose, cfg, 0);
  REQUIRE(cloud.size() >= static_cast<std::size_t>(cfg.h_resolution));
  const double expect = 2.0 / std::sin(22.5 * std::numbers::pi / 180);
  CHECK(expect == doctest::Approx(5.2263).epsilon(1e-4));
  // Channel-major order: the first h_resolution points are the lowest channel.
  for (int h = 0; h < cfg.h_resolution; ++h)
    CHECK(std::abs(cloud.points[static_cast<std::size_t>(h)].norm() - expect) <= 1e-6);
  CHECK(cloud.size() <= cfg.ray_count());
  for (auto l : cloud.face_label)
    CHECK(l == 0);
}

TEST_CASE("empty scene gives an empty cloud")
{
  const Scene empty;
  const auto cloud = raycast_scan(empty, Pose{}, SensorConfig{});
  CHECK(cloud.empty());
  CHECK(SensorConfig{}.ray_count() == 65536);
}

TEST_CASE("scene hits equal the exhaustive oracle on random small scenes")
{
  Rng rng(2024);
  for (int s = 0; s < 20; ++s) {
    const Scene scene = random_small_scene(rng);
    for (int r = 0; r < 2000; ++r) {
      Ray ray;
      ray.origin = Vec3(rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(1, 5));
      Vec3 d(rng.normal(), rng.normal(), rng.normal());
      ray.direction = d.normalized();
      const auto got = scene.intersect(ray, 40.0);
      const auto expect = brute_intersect(scene, ray, 40.0);
      REQUIRE(got.has_value() == expect.has_value());
      if (got) {
        CHECK(got->t == expect->t);
        CHECK(got->label == expect->label);
        CHECK(got->primitive == expect->primitive);
        const Vec3 hit = ray.origin + got->t * ray.direction;
        CHECK(std::abs(surface_residual(scene.primitives()[got->primitive], hit)) <= 1e-9);
      }
    }
  }
}

TEST_CASE("noiseless scan points lie on surfaces within range")
{
  SceneSpec spec;
  spec.structure = TrussSpec{};
  spec.structure->node_counts = { 4, 3, 3 };
  spec.trees.count = 6;
  spec.trees.placement_half_size = 15;
  const Scene scene = build_scene(spec);
  SensorConfig cfg;
  cfg.noise_sigma = 0;
  cfg.v_resolution = 32;
  cfg.h_resolution = 128;
  Rng rng(6);
  for (int scan = 0; scan < 5; ++scan) {
    const Pose pose = sample_sensor_pose(PoseSpec{}, scene.structure_bounds(), rng.next(), &scene);
    const auto cloud = raycast_scan(scene, pose, cfg, 1);
    REQUIRE(cloud.size() > 0);
    // Replay every ray against the exhaustive oracle in channel-major order.
    const Mat3 rot = pose.rotation.toRotationMatrix();
    std::size_t k = 0;
    for (int v = 0; v < cfg.v_resolution; ++v) {
      for (int h = 0; h < cfg.h_resolution; ++h) {
        const Ray ray{ pose.translation, rot * beam_direction(cfg, v, h) };
        const auto hit = brute_intersect(scene, ray, cfg.max_range);
        if (!hit || hit->t < cfg.min_range)
          continue;
        REQUIRE(k < cloud.size());
        CHECK(cloud.face_label[k] == hit->label);
        CHECK((cloud.points[k] - beam_direction(cfg, v, h) * hit->t).norm() <= 1e-9);
        ++k;
      }
    }
    CHECK(k == cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const double r = cloud.points[i].norm();
      CHECK(r >= cfg.min_range);
      CHECK(r <= cfg.max_range);
      CHECK(min_residual(scene, pose.to_world(cloud.points[i])) <= 1e-9);
    }
  }
}

TEST_CASE("range noise has the configured sigma")
{
  SceneSpec spec;
  spec.ground.amplitude = 0;
  const Scene scene = build_scene(spec);
  Pose pose;
  pose.translation = Vec3(0, 0, 2);
  SensorConfig clean;
  clean.noise_sigma = 0;
  clean.max_range = 1000;
  SensorConfig noisy = clean;
  noisy.noise_sigma = 0.008;
  const auto base = raycast_scan(scene, pose, clean, 0);
  std::size_t n = 0;
  double sum = 0;
  double sq = 0;
  for (std::uint64_t seed = 1; n < 1000000; ++seed) {
    const auto cloud = raycast_scan(scene, pose, noisy, seed);
    REQUIRE(cloud.size() == base.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const double e = cloud.points[i].norm() - base.points[i].norm();
      // Noise is along the ray: the direction is unchanged.
      sum += e;
      sq += e * e;
      ++n;
    }
    CHECK((cloud.points[7].normalized() - base.points[7].normalized()).norm() <= 1e-9);
  }
  const double mean = sum / static_cast<double>(n);
  const double sd = std::sqrt(sq / static_cast<double>(n) - mean * mean);
  CHECK(std::abs(sd - 0.008) <= 0.02 * 0.008);
  CHECK(std::abs(mean) <= 1e-4);
}

TEST_CASE("scan output does not depend on the job count")
{
  SceneSpec spec;
  spec.structure = TrussSpec{};
  spec.trees.count = 3;
  const Scene scene = build_scene(spec);
  const Pose pose = sample_sensor_pose(PoseSpec{}, scene.structure_bounds(), 3, &scene);
  SensorConfig cfg;
  cfg.v_resolution = 64;
  cfg.h_resolution = 256;
  const auto a = raycast_scan(scene, pose, cfg, 99, 1);
  const auto b = raycast_scan(scene, pose, cfg, 99, 3);
  CHECK(a.points == b.points);
  CHECK(a.face_label == b.face_label);
}

TEST_CASE("datasets are deterministic and carry a manifest")
{
  DatasetSpec spec;
  spec.scene.structure = TrussSpec{};
  spec.scene.structure->node_counts = { 3, 3, 3 };
  spec.sensor.v_resolution = 32;
  spec.sensor.h_resolution = 128;
  spec.n_scans = 3;
  spec.seed = 42;
  spec.spec_hash = "abc";
  const fs::path a = test_support::scratch_dir("dataset_a");
  const fs::path b = test_support::scratch_dir("dataset_b");
  const auto records = generate_dataset(spec, a, 1);
  (void)generate_dataset(spec, b, 3);
  REQUIRE(records.size() == 3);
  for (const auto& rec : records) {
    CHECK(read_file(a / rec.file) == read_file(b / rec.file));
    CHECK(rec.spec_hash == "abc");
  }
  CHECK(read_file(a / "manifest.json-lines") == read_file(b / "manifest.json-lines"));
  const std::string manifest = read_file(a / "manifest.json-lines");
  CHECK(std::count(manifest.begin(), manifest.end(), '\n') == 3);
  CHECK(manifest.find("clouds/scan_00002.pcd") != std::string::npos);
  CHECK(fs::exists(a / "clouds" / "scan_00000.pcd"));

  spec.n_scans = 0;
  CHECK_THROWS_AS(generate_dataset(spec, a, 1), Error);
}

TEST_CASE("training-style scans label boxes and nothing else")
{
  DatasetSpec spec;
  spec.scene.boxes.count = 30;
  spec.scene.trees.count = 6;
  spec.scene.trees.placement_half_size = 12;
  spec.pose.mode = PoseMode::FixedPositionRandomOrientation;
  spec.pose.fixed_position = Vec3(0, 0, 1.5);
  spec.pose.max_tilt_deg = 15;
  spec.scene.keep_clear = spec.pose.fixed_position;
  spec.randomize_scene_per_scan = true;
  spec.sensor.v_resolution = 32;
  spec.sensor.h_resolution = 128;
  spec.sensor.noise_sigma = 0;
  spec.n_scans = 4;
  Pose pose;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < spec.n_scans; ++i) {
    // Rebuild the same scan's scene to classify each hit independently.
    const auto cloud = simulate_scan(spec, Scene(), i, &pose);
    CHECK(pose.translation == spec.pose.fixed_position);
    for (std::size_t j = 0; j < cloud.size(); ++j) {
      const Vec3 w = pose.to_world(cloud.points[j]);
      if (cloud.face_label[j] != 0) {
        ++positives;
        CHECK(w.z() > -0.5);
      }
    }
  }
  CHECK(positives > 0);
}

TEST_CASE("intersection primitives")
{
  OrientedBox box;
  box.center = Vec3(5, 0, 0);
  box.half_extents = Vec3(1, 1, 1);
  for (std::uint32_t i = 0; i < 6; ++i)
    box.face_labels[i] = 10 + i;
  Ray ray{ Vec3::Zero(), Vec3::UnitX() };
  auto h = intersect(ray, box, 0, 100);
  REQUIRE(h);
  CHECK(h->t == doctest::Approx(4.0));
  CHECK(h->label == 10); // entering through the -x face
  ray.origin = Vec3(10, 0, 0);
  ray.direction = -Vec3::UnitX();
  CHECK(intersect(ray, box, 0, 100)->label == 11);
  ray.origin = Vec3(5, 0, -5);
  ray.direction = Vec3::UnitZ();
  CHECK(intersect(ray, box, 0, 100)->label == 14);
  ray.origin = Vec3(5, 0, 0); // inside
  CHECK_FALSE(intersect(ray, box, 0, 100));
  ray.origin = Vec3(0, 0, 0);
  ray.direction = Vec3::UnitX();
  CHECK_FALSE(intersect(ray, box, 0, 3.9));

  Cylinder cyl;
  cyl.base_center = Vec3(0, 5, 0);
  cyl.radius = 0.5;
  cyl.height = 2;
  ray.origin = Vec3(0, 0, 1);
  ray.direction = Vec3::UnitY();
  CHECK(intersect(ray, cyl, 0, 100)->t == doctest::Approx(4.5));
  ray.origin = Vec3(0, 5, 10);
  ray.direction = -Vec3::UnitZ();
  CHECK(intersect(ray, cyl, 0, 100)->t == doctest::Approx(8.0));
  ray.origin = Vec3(0, 0, 3);
  ray.direction = Vec3::UnitY();
  CHECK_FALSE(intersect(ray, cyl, 0, 100));

  Ellipsoid ell;
  ell.center = Vec3(0, 0, 10);
  ell.radii = Vec3(1, 2, 3);
  ray.origin = Vec3::Zero();
  ray.direction = Vec3::UnitZ();
  CHECK(intersect(ray, ell, 0, 100)->t == doctest::Approx(7.0));
  ray.origin = Vec3(0, 0, 10);
  CHECK_FALSE(intersect(ray, ell, 0, 100));

  Heightfield hf;
  hf.amplitude = 0.3;
  hf.wavelength = 4;
  ray.origin = Vec3(0.3, 0.2, 3);
  ray.direction = Vec3(1, 0.5, -1).normalized();
  const auto g = intersect(ray, hf, 0, 100);
  REQUIRE(g);
  const Vec3 p = ray.origin + g->t * ray.direction;
  CHECK(std::abs(p.z() - hf.height(p.x(), p.y())) <= 1e-9);
  ray.direction = Vec3::UnitZ();
  CHECK_FALSE(intersect(ray, hf, 0, 100));
}

TEST_CASE("sensor config validation")
{
  SensorConfig c;
  CHECK_NOTHROW(c.validate());
  c.min_range = 40;
  CHECK_THROWS_AS(c.validate(), Error);
  c = SensorConfig{};
  c.v_fov = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = SensorConfig{};
  c.noise_sigma = -1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = SensorConfig{};
  c.h_resolution = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}
