#include "support.hpp"

#include "trussseg/error.hpp"
#include "trussseg/geom.hpp"

#include <Eigen/Eigenvalues>
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

using namespace trussseg;
using test_support::random_rotation;
using test_support::uniform_cloud;

namespace {

/// Direct double-loop accumulation, no centring trick.
Mat3 oracle_covariance(const std::vector<Vec3>& pts, Vec3& centroid)
{
  centroid = Vec3::Zero();
  for (const auto& p : pts)
    centroid += p;
  centroid /= static_cast<double>(pts.size());
  Mat3 c = Mat3::Zero();
  for (int r = 0; r < 3; ++r)
    for (int s = 0; s < 3; ++s) {
      double acc = 0;
      for (const auto& p : pts)
        acc += (p[r] - centroid[r]) * (p[s] - centroid[s]);
      c(r, s) = acc / static_cast<double>(pts.size());
    }
  return c;
}

std::vector<Index> brute_knn(const std::vector<Vec3>& pts, const Vec3& q, std::size_t k)
{
  std::vector<std::pair<double, Index>> d;
  for (Index i = 0; i < pts.size(); ++i)
    d.emplace_back((pts[i] - q).squaredNorm(), i);
  std::sort(d.begin(), d.end());
  std::vector<Index> out;
  for (std::size_t i = 0; i < k && i < d.size(); ++i)
    out.push_back(d[i].second);
  return out;
}

Mat3 reconstruct(const EigenDecomp& e)
{
  Mat3 v;
  for (int j = 0; j < 3; ++j)
    v.col(j) = e.eigenvectors[j];
  return v * e.eigenvalues.asDiagonal() * v.transpose();
}

} // namespace

TEST_CASE("covariance of two coincident points is zero")
{
  const std::vector<Vec3> pts{ Vec3(1, 2, 3), Vec3(1, 2, 3) };
  const auto c = covariance(pts);
  CHECK(c.centroid.isApprox(Vec3(1, 2, 3)));
  CHECK(c.matrix.isZero(0.0));
}

TEST_CASE("covariance of rectangle corners is diag(1, 4, 0)")
{
  const std::vector<Vec3> pts{ Vec3(1, 2, 0), Vec3(-1, 2, 0), Vec3(1, -2, 0), Vec3(-1, -2, 0) };
  const auto c = covariance(pts);
  CHECK(c.centroid.norm() == doctest::Approx(0.0));
  CHECK((c.matrix - Vec3(1, 4, 0).asDiagonal().toDenseMatrix()).norm() <= 1e-15);
}

TEST_CASE("covariance matches the double-loop oracle")
{
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto pts = uniform_cloud(rng, 50, -3.0, 5.0);
    Vec3 centroid;
    const Mat3 expect = oracle_covariance(pts, centroid);
    const auto got = covariance(pts);
    CHECK((got.centroid - centroid).norm() <= 1e-12 * (1 + centroid.norm()));
    CHECK((got.matrix - expect).norm() <= 1e-12 * expect.norm());
    CHECK((got.matrix - got.matrix.transpose()).norm() == 0.0);
  }
}

TEST_CASE("covariance over a subset uses only the subset")
{
  const std::vector<Vec3> pts{ Vec3(0, 0, 0), Vec3(100, 100, 100), Vec3(2, 0, 0) };
  const std::vector<Index> subset{ 0, 2 };
  const auto c = covariance(pts, subset);
  CHECK(c.centroid.isApprox(Vec3(1, 0, 0)));
  CHECK(c.matrix(0, 0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(covariance(pts, std::vector<Index>{}), Error);
  try {
    (void)covariance(pts, std::vector<Index>{});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptySubset);
  }
}

TEST_CASE("eigen_sym3 of identity and diagonal matrices")
{
  const auto id = eigen_sym3(Mat3::Identity());
  CHECK((id.eigenvalues - Vec3::Ones()).norm() <= 1e-15);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(std::abs(id.eigenvectors[i].dot(id.eigenvectors[j]) - (i == j ? 1.0 : 0.0)) <= 1e-12);

  const auto d = eigen_sym3(Vec3(1, 4, 0).asDiagonal());
  CHECK((d.eigenvalues - Vec3(0, 1, 4)).norm() <= 1e-15);
  CHECK(std::abs(d.eigenvectors[0].z()) == doctest::Approx(1.0));
  CHECK(std::abs(d.eigenvectors[1].x()) == doctest::Approx(1.0));
  CHECK(std::abs(d.eigenvectors[2].y()) == doctest::Approx(1.0));
}

TEST_CASE("eigen_sym3 rejects asymmetric input")
{
  Mat3 c = Mat3::Identity();
  c(0, 1) = 1e-3;
  try {
    (void)eigen_sym3(c);
    FAIL("expected NotSymmetric");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotSymmetric);
  }
  c(0, 1) = 1e-12; // within tolerance
  CHECK_NOTHROW((void)eigen_sym3(c));
}

TEST_CASE("eigen_sym3 agrees with Eigen's solver on random SPD matrices")
{
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::Matrix<double, 3, 3> a;
    for (int i = 0; i < 9; ++i)
      a(i / 3, i % 3) = rng.uniform(-2, 2);
    const Mat3 c = a * a.transpose();
    const auto e = eigen_sym3(c);
    const Eigen::SelfAdjointEigenSolver<Mat3> oracle(c);
    const double scale = 1 + e.eigenvalues[2];
    CHECK((e.eigenvalues - oracle.eigenvalues()).cwiseAbs().maxCoeff() <= 1e-9 * scale);
    CHECK((reconstruct(e) - c).cwiseAbs().maxCoeff() <= 1e-7);
    CHECK(e.eigenvalues[0] <= e.eigenvalues[1]);
    CHECK(e.eigenvalues[1] <= e.eigenvalues[2]);
    CHECK(e.eigenvalues[0] >= 0.0);
    CHECK(std::abs(e.eigenvalues.sum() - c.trace()) <= 1e-9 * (1 + c.trace()));
    for (int j = 0; j < 3; ++j) {
      CHECK(std::abs(e.eigenvectors[j].norm() - 1) <= 1e-6);
      CHECK(((c * e.eigenvectors[j] - e.eigenvalues[j] * e.eigenvectors[j]).cwiseAbs().maxCoeff()) <= 1e-7 * scale);
      for (int i = 0; i < j; ++i)
        CHECK(std::abs(e.eigenvectors[i].dot(e.eigenvectors[j])) <= 1e-6);
    }
  }
}

TEST_CASE("eigen_sym3 clamps round-off negatives and handles repeated eigenvalues")
{
  Mat3 c = Mat3::Zero();
  c(2, 2) = -1e-17;
  const auto e = eigen_sym3(c);
  CHECK(e.eigenvalues.minCoeff() >= 0.0);
  CHECK(e.curvature() == 0.0);

  const Mat3 r = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  const Mat3 rep = r * Vec3(2, 2, 5).asDiagonal() * r.transpose();
  const auto er = eigen_sym3(rep);
  CHECK((er.eigenvalues - Vec3(2, 2, 5)).norm() <= 1e-12);
  CHECK((reconstruct(er) - rep).norm() <= 1e-12);
}

TEST_CASE("curvature stays in [0, 1/3]")
{
  CHECK(surface_curvature(Vec3::Zero()) == 0.0);
  CHECK(surface_curvature(Vec3(1, 1, 1)) == doctest::Approx(1.0 / 3.0));
  CHECK(surface_curvature(Vec3(0, 1, 4)) == 0.0);
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    auto pts = uniform_cloud(rng, 3 + rng.below(40), -1, 1);
    const auto e = analyze(pts, iota_indices(pts.size()));
    const double k = e.curvature();
    CHECK(k >= 0.0);
    CHECK(k <= 1.0 / 3.0 + 1e-15);
  }
}

TEST_CASE("exact plane neighbourhoods have curvature <= 1e-9")
{
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const Mat3 r = random_rotation(rng);
    const Vec3 o = test_support::uniform_vec(rng, -10, 10);
    std::vector<Vec3> pts;
    for (int j = 0; j < 30; ++j)
      pts.push_back(o + r * Vec3(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0));
    CHECK(analyze(pts, iota_indices(pts.size())).curvature() <= 1e-9);
  }
}

TEST_CASE("normals of a plane face the viewpoint with zero curvature")
{
  std::vector<Vec3> pts;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j)
      pts.emplace_back(0.05 * i, 0.05 * j, 0.0);
  const auto est = estimate_normals(pts, 10, Vec3(0, 0, 10));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK((est.normals[i] - Vec3::UnitZ()).norm() <= 1e-12);
    CHECK(est.curvature[i] <= 1e-12);
  }
  const auto below = estimate_normals(pts, 10, Vec3(0, 0, -10));
  CHECK((below.normals[0] + Vec3::UnitZ()).norm() <= 1e-12);
}

TEST_CASE("isotropic ball neighbourhood approaches curvature 1/3")
{
  Rng rng(21);
  std::vector<Vec3> pts;
  while (pts.size() < 4000) {
    const Vec3 p = test_support::uniform_vec(rng, -1, 1);
    if (p.norm() <= 1)
      pts.push_back(p);
  }
  pts.emplace_back(0, 0, 0);
  const auto est = estimate_normals(pts, 4000);
  CHECK(est.curvature.back() == doctest::Approx(1.0 / 3.0).epsilon(0.03));
}

TEST_CASE("noisy plane curvature matches a per-point eigen oracle")
{
  Rng rng(17);
  std::vector<Vec3> pts;
  for (int i = 0; i < 400; ++i)
    pts.emplace_back(rng.uniform(0, 0.3), rng.uniform(0, 0.3), 0.008 * rng.normal());
  const int k = 30;
  const auto est = estimate_normals(pts, k, Vec3(0, 0, 5));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<Vec3> nb;
    for (auto j : brute_knn(pts, pts[i], k))
      nb.push_back(pts[j]);
    Vec3 centroid;
    const Eigen::SelfAdjointEigenSolver<Mat3> oracle(oracle_covariance(nb, centroid));
    const Vec3 lam = oracle.eigenvalues().cwiseMax(0.0);
    CHECK(std::abs(est.curvature[i] - lam[0] / lam.sum()) <= 1e-9);
    CHECK(std::abs(std::abs(est.normals[i].dot(oracle.eigenvectors().col(0))) - 1.0) <= 1e-6);
    CHECK(est.normals[i].dot(Vec3(0, 0, 5) - pts[i]) >= 0.0);
  }
}

TEST_CASE("normals rotate with the cloud and viewpoint")
{
  Rng rng(4);
  auto pts = uniform_cloud(rng, 500, -1, 1);
  for (auto& p : pts)
    p.z() = 0.3 * std::sin(2 * p.x()) + 0.01 * rng.normal();
  const Vec3 view(0.2, -0.1, 3);
  const auto base = estimate_normals(pts, 15, view);
  const Mat3 r = random_rotation(rng);
  const Vec3 t(5, -2, 1);
  std::vector<Vec3> moved;
  for (const auto& p : pts)
    moved.push_back(r * p + t);
  const auto rot = estimate_normals(moved, 15, r * view + t);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK((rot.normals[i] - r * base.normals[i]).norm() <= 1e-6);
    CHECK(std::abs(rot.curvature[i] - base.curvature[i]) <= 1e-9);
  }
}

TEST_CASE("normal estimation is independent of the job count")
{
  Rng rng(9);
  const auto pts = uniform_cloud(rng, 3000, 0, 4);
  const auto a = estimate_normals(pts, 20, Vec3::Zero(), 1);
  const auto b = estimate_normals(pts, 20, Vec3::Zero(), 4);
  CHECK(a.normals == b.normals);
  CHECK(a.curvature == b.curvature);
}

TEST_CASE("normal estimation preconditions")
{
  const std::vector<Vec3> pts{ Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0) };
  auto code_of = [&](int k) {
    try {
      (void)estimate_normals(pts, k);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Empty;
  };
  CHECK(code_of(2) == ErrorCode::TooFewPoints);
  CHECK(code_of(4) == ErrorCode::TooFewPoints);
  CHECK(code_of(3) == ErrorCode::Empty); // no throw
}

TEST_CASE("voxel downsample examples")
{
  LabeledCloud same;
  for (int i = 0; i < 10; ++i) {
    same.points.emplace_back(0.123, 0.456, 0.789);
    same.face_label.push_back(3);
  }
  const auto one = voxel_downsample(same, 0.1);
  REQUIRE(one.size() == 1);
  CHECK((one.points[0] - Vec3(0.123, 0.456, 0.789)).norm() <= 1e-15);
  CHECK(one.face_label[0] == 3);

  LabeledCloud pair;
  pair.points = { Vec3(0.01, 0, 0), Vec3(0.09, 0, 0) };
  pair.face_label = { 0, 0 };
  const auto merged = voxel_downsample(pair, 0.1);
  REQUIRE(merged.size() == 1);
  CHECK((merged.points[0] - Vec3(0.05, 0, 0)).norm() <= 1e-15);

  try {
    (void)voxel_downsample(pair, 0.0);
    FAIL("expected NonPositiveLeaf");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonPositiveLeaf);
  }
}

TEST_CASE("voxel downsample majority label breaks ties to the lowest label")
{
  LabeledCloud c;
  c.points = { Vec3(0.01, 0.01, 0.01), Vec3(0.02, 0.02, 0.02), Vec3(0.03, 0.03, 0.03), Vec3(0.04, 0.04, 0.04) };
  c.face_label = { 7, 2, 7, 2 };
  CHECK(voxel_downsample(c, 0.1).face_label[0] == 2);
  c.face_label = { 7, 2, 7, 0 };
  CHECK(voxel_downsample(c, 0.1).face_label[0] == 7);
}

TEST_CASE("voxel downsample size equals the distinct floor-triple count")
{
  Rng rng(99);
  LabeledCloud c;
  c.points = uniform_cloud(rng, 5000, 0, 10);
  c.face_label.assign(c.size(), 0);
  for (double leaf : { 0.1, 0.5, 1.3 }) {
    std::set<std::tuple<long, long, long>> keys;
    for (const auto& p : c.points)
      keys.emplace(static_cast<long>(std::floor(p.x() / leaf)),
                   static_cast<long>(std::floor(p.y() / leaf)),
                   static_cast<long>(std::floor(p.z() / leaf)));
    CHECK(voxel_downsample(c, leaf).size() == keys.size());
  }
}

TEST_CASE("voxel downsample size is non-increasing on nested grids")
{
  Rng rng(123);
  LabeledCloud c;
  c.points = uniform_cloud(rng, 4000, -3, 3);
  c.face_label.assign(c.size(), 1);
  std::size_t previous = c.size();
  for (double leaf = 0.05; leaf < 4; leaf *= 2) {
    const std::size_t n = voxel_downsample(c, leaf).size();
    CHECK(n <= previous);
    previous = n;
  }
}

TEST_CASE("extent_along examples and errors")
{
  const std::vector<Vec3> seg{ Vec3(0, 0, 0), Vec3(2, 0, 0) };
  CHECK(extent_along(seg, std::vector<Index>{ 0 }, Vec3::UnitX()) == 0.0);
  CHECK(extent_along(seg, iota_indices(2), Vec3::UnitX()) == doctest::Approx(2.0));

  const std::vector<Vec3> rect{ Vec3(1, 2, 0), Vec3(-1, 2, 0), Vec3(1, -2, 0), Vec3(-1, -2, 0) };
  const auto e = analyze(rect, iota_indices(4));
  CHECK(extent_along(rect, iota_indices(4), e.eigenvectors[2]) == doctest::Approx(4.0));

  auto code_of = [&](std::vector<Index> subset, Vec3 d) {
    try {
      (void)extent_along(seg, subset, d);
    } catch (const Error& err) {
      return err.code();
    }
    return ErrorCode::Empty;
  };
  CHECK(code_of({}, Vec3::UnitX()) == ErrorCode::EmptySubset);
  CHECK(code_of({ 0, 1 }, Vec3(1.1, 0, 0)) == ErrorCode::NonUnitDirection);
}

TEST_CASE("LabeledCloud validation and truth mask")
{
  LabeledCloud c;
  c.points = { Vec3(0, 0, 0), Vec3(1, 0, 0) };
  c.face_label = { 0, 5 };
  CHECK_NOTHROW(c.validate());
  CHECK(c.truss_mask() == Mask{ 0, 1 });
  c.face_label.push_back(1);
  CHECK_THROWS_AS(c.validate(), Error);
  c.face_label.pop_back();
  c.sensor_pose.rotation.coeffs() *= 1.01;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("pose round-trips between frames")
{
  Pose pose;
  pose.translation = Vec3(1, 2, 3);
  pose.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(0.4, Vec3(0, 1, 1).normalized()));
  const Vec3 p(0.3, -2, 5);
  CHECK((pose.to_sensor(pose.to_world(p)) - p).norm() <= 1e-12);
}
