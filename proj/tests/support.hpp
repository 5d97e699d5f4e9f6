#pragma once

#include "trussseg/geom.hpp"
#include "trussseg/random.hpp"

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

namespace test_support {

using trussseg::Vec3;

inline Vec3 uniform_vec(trussseg::Rng& rng, double lo, double hi)
{
  const double x = rng.uniform(lo, hi);
  const double y = rng.uniform(lo, hi);
  const double z = rng.uniform(lo, hi);
  return Vec3(x, y, z);
}

inline std::vector<Vec3> uniform_cloud(trussseg::Rng& rng, std::size_t n, double lo, double hi)
{
  std::vector<Vec3> pts(n);
  for (auto& p : pts)
    p = uniform_vec(rng, lo, hi);
  return pts;
}

inline trussseg::Mat3 random_rotation(trussseg::Rng& rng)
{
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  return q.normalized().toRotationMatrix();
}

/// Fresh scratch directory under TRUSSSEG_TMP (or the system temp dir).
inline std::filesystem::path scratch_dir(const std::string& name)
{
  const char* base = std::getenv("TRUSSSEG_TMP");
  const std::filesystem::path root = base ? std::filesystem::path(base) : std::filesystem::temp_directory_path() / "trussseg_tests";
  const auto dir = root / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

} // namespace test_support
