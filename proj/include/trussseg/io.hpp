#pragma once

#include "trussseg/geom.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace trussseg {

enum class PcdMode { Ascii, Binary };

struct PcdField
{
  std::string name;
  int size = 4;
  char type = 'F'; // F, U or I
  int count = 1;
};

struct PcdHeader
{
  std::string version = ".7";
  std::vector<PcdField> fields;
  std::size_t width = 0;
  std::size_t height = 1;
  Pose viewpoint;
  std::size_t points = 0;
  PcdMode data = PcdMode::Binary;
};

/// Decoded PCD body, one column per field (first element when count > 1),
/// widened to double.
struct PcdTable
{
  PcdHeader header;
  std::vector<std::vector<double>> columns;

  [[nodiscard]] const std::vector<double>* column(std::string_view name) const;
};

/// Throws MalformedHeader or TruncatedBody; never reads past `bytes`.
PcdTable parse_pcd(std::string_view bytes);

/// Writes `columns` (one per header field, count 1 each) under `header`.
/// header.width/points are taken from the column length.
std::string encode_pcd(PcdHeader header, const std::vector<std::vector<double>>& columns);

/// FIELDS x y z label, TYPE F F F U, VIEWPOINT = sensor pose.
std::string encode_pcd(const LabeledCloud& cloud, PcdMode mode);
void write_pcd(const LabeledCloud& cloud, const std::filesystem::path& path, PcdMode mode = PcdMode::Binary);

/// Accepts any column order containing x, y, z. `label` (else `intensity`)
/// becomes face_label; nx/ny/nz and curvature are picked up when present.
LabeledCloud cloud_from_table(const PcdTable& table);
LabeledCloud decode_pcd(std::string_view bytes);
LabeledCloud read_pcd(const std::filesystem::path& path);

/// FIELDS x y z nx ny nz curvature label. Throws MissingAttributes.
void export_features(const LabeledCloud& cloud, const std::filesystem::path& path, PcdMode mode = PcdMode::Binary);

/// FIELDS x y z label pred.
std::string encode_prediction_pcd(const LabeledCloud& cloud, const Mask& prediction, PcdMode mode);

/// Per-vertex colours: TP green, TN black, FP red, FN orange. Without truth
/// predicted structure is green and the rest black.
std::string encode_ply_colored(const LabeledCloud& cloud, const Mask& prediction, const Mask* truth);
void export_ply_colored(const LabeledCloud& cloud,
                        const Mask& prediction,
                        const Mask* truth,
                        const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

} // namespace trussseg
