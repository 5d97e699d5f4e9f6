#include "trussseg/io.hpp"

#include "trussseg/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace trussseg {

namespace {

static_assert(std::endian::native == std::endian::little, "binary PCD codec assumes a little-endian host");

constexpr std::size_t kMaxFields = 1024;

std::vector<std::string_view> split_ws(std::string_view line)
{
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r'))
      ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r')
      ++j;
    if (j > i)
      out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template<class T>
bool parse_number(std::string_view token, T& value)
{
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars rejects a leading '+'.
    if (first != last && *first == '+')
      ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
      // nan / inf spellings
      std::string s(token);
      char* end = nullptr;
      value = static_cast<T>(std::strtod(s.c_str(), &end));
      return end == s.c_str() + s.size() && !s.empty();
    }
    return true;
  } else {
    const auto [ptr, ec] = std::from_chars(first, last, value);
    return ec == std::errc() && ptr == last;
  }
}

[[noreturn]] void malformed(const std::string& what)
{
  throw Error(ErrorCode::MalformedHeader, what);
}

std::size_t parse_count(std::string_view token, const char* key)
{
  std::size_t v = 0;
  if (!parse_number(token, v))
    malformed(std::string("invalid ") + key + " value '" + std::string(token) + "'");
  return v;
}

bool valid_type(char type, int size)
{
  switch (type) {
    case 'F': return size == 4 || size == 8;
    case 'U':
    case 'I': return size == 1 || size == 2 || size == 4 || size == 8;
    default: return false;
  }
}

double load_value(const char* p, char type, int size)
{
  switch (type) {
    case 'F':
      if (size == 4) {
        float f;
        std::memcpy(&f, p, 4);
        return f;
      } else {
        double d;
        std::memcpy(&d, p, 8);
        return d;
      }
    case 'U': {
      std::uint64_t u = 0;
      std::memcpy(&u, p, static_cast<std::size_t>(size));
      return static_cast<double>(u);
    }
    default: {
      std::uint64_t u = 0;
      std::memcpy(&u, p, static_cast<std::size_t>(size));
      const int shift = 64 - 8 * size;
      const auto s = static_cast<std::int64_t>(u << shift) >> shift;
      return static_cast<double>(s);
    }
  }
}

void store_value(std::string& out, double v, char type, int size)
{
  char buf[8];
  switch (type) {
    case 'F':
      if (size == 4) {
        const auto f = static_cast<float>(v);
        std::memcpy(buf, &f, 4);
      } else {
        std::memcpy(buf, &v, 8);
      }
      break;
    case 'U': {
      const auto u = static_cast<std::uint64_t>(std::llround(std::max(0.0, v)));
      std::memcpy(buf, &u, 8);
      break;
    }
    default: {
      const auto s = static_cast<std::int64_t>(std::llround(v));
      std::memcpy(buf, &s, 8);
      break;
    }
  }
  out.append(buf, static_cast<std::size_t>(size));
}

void append_ascii(std::string& out, double v, char type, int size)
{
  char buf[64];
  std::to_chars_result res{};
  if (type == 'F') {
    if (size == 4)
      res = std::to_chars(buf, buf + sizeof buf, static_cast<float>(v));
    else
      res = std::to_chars(buf, buf + sizeof buf, v);
  } else if (type == 'U') {
    res = std::to_chars(buf, buf + sizeof buf, static_cast<std::uint64_t>(std::llround(std::max(0.0, v))));
  } else {
    res = std::to_chars(buf, buf + sizeof buf, static_cast<std::int64_t>(std::llround(v)));
  }
  out.append(buf, res.ptr);
}

std::string format_double(double v)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

} // namespace

const std::vector<double>* PcdTable::column(std::string_view name) const
{
  for (std::size_t i = 0; i < header.fields.size(); ++i) {
    if (header.fields[i].name == name)
      return &columns[i];
  }
  return nullptr;
}

PcdTable parse_pcd(std::string_view bytes)
{
  PcdTable table;
  PcdHeader& h = table.header;
  std::vector<std::string_view> names, sizes, types, counts;
  bool have_width = false, have_points = false, have_data = false, have_height = false;
  std::size_t pos = 0;

  while (!have_data) {
    if (pos >= bytes.size())
      malformed("header ended before DATA");
    std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string_view::npos)
      eol = bytes.size();
    const std::string_view line = bytes.substr(pos, eol - pos);
    pos = std::min(bytes.size(), eol + 1);
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0].front() == '#')
      continue;
    const std::string_view key = tok[0];
    const std::vector<std::string_view> args(tok.begin() + 1, tok.end());
    if (args.size() > kMaxFields)
      malformed("too many entries on " + std::string(key));
    if (key == "VERSION") {
      if (args.size() != 1)
        malformed("VERSION takes one value");
      h.version = std::string(args[0]);
    } else if (key == "FIELDS" || key == "COLUMNS") {
      names = args;
    } else if (key == "SIZE") {
      sizes = args;
    } else if (key == "TYPE") {
      types = args;
    } else if (key == "COUNT") {
      counts = args;
    } else if (key == "WIDTH") {
      if (args.size() != 1)
        malformed("WIDTH takes one value");
      h.width = parse_count(args[0], "WIDTH");
      have_width = true;
    } else if (key == "HEIGHT") {
      if (args.size() != 1)
        malformed("HEIGHT takes one value");
      h.height = parse_count(args[0], "HEIGHT");
      have_height = true;
    } else if (key == "VIEWPOINT") {
      if (args.size() != 7)
        malformed("VIEWPOINT takes seven values");
      double v[7];
      for (int i = 0; i < 7; ++i) {
        if (!parse_number(args[static_cast<std::size_t>(i)], v[i]) || !std::isfinite(v[i]))
          malformed("invalid VIEWPOINT value");
      }
      h.viewpoint.translation = Vec3(v[0], v[1], v[2]);
      Eigen::Quaterniond q(v[3], v[4], v[5], v[6]);
      h.viewpoint.rotation = q.norm() > 0 ? q.normalized() : Eigen::Quaterniond::Identity();
    } else if (key == "POINTS") {
      if (args.size() != 1)
        malformed("POINTS takes one value");
      h.points = parse_count(args[0], "POINTS");
      have_points = true;
    } else if (key == "DATA") {
      if (args.size() != 1)
        malformed("DATA takes one value");
      if (args[0] == "ascii")
        h.data = PcdMode::Ascii;
      else if (args[0] == "binary")
        h.data = PcdMode::Binary;
      else
        malformed("unsupported DATA mode '" + std::string(args[0]) + "'");
      have_data = true;
    } else {
      malformed("unknown header key '" + std::string(key) + "'");
    }
  }

  if (names.empty())
    malformed("no FIELDS");
  if (sizes.size() != names.size() || types.size() != names.size())
    malformed("SIZE/TYPE entries do not match FIELDS");
  if (!counts.empty() && counts.size() != names.size())
    malformed("COUNT entries do not match FIELDS");
  for (std::size_t i = 0; i < names.size(); ++i) {
    PcdField f;
    f.name = std::string(names[i]);
    std::size_t size = 0;
    if (!parse_number(sizes[i], size) || size > 8)
      malformed("invalid SIZE for field " + f.name);
    f.size = static_cast<int>(size);
    if (types[i].size() != 1)
      malformed("invalid TYPE for field " + f.name);
    f.type = types[i][0];
    if (!valid_type(f.type, f.size))
      malformed("unsupported TYPE/SIZE for field " + f.name);
    std::size_t count = 1;
    if (!counts.empty() && (!parse_number(counts[i], count) || count == 0 || count > kMaxFields))
      malformed("invalid COUNT for field " + f.name);
    f.count = static_cast<int>(count);
    h.fields.push_back(std::move(f));
  }
  if (!have_height)
    h.height = 1;
  if (!have_width && !have_points)
    malformed("neither WIDTH nor POINTS given");
  if (!have_points)
    h.points = h.width * h.height;
  if (!have_width) {
    h.width = h.points;
    h.height = 1;
  }
  if (h.height != 0 && h.width > std::numeric_limits<std::size_t>::max() / h.height)
    malformed("WIDTH * HEIGHT overflows");
  if (h.width * h.height != h.points)
    malformed("WIDTH * HEIGHT does not equal POINTS");

  std::size_t stride = 0;
  std::size_t values_per_point = 0;
  for (const auto& f : h.fields) {
    stride += static_cast<std::size_t>(f.size) * static_cast<std::size_t>(f.count);
    values_per_point += static_cast<std::size_t>(f.count);
  }

  const std::string_view body = bytes.substr(pos);
  table.columns.assign(h.fields.size(), {});
  if (h.data == PcdMode::Binary) {
    if (h.points > body.size() / std::max<std::size_t>(1, stride))
      throw Error(ErrorCode::TruncatedBody,
                  "binary body holds " + std::to_string(body.size()) + " bytes, header needs " +
                    std::to_string(h.points) + " x " + std::to_string(stride));
    for (auto& c : table.columns)
      c.resize(h.points);
    const char* p = body.data();
    for (std::size_t i = 0; i < h.points; ++i) {
      for (std::size_t f = 0; f < h.fields.size(); ++f) {
        const auto& field = h.fields[f];
        table.columns[f][i] = load_value(p, field.type, field.size);
        p += static_cast<std::size_t>(field.size) * static_cast<std::size_t>(field.count);
      }
    }
  } else {
    // Each value takes at least two bytes ("0 "), which bounds the allocation.
    if (h.points > body.size() / std::max<std::size_t>(1, 2 * values_per_point) + 1)
      throw Error(ErrorCode::TruncatedBody, "ascii body is too short for " + std::to_string(h.points) + " points");
    for (auto& c : table.columns)
      c.reserve(h.points);
    std::size_t bpos = 0;
    std::size_t read = 0;
    while (read < h.points) {
      if (bpos >= body.size())
        throw Error(ErrorCode::TruncatedBody,
                    "ascii body has " + std::to_string(read) + " of " + std::to_string(h.points) + " points");
      std::size_t eol = body.find('\n', bpos);
      if (eol == std::string_view::npos)
        eol = body.size();
      const auto tok = split_ws(body.substr(bpos, eol - bpos));
      bpos = eol + 1;
      if (tok.empty())
        continue;
      if (tok.size() != values_per_point)
        throw Error(ErrorCode::TruncatedBody, "point " + std::to_string(read) + " has the wrong number of values");
      std::size_t t = 0;
      for (std::size_t f = 0; f < h.fields.size(); ++f) {
        double v = 0;
        if (!parse_number(tok[t], v))
          throw Error(ErrorCode::TruncatedBody, "point " + std::to_string(read) + " has an unparsable value");
        if (h.fields[f].type == 'F' && h.fields[f].size == 4)
          v = static_cast<float>(v);
        table.columns[f].push_back(v);
        t += static_cast<std::size_t>(h.fields[f].count);
      }
      ++read;
    }
  }
  return table;
}

std::string encode_pcd(PcdHeader header, const std::vector<std::vector<double>>& columns)
{
  if (columns.size() != header.fields.size())
    throw Error(ErrorCode::LengthMismatch, "column count differs from field count");
  const std::size_t n = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns) {
    if (c.size() != n)
      throw Error(ErrorCode::LengthMismatch, "columns have different lengths");
  }
  header.width = n;
  header.height = 1;
  header.points = n;

  std::string out;
  out += "VERSION " + header.version + "\n";
  auto join = [&](const char* key, auto&& get) {
    out += key;
    for (const auto& f : header.fields) {
      out += ' ';
      out += get(f);
    }
    out += '\n';
  };
  join("FIELDS", [](const PcdField& f) { return f.name; });
  join("SIZE", [](const PcdField& f) { return std::to_string(f.size); });
  join("TYPE", [](const PcdField& f) { return std::string(1, f.type); });
  join("COUNT", [](const PcdField&) { return std::string("1"); });
  out += "WIDTH " + std::to_string(n) + "\n";
  out += "HEIGHT 1\n";
  const auto& vp = header.viewpoint;
  out += "VIEWPOINT " + format_double(vp.translation.x()) + " " + format_double(vp.translation.y()) + " " +
         format_double(vp.translation.z()) + " " + format_double(vp.rotation.w()) + " " +
         format_double(vp.rotation.x()) + " " + format_double(vp.rotation.y()) + " " +
         format_double(vp.rotation.z()) + "\n";
  out += "POINTS " + std::to_string(n) + "\n";
  out += header.data == PcdMode::Binary ? "DATA binary\n" : "DATA ascii\n";

  if (header.data == PcdMode::Binary) {
    std::size_t stride = 0;
    for (const auto& f : header.fields)
      stride += static_cast<std::size_t>(f.size);
    out.reserve(out.size() + n * stride);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < header.fields.size(); ++f)
        store_value(out, columns[f][i], header.fields[f].type, header.fields[f].size);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < header.fields.size(); ++f) {
        if (f)
          out += ' ';
        append_ascii(out, columns[f][i], header.fields[f].type, header.fields[f].size);
      }
      out += '\n';
    }
  }
  return out;
}

namespace {

PcdHeader cloud_header(const LabeledCloud& cloud, PcdMode mode, std::initializer_list<PcdField> fields)
{
  PcdHeader h;
  h.fields = fields;
  h.viewpoint = cloud.sensor_pose;
  h.data = mode;
  return h;
}

void push_xyz(const LabeledCloud& cloud, std::vector<std::vector<double>>& cols)
{
  for (int a = 0; a < 3; ++a) {
    std::vector<double> c(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i)
      c[i] = cloud.points[i][a];
    cols.push_back(std::move(c));
  }
}

std::vector<double> label_column(const LabeledCloud& cloud)
{
  std::vector<double> c(cloud.size(), 0.0);
  for (std::size_t i = 0; i < cloud.face_label.size() && i < c.size(); ++i)
    c[i] = cloud.face_label[i];
  return c;
}

} // namespace

std::string encode_pcd(const LabeledCloud& cloud, PcdMode mode)
{
  cloud.validate();
  auto header = cloud_header(cloud, mode, { { "x", 4, 'F', 1 }, { "y", 4, 'F', 1 }, { "z", 4, 'F', 1 }, { "label", 4, 'U', 1 } });
  std::vector<std::vector<double>> cols;
  push_xyz(cloud, cols);
  cols.push_back(label_column(cloud));
  return encode_pcd(std::move(header), cols);
}

void write_pcd(const LabeledCloud& cloud, const std::filesystem::path& path, PcdMode mode)
{
  write_file(path, encode_pcd(cloud, mode));
}

LabeledCloud cloud_from_table(const PcdTable& table)
{
  const auto* x = table.column("x");
  const auto* y = table.column("y");
  const auto* z = table.column("z");
  if (!x || !y || !z)
    throw Error(ErrorCode::MissingXyz, "PCD lacks one of the x, y, z fields");
  LabeledCloud cloud;
  cloud.sensor_pose = table.header.viewpoint;
  const std::size_t n = x->size();
  cloud.points.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    cloud.points[i] = Vec3((*x)[i], (*y)[i], (*z)[i]);

  const auto* label = table.column("label");
  if (!label)
    label = table.column("intensity");
  cloud.face_label.assign(n, 0);
  if (label) {
    for (std::size_t i = 0; i < n; ++i) {
      const double v = (*label)[i];
      cloud.face_label[i] = std::isfinite(v) && v > 0
                              ? static_cast<std::uint32_t>(std::min<double>(std::llround(v), 4294967295.0))
                              : 0u;
    }
  }
  const auto* nx = table.column("nx");
  const auto* ny = table.column("ny");
  const auto* nz = table.column("nz");
  if (nx && ny && nz) {
    cloud.normals.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      cloud.normals[i] = Vec3((*nx)[i], (*ny)[i], (*nz)[i]);
  }
  if (const auto* c = table.column("curvature"))
    cloud.curvature = *c;
  return cloud;
}

LabeledCloud decode_pcd(std::string_view bytes)
{
  return cloud_from_table(parse_pcd(bytes));
}

LabeledCloud read_pcd(const std::filesystem::path& path)
{
  return decode_pcd(read_file(path));
}

void export_features(const LabeledCloud& cloud, const std::filesystem::path& path, PcdMode mode)
{
  if (cloud.normals.size() != cloud.size() || cloud.curvature.size() != cloud.size())
    throw Error(ErrorCode::MissingAttributes, "feature export needs per-point normals and curvature");
  auto header = cloud_header(cloud,
                             mode,
                             { { "x", 4, 'F', 1 },
                               { "y", 4, 'F', 1 },
                               { "z", 4, 'F', 1 },
                               { "nx", 4, 'F', 1 },
                               { "ny", 4, 'F', 1 },
                               { "nz", 4, 'F', 1 },
                               { "curvature", 4, 'F', 1 },
                               { "label", 4, 'U', 1 } });
  std::vector<std::vector<double>> cols;
  push_xyz(cloud, cols);
  for (int a = 0; a < 3; ++a) {
    std::vector<double> c(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i)
      c[i] = cloud.normals[i][a];
    cols.push_back(std::move(c));
  }
  cols.push_back(cloud.curvature);
  cols.push_back(label_column(cloud));
  write_file(path, encode_pcd(std::move(header), cols));
}

std::string encode_prediction_pcd(const LabeledCloud& cloud, const Mask& prediction, PcdMode mode)
{
  if (prediction.size() != cloud.size())
    throw Error(ErrorCode::LengthMismatch, "prediction length differs from point count");
  auto header = cloud_header(
    cloud, mode, { { "x", 4, 'F', 1 }, { "y", 4, 'F', 1 }, { "z", 4, 'F', 1 }, { "label", 4, 'U', 1 }, { "pred", 1, 'U', 1 } });
  std::vector<std::vector<double>> cols;
  push_xyz(cloud, cols);
  cols.push_back(label_column(cloud));
  cols.emplace_back(prediction.begin(), prediction.end());
  return encode_pcd(std::move(header), cols);
}

std::string encode_ply_colored(const LabeledCloud& cloud, const Mask& prediction, const Mask* truth)
{
  if (prediction.size() != cloud.size())
    throw Error(ErrorCode::LengthMismatch, "prediction length differs from point count");
  if (truth && truth->size() != cloud.size())
    throw Error(ErrorCode::LengthMismatch, "truth length differs from point count");
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.size()) +
                    "\nproperty float x\nproperty float y\nproperty float z\n"
                    "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      append_ascii(out, cloud.points[i][a], 'F', 4);
      out += ' ';
    }
    const bool p = prediction[i] != 0;
    const char* rgb = nullptr;
    if (!truth)
      rgb = p ? "0 255 0" : "0 0 0";
    else if ((*truth)[i] != 0)
      rgb = p ? "0 255 0" : "255 165 0";
    else
      rgb = p ? "255 0 0" : "0 0 0";
    out += rgb;
    out += '\n';
  }
  return out;
}

void export_ply_colored(const LabeledCloud& cloud,
                        const Mask& prediction,
                        const Mask* truth,
                        const std::filesystem::path& path)
{
  write_file(path, encode_ply_colored(cloud, prediction, truth));
}

std::string read_file(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad())
    throw Error(ErrorCode::IoError, "read failed for " + path.string());
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

} // namespace trussseg
