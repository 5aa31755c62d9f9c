#include "supercut/binary_io.hpp"
#include "supercut/error.hpp"
#include "supercut/io.hpp"
#include "supercut/knn.hpp"

#include <Eigen/Eigenvalues>

#include <cctype>
#include <charconv>
#include <cstring>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

namespace supercut {

namespace {

enum class ScalarType { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

std::optional<ScalarType> parse_type(std::string_view name) {
  if (name == "char" || name == "int8") return ScalarType::kInt8;
  if (name == "uchar" || name == "uint8") return ScalarType::kUInt8;
  if (name == "short" || name == "int16") return ScalarType::kInt16;
  if (name == "ushort" || name == "uint16") return ScalarType::kUInt16;
  if (name == "int" || name == "int32") return ScalarType::kInt32;
  if (name == "uint" || name == "uint32") return ScalarType::kUInt32;
  if (name == "float" || name == "float32") return ScalarType::kFloat32;
  if (name == "double" || name == "float64") return ScalarType::kFloat64;
  return std::nullopt;
}

bool is_float(ScalarType t) { return t == ScalarType::kFloat32 || t == ScalarType::kFloat64; }

struct Property {
  std::string name;
  ScalarType type = ScalarType::kFloat32;
  bool is_list = false;
  ScalarType count_type = ScalarType::kUInt8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

[[noreturn]] void parse_fail(std::size_t offset, const std::string& what) {
  throw Error(ErrorCode::kParse, "PLY byte " + std::to_string(offset) + ": " + what);
}

/// Uniform scalar source over ascii tokens or binary little-endian data.
class ScalarSource {
public:
  ScalarSource(std::span<const std::uint8_t> bytes, std::size_t offset, bool ascii)
      : bytes_(bytes), offset_(offset), ascii_(ascii) {}

  /// Float properties are returned as the exact stored float when 32-bit.
  double read(ScalarType type) {
    if (ascii_) return read_ascii(type);
    return read_binary(type);
  }

  std::size_t offset() const { return offset_; }

private:
  template <typename T>
  double take() {
    if (bytes_.size() - offset_ < sizeof(T)) parse_fail(offset_, "unexpected end of binary data");
    T v;
    std::memcpy(&v, bytes_.data() + offset_, sizeof(T));
    offset_ += sizeof(T);
    return static_cast<double>(v);
  }

  double read_binary(ScalarType type) {
    switch (type) {
      case ScalarType::kInt8: return take<std::int8_t>();
      case ScalarType::kUInt8: return take<std::uint8_t>();
      case ScalarType::kInt16: return take<std::int16_t>();
      case ScalarType::kUInt16: return take<std::uint16_t>();
      case ScalarType::kInt32: return take<std::int32_t>();
      case ScalarType::kUInt32: return take<std::uint32_t>();
      case ScalarType::kFloat32: return take<float>();
      case ScalarType::kFloat64: return take<double>();
    }
    return 0.0;
  }

  double read_ascii(ScalarType type) {
    while (offset_ < bytes_.size() && std::isspace(bytes_[offset_])) ++offset_;
    if (offset_ >= bytes_.size()) parse_fail(offset_, "unexpected end of ascii data");
    const auto start = offset_;
    while (offset_ < bytes_.size() && !std::isspace(bytes_[offset_])) ++offset_;
    const char* first = reinterpret_cast<const char*>(bytes_.data() + start);
    const char* last = reinterpret_cast<const char*>(bytes_.data() + offset_);
    if (type == ScalarType::kFloat32) {
      float v;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last) parse_fail(start, "malformed float token");
      return v;
    }
    if (is_float(type)) {
      double v;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last) parse_fail(start, "malformed double token");
      return v;
    }
    long long v;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) parse_fail(start, "malformed integer token");
    return static_cast<double>(v);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t offset_;
  bool ascii_;
};

const char* type_name(ScalarType t) {
  switch (t) {
    case ScalarType::kInt8: return "char";
    case ScalarType::kUInt8: return "uchar";
    case ScalarType::kInt16: return "short";
    case ScalarType::kUInt16: return "ushort";
    case ScalarType::kInt32: return "int";
    case ScalarType::kUInt32: return "uint";
    case ScalarType::kFloat32: return "float";
    case ScalarType::kFloat64: return "double";
  }
  return "?";
}

}  // namespace

SceneGeometry parse_ply(std::span<const std::uint8_t> bytes) {
  // Header.
  std::size_t pos = 0;
  std::vector<Element> elements;
  bool ascii = false;
  bool saw_format = false;
  bool first_line = true;
  for (;;) {
    const auto line_start = pos;
    while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    if (pos >= bytes.size()) parse_fail(line_start, "header not terminated by end_header");
    std::string line(reinterpret_cast<const char*>(bytes.data() + line_start), pos - line_start);
    ++pos;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first_line) {
      if (line != "ply") parse_fail(line_start, "missing 'ply' magic");
      first_line = false;
      continue;
    }
    std::istringstream ss(line);
    std::string keyword;
    ss >> keyword;
    if (keyword == "end_header") break;
    if (keyword.empty() || keyword == "comment" || keyword == "obj_info") continue;
    if (keyword == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "ascii") {
        ascii = true;
      } else if (fmt != "binary_little_endian") {
        parse_fail(line_start, "unsupported format '" + fmt + "'");
      }
      saw_format = true;
    } else if (keyword == "element") {
      Element el;
      long long count = -1;
      ss >> el.name >> count;
      if (el.name.empty() || count < 0) parse_fail(line_start, "malformed element line");
      el.count = static_cast<std::size_t>(count);
      elements.push_back(std::move(el));
    } else if (keyword == "property") {
      if (elements.empty()) parse_fail(line_start, "property before any element");
      Property prop;
      std::string t;
      ss >> t;
      if (t == "list") {
        std::string ct, it;
        ss >> ct >> it >> prop.name;
        auto c = parse_type(ct);
        auto i = parse_type(it);
        if (!c || !i || is_float(*c)) parse_fail(line_start, "malformed list property");
        prop.is_list = true;
        prop.count_type = *c;
        prop.type = *i;
      } else {
        auto ty = parse_type(t);
        ss >> prop.name;
        if (!ty || prop.name.empty()) parse_fail(line_start, "malformed property '" + line + "'");
        prop.type = *ty;
      }
      elements.back().properties.push_back(prop);
    } else {
      parse_fail(line_start, "unknown header keyword '" + keyword + "'");
    }
  }
  if (!saw_format) parse_fail(0, "missing format line");

  SceneGeometry scene;
  bool has_normals = false;
  ScalarSource src(bytes, pos, ascii);
  for (const auto& el : elements) {
    if (el.name == "vertex") {
      auto find = [&](std::string_view name) -> int {
        for (std::size_t i = 0; i < el.properties.size(); ++i) {
          if (el.properties[i].name == name && !el.properties[i].is_list) return static_cast<int>(i);
        }
        return -1;
      };
      const int ix = find("x"), iy = find("y"), iz = find("z");
      if (ix < 0 || iy < 0 || iz < 0) parse_fail(pos, "vertex element lacks x/y/z");
      const int inx = find("nx"), iny = find("ny"), inz = find("nz");
      const int ir = find("red"), ig = find("green"), ib = find("blue");
      const int iinst = find("instance");
      has_normals = inx >= 0 && iny >= 0 && inz >= 0;
      const bool has_colors = ir >= 0 && ig >= 0 && ib >= 0;
      scene.points.resize(el.count);
      if (has_normals) scene.normals.resize(el.count);
      if (has_colors) scene.colors.resize(el.count);
      if (iinst >= 0) {
        if (is_float(el.properties[iinst].type)) parse_fail(pos, "instance property must be integral");
        scene.gt_instance.resize(el.count);
      }
      std::vector<double> values(el.properties.size());
      for (std::size_t v = 0; v < el.count; ++v) {
        for (std::size_t p = 0; p < el.properties.size(); ++p) {
          const auto& prop = el.properties[p];
          if (prop.is_list) {
            const auto n = static_cast<std::size_t>(src.read(prop.count_type));
            for (std::size_t k = 0; k < n; ++k) src.read(prop.type);
            values[p] = 0.0;
          } else {
            values[p] = src.read(prop.type);
          }
        }
        scene.points[v] = Vec3f(static_cast<float>(values[ix]), static_cast<float>(values[iy]),
                                static_cast<float>(values[iz]));
        if (has_normals) {
          scene.normals[v] = Vec3f(static_cast<float>(values[inx]), static_cast<float>(values[iny]),
                                   static_cast<float>(values[inz]));
        }
        if (has_colors) {
          Vec3f c(static_cast<float>(values[ir]), static_cast<float>(values[ig]), static_cast<float>(values[ib]));
          if (!is_float(el.properties[ir].type)) c /= 255.0f;
          scene.colors[v] = c;
        }
        if (iinst >= 0) scene.gt_instance[v] = static_cast<std::int32_t>(values[iinst]);
      }
    } else if (el.name == "face") {
      for (std::size_t f = 0; f < el.count; ++f) {
        for (const auto& prop : el.properties) {
          if (prop.is_list && (prop.name == "vertex_indices" || prop.name == "vertex_index")) {
            const auto at = src.offset();
            const auto n = static_cast<std::size_t>(src.read(prop.count_type));
            std::vector<std::uint32_t> poly(n);
            for (auto& idx : poly) {
              const double d = src.read(prop.type);
              if (d < 0) parse_fail(at, "negative vertex index");
              idx = static_cast<std::uint32_t>(d);
            }
            if (n < 3) parse_fail(at, "face with fewer than 3 vertices");
            for (std::size_t k = 1; k + 1 < n; ++k) scene.faces.push_back({poly[0], poly[k], poly[k + 1]});
          } else if (prop.is_list) {
            const auto n = static_cast<std::size_t>(src.read(prop.count_type));
            for (std::size_t k = 0; k < n; ++k) src.read(prop.type);
          } else {
            src.read(prop.type);
          }
        }
      }
    } else {
      for (std::size_t i = 0; i < el.count; ++i) {
        for (const auto& prop : el.properties) {
          if (prop.is_list) {
            const auto n = static_cast<std::size_t>(src.read(prop.count_type));
            for (std::size_t k = 0; k < n; ++k) src.read(prop.type);
          } else {
            src.read(prop.type);
          }
        }
      }
    }
  }

  if (scene.points.empty()) throw Error(ErrorCode::kEmptyScene, "PLY contains no vertices");
  for (std::size_t f = 0; f < scene.faces.size(); ++f) {
    for (auto idx : scene.faces[f]) {
      if (idx >= scene.points.size()) {
        throw Error(ErrorCode::kParse, "face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                                           " beyond vertex count");
      }
    }
  }
  if (!has_normals) fill_normals(scene);
  validate_scene(scene);
  return scene;
}

SceneGeometry load_scene(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_ply(bytes);
}

std::vector<std::uint8_t> encode_ply(const SceneGeometry& scene) {
  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\ncomment supercut scene\n";
  header << "element vertex " << scene.size() << "\n";
  header << "property float x\nproperty float y\nproperty float z\n";
  header << "property float nx\nproperty float ny\nproperty float nz\n";
  if (scene.has_colors()) header << "property float red\nproperty float green\nproperty float blue\n";
  if (scene.has_gt()) header << "property " << type_name(ScalarType::kInt32) << " instance\n";
  if (scene.is_mesh()) header << "element face " << scene.faces.size() << "\nproperty list uchar uint vertex_indices\n";
  header << "end_header\n";

  ByteWriter w;
  w.put_magic(header.str());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    for (int k = 0; k < 3; ++k) w.put(scene.points[i][k]);
    for (int k = 0; k < 3; ++k) w.put(scene.normals[i][k]);
    if (scene.has_colors()) {
      for (int k = 0; k < 3; ++k) w.put(scene.colors[i][k]);
    }
    if (scene.has_gt()) w.put(scene.gt_instance[i]);
  }
  for (const auto& f : scene.faces) {
    w.put(static_cast<std::uint8_t>(3));
    for (auto idx : f) w.put(idx);
  }
  return w.bytes();
}

void save_scene(const SceneGeometry& scene, const std::filesystem::path& path) {
  write_file_atomic(path, encode_ply(scene));
}

void fill_normals(SceneGeometry& scene) {
  const std::size_t n = scene.size();
  scene.normals.assign(n, Vec3f::Zero());
  std::vector<Eigen::Vector3d> accum(n, Eigen::Vector3d::Zero());
  for (const auto& f : scene.faces) {
    const Eigen::Vector3d a = scene.points[f[0]].cast<double>();
    const Eigen::Vector3d b = scene.points[f[1]].cast<double>();
    const Eigen::Vector3d c = scene.points[f[2]].cast<double>();
    const Eigen::Vector3d area_normal = (b - a).cross(c - a);  // length = 2 * area
    for (auto idx : f) accum[idx] += area_normal;
  }
  std::vector<std::uint32_t> needs_pca;
  for (std::size_t i = 0; i < n; ++i) {
    const double len = accum[i].norm();
    if (len > 0) {
      scene.normals[i] = (accum[i] / len).cast<float>();
    } else {
      needs_pca.push_back(static_cast<std::uint32_t>(i));
    }
  }
  if (needs_pca.empty()) return;

  Vec3f lo = scene.points[0], hi = lo;
  for (const auto& p : scene.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Eigen::Vector3d center = (0.5f * (lo + hi)).cast<double>();
  const KdTree tree(scene.points);
  for (auto i : needs_pca) {
    const auto nbrs = tree.knn(scene.points[i], 16);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (auto j : nbrs) mean += scene.points[j].cast<double>();
    mean /= static_cast<double>(nbrs.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (auto j : nbrs) {
      const Eigen::Vector3d d = scene.points[j].cast<double>() - mean;
      cov += d * d.transpose();
    }
    Eigen::Vector3d normal(0, 0, 1);
    if (nbrs.size() >= 3) {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
      normal = solver.eigenvectors().col(0);  // smallest eigenvalue
    }
    if (normal.dot(center - scene.points[i].cast<double>()) < 0) normal = -normal;
    scene.normals[i] = normal.normalized().cast<float>();
  }
}

}  // namespace supercut
