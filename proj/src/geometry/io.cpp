#include <algorithm>
#include <charconv>
#include <deque>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"

#include "specshape/error.hpp"
#include "specshape/geometry.hpp"

namespace specshape {

namespace {

// Float32 round-trip precision.
constexpr int kCoordDigits = 9;

struct Line {
  std::size_t number;
  std::vector<std::string_view> tokens;
};

std::vector<std::string_view> split(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

double parse_double(std::string_view tok, const std::string& name, std::size_t line) {
  double value = 0.0;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(name, line, "expected a number, got '" + std::string(tok) + "'");
  }
  return value;
}

long parse_int(std::string_view tok, const std::string& name, std::size_t line) {
  long value = 0;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(name, line, "expected an integer, got '" + std::string(tok) + "'");
  }
  return value;
}

// Reads non-empty, comment-stripped lines; the text buffers outlive the views.
class LineReader {
 public:
  LineReader(std::istream& in, char comment) {
    std::string text;
    std::size_t number = 0;
    while (std::getline(in, text)) {
      ++number;
      if (auto pos = text.find(comment); pos != std::string::npos) text.resize(pos);
      storage_.push_back(std::move(text));
      auto tokens = split(storage_.back());
      if (!tokens.empty()) lines_.push_back({number, std::move(tokens)});
    }
  }

  const std::vector<Line>& lines() const { return lines_; }

 private:
  std::deque<std::string> storage_;
  std::vector<Line> lines_;
};

std::string lowercase_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

void check_stream(const std::ostream& out, const std::string& what) {
  if (!out) throw DataError("failed writing " + what);
}

}  // namespace

Mesh read_off(std::istream& in, const std::string& name) {
  LineReader reader(in, '#');
  const auto& lines = reader.lines();
  if (lines.empty()) throw ParseError(name, 1, "empty OFF file");

  // Flatten to tokens but remember their line numbers for diagnostics.
  std::vector<std::pair<std::string_view, std::size_t>> tokens;
  for (const auto& line : lines) {
    for (auto tok : line.tokens) tokens.emplace_back(tok, line.number);
  }
  std::size_t pos = 0;
  if (tokens[pos].first != "OFF") {
    throw ParseError(name, tokens[pos].second, "missing OFF header");
  }
  ++pos;
  auto next = [&]() -> std::pair<std::string_view, std::size_t> {
    if (pos >= tokens.size()) {
      throw ParseError(name, lines.back().number, "unexpected end of file");
    }
    return tokens[pos++];
  };
  auto [tv, lv] = next();
  const long nv = parse_int(tv, name, lv);
  auto [tf, lf] = next();
  const long nf = parse_int(tf, name, lf);
  auto [te, le] = next();
  parse_int(te, name, le);  // edge count, unused
  if (nv < 0 || nf < 0) throw ParseError(name, lv, "negative element counts");

  Mesh mesh;
  mesh.vertices.resize(nv, 3);
  for (long i = 0; i < nv; ++i) {
    for (int c = 0; c < 3; ++c) {
      auto [tok, ln] = next();
      mesh.vertices(i, c) = parse_double(tok, name, ln);
    }
  }
  mesh.faces.resize(nf, 3);
  for (long f = 0; f < nf; ++f) {
    auto [tc, lc] = next();
    const long count = parse_int(tc, name, lc);
    if (count != 3) {
      throw ParseError(name, lc, "face " + std::to_string(f) + " has " + std::to_string(count) +
                                     " vertices; only triangles are supported");
    }
    for (int c = 0; c < 3; ++c) {
      auto [tok, ln] = next();
      const long idx = parse_int(tok, name, ln);
      if (idx < 0 || idx >= nv) {
        throw ParseError(name, ln, "face " + std::to_string(f) + " references vertex " +
                                       std::to_string(idx) + " but there are " + std::to_string(nv) +
                                       " vertices");
      }
      mesh.faces(f, c) = static_cast<int>(idx);
    }
    // Per-face colour values may follow on the same line; skip them.
    while (pos < tokens.size() && tokens[pos].second == lc) ++pos;
  }
  return mesh;
}

void write_off(const Mesh& mesh, std::ostream& out) {
  out << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_faces() << " 0\n";
  out << std::setprecision(kCoordDigits);
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    out << mesh.vertices(i, 0) << ' ' << mesh.vertices(i, 1) << ' ' << mesh.vertices(i, 2) << '\n';
  }
  for (int f = 0; f < mesh.num_faces(); ++f) {
    out << "3 " << mesh.faces(f, 0) << ' ' << mesh.faces(f, 1) << ' ' << mesh.faces(f, 2) << '\n';
  }
  check_stream(out, "OFF");
}

Shape read_obj(std::istream& in, const std::string& name, const WarningSink& warn) {
  LineReader reader(in, '#');
  std::vector<Eigen::RowVector3d> verts;
  std::vector<std::array<long, 3>> faces;
  std::vector<std::size_t> face_lines;
  std::set<std::string> warned;

  for (const auto& line : reader.lines()) {
    const auto& t = line.tokens;
    if (t[0] == "v") {
      if (t.size() < 4) throw ParseError(name, line.number, "vertex record needs 3 coordinates");
      verts.emplace_back(parse_double(t[1], name, line.number), parse_double(t[2], name, line.number),
                         parse_double(t[3], name, line.number));
    } else if (t[0] == "f") {
      if (t.size() != 4) {
        throw ParseError(name, line.number, "face with " + std::to_string(t.size() - 1) +
                                                " vertices; only triangles are supported");
      }
      std::array<long, 3> face{};
      for (int c = 0; c < 3; ++c) {
        const auto tok = t[c + 1].substr(0, t[c + 1].find('/'));
        long idx = parse_int(tok, name, line.number);
        // 1-based; negative values count back from the latest vertex.
        idx = idx < 0 ? static_cast<long>(verts.size()) + idx : idx - 1;
        face[c] = idx;
      }
      faces.push_back(face);
      face_lines.push_back(line.number);
    } else {
      const std::string kind(t[0]);
      if (warned.insert(kind).second && warn) {
        warn(name + ":" + std::to_string(line.number) + ": ignoring OBJ record '" + kind + "'");
      }
    }
  }

  Points3 vertices(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) vertices.row(i) = verts[i];
  if (faces.empty()) return PointCloud{std::move(vertices)};

  Mesh mesh;
  mesh.vertices = std::move(vertices);
  mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int c = 0; c < 3; ++c) {
      if (faces[f][c] < 0 || faces[f][c] >= mesh.vertices.rows()) {
        throw ParseError(name, face_lines[f], "face " + std::to_string(f) + " references vertex " +
                                                  std::to_string(faces[f][c]) + " (0-based) but there are " +
                                                  std::to_string(mesh.vertices.rows()) + " vertices");
      }
      mesh.faces(f, c) = static_cast<int>(faces[f][c]);
    }
  }
  return mesh;
}

void write_obj(const Mesh& mesh, std::ostream& out) {
  out << std::setprecision(kCoordDigits);
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    out << "v " << mesh.vertices(i, 0) << ' ' << mesh.vertices(i, 1) << ' ' << mesh.vertices(i, 2) << '\n';
  }
  for (int f = 0; f < mesh.num_faces(); ++f) {
    out << "f " << mesh.faces(f, 0) + 1 << ' ' << mesh.faces(f, 1) + 1 << ' ' << mesh.faces(f, 2) + 1 << '\n';
  }
  check_stream(out, "OBJ");
}

void write_obj(const PointCloud& cloud, std::ostream& out) {
  out << std::setprecision(kCoordDigits);
  for (int i = 0; i < cloud.size(); ++i) {
    out << "v " << cloud.points(i, 0) << ' ' << cloud.points(i, 1) << ' ' << cloud.points(i, 2) << '\n';
  }
  check_stream(out, "OBJ");
}

PointCloud read_xyz(std::istream& in, const std::string& name) {
  LineReader reader(in, '#');
  PointCloud cloud;
  cloud.points.resize(static_cast<Eigen::Index>(reader.lines().size()), 3);
  Eigen::Index row = 0;
  for (const auto& line : reader.lines()) {
    if (line.tokens.size() != 3) {
      throw ParseError(name, line.number, "expected 3 columns, got " + std::to_string(line.tokens.size()));
    }
    for (int c = 0; c < 3; ++c) cloud.points(row, c) = parse_double(line.tokens[c], name, line.number);
    ++row;
  }
  return cloud;
}

void write_xyz(const PointCloud& cloud, std::ostream& out) {
  out << std::setprecision(kCoordDigits);
  for (int i = 0; i < cloud.size(); ++i) {
    out << cloud.points(i, 0) << ' ' << cloud.points(i, 1) << ' ' << cloud.points(i, 2) << '\n';
  }
  check_stream(out, "XYZ");
}

Contour read_contour_json(std::istream& in, const std::string& name) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(name + ": byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!doc.is_array()) throw DataError(name + ": contour JSON must be an array of [x, y] pairs");
  Contour contour;
  contour.points.resize(static_cast<Eigen::Index>(doc.size()), 2);
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& p = doc[i];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw DataError(name + ": element " + std::to_string(i) + " is not an [x, y] pair");
    }
    contour.points(i, 0) = p[0].get<double>();
    contour.points(i, 1) = p[1].get<double>();
  }
  return contour;
}

void write_contour_json(const Contour& contour, std::ostream& out) {
  nlohmann::json doc = nlohmann::json::array();
  for (int i = 0; i < contour.size(); ++i) doc.push_back({contour.points(i, 0), contour.points(i, 1)});
  out << doc.dump() << '\n';
  check_stream(out, "contour JSON");
}

Shape load_shape(const std::filesystem::path& path, const WarningSink& warn) {
  const std::string ext = lowercase_extension(path);
  if (ext != ".off" && ext != ".obj" && ext != ".xyz" && ext != ".json") {
    throw ConfigError("unsupported shape extension '" + ext + "' (" + path.string() + ")");
  }
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  const std::string name = path.string();
  if (ext == ".off") return read_off(in, name);
  if (ext == ".obj") return read_obj(in, name, warn);
  if (ext == ".xyz") return read_xyz(in, name);
  return read_contour_json(in, name);
}

void save_shape(const Shape& shape, const std::filesystem::path& path) {
  const std::string ext = lowercase_extension(path);
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Mesh>) {
          if (ext == ".off") return write_off(s, out);
          if (ext == ".obj") return write_obj(s, out);
          throw ConfigError("meshes are saved as .off or .obj, not '" + ext + "'");
        } else if constexpr (std::is_same_v<T, PointCloud>) {
          if (ext == ".xyz") return write_xyz(s, out);
          if (ext == ".obj") return write_obj(s, out);
          throw ConfigError("point clouds are saved as .xyz or .obj, not '" + ext + "'");
        } else {
          if (ext == ".json") return write_contour_json(s, out);
          throw ConfigError("contours are saved as .json, not '" + ext + "'");
        }
      },
      shape);
}

}  // namespace specshape
