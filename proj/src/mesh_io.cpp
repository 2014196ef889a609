// PLY/OBJ mesh parsing for dataio. Text formats only; every failure is a
// typed error carrying the offending line number.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "polarpose/dataio.hpp"
#include "polarpose/error.hpp"

namespace polarpose::dataio {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

void strip_cr(std::string& line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) tokens.push_back(tok);
  return tokens;
}

double parse_double(const std::string& tok, const std::string& path, int line_no) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError(path, line_no, "expected a number, got '" + tok + "'");
  if (!std::isfinite(value))
    throw ParseError(path, line_no, "non-finite coordinate rejected");
  return value;
}

long parse_long(const std::string& tok, const std::string& path, int line_no) {
  long value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError(path, line_no, "expected an integer, got '" + tok + "'");
  return value;
}

void append_fan(std::vector<std::array<int, 3>>& faces, const std::vector<int>& poly) {
  for (std::size_t i = 1; i + 1 < poly.size(); ++i)
    faces.push_back({poly[0], static_cast<int>(poly[i]), poly[i + 1]});
}

metrics::MeshModel parse_ply(std::istream& in, const std::string& path) {
  std::string line;
  int line_no = 0;
  auto next_line = [&](bool required) -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      strip_cr(line);
      return true;
    }
    if (required) throw ParseError(path, line_no, "unexpected end of file");
    return false;
  };

  next_line(true);
  if (line != "ply") throw ParseError(path, line_no, "missing 'ply' magic");

  long n_vertices = -1;
  long n_faces = 0;
  bool ascii = false;
  bool in_vertex_element = false;
  bool in_face_element = false;
  int prop_count = 0;
  int x_idx = -1, y_idx = -1, z_idx = -1;

  while (true) {
    next_line(true);
    if (line == "end_header") break;
    auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    const std::string& kw = tokens[0];

    if (kw == "comment" || kw == "obj_info") continue;
    if (kw == "format") {
      if (tokens.size() < 2 || tokens[1] != "ascii")
        throw ParseError(path, line_no, "only ASCII PLY is supported");
      ascii = true;
    } else if (kw == "element") {
      if (tokens.size() < 3) throw ParseError(path, line_no, "malformed element");
      in_vertex_element = in_face_element = false;
      if (tokens[1] == "vertex") {
        n_vertices = parse_long(tokens[2], path, line_no);
        in_vertex_element = true;
      } else if (tokens[1] == "face") {
        n_faces = parse_long(tokens[2], path, line_no);
        in_face_element = true;
      } else {
        throw ParseError(path, line_no, "unsupported element '" + tokens[1] + "'");
      }
    } else if (kw == "property") {
      if (in_vertex_element) {
        if (tokens.size() < 3) throw ParseError(path, line_no, "malformed property");
        const std::string& name = tokens.back();
        if (name == "x") x_idx = prop_count;
        if (name == "y") y_idx = prop_count;
        if (name == "z") z_idx = prop_count;
        ++prop_count;
      } else if (in_face_element) {
        // The index list is the only face property we consume.
        if (tokens.size() >= 2 && tokens[1] == "list") continue;
      }
    } else {
      throw ParseError(path, line_no, "unknown header keyword '" + kw + "'");
    }
  }
  if (!ascii) throw ParseError(path, line_no, "missing format declaration");
  if (n_vertices < 0) throw ParseError(path, line_no, "missing vertex element");
  if (x_idx < 0 || y_idx < 0 || z_idx < 0)
    throw ParseError(path, line_no, "vertex element lacks x/y/z properties");

  std::vector<Eigen::Vector3d> vertices;
  vertices.reserve(n_vertices);
  for (long i = 0; i < n_vertices; ++i) {
    next_line(true);
    auto tokens = tokenize(line);
    if (static_cast<int>(tokens.size()) < prop_count)
      throw ParseError(path, line_no, "vertex line has too few values");
    vertices.emplace_back(parse_double(tokens[x_idx], path, line_no),
                          parse_double(tokens[y_idx], path, line_no),
                          parse_double(tokens[z_idx], path, line_no));
  }

  std::vector<std::array<int, 3>> faces;
  faces.reserve(n_faces);
  for (long f = 0; f < n_faces; ++f) {
    next_line(true);
    auto tokens = tokenize(line);
    if (tokens.empty()) throw ParseError(path, line_no, "empty face line");
    long count = parse_long(tokens[0], path, line_no);
    if (count < 3) throw ParseError(path, line_no, "face needs at least 3 indices");
    if (static_cast<long>(tokens.size()) < count + 1)
      throw ParseError(path, line_no, "face line has too few indices");
    std::vector<int> poly;
    for (long j = 0; j < count; ++j) {
      long idx = parse_long(tokens[1 + j], path, line_no);
      if (idx < 0 || idx >= n_vertices)
        throw ParseError(path, line_no, "face index out of range");
      poly.push_back(static_cast<int>(idx));
    }
    append_fan(faces, poly);
  }

  return metrics::MeshModel::create(std::move(vertices), std::move(faces));
}

metrics::MeshModel parse_obj(std::istream& in, const std::string& path) {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    auto tokens = tokenize(line);
    if (tokens.empty() || tokens[0][0] == '#') continue;
    const std::string& kw = tokens[0];

    if (kw == "v") {
      if (tokens.size() < 4)
        throw ParseError(path, line_no, "vertex line needs 3 coordinates");
      vertices.emplace_back(parse_double(tokens[1], path, line_no),
                            parse_double(tokens[2], path, line_no),
                            parse_double(tokens[3], path, line_no));
    } else if (kw == "f") {
      if (tokens.size() < 4)
        throw ParseError(path, line_no, "face line needs at least 3 vertices");
      std::vector<int> poly;
      for (std::size_t t = 1; t < tokens.size(); ++t) {
        std::string ref = tokens[t].substr(0, tokens[t].find('/'));
        long idx = parse_long(ref, path, line_no);
        if (idx < 0) idx = static_cast<long>(vertices.size()) + idx;  // relative
        else --idx;                                                   // 1-based
        if (idx < 0 || idx >= static_cast<long>(vertices.size()))
          throw ParseError(path, line_no, "face index out of range");
        poly.push_back(static_cast<int>(idx));
      }
      append_fan(faces, poly);
    }
    // vn/vt/o/g/s/usemtl/mtllib and friends are irrelevant here.
  }

  if (vertices.empty()) throw ParseError(path, line_no, "no vertices found");
  return metrics::MeshModel::create(std::move(vertices), std::move(faces));
}

}  // namespace

metrics::MeshModel load_mesh(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open mesh file " + path.string());

  const std::string ext = lower(path.extension().string());
  if (ext == ".ply") return parse_ply(in, path.string());
  if (ext == ".obj") return parse_obj(in, path.string());
  throw LoadError("unsupported mesh format '" + ext + "' for " + path.string());
}

}  // namespace polarpose::dataio
