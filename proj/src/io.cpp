#include "avol/io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace avol {

namespace {

std::string lower_ext(const std::string& path) {
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext;
}

[[noreturn]] void parse_fail(const std::string& name, int line, const std::string& what) {
  throw DataError(name + ":" + std::to_string(line) + ": " + what);
}

void normalize_normals(PointSet& ps, const std::string& name) {
  for (size_t i = 0; i < ps.normals.size(); ++i) {
    double n = ps.normals[i].norm();
    if (n < 1e-12) throw DataError(name + ": zero-length normal at point " + std::to_string(i));
    ps.normals[i] /= n;
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  return in;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << text;
}

PointSet read_xyz(std::istream& in, const std::string& name) {
  PointSet ps;
  std::string line;
  int lineno = 0;
  bool saw_normals = false;
  while (std::getline(in, line)) {
    ++lineno;
    size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    double x, y, z;
    if (!(ls >> x >> y >> z)) parse_fail(name, lineno, "expected \"x y z [nx ny nz]\"");
    double nx, ny, nz;
    bool has_n = bool(ls >> nx);
    if (has_n && !(ls >> ny >> nz)) parse_fail(name, lineno, "normal needs 3 components");
    std::string rest;
    if (ls >> rest) parse_fail(name, lineno, "trailing fields: " + rest);
    if (!ps.positions.empty() && has_n != saw_normals)
      parse_fail(name, lineno, "inconsistent normal columns");
    saw_normals = has_n;
    ps.positions.emplace_back(x, y, z);
    if (has_n) ps.normals.emplace_back(nx, ny, nz);
  }
  normalize_normals(ps, name);
  return ps;
}

void write_xyz(const PointSet& points, std::ostream& out) {
  char buf[256];
  for (size_t i = 0; i < points.positions.size(); ++i) {
    const Vec3& p = points.positions[i];
    if (points.has_normals()) {
      const Vec3& n = points.normals[i];
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g %.17g %.17g\n", p.x(), p.y(),
                    p.z(), n.x(), n.y(), n.z());
    } else {
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
    }
    out << buf;
  }
}

TriangleMesh read_obj(std::istream& in, const std::string& name) {
  TriangleMesh mesh;
  std::vector<Vec3> vnormals;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) parse_fail(name, lineno, "bad vertex");
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "vn") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) parse_fail(name, lineno, "bad normal");
      vnormals.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        // "v", "v/vt", "v//vn", "v/vt/vn"
        int v = std::atoi(tok.c_str());
        if (v == 0) parse_fail(name, lineno, "bad face index: " + tok);
        if (v < 0) v = int(mesh.vertices.size()) + v + 1;
        if (v < 1 || v > int(mesh.vertices.size()))
          parse_fail(name, lineno, "face index out of range");
        idx.push_back(v - 1);
      }
      if (idx.size() < 3) parse_fail(name, lineno, "face needs >= 3 vertices");
      for (size_t k = 2; k < idx.size(); ++k)
        mesh.triangles.push_back({idx[0], idx[k - 1], idx[k]});
    }
  }
  if (vnormals.size() == mesh.vertices.size()) mesh.normals = std::move(vnormals);
  return mesh;
}

void write_obj(const TriangleMesh& mesh, std::ostream& out) {
  char buf[256];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const Vec3& n : mesh.normals) {
    std::snprintf(buf, sizeof buf, "vn %.9g %.9g %.9g\n", n.x(), n.y(), n.z());
    out << buf;
  }
  bool with_normals = mesh.normals.size() == mesh.vertices.size();
  for (const auto& t : mesh.triangles) {
    if (with_normals) {
      std::snprintf(buf, sizeof buf, "f %d//%d %d//%d %d//%d\n", t[0] + 1, t[0] + 1, t[1] + 1,
                    t[1] + 1, t[2] + 1, t[2] + 1);
    } else {
      std::snprintf(buf, sizeof buf, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out << buf;
  }
}

namespace {

struct PlyProperty {
  std::string type;
  std::string name;
  bool is_list = false;
  std::string count_type;
};

struct PlyElement {
  std::string name;
  long count = 0;
  std::vector<PlyProperty> props;
};

size_t scalar_size(const std::string& t) {
  static const std::map<std::string, size_t> sizes = {
      {"char", 1},  {"int8", 1},    {"uchar", 1},  {"uint8", 1},  {"short", 2},
      {"int16", 2}, {"ushort", 2},  {"uint16", 2}, {"int", 4},    {"int32", 4},
      {"uint", 4},  {"uint32", 4},  {"float", 4},  {"float32", 4}, {"double", 8},
      {"float64", 8}};
  auto it = sizes.find(t);
  if (it == sizes.end()) throw DataError("unsupported PLY scalar type: " + t);
  return it->second;
}

double read_binary_scalar(std::istream& in, const std::string& t) {
  unsigned char buf[8];
  size_t n = scalar_size(t);
  in.read(reinterpret_cast<char*>(buf), std::streamsize(n));
  if (!in) throw DataError("unexpected end of PLY payload");
  auto as = [&]<typename T>() {
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return double(v);
  };
  if (t == "char" || t == "int8") return as.operator()<std::int8_t>();
  if (t == "uchar" || t == "uint8") return as.operator()<std::uint8_t>();
  if (t == "short" || t == "int16") return as.operator()<std::int16_t>();
  if (t == "ushort" || t == "uint16") return as.operator()<std::uint16_t>();
  if (t == "int" || t == "int32") return as.operator()<std::int32_t>();
  if (t == "uint" || t == "uint32") return as.operator()<std::uint32_t>();
  if (t == "float" || t == "float32") return as.operator()<float>();
  return as.operator()<double>();
}

}  // namespace

TriangleMesh read_ply(std::istream& in, const std::string& name) {
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) parse_fail(name, 1, "empty file");
  ++lineno;
  if (line.rfind("ply", 0) != 0) parse_fail(name, lineno, "missing ply magic");

  bool binary = false;
  std::vector<PlyElement> elements;
  for (;;) {
    if (!std::getline(in, line)) parse_fail(name, lineno, "unterminated header");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "comment" || tag == "obj_info" || tag.empty()) continue;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") binary = false;
      else if (fmt == "binary_little_endian") binary = true;
      else parse_fail(name, lineno, "unsupported PLY format: " + fmt);
    } else if (tag == "element") {
      PlyElement el;
      ls >> el.name >> el.count;
      elements.push_back(el);
    } else if (tag == "property") {
      if (elements.empty()) parse_fail(name, lineno, "property before element");
      PlyProperty p;
      ls >> p.type;
      if (p.type == "list") {
        p.is_list = true;
        ls >> p.count_type >> p.type >> p.name;
      } else {
        ls >> p.name;
      }
      elements.back().props.push_back(p);
    } else if (tag == "end_header") {
      break;
    } else {
      parse_fail(name, lineno, "unknown header line: " + line);
    }
  }

  TriangleMesh mesh;
  for (const PlyElement& el : elements) {
    bool is_vertex = el.name == "vertex";
    bool is_face = el.name == "face";
    int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
    for (size_t p = 0; p < el.props.size(); ++p) {
      const std::string& pn = el.props[p].name;
      if (pn == "x") ix = int(p);
      else if (pn == "y") iy = int(p);
      else if (pn == "z") iz = int(p);
      else if (pn == "nx") inx = int(p);
      else if (pn == "ny") iny = int(p);
      else if (pn == "nz") inz = int(p);
    }
    if (is_vertex && (ix < 0 || iy < 0 || iz < 0))
      throw DataError(name + ": vertex element lacks x/y/z");

    std::vector<double> scalars(el.props.size());
    for (long e = 0; e < el.count; ++e) {
      std::vector<int> list_values;
      if (binary) {
        for (size_t p = 0; p < el.props.size(); ++p) {
          const PlyProperty& prop = el.props[p];
          if (prop.is_list) {
            int n = int(read_binary_scalar(in, prop.count_type));
            list_values.resize(size_t(n));
            for (int k = 0; k < n; ++k) list_values[size_t(k)] = int(read_binary_scalar(in, prop.type));
          } else {
            scalars[p] = read_binary_scalar(in, prop.type);
          }
        }
      } else {
        if (!std::getline(in, line)) parse_fail(name, lineno, "unexpected end of PLY body");
        ++lineno;
        std::istringstream ls(line);
        for (size_t p = 0; p < el.props.size(); ++p) {
          const PlyProperty& prop = el.props[p];
          if (prop.is_list) {
            int n;
            if (!(ls >> n)) parse_fail(name, lineno, "bad list count");
            list_values.resize(size_t(n));
            for (int k = 0; k < n; ++k)
              if (!(ls >> list_values[size_t(k)])) parse_fail(name, lineno, "bad list entry");
          } else {
            if (!(ls >> scalars[p])) parse_fail(name, lineno, "bad scalar property");
          }
        }
      }
      if (is_vertex) {
        mesh.vertices.emplace_back(scalars[size_t(ix)], scalars[size_t(iy)], scalars[size_t(iz)]);
        if (inx >= 0 && iny >= 0 && inz >= 0)
          mesh.normals.emplace_back(scalars[size_t(inx)], scalars[size_t(iny)], scalars[size_t(inz)]);
      } else if (is_face && !list_values.empty()) {
        if (list_values.size() < 3) throw DataError(name + ": face with < 3 vertices");
        for (size_t k = 2; k < list_values.size(); ++k)
          mesh.triangles.push_back({list_values[0], list_values[k - 1], list_values[k]});
      }
    }
  }
  return mesh;
}

void write_ply(const TriangleMesh& mesh, std::ostream& out) {
  bool with_normals = mesh.normals.size() == mesh.vertices.size();
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << mesh.vertices.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (with_normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "element face " << mesh.triangles.size() << "\n";
  out << "property list uchar int vertex_indices\n";
  out << "end_header\n";
  auto put = [&](double v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    put(mesh.vertices[i].x());
    put(mesh.vertices[i].y());
    put(mesh.vertices[i].z());
    if (with_normals) {
      put(mesh.normals[i].x());
      put(mesh.normals[i].y());
      put(mesh.normals[i].z());
    }
  }
  for (const auto& t : mesh.triangles) {
    unsigned char n = 3;
    out.write(reinterpret_cast<const char*>(&n), 1);
    out.write(reinterpret_cast<const char*>(t.data()), 12);
  }
}

PointSet read_point_cloud(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string ext = lower_ext(path);
  if (ext == "ply") {
    TriangleMesh m = read_ply(in, path);
    PointSet ps;
    ps.positions = std::move(m.vertices);
    if (m.normals.size() == ps.positions.size()) ps.normals = std::move(m.normals);
    normalize_normals(ps, path);
    return ps;
  }
  if (ext == "obj") {
    TriangleMesh m = read_obj(in, path);
    PointSet ps;
    ps.positions = std::move(m.vertices);
    if (m.normals.size() == ps.positions.size()) ps.normals = std::move(m.normals);
    normalize_normals(ps, path);
    return ps;
  }
  return read_xyz(in, path);
}

TriangleMesh read_mesh(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string ext = lower_ext(path);
  if (ext == "ply") return read_ply(in, path);
  if (ext == "obj") return read_obj(in, path);
  throw DataError("unsupported mesh format: " + path);
}

void write_mesh(const TriangleMesh& mesh, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  std::string ext = lower_ext(path);
  if (ext == "ply") write_ply(mesh, out);
  else write_obj(mesh, out);
}

}  // namespace avol
