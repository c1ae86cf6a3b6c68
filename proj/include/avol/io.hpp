#pragma once

#include "avol/common.hpp"
#include "avol/mesh.hpp"

#include <iosfwd>
#include <string>

namespace avol {

// Point-cloud loading dispatched on extension (.xyz/.txt, .ply, .obj).
// Normals are normalized; positions are kept as-is (the octree builder
// clamps). Parse failures throw DataError naming the offending line.
PointSet read_point_cloud(const std::string& path);

// "x y z [nx ny nz]" per line; blank lines and '#' comments are skipped.
PointSet read_xyz(std::istream& in, const std::string& name = "<xyz>");
void write_xyz(const PointSet& points, std::ostream& out);

TriangleMesh read_mesh(const std::string& path);
TriangleMesh read_obj(std::istream& in, const std::string& name = "<obj>");
TriangleMesh read_ply(std::istream& in, const std::string& name = "<ply>");

void write_obj(const TriangleMesh& mesh, std::ostream& out);
// Binary little-endian PLY.
void write_ply(const TriangleMesh& mesh, std::ostream& out);

void write_mesh(const TriangleMesh& mesh, const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace avol
