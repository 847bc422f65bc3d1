#pragma once

#include <filesystem>
#include <iosfwd>

#include "garment/mesh.hpp"

namespace garment::io {

// OBJ: `v x y z` and `f a b c` records with 1-based indices. Optional `vn`
// records are written when normals are supplied. Anything else is ignored on read.
Mesh read_obj(std::istream& in);
Mesh read_obj(const std::filesystem::path& path);
void write_obj(std::ostream& out, const Mesh& mesh, std::span<const Vec3> normals = {});
void write_obj(const std::filesystem::path& path, const Mesh& mesh,
               std::span<const Vec3> normals = {});

// XYZ: one point per line, `x y z` or `x y z nx ny nz`.
PointCloud read_xyz(std::istream& in);
PointCloud read_xyz(const std::filesystem::path& path);
void write_xyz(std::ostream& out, const PointCloud& cloud);
void write_xyz(const std::filesystem::path& path, const PointCloud& cloud);

// ASCII PLY with vertex properties x y z and optional nx ny nz.
PointCloud read_ply(std::istream& in);
PointCloud read_ply(const std::filesystem::path& path);
void write_ply(std::ostream& out, const PointCloud& cloud);
void write_ply(const std::filesystem::path& path, const PointCloud& cloud);

}  // namespace garment::io
