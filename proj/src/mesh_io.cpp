#include "garment/mesh_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace garment::io {

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

std::string format_vec(const Vec3& v) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g", v.x(), v.y(), v.z());
  return buf;
}

int parse_obj_index(const std::string& token, int vertex_count) {
  const std::string head = token.substr(0, token.find('/'));
  const int idx = std::stoi(head);
  if (idx <= 0 || idx > vertex_count) {
    throw std::runtime_error("OBJ face index out of range: " + token);
  }
  return idx - 1;
}

}  // namespace

Mesh read_obj(std::istream& in) {
  Mesh mesh;
  std::vector<std::string> pending_faces;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) throw std::runtime_error("bad OBJ vertex: " + line);
      mesh.vertices.push_back(p);
    } else if (tag == "f") {
      pending_faces.push_back(line);
    }
  }
  for (const std::string& rec : pending_faces) {
    std::istringstream ls(rec);
    std::string tag;
    ls >> tag;
    std::vector<int> idx;
    std::string tok;
    while (ls >> tok) idx.push_back(parse_obj_index(tok, mesh.num_vertices()));
    if (idx.size() != 3) throw std::runtime_error("OBJ face is not a triangle: " + rec);
    mesh.faces.push_back({idx[0], idx[1], idx[2]});
  }
  mesh.validate();
  return mesh;
}

Mesh read_obj(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_obj(in);
}

void write_obj(std::ostream& out, const Mesh& mesh, std::span<const Vec3> normals) {
  for (const Vec3& v : mesh.vertices) out << "v " << format_vec(v) << '\n';
  for (const Vec3& n : normals) out << "vn " << format_vec(n) << '\n';
  const bool with_normals = normals.size() == mesh.vertices.size() && !normals.empty();
  for (const Face& f : mesh.faces) {
    out << 'f';
    for (int v : f) {
      out << ' ' << v + 1;
      if (with_normals) out << "//" << v + 1;
    }
    out << '\n';
  }
}

void write_obj(const std::filesystem::path& path, const Mesh& mesh, std::span<const Vec3> normals) {
  auto out = open_out(path);
  write_obj(out, mesh, normals);
}

PointCloud read_xyz(std::istream& in) {
  PointCloud cloud;
  std::string line;
  int columns = -1;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<double> vals;
    double x;
    while (ls >> x) vals.push_back(x);
    if (vals.empty()) continue;
    if (vals.size() != 3 && vals.size() != 6) throw std::runtime_error("bad XYZ record: " + line);
    if (columns < 0) columns = static_cast<int>(vals.size());
    if (columns != static_cast<int>(vals.size())) {
      throw std::runtime_error("XYZ records mix 3 and 6 columns");
    }
    cloud.points.emplace_back(vals[0], vals[1], vals[2]);
    if (columns == 6) cloud.normals.emplace_back(vals[3], vals[4], vals[5]);
  }
  return cloud;
}

PointCloud read_xyz(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_xyz(in);
}

void write_xyz(std::ostream& out, const PointCloud& cloud) {
  for (int i = 0; i < cloud.size(); ++i) {
    out << format_vec(cloud.points[i]);
    if (cloud.has_normals()) out << ' ' << format_vec(cloud.normals[i]);
    out << '\n';
  }
}

void write_xyz(const std::filesystem::path& path, const PointCloud& cloud) {
  auto out = open_out(path);
  write_xyz(out, cloud);
}

PointCloud read_ply(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) {
    throw std::runtime_error("missing PLY magic");
  }
  int count = -1;
  std::vector<std::string> props;
  bool in_vertex = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw std::runtime_error("only ascii PLY is supported");
    } else if (tag == "element") {
      std::string name;
      ls >> name;
      in_vertex = name == "vertex";
      if (in_vertex) ls >> count;
    } else if (tag == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      props.push_back(name);
    } else if (tag == "end_header") {
      break;
    }
  }
  if (count < 0) throw std::runtime_error("PLY has no vertex element");
  auto find = [&](const std::string& name) {
    for (std::size_t i = 0; i < props.size(); ++i)
      if (props[i] == name) return static_cast<int>(i);
    return -1;
  };
  const int ix = find("x"), iy = find("y"), iz = find("z");
  const int inx = find("nx"), iny = find("ny"), inz = find("nz");
  if (ix < 0 || iy < 0 || iz < 0) throw std::runtime_error("PLY vertex lacks x/y/z");
  const bool normals = inx >= 0 && iny >= 0 && inz >= 0;

  PointCloud cloud;
  std::vector<double> vals(props.size());
  for (int i = 0; i < count; ++i) {
    for (double& v : vals) {
      if (!(in >> v)) throw std::runtime_error("truncated PLY vertex data");
    }
    cloud.points.emplace_back(vals[ix], vals[iy], vals[iz]);
    if (normals) cloud.normals.emplace_back(vals[inx], vals[iny], vals[inz]);
  }
  return cloud;
}

PointCloud read_ply(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_ply(in);
}

void write_ply(std::ostream& out, const PointCloud& cloud) {
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << '\n'
      << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_normals()) out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "end_header\n";
  write_xyz(out, cloud);
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  auto out = open_out(path);
  write_ply(out, cloud);
}

}  // namespace garment::io
