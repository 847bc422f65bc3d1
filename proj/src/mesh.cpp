#include "garment/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace garment {

namespace {

constexpr double kDegenerateArea = 1e-12;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

}  // namespace

void Mesh::validate() const {
  const int n = num_vertices();
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Face& t = faces[f];
    for (int idx : t) {
      if (idx < 0 || idx >= n) {
        throw std::invalid_argument("face " + std::to_string(f) + " references vertex " +
                                    std::to_string(idx) + " outside [0, " +
                                    std::to_string(n) + ")");
      }
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw std::invalid_argument("face " + std::to_string(f) + " repeats a vertex");
    }
  }
}

void PointCloud::validate() const {
  if (normals.empty()) return;
  if (normals.size() != points.size()) {
    throw std::invalid_argument("point cloud normals length differs from points length");
  }
  for (const Vec3& n : normals) {
    if (std::abs(n.norm() - 1.0) > 1e-6) {
      throw std::invalid_argument("point cloud normal is not unit length");
    }
  }
}

void ScalarGrid::validate() const {
  for (int axis = 0; axis < 3; ++axis) {
    if (resolution[axis] <= 0) throw std::invalid_argument("grid resolution must be positive");
    if (!(spacing[axis] > 0.0)) throw std::invalid_argument("grid spacing must be positive");
  }
  const std::size_t expected = static_cast<std::size_t>(resolution[0]) * resolution[1] *
                               static_cast<std::size_t>(resolution[2]);
  if (values.size() != expected) {
    throw std::invalid_argument("grid value count does not match resolution");
  }
}

Bounds Bounds::inflated(double fraction) const {
  const Vec3 pad = extent() * (0.5 * fraction);
  return {lo - pad, hi + pad};
}

Bounds bounding_box(std::span<const Vec3> points) {
  if (points.empty()) return {};
  Bounds b{points[0], points[0]};
  for (const Vec3& p : points) {
    b.lo = b.lo.cwiseMin(p);
    b.hi = b.hi.cwiseMax(p);
  }
  return b;
}

Vec3 face_normal_unnormalized(const Mesh& mesh, int face) {
  const Face& f = mesh.faces[face];
  const Vec3& a = mesh.vertices[f[0]];
  const Vec3& b = mesh.vertices[f[1]];
  const Vec3& c = mesh.vertices[f[2]];
  return (b - a).cross(c - a);
}

double face_area(const Mesh& mesh, int face) {
  return 0.5 * face_normal_unnormalized(mesh, face).norm();
}

double surface_area(const Mesh& mesh) {
  double total = 0.0;
  for (int f = 0; f < mesh.num_faces(); ++f) total += face_area(mesh, f);
  return total;
}

std::vector<Vec3> compute_face_normals(const Mesh& mesh) {
  std::vector<Vec3> out(mesh.faces.size(), Vec3::Zero());
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Vec3 n = face_normal_unnormalized(mesh, f);
    const double len = n.norm();
    if (0.5 * len >= kDegenerateArea) out[f] = n / len;
  }
  return out;
}

VertexNormals compute_vertex_normals_flagged(const Mesh& mesh) {
  VertexNormals result;
  std::vector<Vec3> accum(mesh.vertices.size(), Vec3::Zero());
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Vec3 n = face_normal_unnormalized(mesh, f);
    if (0.5 * n.norm() < kDegenerateArea) continue;
    // |n| = 2 * area, so summing n is the area-weighted sum of unit normals.
    for (int v : mesh.faces[f]) accum[v] += n;
  }
  result.normals.resize(accum.size());
  result.degenerate.assign(accum.size(), false);
  for (std::size_t v = 0; v < accum.size(); ++v) {
    const double len = accum[v].norm();
    if (len > 0.0) {
      result.normals[v] = accum[v] / len;
    } else {
      result.normals[v] = Vec3::UnitZ();
      result.degenerate[v] = true;
    }
  }
  return result;
}

std::vector<Vec3> compute_vertex_normals(const Mesh& mesh) {
  return compute_vertex_normals_flagged(mesh).normals;
}

std::vector<Edge> extract_edges(const Mesh& mesh) {
  std::vector<Edge> edges;
  edges.reserve(mesh.faces.size() * 3);
  for (const Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const int a = f[k];
      const int b = f[(k + 1) % 3];
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

int euler_characteristic(const Mesh& mesh) {
  std::vector<bool> used(mesh.vertices.size(), false);
  for (const Face& f : mesh.faces)
    for (int v : f) used[v] = true;
  const int v = static_cast<int>(std::count(used.begin(), used.end(), true));
  const int e = static_cast<int>(extract_edges(mesh).size());
  return v - e + mesh.num_faces();
}

namespace {

std::unordered_map<std::uint64_t, int> edge_face_counts(const Mesh& mesh) {
  std::unordered_map<std::uint64_t, int> counts;
  counts.reserve(mesh.faces.size() * 2);
  for (const Face& f : mesh.faces)
    for (int k = 0; k < 3; ++k) ++counts[edge_key(f[k], f[(k + 1) % 3])];
  return counts;
}

}  // namespace

bool is_edge_manifold(const Mesh& mesh) {
  for (const auto& [key, count] : edge_face_counts(mesh))
    if (count > 2) return false;
  return true;
}

bool is_watertight(const Mesh& mesh) {
  if (mesh.faces.empty()) return false;
  for (const auto& [key, count] : edge_face_counts(mesh))
    if (count != 2) return false;
  return true;
}

std::vector<std::vector<int>> boundary_loops(const Mesh& mesh) {
  // Directed half-edges whose twin is missing.
  std::map<std::pair<int, int>, int> directed;
  for (const Face& f : mesh.faces)
    for (int k = 0; k < 3; ++k) ++directed[{f[k], f[(k + 1) % 3]}];

  std::multimap<int, int> next;
  for (const auto& [he, count] : directed) {
    if (!directed.contains({he.second, he.first})) next.emplace(he.first, he.second);
  }

  std::vector<std::vector<int>> loops;
  while (!next.empty()) {
    auto it = next.begin();
    const int start = it->first;
    std::vector<int> loop{start};
    int current = it->second;
    next.erase(it);
    while (current != start) {
      loop.push_back(current);
      auto step = next.find(current);
      if (step == next.end()) break;  // open chain on a non-manifold boundary
      current = step->second;
      next.erase(step);
    }
    loops.push_back(std::move(loop));
  }
  return loops;
}

std::vector<std::vector<int>> vertex_neighbors(const Mesh& mesh) {
  std::vector<std::vector<int>> nbrs(mesh.vertices.size());
  for (const auto& [a, b] : extract_edges(mesh)) {
    nbrs[a].push_back(b);
    nbrs[b].push_back(a);
  }
  for (auto& list : nbrs) std::sort(list.begin(), list.end());
  return nbrs;
}

double signed_volume(const Mesh& mesh) {
  double vol = 0.0;
  for (const Face& f : mesh.faces) {
    vol += mesh.vertices[f[0]].dot(mesh.vertices[f[1]].cross(mesh.vertices[f[2]]));
  }
  return vol / 6.0;
}

Subdivision subdivide_region_detailed(const Mesh& mesh, std::span<const int> face_subset,
                                      int levels) {
  mesh.validate();
  if (face_subset.empty()) throw std::invalid_argument("subdivide_region: empty face subset");
  if (levels < 1) throw std::invalid_argument("subdivide_region: levels must be >= 1");

  Subdivision out;
  out.mesh = mesh;
  out.face_parent.resize(mesh.faces.size());
  std::iota(out.face_parent.begin(), out.face_parent.end(), 0);

  std::vector<bool> selected(mesh.faces.size(), false);
  for (int f : face_subset) {
    if (f < 0 || f >= mesh.num_faces()) {
      throw std::invalid_argument("subdivide_region: face index out of range");
    }
    selected[f] = true;
  }

  for (int level = 0; level < levels; ++level) {
    Mesh& cur = out.mesh;
    std::unordered_map<std::uint64_t, int> midpoint;
    auto split = [&](int a, int b) {
      const auto key = edge_key(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int idx = cur.num_vertices();
      cur.vertices.push_back(0.5 * (cur.vertices[a] + cur.vertices[b]));
      out.new_vertex_edges.emplace_back(std::min(a, b), std::max(a, b));
      midpoint.emplace(key, idx);
      return idx;
    };

    for (int f = 0; f < cur.num_faces(); ++f) {
      if (!selected[f]) continue;
      const Face& t = cur.faces[f];
      for (int k = 0; k < 3; ++k) split(t[k], t[(k + 1) % 3]);
    }

    std::vector<Face> faces;
    std::vector<int> parents;
    std::vector<bool> next_selected;
    faces.reserve(cur.faces.size() * 4);
    auto emit = [&](Face f, int parent, bool sel) {
      faces.push_back(f);
      parents.push_back(parent);
      next_selected.push_back(sel);
    };
    auto mid = [&](int a, int b) {
      auto it = midpoint.find(edge_key(a, b));
      return it == midpoint.end() ? -1 : it->second;
    };

    for (int f = 0; f < cur.num_faces(); ++f) {
      const Face t = cur.faces[f];
      const int parent = out.face_parent[f];
      if (selected[f]) {
        const int ab = mid(t[0], t[1]);
        const int bc = mid(t[1], t[2]);
        const int ca = mid(t[2], t[0]);
        emit({t[0], ab, ca}, parent, true);
        emit({ab, t[1], bc}, parent, true);
        emit({ca, bc, t[2]}, parent, true);
        emit({ab, bc, ca}, parent, true);
        continue;
      }
      std::array<int, 3> m{mid(t[0], t[1]), mid(t[1], t[2]), mid(t[2], t[0])};
      const int splits = static_cast<int>(std::count_if(m.begin(), m.end(), [](int x) { return x >= 0; }));
      if (splits == 0) {
        emit(t, parent, false);
      } else if (splits == 3) {
        emit({t[0], m[0], m[2]}, parent, false);
        emit({m[0], t[1], m[1]}, parent, false);
        emit({m[2], m[1], t[2]}, parent, false);
        emit({m[0], m[1], m[2]}, parent, false);
      } else if (splits == 1) {
        // Rotate so the split edge is (a, b).
        int r = 0;
        while (m[r] < 0) ++r;
        const int a = t[r], b = t[(r + 1) % 3], c = t[(r + 2) % 3];
        emit({a, m[r], c}, parent, false);
        emit({m[r], b, c}, parent, false);
      } else {
        // Rotate so the unsplit edge is (c, a).
        int r = 0;
        while (m[(r + 2) % 3] >= 0) ++r;
        const int a = t[r], b = t[(r + 1) % 3], c = t[(r + 2) % 3];
        const int ab = m[r], bc = m[(r + 1) % 3];
        emit({ab, b, bc}, parent, false);
        emit({a, ab, bc}, parent, false);
        emit({a, bc, c}, parent, false);
      }
    }
    cur.faces = std::move(faces);
    out.face_parent = std::move(parents);
    selected = std::move(next_selected);
  }
  return out;
}

Mesh subdivide_region(const Mesh& mesh, std::span<const int> face_subset, int levels) {
  return subdivide_region_detailed(mesh, face_subset, levels).mesh;
}

double hash_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const std::uint64_t h = splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::vector<SurfaceSample> sample_surface_detailed(const Mesh& mesh, int n, std::uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("sample_surface: n must be positive");
  mesh.validate();
  std::vector<double> cdf(mesh.faces.size());
  double total = 0.0;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    total += face_area(mesh, f);
    cdf[f] = total;
  }
  if (!(total > 0.0)) throw std::invalid_argument("sample_surface: mesh has zero area");

  std::vector<SurfaceSample> samples(n);
  for (int i = 0; i < n; ++i) {
    const double pick = hash_uniform(seed, 0, i) * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), pick);
    int f = static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(), mesh.num_faces() - 1));
    const double s = std::sqrt(hash_uniform(seed, 1, i));
    const double u = hash_uniform(seed, 2, i);
    const Vec3 bary(1.0 - s, s * (1.0 - u), s * u);
    const Face& t = mesh.faces[f];
    samples[i].face = f;
    samples[i].barycentric = bary;
    samples[i].point = bary[0] * mesh.vertices[t[0]] + bary[1] * mesh.vertices[t[1]] +
                       bary[2] * mesh.vertices[t[2]];
  }
  return samples;
}

PointCloud sample_surface(const Mesh& mesh, int n, std::uint64_t seed) {
  const auto samples = sample_surface_detailed(mesh, n, seed);
  const auto face_normals = compute_face_normals(mesh);
  PointCloud cloud;
  cloud.points.reserve(samples.size());
  cloud.normals.reserve(samples.size());
  for (const auto& s : samples) {
    cloud.points.push_back(s.point);
    cloud.normals.push_back(face_normals[s.face]);
  }
  return cloud;
}

}  // namespace garment
