#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace garment {

using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;
using Edge = std::pair<int, int>;

/// Indexed triangle surface. Counter-clockwise winding gives the outward normal.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_faces() const { return static_cast<int>(faces.size()); }
  bool empty() const { return faces.empty(); }

  /// Throws std::invalid_argument on out-of-range or repeated face indices.
  void validate() const;
};

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // empty or same length as points

  int size() const { return static_cast<int>(points.size()); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }

  void validate() const;
};

/// Dense lattice of scalar samples; x varies fastest.
struct ScalarGrid {
  std::array<int, 3> resolution{0, 0, 0};
  Vec3 origin = Vec3::Zero();
  Vec3 spacing = Vec3::Ones();
  std::vector<double> values;

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(resolution[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(resolution[1]) * k);
  }
  double at(int i, int j, int k) const { return values[index(i, j, k)]; }
  Vec3 point(int i, int j, int k) const {
    return origin + Vec3(i * spacing.x(), j * spacing.y(), k * spacing.z());
  }

  void validate() const;
};

/// Axis-aligned box.
struct Bounds {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  Vec3 extent() const { return hi - lo; }
  double diagonal() const { return extent().norm(); }
  Bounds inflated(double fraction) const;
};

Bounds bounding_box(std::span<const Vec3> points);

// Geometry queries -----------------------------------------------------------

Vec3 face_normal_unnormalized(const Mesh& mesh, int face);  // 2 * area * n
double face_area(const Mesh& mesh, int face);
double surface_area(const Mesh& mesh);

/// Unit face normals; zero for faces with area below 1e-12.
std::vector<Vec3> compute_face_normals(const Mesh& mesh);

struct VertexNormals {
  std::vector<Vec3> normals;
  /// True where every incident face was degenerate (normal set to +z).
  std::vector<bool> degenerate;
};

/// Area-weighted average of incident face normals. Vertices whose incident
/// faces all have area below 1e-12 (or that have no faces) get (0, 0, 1).
VertexNormals compute_vertex_normals_flagged(const Mesh& mesh);
std::vector<Vec3> compute_vertex_normals(const Mesh& mesh);

/// Each undirected edge once, endpoints ascending, lexicographically sorted.
std::vector<Edge> extract_edges(const Mesh& mesh);

/// V - E + F, counting only vertices referenced by at least one face.
int euler_characteristic(const Mesh& mesh);

/// Every undirected edge is shared by at most two faces.
bool is_edge_manifold(const Mesh& mesh);

/// Closed and edge-manifold: every edge shared by exactly two faces.
bool is_watertight(const Mesh& mesh);

/// Boundary loops as ordered vertex cycles following the face winding.
std::vector<std::vector<int>> boundary_loops(const Mesh& mesh);

/// Per-vertex sorted neighbour lists.
std::vector<std::vector<int>> vertex_neighbors(const Mesh& mesh);

/// Signed volume via the divergence theorem; positive for outward winding.
double signed_volume(const Mesh& mesh);

// Subdivision ----------------------------------------------------------------

struct Subdivision {
  Mesh mesh;
  /// For every output face, the input face it came from.
  std::vector<int> face_parent;
  /// For every vertex appended past the input count, the edge it splits.
  std::vector<Edge> new_vertex_edges;
};

/// Midpoint-splits each selected face into 4 per level. Unselected faces that
/// share a split edge are bisected so no hanging vertex remains. Original
/// vertices keep their index and position; new vertices are appended.
Subdivision subdivide_region_detailed(const Mesh& mesh, std::span<const int> face_subset,
                                      int levels);
Mesh subdivide_region(const Mesh& mesh, std::span<const int> face_subset, int levels);

// Sampling -------------------------------------------------------------------

struct SurfaceSample {
  int face = -1;
  Vec3 barycentric = Vec3::Zero();
  Vec3 point = Vec3::Zero();
};

/// Area-weighted uniform samples. Sample i depends only on (seed, i).
std::vector<SurfaceSample> sample_surface_detailed(const Mesh& mesh, int n, std::uint64_t seed);
PointCloud sample_surface(const Mesh& mesh, int n, std::uint64_t seed);

/// Counter-based generator: uniform double in [0, 1) from (seed, stream, index).
double hash_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

}  // namespace garment
