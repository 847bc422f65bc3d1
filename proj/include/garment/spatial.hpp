#pragma once

#include <limits>
#include <span>
#include <vector>

#include "garment/mesh.hpp"

namespace garment {

/// Exact nearest-neighbour search over a fixed point set. Ties resolve to the
/// lowest point index.
class KdTree {
 public:
  struct Hit {
    int index = -1;
    double squared_distance = std::numeric_limits<double>::infinity();
  };

  KdTree() = default;
  explicit KdTree(std::span<const Vec3> points);

  Hit nearest(const Vec3& query) const;
  int size() const { return static_cast<int>(points_.size()); }

 private:
  struct Node {
    int begin = 0;
    int end = 0;
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
  };

  int build(int begin, int end);
  void search(int node, const Vec3& q, Hit& best) const;

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

/// Closest point on triangle (a, b, c); barycentric weights returned in `bary`.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                               Vec3* bary = nullptr);

/// Bounding-volume hierarchy over mesh triangles for closest-point and ray queries.
class TriangleTree {
 public:
  struct Hit {
    int face = -1;
    Vec3 point = Vec3::Zero();
    Vec3 barycentric = Vec3::Zero();
    double squared_distance = std::numeric_limits<double>::infinity();
  };

  explicit TriangleTree(const Mesh& mesh);

  Hit closest(const Vec3& query) const;

  /// Closest point no farther than max_distance; face is -1 when none is.
  Hit closest_within(const Vec3& query, double max_distance) const;

  /// Number of triangles crossed by the ray origin + t * dir, t > 0.
  int ray_crossings(const Vec3& origin, const Vec3& dir) const;

  /// Parity point-in-mesh test; majority vote over three skew directions.
  bool contains(const Vec3& p) const;

  const Mesh& mesh() const { return mesh_; }

 private:
  struct Node {
    Vec3 lo;
    Vec3 hi;
    int begin = 0;
    int end = 0;
    int left = -1;
    int right = -1;
  };

  int build(int begin, int end);
  void closest_in(int node, const Vec3& q, Hit& best) const;
  int crossings_in(int node, const Vec3& o, const Vec3& d) const;

  Mesh mesh_;
  std::vector<int> order_;
  std::vector<Vec3> centroids_;
  std::vector<Node> nodes_;
};

}  // namespace garment
