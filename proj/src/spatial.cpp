#include "garment/spatial.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace garment {

namespace {

constexpr int kLeafSize = 8;

double box_squared_distance(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  const Vec3 d = (lo - p).cwiseMax(Vec3::Zero()).cwiseMax(p - hi);
  return d.squaredNorm();
}

bool ray_hits_box(const Vec3& o, const Vec3& d, const Vec3& lo, const Vec3& hi) {
  double tmin = 0.0;
  double tmax = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-300) {
      if (o[a] < lo[a] || o[a] > hi[a]) return false;
      continue;
    }
    double t0 = (lo[a] - o[a]) / d[a];
    double t1 = (hi[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return false;
  }
  return true;
}

// Moller-Trumbore; counts hits with t > 0.
bool ray_hits_triangle(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b,
                       const Vec3& c) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 p = d.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-18) return false;
  const double inv = 1.0 / det;
  const Vec3 s = o - a;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 q = s.cross(e1);
  const double v = d.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return false;
  return e2.dot(q) * inv > 0.0;
}

}  // namespace

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) build(0, static_cast<int>(points_.size()));
}

int KdTree::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[order_[begin]];
  Vec3 hi = lo;
  for (int i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     const double pa = points_[a][axis];
                     const double pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const double split = points_[order_[mid]][axis];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

void KdTree::search(int id, const Vec3& q, Hit& best) const {
  const Node& node = nodes_[id];
  if (node.axis < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int idx = order_[i];
      const double d = (points_[idx] - q).squaredNorm();
      if (d < best.squared_distance || (d == best.squared_distance && idx < best.index)) {
        best = {idx, d};
      }
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const int near = diff < 0.0 ? node.left : node.right;
  const int far = diff < 0.0 ? node.right : node.left;
  search(near, q, best);
  if (diff * diff <= best.squared_distance) search(far, q, best);
}

KdTree::Hit KdTree::nearest(const Vec3& query) const {
  Hit best;
  if (!nodes_.empty()) search(0, query, best);
  return best;
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                               Vec3* bary) {
  auto result = [&](double u, double v, double w) {
    if (bary) *bary = Vec3(u, v, w);
    return Vec3(u * a + v * b + w * c);
  };
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return result(1, 0, 0);

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return result(0, 1, 0);

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return result(1 - v, v, 0);
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return result(0, 0, 1);

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return result(1 - w, 0, w);
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return result(0, 1 - w, w);
  }

  const double denom = va + vb + vc;
  if (std::abs(denom) < 1e-300) return result(1, 0, 0);  // degenerate triangle
  const double v = vb / denom;
  const double w = vc / denom;
  return result(1 - v - w, v, w);
}

TriangleTree::TriangleTree(const Mesh& mesh) : mesh_(mesh) {
  const int n = mesh_.num_faces();
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0);
  centroids_.resize(n);
  for (int f = 0; f < n; ++f) {
    const Face& t = mesh_.faces[f];
    centroids_[f] = (mesh_.vertices[t[0]] + mesh_.vertices[t[1]] + mesh_.vertices[t[2]]) / 3.0;
  }
  if (n > 0) build(0, n);
}

int TriangleTree::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  Node node;
  node.begin = begin;
  node.end = end;
  node.lo = mesh_.vertices[mesh_.faces[order_[begin]][0]];
  node.hi = node.lo;
  Vec3 clo = centroids_[order_[begin]];
  Vec3 chi = clo;
  for (int i = begin; i < end; ++i) {
    for (int v : mesh_.faces[order_[i]]) {
      node.lo = node.lo.cwiseMin(mesh_.vertices[v]);
      node.hi = node.hi.cwiseMax(mesh_.vertices[v]);
    }
    clo = clo.cwiseMin(centroids_[order_[i]]);
    chi = chi.cwiseMax(centroids_[order_[i]]);
  }
  nodes_.push_back(node);
  if (end - begin <= 4) return id;

  int axis = 0;
  (chi - clo).maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     const double ca = centroids_[a][axis];
                     const double cb = centroids_[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void TriangleTree::closest_in(int id, const Vec3& q, Hit& best) const {
  const Node& node = nodes_[id];
  if (node.left < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int f = order_[i];
      const Face& t = mesh_.faces[f];
      Vec3 bary;
      const Vec3 cp = closest_point_on_triangle(q, mesh_.vertices[t[0]], mesh_.vertices[t[1]],
                                                mesh_.vertices[t[2]], &bary);
      const double d = (cp - q).squaredNorm();
      if (d < best.squared_distance || (d == best.squared_distance && f < best.face)) {
        best = {f, cp, bary, d};
      }
    }
    return;
  }
  const double dl = box_squared_distance(q, nodes_[node.left].lo, nodes_[node.left].hi);
  const double dr = box_squared_distance(q, nodes_[node.right].lo, nodes_[node.right].hi);
  const bool left_first = dl <= dr;
  const int first = left_first ? node.left : node.right;
  const int second = left_first ? node.right : node.left;
  const double d_first = left_first ? dl : dr;
  const double d_second = left_first ? dr : dl;
  if (d_first <= best.squared_distance) closest_in(first, q, best);
  if (d_second <= best.squared_distance) closest_in(second, q, best);
}

TriangleTree::Hit TriangleTree::closest(const Vec3& query) const {
  Hit best;
  if (!nodes_.empty()) closest_in(0, query, best);
  return best;
}

TriangleTree::Hit TriangleTree::closest_within(const Vec3& query, double max_distance) const {
  Hit best;
  best.squared_distance = max_distance * max_distance;
  if (!nodes_.empty()) closest_in(0, query, best);
  if (best.face < 0) best.squared_distance = std::numeric_limits<double>::infinity();
  return best;
}

int TriangleTree::crossings_in(int id, const Vec3& o, const Vec3& d) const {
  const Node& node = nodes_[id];
  if (!ray_hits_box(o, d, node.lo, node.hi)) return 0;
  if (node.left < 0) {
    int hits = 0;
    for (int i = node.begin; i < node.end; ++i) {
      const Face& t = mesh_.faces[order_[i]];
      if (ray_hits_triangle(o, d, mesh_.vertices[t[0]], mesh_.vertices[t[1]],
                            mesh_.vertices[t[2]])) {
        ++hits;
      }
    }
    return hits;
  }
  return crossings_in(node.left, o, d) + crossings_in(node.right, o, d);
}

int TriangleTree::ray_crossings(const Vec3& origin, const Vec3& dir) const {
  if (nodes_.empty()) return 0;
  return crossings_in(0, origin, dir);
}

bool TriangleTree::contains(const Vec3& p) const {
  static const std::array<Vec3, 3> kDirections = {
      Vec3(0.5773502691896258, 0.5773502691896258, 0.5773502691896258).normalized(),
      Vec3(-0.3141592653589793, 0.8314159265358979, -0.4588314677411235).normalized(),
      Vec3(0.7071067811865476, -0.2236067977499790, -0.6708203932499369).normalized()};
  int votes = 0;
  for (const Vec3& d : kDirections) votes += ray_crossings(p, d) % 2;
  return votes >= 2;
}

}  // namespace garment
