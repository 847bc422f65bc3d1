#include "garment/registration.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/SparseCholesky>
#include <json.hpp>

#include "garment/laplacian.hpp"
#include "garment/metrics.hpp"
#include "garment/parallel.hpp"
#include "garment/spatial.hpp"

namespace garment {

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::NormalCone: return "normal_cone";
    case RejectReason::DistanceGate: return "distance_gate";
    default: return "none";
  }
}

namespace {

std::vector<Correspondence> correspond(const Mesh& source, const std::vector<Vec3>& source_normals,
                                       const TriangleTree& source_tree, const TriangleTree& target_tree,
                                       const std::vector<Vec3>& target_normals, double max_angle_deg,
                                       double sigma) {
  const double cos_limit = std::cos(max_angle_deg * std::numbers::pi / 180.0);
  const Mesh& target = target_tree.mesh();
  std::vector<Correspondence> out(source.vertices.size());
  parallel_for(out.size(), [&](std::size_t v) {
    Correspondence& c = out[v];
    c.source_vertex = static_cast<int>(v);
    const auto hit = target_tree.closest(source.vertices[v]);
    const Face& f = target.faces[hit.face];
    Vec3 n = hit.barycentric[0] * target_normals[f[0]] + hit.barycentric[1] * target_normals[f[1]] +
             hit.barycentric[2] * target_normals[f[2]];
    if (n.norm() < 1e-12) n = face_normal_unnormalized(target, hit.face);
    c.target_point = hit.point;
    c.target_normal = n.normalized();
    c.distance = std::sqrt(hit.squared_distance);
    c.back_distance = std::sqrt(source_tree.closest(hit.point).squared_distance);
    // Strict inequalities on both gates.
    if (!(source_normals[v].dot(c.target_normal) > cos_limit)) {
      c.reason = RejectReason::NormalCone;
    } else if (!(c.distance < sigma && c.back_distance < sigma)) {
      c.reason = RejectReason::DistanceGate;
    } else {
      c.valid = true;
    }
  });
  return out;
}

void require_mesh(const Mesh& m, const char* what) {
  if (m.faces.empty() || m.vertices.empty()) throw std::invalid_argument(std::string(what) + ": empty mesh");
  m.validate();
}

}  // namespace

std::vector<Correspondence> find_correspondences(const Mesh& source, const Mesh& target,
                                                 double max_angle_deg, double sigma) {
  require_mesh(source, "find_correspondences");
  require_mesh(target, "find_correspondences");
  const TriangleTree source_tree(source);
  const TriangleTree target_tree(target);
  return correspond(source, compute_vertex_normals(source), source_tree, target_tree,
                    compute_vertex_normals(target), max_angle_deg, sigma);
}

std::string RegistrationResult::diagnostics_json() const {
  nlohmann::ordered_json j;
  j["stalled"] = stalled;
  auto& its = j["iterations"] = nlohmann::ordered_json::array();
  for (const auto& it : iterations) {
    its.push_back({{"valid_count", it.valid_count},
                   {"rejected_normal", it.rejected_normal},
                   {"rejected_distance", it.rejected_distance},
                   {"mean_dist", it.mean_dist},
                   {"mu", it.mu}});
  }
  return j.dump(2) + "\n";
}

RegistrationResult nonrigid_register(const Mesh& source, const Mesh& target, const RegistrationParams& params) {
  require_mesh(source, "nonrigid_register");
  require_mesh(target, "nonrigid_register");
  const int n = source.num_vertices();
  using SpMat = Eigen::SparseMatrix<double>;
  const SpMat lap = SpMat(cotangent_laplacian(source).matrix);
  const SpMat reg = SpMat(lap.transpose()) * lap;
  SpMat identity(n, n);
  identity.setIdentity();

  const TriangleTree target_tree(target);
  const std::vector<Vec3> target_normals = compute_vertex_normals(target);

  RegistrationResult result;
  result.mesh = source;
  double mu = params.mu_initial;
  double previous = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < params.iterations; ++iter) {
    const Mesh& cur = result.mesh;
    const TriangleTree source_tree(cur);
    const auto corr = correspond(cur, compute_vertex_normals(cur), source_tree, target_tree, target_normals,
                                 params.max_angle_deg, params.sigma);
    RegistrationIteration stats;
    stats.mu = mu;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    Eigen::MatrixX3d rhs = Eigen::MatrixX3d::Zero(n, 3);
    for (const auto& c : corr) {
      if (c.reason == RejectReason::NormalCone) ++stats.rejected_normal;
      if (c.reason == RejectReason::DistanceGate) ++stats.rejected_distance;
      if (!c.valid) continue;
      ++stats.valid_count;
      stats.mean_dist += c.distance;
      w[c.source_vertex] = 1.0;
      rhs.row(c.source_vertex) = (c.target_point - cur.vertices[c.source_vertex]).transpose();
    }
    if (stats.valid_count == 0) {
      result.iterations.push_back(stats);
      result.stalled = true;
      break;
    }
    stats.mean_dist /= stats.valid_count;
    result.iterations.push_back(stats);
    if (previous - stats.mean_dist < params.tolerance) break;
    previous = stats.mean_dist;

    SpMat system = mu * reg + params.ridge * identity;
    for (int i = 0; i < n; ++i) system.coeffRef(i, i) += w[i];
    Eigen::SimplicialLDLT<SpMat> solver(system);
    if (solver.info() != Eigen::Success) throw std::runtime_error("nonrigid_register: factorization failed");
    const Eigen::MatrixX3d d = solver.solve(rhs);
    for (int i = 0; i < n; ++i) result.mesh.vertices[i] += d.row(i).transpose();
    mu = std::max(params.mu_floor, mu * params.mu_decay);
  }
  return result;
}

RefineTerms refine_terms(const Mesh& mesh, const PointCloud& ground_truth, std::span<const FeatureLine> lines,
                         std::span<const FeatureLineAnnotation> annotations, const RefineWeights& weights,
                         const RefineOptions& options) {
  require_mesh(mesh, "refine_loss");
  if (ground_truth.empty()) throw std::invalid_argument("refine_loss: empty ground truth");
  if (weights.lambda_nor > 0.0 && !ground_truth.has_normals()) {
    throw std::invalid_argument("refine_loss: ground truth has no normals");
  }
  RefineTerms t;
  const auto samples = sample_surface_detailed(mesh, options.samples, options.seed);
  PointCloud cloud;
  for (const auto& s : samples) cloud.points.push_back(s.point);
  t.chm = metrics::chamfer(cloud, ground_truth);

  if (ground_truth.has_normals()) {
    const KdTree tree(ground_truth.points);
    const auto face_normals = compute_face_normals(mesh);
    double cos_sum = 0.0;
    for (const auto& s : samples) {
      cos_sum += face_normals[s.face].dot(ground_truth.normals[tree.nearest(s.point).index].normalized());
    }
    t.nor = 1.0 - cos_sum / static_cast<double>(samples.size());
  }

  const auto nbrs = vertex_neighbors(mesh);
  int counted = 0;
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (nbrs[v].empty()) continue;
    Vec3 mean = Vec3::Zero();
    for (int u : nbrs[v]) mean += mesh.vertices[u];
    mean /= static_cast<double>(nbrs[v].size());
    t.lap += (mesh.vertices[v] - mean).squaredNorm();
    ++counted;
  }
  t.lap /= std::max(counted, 1);

  const auto edges = extract_edges(mesh);
  for (const auto& [a, b] : edges) t.med += (mesh.vertices[a] - mesh.vertices[b]).squaredNorm();
  t.med /= static_cast<double>(edges.size());

  if (!lines.empty()) {
    std::vector<LinePositions> positions;
    for (const auto& line : lines) {
      if (!find_annotation(annotations, line.kind, line.side)) continue;
      positions.push_back({line.kind, line.side, line_positions(mesh, line)});
    }
    const FittingTerms ft = fitting_terms(positions, annotations);
    t.line = ft.line;
    t.fed = ft.edge;
  }
  t.total = weights.lambda_chm * t.chm + weights.lambda_nor * t.nor + weights.lambda_lap * t.lap +
            weights.lambda_med * t.med + weights.lambda_line * t.line + weights.lambda_fed * t.fed;
  return t;
}

double refine_loss(const Mesh& mesh, const PointCloud& ground_truth, std::span<const FeatureLine> lines,
                   std::span<const FeatureLineAnnotation> annotations, const RefineWeights& weights,
                   const RefineOptions& options) {
  return refine_terms(mesh, ground_truth, lines, annotations, weights, options).total;
}

}  // namespace garment
