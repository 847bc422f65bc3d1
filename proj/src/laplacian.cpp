#include "garment/laplacian.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>

#include <Eigen/IterativeLinearSolvers>

namespace garment {

namespace {

bool degenerate(const Vec3& a, const Vec3& b, const Vec3& c) {
  if (0.5 * (b - a).cross(c - a).norm() < kDegenerateArea) return true;
  const double limit = std::cos(kMaxAngleDegrees * std::numbers::pi / 180.0);
  const Vec3* p[3] = {&a, &b, &c};
  for (int k = 0; k < 3; ++k) {
    const Vec3 u = (*p[(k + 1) % 3] - *p[k]).normalized();
    const Vec3 v = (*p[(k + 2) % 3] - *p[k]).normalized();
    if (u.dot(v) < limit) return true;
  }
  return false;
}

}  // namespace

double cotangent_at(const Vec3& apex, const Vec3& a, const Vec3& b) {
  const Vec3 u = a - apex;
  const Vec3 v = b - apex;
  return u.dot(v) / u.cross(v).norm();
}

LaplacianOperator cotangent_laplacian(const Mesh& mesh) {
  mesh.validate();
  const int n = mesh.num_vertices();
  LaplacianOperator op;
  op.uniform_stencil.assign(n, false);
  for (const Face& f : mesh.faces) {
    if (degenerate(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]])) {
      for (int v : f) op.uniform_stencil[v] = true;
    }
  }

  // Accumulate symmetric cotangent weights per edge, then emit rows.
  std::vector<std::map<int, double>> weights(n);
  for (const Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const int apex = f[k], i = f[(k + 1) % 3], j = f[(k + 2) % 3];
      double w = 0.0;
      if (!op.uniform_stencil[i] || !op.uniform_stencil[j]) {
        w = 0.5 * cotangent_at(mesh.vertices[apex], mesh.vertices[i], mesh.vertices[j]);
      }
      weights[i][j] += w;
      weights[j][i] += w;
    }
  }

  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < n; ++i) {
    double diag = 0.0;
    for (const auto& [j, w_cot] : weights[i]) {
      const double w = op.uniform_stencil[i] ? 1.0 : w_cot;
      trip.emplace_back(i, j, -w);
      diag += w;
    }
    trip.emplace_back(i, i, diag);
  }
  op.matrix.resize(n, n);
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  return op;
}

LaplacianSystem build_system(const Mesh& mesh, const HandleMap& handles) {
  if (handles.empty()) throw std::invalid_argument("build_system: empty handle set");
  if (static_cast<int>(handles.size()) >= mesh.num_vertices()) {
    throw std::invalid_argument("build_system: every vertex is a handle");
  }
  for (const auto& [v, target] : handles) {
    if (v < 0 || v >= mesh.num_vertices()) throw std::invalid_argument("build_system: handle index out of range");
    if (!target.allFinite()) throw std::invalid_argument("build_system: non-finite handle target");
  }
  LaplacianSystem s;
  s.mesh = mesh;
  s.op = cotangent_laplacian(mesh);
  s.handles = handles;
  Eigen::MatrixX3d x(mesh.num_vertices(), 3);
  for (int i = 0; i < mesh.num_vertices(); ++i) x.row(i) = mesh.vertices[i].transpose();
  s.delta = s.op.matrix * x;
  return s;
}

Mesh solve(const LaplacianSystem& system, const LaplacianSolveOptions& options,
           LaplacianSolveReport* report) {
  const int n = system.mesh.num_vertices();
  std::vector<int> column(n, -1);  // free-vertex column, -1 for handles
  int nf = 0;
  for (int i = 0; i < n; ++i)
    if (!system.handles.count(i)) column[i] = nf++;

  using ColMatrix = Eigen::SparseMatrix<double>;
  std::vector<Eigen::Triplet<double>> free_trip;
  Eigen::MatrixX3d rhs = system.delta;
  const auto& l = system.op.matrix;
  for (int r = 0; r < l.outerSize(); ++r) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(l, r); it; ++it) {
      const int c = static_cast<int>(it.col());
      if (column[c] >= 0) {
        free_trip.emplace_back(r, column[c], it.value());
      } else {
        rhs.row(r) -= it.value() * system.handles.at(c).transpose();
      }
    }
  }
  ColMatrix lf(n, nf);
  lf.setFromTriplets(free_trip.begin(), free_trip.end());
  const ColMatrix normal = lf.transpose() * lf;
  const Eigen::MatrixX3d b = lf.transpose() * rhs;

  Eigen::ConjugateGradient<ColMatrix, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(options.tolerance);
  cg.setMaxIterations(options.max_iterations > 0 ? options.max_iterations : 10 * std::max(nf, 1));
  cg.compute(normal);

  Mesh out = system.mesh;
  for (int d = 0; d < 3; ++d) {
    Eigen::VectorXd guess(nf);
    for (int i = 0; i < n; ++i)
      if (column[i] >= 0) guess[column[i]] = system.mesh.vertices[i][d];
    const Eigen::VectorXd x = cg.solveWithGuess(b.col(d), guess);
    if (report) {
      report->iterations[d] = static_cast<int>(cg.iterations());
      report->residual[d] = cg.error();
    }
    if (cg.info() != Eigen::Success) {
      throw LaplacianNonConvergence("laplacian solve did not converge (coordinate " + std::to_string(d) +
                                        ", relative residual " + std::to_string(cg.error()) + ")",
                                    cg.error());
    }
    for (int i = 0; i < n; ++i)
      if (column[i] >= 0) out.vertices[i][d] = x[column[i]];
  }
  for (const auto& [v, target] : system.handles) out.vertices[v] = target;
  return out;
}

void write_matrix_market(const std::filesystem::path& path,
                         const Eigen::SparseMatrix<double, Eigen::RowMajor>& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  char buf[64];
  for (int r = 0; r < m.outerSize(); ++r) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(m, r); it; ++it) {
      std::snprintf(buf, sizeof(buf), "%.17g", it.value());
      out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << buf << '\n';
    }
  }
}

}  // namespace garment
