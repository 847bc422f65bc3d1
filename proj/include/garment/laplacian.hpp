#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <vector>

#include <Eigen/Sparse>

#include "garment/mesh.hpp"

namespace garment {

/// Vertex index → target position; handles are hard constraints.
using HandleMap = std::map<int, Vec3>;

/// Cotangent of the angle at `apex` in triangle (apex, a, b).
double cotangent_at(const Vec3& apex, const Vec3& a, const Vec3& b);

/// Triangles with an angle above this, or area below kDegenerateArea,
/// switch the stencils of their vertices to uniform weights.
inline constexpr double kMaxAngleDegrees = 179.0;
inline constexpr double kDegenerateArea = 1e-12;

/// Rows (L x)_i = sum_j w_ij (x_i - x_j), with w_ij = (cot a + cot b) / 2.
struct LaplacianOperator {
  Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;
  std::vector<bool> uniform_stencil;  // per vertex
};

LaplacianOperator cotangent_laplacian(const Mesh& mesh);

struct LaplacianSystem {
  Mesh mesh;
  LaplacianOperator op;
  Eigen::MatrixX3d delta;  // L x of the input positions
  HandleMap handles;
};

LaplacianSystem build_system(const Mesh& mesh, const HandleMap& handles);

struct LaplacianSolveOptions {
  double tolerance = 1e-10;  // relative residual of the normal equations
  int max_iterations = 0;    // 0 selects 10 * free vertex count
};

struct LaplacianSolveReport {
  std::array<int, 3> iterations{};
  std::array<double, 3> residual{};
};

class LaplacianNonConvergence : public std::runtime_error {
 public:
  LaplacianNonConvergence(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Least-squares solve of L x = delta with handle rows eliminated. Handles land
/// exactly on their targets; each coordinate is solved by conjugate gradient
/// on the normal equations.
Mesh solve(const LaplacianSystem& system, const LaplacianSolveOptions& options = {},
           LaplacianSolveReport* report = nullptr);

/// Writes a sparse matrix in Matrix Market coordinate format.
void write_matrix_market(const std::filesystem::path& path, const Eigen::SparseMatrix<double, Eigen::RowMajor>& m);

}  // namespace garment
