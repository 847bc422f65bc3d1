#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace garment::nn {

using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Pushes this node's grad into its parents.
  std::function<void(Node&)> backward;
};

/// Reverse-mode differentiable 2-D array. Copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  Matrix& value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& grad() { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double scalar() const;
  bool defined() const { return static_cast<bool>(node_); }

  void zero_grad();
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Tensor parameter(Matrix value);
Tensor constant(Matrix value);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor spmm(const SparseMatrix& a, const Tensor& x);  // constant sparse left factor
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor add_row(const Tensor& a, const Tensor& row);  // broadcasts a 1 x c row
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor rows(const Tensor& a, Eigen::Index begin, Eigen::Index count);

/// Mean binary cross-entropy of sigmoid(logits) against 0/1 labels (n x 1).
Tensor bce_with_logits(const Tensor& logits, const Matrix& labels);

/// Symmetric squared Chamfer between the rows of a (n x 3) and fixed points.
/// Ties go to the lowest index; the gradient follows the chosen neighbour.
Tensor chamfer_to(const Tensor& a, const Matrix& points);

/// Mean squared length of consecutive row differences, closing pair included.
Tensor loop_edge_reg(const Tensor& loop);

/// Accumulates d(loss)/d(t) into every reachable tensor that requires grad.
void backward(const Tensor& loss);

/// Central finite-difference gradient of `f` with respect to `param`.
Matrix numeric_gradient(const std::function<double()>& f, Tensor& param, double step = 1e-5);

/// Largest relative error ||analytic - numeric|| / max(||numeric||, floor) over
/// `params`, where the analytic gradient comes from one backward pass of `loss`.
double max_gradient_error(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                          double step = 1e-5, double floor = 1e-8);

struct Adam {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit Adam(std::vector<Tensor> params, double lr = 5e-5);
  void step();
  void zero_grad();
  int steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<Matrix> m_, v_;
  int t_ = 0;
};

/// Weights blob: one JSON header line (with "shapes" added), then raw
/// little-endian float64 values of each matrix in column-major order.
void save_weights(const std::filesystem::path& path, std::span<const Matrix> weights,
                  const std::string& header_json);
std::vector<Matrix> load_weights(const std::filesystem::path& path, std::string* header_json = nullptr);

}  // namespace garment::nn
