#include "garment/autograd.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace garment::nn {

namespace {

Tensor make(Matrix value, std::vector<Tensor> inputs, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const Tensor& t : inputs) {
    if (!t.defined()) throw std::invalid_argument("autograd: undefined input tensor");
    if (t.requires_grad()) node->requires_grad = true;
    node->parents.push_back(t.node());
  }
  if (node->requires_grad) node->backward = std::move(fn);
  return Tensor(std::move(node));
}

void accumulate(Node& n, const Matrix& g) {
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  n.grad += g;
}

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }
}

// Lowest-index nearest row of `to` for each row of `from`.
std::vector<Eigen::Index> nearest_rows(const Matrix& from, const Matrix& to) {
  std::vector<Eigen::Index> out(from.rows());
  for (Eigen::Index i = 0; i < from.rows(); ++i) {
    (to.rowwise() - from.row(i)).rowwise().squaredNorm().minCoeff(&out[i]);
  }
  return out;
}

}  // namespace

double Tensor::scalar() const {
  if (value().size() != 1) throw std::invalid_argument("tensor is not a scalar");
  return value()(0, 0);
}

void Tensor::zero_grad() {
  if (node_) node_->grad = Matrix::Zero(rows(), cols());
}

Tensor parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->grad = Matrix::Zero(node->value.rows(), node->value.cols());
  node->requires_grad = true;
  return Tensor(std::move(node));
}

Tensor constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape mismatch");
  return make(a.value() * b.value(), {a, b}, [](Node& n) {
    Node& x = *n.parents[0];
    Node& y = *n.parents[1];
    if (x.requires_grad) accumulate(x, n.grad * y.value.transpose());
    if (y.requires_grad) accumulate(y, x.value.transpose() * n.grad);
  });
}

Tensor spmm(const SparseMatrix& a, const Tensor& x) {
  if (a.cols() != x.rows()) throw std::invalid_argument("spmm: shape mismatch");
  return make(a * x.value(), {x}, [a](Node& n) { accumulate(*n.parents[0], a.transpose() * n.grad); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  return make(a.value() + b.value(), {a, b}, [](Node& n) {
    accumulate(*n.parents[0], n.grad);
    accumulate(*n.parents[1], n.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  return make(a.value() - b.value(), {a, b}, [](Node& n) {
    accumulate(*n.parents[0], n.grad);
    accumulate(*n.parents[1], -n.grad);
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: shape mismatch");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make(std::move(out), {a, row}, [](Node& n) {
    accumulate(*n.parents[0], n.grad);
    accumulate(*n.parents[1], n.grad.colwise().sum());
  });
}

Tensor scale(const Tensor& a, double s) {
  return make(a.value() * s, {a}, [s](Node& n) { accumulate(*n.parents[0], n.grad * s); });
}

Tensor relu(const Tensor& a) {
  return make(a.value().cwiseMax(0.0), {a}, [](Node& n) {
    const Matrix& x = n.parents[0]->value;
    accumulate(*n.parents[0], (x.array() > 0.0).cast<double>().matrix().cwiseProduct(n.grad));
  });
}

Tensor sigmoid(const Tensor& a) {
  Matrix s = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return make(s, {a}, [](Node& n) {
    const Matrix& y = n.value;
    accumulate(*n.parents[0], (y.array() * (1.0 - y.array()) * n.grad.array()).matrix());
  });
}

Tensor square(const Tensor& a) {
  return make(a.value().cwiseAbs2(), {a}, [](Node& n) {
    accumulate(*n.parents[0], 2.0 * n.parents[0]->value.cwiseProduct(n.grad));
  });
}

Tensor sum(const Tensor& a) {
  return make(Matrix::Constant(1, 1, a.value().sum()), {a}, [](Node& n) {
    const Node& x = *n.parents[0];
    accumulate(*n.parents[0], Matrix::Constant(x.value.rows(), x.value.cols(), n.grad(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  if (a.value().size() == 0) throw std::invalid_argument("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Eigen::Index r = parts[0].rows();
  Eigen::Index c = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != r) throw std::invalid_argument("concat_cols: row mismatch");
    c += p.cols();
  }
  Matrix out(r, c);
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const Tensor& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    offsets.push_back(at);
    at += p.cols();
  }
  return make(std::move(out), std::vector<Tensor>(parts.begin(), parts.end()), [offsets](Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      Node& p = *n.parents[i];
      accumulate(p, n.grad.middleCols(offsets[i], p.value.cols()));
    }
  });
}

Tensor rows(const Tensor& a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count <= 0 || begin + count > a.rows()) throw std::invalid_argument("rows: out of range");
  return make(a.value().middleRows(begin, count), {a}, [begin, count](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    if (p.grad.size() == 0) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    p.grad.middleRows(begin, count) += n.grad;
  });
}

Tensor bce_with_logits(const Tensor& logits, const Matrix& labels) {
  if (logits.cols() != 1 || labels.cols() != 1 || labels.rows() != logits.rows() || logits.rows() == 0) {
    throw std::invalid_argument("bce_with_logits: expects matching n x 1 inputs");
  }
  for (Eigen::Index i = 0; i < labels.rows(); ++i) {
    if (labels(i, 0) != 0.0 && labels(i, 0) != 1.0) throw std::invalid_argument("bce_with_logits: labels must be 0 or 1");
  }
  const Matrix& z = logits.value();
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    // log(1 + exp(-|z|)) + max(z, 0) - z*y, stable for large |z|.
    total += std::log1p(std::exp(-std::abs(z(i, 0)))) + std::max(z(i, 0), 0.0) - z(i, 0) * labels(i, 0);
  }
  const double n_inv = 1.0 / static_cast<double>(z.rows());
  return make(Matrix::Constant(1, 1, total * n_inv), {logits}, [labels, n_inv](Node& n) {
    const Matrix& z = n.parents[0]->value;
    Matrix g(z.rows(), 1);
    for (Eigen::Index i = 0; i < z.rows(); ++i) g(i, 0) = (1.0 / (1.0 + std::exp(-z(i, 0))) - labels(i, 0)) * n_inv;
    accumulate(*n.parents[0], g * n.grad(0, 0));
  });
}

Tensor chamfer_to(const Tensor& a, const Matrix& points) {
  if (a.rows() == 0 || points.rows() == 0 || a.cols() != points.cols()) {
    throw std::invalid_argument("chamfer_to: empty or mismatched point sets");
  }
  const Matrix& x = a.value();
  const auto fwd = nearest_rows(x, points);
  const auto bwd = nearest_rows(points, x);
  double s1 = 0.0, s2 = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) s1 += (x.row(i) - points.row(fwd[i])).squaredNorm();
  for (Eigen::Index j = 0; j < points.rows(); ++j) s2 += (points.row(j) - x.row(bwd[j])).squaredNorm();
  const double n = static_cast<double>(x.rows()), m = static_cast<double>(points.rows());
  return make(Matrix::Constant(1, 1, s1 / n + s2 / m), {a}, [points, fwd, bwd, n, m](Node& node) {
    const Matrix& x = node.parents[0]->value;
    Matrix g = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) g.row(i) += 2.0 / n * (x.row(i) - points.row(fwd[i]));
    for (Eigen::Index j = 0; j < points.rows(); ++j) g.row(bwd[j]) += 2.0 / m * (x.row(bwd[j]) - points.row(j));
    accumulate(*node.parents[0], g * node.grad(0, 0));
  });
}

Tensor loop_edge_reg(const Tensor& loop) {
  const Eigen::Index n = loop.rows();
  if (n < 3) throw std::invalid_argument("loop_edge_reg: loop needs at least 3 rows");
  const Matrix& x = loop.value();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) total += (x.row((i + 1) % n) - x.row(i)).squaredNorm();
  return make(Matrix::Constant(1, 1, total / n), {loop}, [n](Node& node) {
    const Matrix& x = node.parents[0]->value;
    Matrix g = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index j = (i + 1) % n;
      const Eigen::RowVectorXd d = 2.0 / n * (x.row(j) - x.row(i));
      g.row(j) += d;
      g.row(i) -= d;
    }
    accumulate(*node.parents[0], g * node.grad(0, 0));
  });
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.value().size() != 1) throw std::invalid_argument("backward: loss must be a scalar");
  if (!loss.requires_grad()) return;
  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  // Interior nodes start from zero; leaves keep accumulated gradients.
  for (Node* n : order) {
    if (n->backward) n->grad = Matrix::Zero(n->value.rows(), n->value.cols());
  }
  accumulate(*loss.node(), Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

Matrix numeric_gradient(const std::function<double()>& f, Tensor& param, double step) {
  Matrix g(param.rows(), param.cols());
  for (Eigen::Index i = 0; i < param.value().size(); ++i) {
    double& x = param.value().data()[i];
    const double saved = x;
    x = saved + step;
    const double fp = f();
    x = saved - step;
    const double fm = f();
    x = saved;
    g.data()[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

double max_gradient_error(const std::function<Tensor()>& loss, std::vector<Tensor> params, double step,
                          double floor) {
  for (Tensor& p : params) p.zero_grad();
  backward(loss());
  double worst = 0.0;
  for (Tensor& p : params) {
    const Matrix analytic = p.grad();
    const Matrix numeric = numeric_gradient([&] { return loss().scalar(); }, p, step);
    worst = std::max(worst, (analytic - numeric).norm() / std::max(numeric.norm(), floor));
  }
  return worst;
}

Adam::Adam(std::vector<Tensor> params, double learning_rate) : lr(learning_rate), params_(std::move(params)) {
  for (const Tensor& p : params_) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1, t_);
  const double c2 = 1.0 - std::pow(beta2, t_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    const Matrix& g = p.grad();
    m_[i] = beta1 * m_[i] + (1.0 - beta1) * g;
    v_[i] = beta2 * v_[i] + (1.0 - beta2) * g.cwiseAbs2();
    p.value().array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

void save_weights(const std::filesystem::path& path, std::span<const Matrix> weights,
                  const std::string& header_json) {
  nlohmann::ordered_json header = header_json.empty() ? nlohmann::ordered_json::object()
                                                      : nlohmann::ordered_json::parse(header_json);
  auto& shapes = header["shapes"] = nlohmann::ordered_json::array();
  for (const Matrix& w : weights) shapes.push_back({w.rows(), w.cols()});
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << header.dump() << "\n";
  for (const Matrix& w : weights) {
    out.write(reinterpret_cast<const char*>(w.data()), static_cast<std::streamsize>(w.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<Matrix> load_weights(const std::filesystem::path& path, std::string* header_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  const auto header = nlohmann::json::parse(line);
  if (!header.contains("shapes")) throw std::runtime_error("weights header has no shapes");
  std::vector<Matrix> out;
  for (const auto& s : header["shapes"]) {
    Matrix w(s[0].get<Eigen::Index>(), s[1].get<Eigen::Index>());
    in.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(w.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated weights file " + path.string());
    out.push_back(std::move(w));
  }
  if (header_json) *header_json = line;
  return out;
}

}  // namespace garment::nn
