#include "garment/gcn.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace garment {

using nn::Matrix;
using nn::Tensor;

void LineGraph::validate() const {
  const Eigen::Index n = positions.rows();
  if (n == 0 || positions.cols() != 3) throw std::invalid_argument("line graph: positions must be n x 3");
  if (node_features.rows() != n || image_features.rows() != n) {
    throw std::invalid_argument("line graph: feature rows do not match node count");
  }
  if (neighbor_mean.rows() != n || neighbor_mean.cols() != n) {
    throw std::invalid_argument("line graph: neighbour operator has the wrong size");
  }
  int covered = 0;
  for (const LineSpan& s : spans) {
    if (s.begin != covered || s.count < 3) throw std::invalid_argument("line graph: spans must tile the nodes");
    covered += s.count;
  }
  if (covered != n) throw std::invalid_argument("line graph: spans must tile the nodes");
}

nn::SparseMatrix loop_neighbor_mean(std::span<const LineSpan> spans, int n) {
  std::vector<Eigen::Triplet<double>> trips;
  for (const LineSpan& s : spans) {
    for (int i = 0; i < s.count; ++i) {
      const int node = s.begin + i;
      trips.emplace_back(node, s.begin + (i + 1) % s.count, 0.5);
      trips.emplace_back(node, s.begin + (i + s.count - 1) % s.count, 0.5);
    }
  }
  nn::SparseMatrix m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

LineGraph make_line_graph(std::span<const LinePositions> lines, const SilhouetteDescriptor& descriptor) {
  descriptor.validate();
  int n = 0;
  for (const auto& l : lines) {
    if (l.positions.size() < 3) throw std::invalid_argument("make_line_graph: loop too short");
    n += static_cast<int>(l.positions.size());
  }
  if (n == 0) throw std::invalid_argument("make_line_graph: no lines");
  LineGraph g;
  g.positions.resize(n, 3);
  g.node_features = Matrix::Zero(n, kNodeFeatureDim);
  g.image_features.resize(n, kImageFeatureDim);
  const Eigen::Map<const Eigen::RowVectorXd> global(descriptor.pyramid.data(), kDescriptorDim);
  int at = 0;
  for (const auto& l : lines) {
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : l.positions) centroid += p;
    centroid /= static_cast<double>(l.positions.size());
    const double side = l.side == Side::Left ? 1.0 : (l.side == Side::Right ? -1.0 : 0.0);
    g.spans.push_back({l.kind, l.side, at, static_cast<int>(l.positions.size())});
    for (const Vec3& p : l.positions) {
      const Vec3 rel = p - centroid;
      const Vec3 radial = rel.norm() > 1e-12 ? Vec3(rel.normalized()) : Vec3::Zero();
      g.positions.row(at) = p.transpose();
      g.node_features.block<1, 3>(at, 0) = p.transpose();
      g.node_features.block<1, 3>(at, 3) = rel.transpose();
      g.node_features.block<1, 3>(at, 6) = radial.transpose();
      g.node_features(at, 9 + static_cast<int>(l.kind)) = 1.0;
      g.node_features(at, 17) = side;
      g.image_features.block(at, 0, 1, kDescriptorDim) = global;
      const auto local = local_features(descriptor, p);
      for (int k = 0; k < kLocalFeatureDim; ++k) g.image_features(at, kDescriptorDim + k) = local[k];
      ++at;
    }
  }
  g.neighbor_mean = loop_neighbor_mean(g.spans, n);
  return g;
}

std::vector<Tensor> GcnModel::parameters() const {
  std::vector<Tensor> out;
  for (const GcnLayer& l : layers) {
    out.push_back(l.w_self);
    out.push_back(l.w_neigh);
    out.push_back(l.w_img);
    out.push_back(l.bias);
  }
  out.push_back(w_out);
  out.push_back(b_out);
  return out;
}

std::vector<Matrix> GcnModel::values() const {
  std::vector<Matrix> out;
  for (const Tensor& t : parameters()) out.push_back(t.value());
  return out;
}

void GcnModel::set_values(std::span<const Matrix> values) {
  auto params = parameters();
  if (values.size() != params.size()) throw std::invalid_argument("gcn: wrong number of weight matrices");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (values[i].rows() != params[i].rows() || values[i].cols() != params[i].cols()) {
      throw std::invalid_argument("gcn: weight shape mismatch");
    }
    params[i].value() = values[i];
  }
}

GcnModel zero_gcn(const GcnConfig& config) {
  if (config.layers < 1 || config.hidden < 1 || config.node_dim < 1 || config.image_dim < 0) {
    throw std::invalid_argument("gcn: invalid configuration");
  }
  GcnModel m;
  m.config = config;
  int in = config.node_dim;
  for (int l = 0; l < config.layers; ++l) {
    m.layers.push_back({nn::parameter(Matrix::Zero(in, config.hidden)),
                        nn::parameter(Matrix::Zero(in, config.hidden)),
                        nn::parameter(Matrix::Zero(config.image_dim, config.hidden)),
                        nn::parameter(Matrix::Zero(1, config.hidden))});
    in = config.hidden;
  }
  m.w_out = nn::parameter(Matrix::Zero(config.hidden, 3));
  m.b_out = nn::parameter(Matrix::Zero(1, 3));
  return m;
}

GcnModel init_gcn(const GcnConfig& config, std::uint64_t seed, double output_scale) {
  GcnModel m = zero_gcn(config);
  std::uint64_t stream = 0;
  auto glorot = [&](Tensor& t, int fan_in, double gain) {
    const double a = gain * std::sqrt(6.0 / (fan_in + t.cols()));
    Matrix& w = t.value();
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = a * (2.0 * hash_uniform(seed, stream, i) - 1.0);
    ++stream;
  };
  for (GcnLayer& l : m.layers) {
    const int fan_in = static_cast<int>(l.w_self.rows() + l.w_neigh.rows() + l.w_img.rows());
    glorot(l.w_self, fan_in, 1.0);
    glorot(l.w_neigh, fan_in, 1.0);
    glorot(l.w_img, fan_in, 1.0);
  }
  glorot(m.w_out, config.hidden, output_scale);
  return m;
}

Tensor gcn_forward(const LineGraph& graph, const GcnModel& model) {
  graph.validate();
  if (graph.node_features.cols() != model.config.node_dim || graph.image_features.cols() != model.config.image_dim) {
    throw std::invalid_argument("gcn_forward: feature width does not match the model");
  }
  const Tensor img = nn::constant(graph.image_features);
  Tensor h = nn::constant(graph.node_features);
  for (const GcnLayer& l : model.layers) {
    const Tensor self = nn::matmul(h, l.w_self);
    const Tensor neigh = nn::matmul(nn::spmm(graph.neighbor_mean, h), l.w_neigh);
    const Tensor image = nn::matmul(img, l.w_img);
    h = nn::relu(nn::add_row(nn::add(nn::add(self, neigh), image), l.bias));
  }
  return nn::add_row(nn::matmul(h, model.w_out), model.b_out);
}

Tensor line_fitting_loss(const LineGraph& graph, const Tensor& displacement,
                         std::span<const FeatureLineAnnotation> annotations, double lambda_edge,
                         FittingTerms* terms) {
  graph.validate();
  if (displacement.rows() != graph.size() || displacement.cols() != 3) {
    throw std::invalid_argument("line_fitting_loss: displacement must be n x 3");
  }
  const Tensor moved = nn::add(nn::constant(graph.positions), displacement);
  Tensor total;
  FittingTerms acc;
  for (const LineSpan& s : graph.spans) {
    const auto idx = find_annotation(annotations, s.kind, s.side);
    if (!idx) {
      throw std::invalid_argument("line_fitting_loss: no annotation for line '" + std::string(to_string(s.kind)) +
                                  std::string(to_string(s.side)) + "'");
    }
    const auto& pts = annotations[*idx].points.points;
    Matrix target(static_cast<Eigen::Index>(pts.size()), 3);
    for (std::size_t i = 0; i < pts.size(); ++i) target.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
    const Tensor loop = nn::rows(moved, s.begin, s.count);
    const Tensor line = nn::chamfer_to(loop, target);
    const Tensor edge = nn::loop_edge_reg(loop);
    acc.line += line.scalar();
    acc.edge += edge.scalar();
    const Tensor term = nn::add(line, nn::scale(edge, lambda_edge));
    total = total.defined() ? nn::add(total, term) : term;
  }
  acc.total = acc.line + lambda_edge * acc.edge;
  if (terms) *terms = acc;
  return total;
}

std::vector<LinePositions> predict_lines(const LineGraph& graph, const GcnModel& model) {
  const Matrix moved = graph.positions + gcn_forward(graph, model).value();
  std::vector<LinePositions> out;
  for (const LineSpan& s : graph.spans) {
    LinePositions lp{s.kind, s.side, {}};
    for (int i = 0; i < s.count; ++i) lp.positions.push_back(moved.row(s.begin + i).transpose());
    out.push_back(std::move(lp));
  }
  return out;
}

std::vector<int> epoch_order(int n, std::uint64_t seed, int epoch) {
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(hash_uniform(seed, 1000 + static_cast<std::uint64_t>(epoch), i) * (i + 1));
    std::swap(order[i], order[std::min(j, i)]);
  }
  return order;
}

namespace {

LossRecord evaluate(std::span<const LineSample> dataset, const GcnModel& model, double lambda_edge, int epoch) {
  LossRecord r;
  r.epoch = epoch;
  for (const LineSample& s : dataset) {
    FittingTerms t;
    line_fitting_loss(s.graph, gcn_forward(s.graph, model), s.annotations, lambda_edge, &t);
    r.line += t.line;
    r.edge += t.edge;
    r.total += t.total;
  }
  const double n = static_cast<double>(dataset.size());
  r.line /= n;
  r.edge /= n;
  r.total /= n;
  return r;
}

}  // namespace

LineTrainResult train_line_regressor(std::span<const LineSample> dataset, const LineTrainConfig& config) {
  if (dataset.empty()) throw std::invalid_argument("train_line_regressor: empty dataset");
  if (config.batch < 1 || config.epochs < 0 || config.lr < 0.0) {
    throw std::invalid_argument("train_line_regressor: invalid optimiser settings");
  }
  LineTrainResult result;
  result.model = init_gcn(config.gcn, config.seed);
  nn::Adam adam(result.model.parameters(), config.lr);
  result.history.push_back(evaluate(dataset, result.model, config.lambda_edge, 0));
  const int n = static_cast<int>(dataset.size());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = epoch_order(n, config.seed, epoch);
    for (int start = 0; start < n; start += config.batch) {
      const int stop = std::min(n, start + config.batch);
      adam.zero_grad();
      for (int i = start; i < stop; ++i) {
        const LineSample& s = dataset[order[i]];
        const Tensor loss = line_fitting_loss(s.graph, gcn_forward(s.graph, result.model), s.annotations,
                                              config.lambda_edge);
        nn::backward(nn::scale(loss, 1.0 / (stop - start)));
      }
      adam.step();
    }
    result.history.push_back(evaluate(dataset, result.model, config.lambda_edge, epoch));
  }
  return result;
}

std::string loss_history_csv(std::span<const LossRecord> history) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,L_line,L_edge,total\n";
  for (const LossRecord& r : history) out << r.epoch << "," << r.line << "," << r.edge << "," << r.total << "\n";
  return out.str();
}

void save_gcn(const std::filesystem::path& path, const GcnModel& model, std::uint64_t seed) {
  nlohmann::ordered_json header;
  header["model"] = "line_gcn";
  header["seed"] = seed;
  header["config"] = {{"hidden", model.config.hidden},
                      {"layers", model.config.layers},
                      {"node_dim", model.config.node_dim},
                      {"image_dim", model.config.image_dim}};
  const auto values = model.values();
  nn::save_weights(path, values, header.dump());
}

GcnModel load_gcn(const std::filesystem::path& path) {
  std::string header_text;
  const auto values = nn::load_weights(path, &header_text);
  const auto header = nlohmann::json::parse(header_text);
  if (header.value("model", "") != "line_gcn") throw std::runtime_error("not a line GCN weights file");
  GcnConfig c;
  c.hidden = header["config"]["hidden"];
  c.layers = header["config"]["layers"];
  c.node_dim = header["config"]["node_dim"];
  c.image_dim = header["config"]["image_dim"];
  GcnModel m = zero_gcn(c);
  m.set_values(values);
  return m;
}

}  // namespace garment
