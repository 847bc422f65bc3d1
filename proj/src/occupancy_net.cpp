#include "garment/occupancy_net.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include <json.hpp>

#include "garment/gcn.hpp"

namespace garment {

using nn::Matrix;
using nn::Tensor;

std::vector<Matrix> OccupancyNet::values() const {
  std::vector<Matrix> out;
  for (const Tensor& t : weights) out.push_back(t.value());
  return out;
}

void OccupancyNet::set_values(std::span<const Matrix> values) {
  if (values.size() != weights.size()) throw std::invalid_argument("occupancy net: wrong number of matrices");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (values[i].rows() != weights[i].rows() || values[i].cols() != weights[i].cols()) {
      throw std::invalid_argument("occupancy net: weight shape mismatch");
    }
    weights[i].value() = values[i];
  }
}

OccupancyNet init_occupancy_net(const OccupancyNetConfig& config, std::uint64_t seed) {
  if (config.layers < 1 || config.hidden < 1 || config.image_dim < 0) {
    throw std::invalid_argument("occupancy net: invalid configuration");
  }
  OccupancyNet net;
  net.config = config;
  int in = kPointEncodingDim + config.image_dim;
  std::uint64_t stream = 0;
  auto layer = [&](int fan_in, int fan_out) {
    Matrix w(fan_in, fan_out);
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = a * (2.0 * hash_uniform(seed, stream, i) - 1.0);
    ++stream;
    net.weights.push_back(nn::parameter(std::move(w)));
    net.weights.push_back(nn::parameter(Matrix::Zero(1, fan_out)));
  };
  for (int l = 0; l < config.layers; ++l) {
    layer(in, config.hidden);
    in = config.hidden;
  }
  layer(in, 1);
  return net;
}

Matrix occupancy_inputs(std::span<const Vec3> points, const SilhouetteDescriptor& descriptor) {
  const int image_dim = static_cast<int>(descriptor.pyramid.size());
  Matrix x(static_cast<Eigen::Index>(points.size()), kPointEncodingDim + image_dim);
  const Eigen::Map<const Eigen::RowVectorXd> global(descriptor.pyramid.data(), image_dim);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x.block<1, 3>(r, 0) = points[i].transpose();
    x.block<1, 3>(r, 3) = points[i].cwiseAbs2().transpose();
    x.block(r, kPointEncodingDim, 1, image_dim) = global;
  }
  return x;
}

Tensor occupancy_logits(const OccupancyNet& net, const Matrix& inputs) {
  if (inputs.cols() != net.weights[0].rows()) throw std::invalid_argument("occupancy net: input width mismatch");
  Tensor h = nn::constant(inputs);
  const std::size_t n_layers = net.weights.size() / 2;
  for (std::size_t l = 0; l < n_layers; ++l) {
    h = nn::add_row(nn::matmul(h, net.weights[2 * l]), net.weights[2 * l + 1]);
    if (l + 1 < n_layers) h = nn::relu(h);
  }
  return h;
}

OccupancyTrainResult train_occupancy(std::span<const OccupancySample> dataset, const OccupancyTrainConfig& config) {
  if (dataset.empty()) throw std::invalid_argument("train_occupancy: empty dataset");
  if (config.batch_points < 1 || config.epochs < 0 || config.lr < 0.0) {
    throw std::invalid_argument("train_occupancy: invalid optimiser settings");
  }
  // Flatten (sample, point) pairs.
  std::vector<std::pair<int, int>> rows;
  for (std::size_t s = 0; s < dataset.size(); ++s) {
    const auto& item = dataset[s];
    if (item.points.size() != item.labels.size()) throw std::invalid_argument("train_occupancy: label count mismatch");
    if (static_cast<int>(item.descriptor.pyramid.size()) != config.net.image_dim) {
      throw std::invalid_argument("train_occupancy: descriptor width mismatch");
    }
    for (std::size_t i = 0; i < item.points.size(); ++i) {
      if (item.labels[i] != 0.0 && item.labels[i] != 1.0) throw std::invalid_argument("train_occupancy: labels must be 0 or 1");
      rows.emplace_back(static_cast<int>(s), static_cast<int>(i));
    }
  }
  if (rows.empty()) throw std::invalid_argument("train_occupancy: no labelled points");

  std::vector<Matrix> inputs;
  std::vector<Matrix> labels;
  for (const auto& item : dataset) {
    inputs.push_back(occupancy_inputs(item.points, item.descriptor));
    labels.push_back(Eigen::Map<const Eigen::VectorXd>(item.labels.data(), item.labels.size()));
  }
  const int width = kPointEncodingDim + config.net.image_dim;
  auto gather = [&](std::span<const int> order, int begin, int end, Matrix& x, Matrix& y) {
    x.resize(end - begin, width);
    y.resize(end - begin, 1);
    for (int r = begin; r < end; ++r) {
      const auto [s, i] = rows[order[r]];
      x.row(r - begin) = inputs[s].row(i);
      y(r - begin, 0) = labels[s](i, 0);
    }
  };
  auto full_loss = [&](const OccupancyNet& net) {
    double total = 0.0;
    for (std::size_t s = 0; s < dataset.size(); ++s) {
      if (inputs[s].rows() == 0) continue;
      total += nn::bce_with_logits(occupancy_logits(net, inputs[s]), labels[s]).scalar() * inputs[s].rows();
    }
    return total / static_cast<double>(rows.size());
  };

  OccupancyTrainResult result;
  result.net = init_occupancy_net(config.net, config.seed);
  nn::Adam adam(result.net.weights, config.lr);
  result.history.push_back(full_loss(result.net));
  const int n = static_cast<int>(rows.size());
  Matrix x, y;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = epoch_order(n, config.seed, epoch);
    for (int start = 0; start < n; start += config.batch_points) {
      const int stop = std::min(n, start + config.batch_points);
      gather(order, start, stop, x, y);
      adam.zero_grad();
      nn::backward(nn::bce_with_logits(occupancy_logits(result.net, x), y));
      adam.step();
    }
    result.history.push_back(full_loss(result.net));
  }
  return result;
}

OccupancyField occupancy_field(const OccupancyNet& net, const SilhouetteDescriptor& descriptor) {
  // Plain forward pass on detached copies; no graph is recorded.
  auto weights = std::make_shared<std::vector<Matrix>>(net.values());
  auto desc = std::make_shared<SilhouetteDescriptor>(descriptor);
  OccupancyField field;
  field.provenance = FieldProvenance::Trained;
  field.evaluate_batch = [weights, desc](std::span<const Vec3> pts, std::span<double> out) {
    Matrix h = occupancy_inputs(pts, *desc);
    const std::size_t n_layers = weights->size() / 2;
    for (std::size_t l = 0; l < n_layers; ++l) {
      h = (h * (*weights)[2 * l]).rowwise() + (*weights)[2 * l + 1].row(0);
      if (l + 1 < n_layers) h = h.cwiseMax(0.0);
    }
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-h(static_cast<Eigen::Index>(i), 0)));
  };
  field.evaluate = [batch = field.evaluate_batch](const Vec3& p) {
    double v = 0.0;
    batch(std::span<const Vec3>(&p, 1), std::span<double>(&v, 1));
    return v;
  };
  return field;
}

void save_occupancy_net(const std::filesystem::path& path, const OccupancyNet& net, std::uint64_t seed) {
  nlohmann::ordered_json header;
  header["model"] = "occupancy_mlp";
  header["seed"] = seed;
  header["config"] = {{"hidden", net.config.hidden}, {"layers", net.config.layers}, {"image_dim", net.config.image_dim}};
  const auto values = net.values();
  nn::save_weights(path, values, header.dump());
}

OccupancyNet load_occupancy_net(const std::filesystem::path& path) {
  std::string header_text;
  const auto values = nn::load_weights(path, &header_text);
  const auto header = nlohmann::json::parse(header_text);
  if (header.value("model", "") != "occupancy_mlp") throw std::runtime_error("not an occupancy weights file");
  OccupancyNetConfig c;
  c.hidden = header["config"]["hidden"];
  c.layers = header["config"]["layers"];
  c.image_dim = header["config"]["image_dim"];
  OccupancyNet net = init_occupancy_net(c, 0);
  net.set_values(values);
  return net;
}

}  // namespace garment
