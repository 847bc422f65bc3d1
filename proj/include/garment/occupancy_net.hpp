#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "garment/autograd.hpp"
#include "garment/implicit.hpp"
#include "garment/silhouette.hpp"

namespace garment {

// Point encoding: (x, y, z, x^2, y^2, z^2), followed by the image descriptor.
inline constexpr int kPointEncodingDim = 6;

struct OccupancyNetConfig {
  int hidden = 64;
  int layers = 3;
  int image_dim = kDescriptorDim;
};

struct OccupancyNet {
  OccupancyNetConfig config;
  std::vector<nn::Tensor> weights;  // W0, b0, W1, b1, ..., W_out, b_out

  std::vector<nn::Matrix> values() const;
  void set_values(std::span<const nn::Matrix> values);
};

OccupancyNet init_occupancy_net(const OccupancyNetConfig& config, std::uint64_t seed);

/// Rows of [encode(p), descriptor] for each point.
nn::Matrix occupancy_inputs(std::span<const Vec3> points, const SilhouetteDescriptor& descriptor);
nn::Tensor occupancy_logits(const OccupancyNet& net, const nn::Matrix& inputs);

struct OccupancySample {
  SilhouetteDescriptor descriptor;
  std::vector<Vec3> points;
  std::vector<double> labels;  // 0 or 1
};

struct OccupancyTrainConfig {
  double lr = 1e-3;
  int batch_points = 1024;
  int epochs = 40;
  std::uint64_t seed = 0;
  OccupancyNetConfig net;
};

struct OccupancyTrainResult {
  OccupancyNet net;
  std::vector<double> history;  // mean BCE per epoch, entry 0 before training
};

OccupancyTrainResult train_occupancy(std::span<const OccupancySample> dataset, const OccupancyTrainConfig& config = {});

/// Trained field for one garment's descriptor; evaluates sigmoid(logit).
OccupancyField occupancy_field(const OccupancyNet& net, const SilhouetteDescriptor& descriptor);

void save_occupancy_net(const std::filesystem::path& path, const OccupancyNet& net, std::uint64_t seed);
OccupancyNet load_occupancy_net(const std::filesystem::path& path);

}  // namespace garment
