#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "garment/autograd.hpp"
#include "garment/feature_line.hpp"
#include "garment/silhouette.hpp"

namespace garment {

struct LineSpan {
  LandmarkKind kind = LandmarkKind::Neck;
  Side side = Side::None;
  int begin = 0;
  int count = 0;
};

// Node features: position (3), offset from the line centroid (3), unit radial
// direction (3), landmark one-hot (8), side sign (1).
inline constexpr int kNodeFeatureDim = 18;
// Image features: the global pyramid descriptor plus the local cell values.
inline constexpr int kImageFeatureDim = kDescriptorDim + kLocalFeatureDim;

/// All active feature lines of one garment as a single graph of closed loops.
struct LineGraph {
  nn::Matrix positions;       // n x 3
  nn::Matrix node_features;   // n x d_node
  nn::Matrix image_features;  // n x d_img
  nn::SparseMatrix neighbor_mean;
  std::vector<LineSpan> spans;

  int size() const { return static_cast<int>(positions.rows()); }
  void validate() const;
};

/// Row-stochastic neighbour-averaging operator over the loops in `spans`.
nn::SparseMatrix loop_neighbor_mean(std::span<const LineSpan> spans, int n);

LineGraph make_line_graph(std::span<const LinePositions> lines, const SilhouetteDescriptor& descriptor);

struct GcnLayer {
  nn::Tensor w_self, w_neigh, w_img, bias;
};

struct GcnConfig {
  int hidden = 64;
  int layers = 3;
  int node_dim = kNodeFeatureDim;
  int image_dim = kImageFeatureDim;
};

struct GcnModel {
  GcnConfig config;
  std::vector<GcnLayer> layers;
  nn::Tensor w_out, b_out;

  std::vector<nn::Tensor> parameters() const;
  std::vector<nn::Matrix> values() const;
  void set_values(std::span<const nn::Matrix> values);
};

GcnModel zero_gcn(const GcnConfig& config);
/// Glorot-uniform hidden layers; the output layer is scaled by `output_scale`
/// so an untrained model starts close to the identity deformation.
GcnModel init_gcn(const GcnConfig& config, std::uint64_t seed, double output_scale = 1e-2);

/// h <- relu(h W_self + mean_nbr(h) W_neigh + F W_img + b) per layer, then a
/// linear map to one 3-D displacement per node.
nn::Tensor gcn_forward(const LineGraph& graph, const GcnModel& model);

/// Sum over spans of line_loss + lambda_edge * edge_reg on (positions + disp).
nn::Tensor line_fitting_loss(const LineGraph& graph, const nn::Tensor& displacement,
                             std::span<const FeatureLineAnnotation> annotations,
                             double lambda_edge = kDefaultEdgeWeight, FittingTerms* terms = nullptr);

/// Predicted loops after applying the model.
std::vector<LinePositions> predict_lines(const LineGraph& graph, const GcnModel& model);

struct LineSample {
  LineGraph graph;
  std::vector<FeatureLineAnnotation> annotations;
};

struct LineTrainConfig {
  double lr = 5e-5;
  int batch = 8;
  int epochs = 50;
  std::uint64_t seed = 0;
  double lambda_edge = kDefaultEdgeWeight;
  GcnConfig gcn;
};

struct LossRecord {
  int epoch = 0;
  double line = 0.0;
  double edge = 0.0;
  double total = 0.0;
};

struct LineTrainResult {
  GcnModel model;
  // Entry 0 is the untrained model; entry e follows epoch e. Means over the dataset.
  std::vector<LossRecord> history;
};

LineTrainResult train_line_regressor(std::span<const LineSample> dataset, const LineTrainConfig& config = {});

std::string loss_history_csv(std::span<const LossRecord> history);

void save_gcn(const std::filesystem::path& path, const GcnModel& model, std::uint64_t seed);
GcnModel load_gcn(const std::filesystem::path& path);

/// Deterministic Fisher-Yates order for epoch `epoch`.
std::vector<int> epoch_order(int n, std::uint64_t seed, int epoch);

}  // namespace garment
