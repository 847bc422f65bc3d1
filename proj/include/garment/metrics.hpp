#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "garment/mesh.hpp"

namespace garment::metrics {

/// Symmetric Chamfer distance: mean squared nearest distance a->b plus b->a.
/// Exact neighbours via k-d trees.
double chamfer(const PointCloud& a, const PointCloud& b);

/// One directed half of the Chamfer distance (mean over `from`).
double directed_chamfer(const PointCloud& from, const PointCloud& to);

struct Assignment {
  std::vector<int> row_to_col;
  double total_cost = 0.0;
  /// Dual lower bound on the optimal total cost; equals total_cost when exact.
  double lower_bound = 0.0;
};

/// Exact minimum-cost perfect matching on a square cost matrix (O(n^3)).
Assignment hungarian(const Eigen::MatrixXd& cost);

/// Epsilon-scaling auction. Stops once total_cost <= (1 + relative_gap) * lower_bound,
/// where lower_bound is the dual bound from the final prices.
Assignment auction(const Eigen::MatrixXd& cost, double relative_gap = 1e-3);

/// Pairwise Euclidean distances between equal-size clouds.
Eigen::MatrixXd distance_matrix(const PointCloud& a, const PointCloud& b);

inline constexpr int kExactEmdLimit = 1024;

/// Earth mover's distance: mean matched Euclidean distance over the optimal
/// bijection. Exact (Hungarian) for n <= 1024, certified auction above.
double emd(const PointCloud& a, const PointCloud& b);
double emd_exact(const PointCloud& a, const PointCloud& b);
double emd_approx(const PointCloud& a, const PointCloud& b, double relative_gap = 1e-3);

/// Deterministic subset (n <= size) or with-replacement resample (n > size).
PointCloud resample(const PointCloud& cloud, int n, std::uint64_t seed);

struct ModelRecord {
  std::string model_id;
  std::string category;
  double cd = 0.0;
  double emd = 0.0;
  int reconstruction_points = 0;
  int ground_truth_points = 0;
  std::uint64_t seed = 0;
};

inline constexpr int kDefaultSamples = 2048;

/// Samples the reconstruction, resamples the ground truth to the same count,
/// and scores both metrics.
ModelRecord evaluate_model(const Mesh& reconstruction, const PointCloud& ground_truth,
                           int n_samples = kDefaultSamples, std::uint64_t seed = 0);

struct BenchmarkReport {
  std::string method = "ours";
  std::vector<ModelRecord> records;
  double mean_cd = 0.0;
  double mean_emd = 0.0;
  std::vector<std::string> notes;

  void recompute_aggregates();
  std::string to_csv() const;
  std::string to_json() const;
  /// Table with columns method, CD (x1e-3), EMD (x1e2).
  std::string to_table() const;
};

}  // namespace garment::metrics
