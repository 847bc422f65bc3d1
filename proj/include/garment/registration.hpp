#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "garment/feature_line.hpp"
#include "garment/mesh.hpp"

namespace garment {

enum class RejectReason { None, NormalCone, DistanceGate };

std::string_view to_string(RejectReason r);  // "none", "normal_cone", "distance_gate"

struct Correspondence {
  int source_vertex = -1;
  Vec3 target_point = Vec3::Zero();
  Vec3 target_normal = Vec3::UnitZ();
  double distance = 0.0;       // source vertex to target surface
  double back_distance = 0.0;  // target point back to source surface
  bool valid = false;
  RejectReason reason = RejectReason::None;
};

inline constexpr double kDefaultMaxAngleDeg = 60.0;
inline constexpr double kDefaultSigma = 0.01;

/// Closest target point per source vertex, gated by the normal cone first and
/// then by the two-way distance test (both directed distances below sigma).
std::vector<Correspondence> find_correspondences(const Mesh& source, const Mesh& target,
                                                 double max_angle_deg = kDefaultMaxAngleDeg,
                                                 double sigma = kDefaultSigma);

struct RegistrationParams {
  double max_angle_deg = kDefaultMaxAngleDeg;
  double sigma = kDefaultSigma;
  int iterations = 10;
  double mu_initial = 1.0;
  double mu_decay = 0.5;
  double mu_floor = 0.05;
  double tolerance = 1e-6;  // stop when mean valid distance improves less
  double ridge = 1e-8;      // keeps vertices without data pinned
};

struct RegistrationIteration {
  int valid_count = 0;
  int rejected_normal = 0;
  int rejected_distance = 0;
  double mean_dist = 0.0;
  double mu = 0.0;
};

struct RegistrationResult {
  Mesh mesh;
  std::vector<RegistrationIteration> iterations;
  /// Set when an iteration found no valid correspondence; the mesh is then
  /// the state before that iteration.
  bool stalled = false;

  std::string diagnostics_json() const;
};

/// Non-rigid ICP with per-vertex displacements: each outer iteration solves
/// (W + mu L^T L + ridge I) d = W (t - v) with L the cotangent Laplacian of the
/// source, and mu annealed geometrically down to the floor.
RegistrationResult nonrigid_register(const Mesh& source, const Mesh& target,
                                     const RegistrationParams& params = {});

/// Surface-refinement loss weights; lambda_chm is 1 unless set otherwise.
struct RefineWeights {
  double lambda_nor = 1.6e-4;
  double lambda_lap = 1.0;
  double lambda_med = 0.5;
  double lambda_line = 1.0;
  double lambda_fed = 0.5;
  double lambda_chm = 1.0;

  static RefineWeights zero() { return {0, 0, 0, 0, 0, 0}; }
};

struct RefineTerms {
  double chm = 0.0;
  double nor = 0.0;
  double lap = 0.0;
  double med = 0.0;
  double line = 0.0;
  double fed = 0.0;
  double total = 0.0;
};

struct RefineOptions {
  int samples = 2048;
  std::uint64_t seed = 0;
};

/// chm: symmetric squared Chamfer between surface samples and the cloud.
/// nor: 1 - mean cosine between each sample's face normal and the normal of
/// its nearest cloud point. lap: mean squared uniform-Laplacian coordinate.
/// med: mean squared edge length. line/fed: line_loss and edge_reg summed
/// over the lines that have a matching annotation.
RefineTerms refine_terms(const Mesh& mesh, const PointCloud& ground_truth,
                         std::span<const FeatureLine> lines,
                         std::span<const FeatureLineAnnotation> annotations,
                         const RefineWeights& weights = {}, const RefineOptions& options = {});

double refine_loss(const Mesh& mesh, const PointCloud& ground_truth, std::span<const FeatureLine> lines,
                   std::span<const FeatureLineAnnotation> annotations, const RefineWeights& weights = {},
                   const RefineOptions& options = {});

}  // namespace garment
