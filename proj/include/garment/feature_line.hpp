#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "garment/mesh.hpp"

namespace garment {

/// Landmark vocabulary: neck, waist, shoulder, elbow, wrist, knee, ankle, hemline.
enum class LandmarkKind { Neck, Waist, Shoulder, Elbow, Wrist, Knee, Ankle, Hemline };

inline constexpr std::array<LandmarkKind, 8> kAllLandmarks = {
    LandmarkKind::Neck,  LandmarkKind::Waist, LandmarkKind::Shoulder, LandmarkKind::Elbow,
    LandmarkKind::Wrist, LandmarkKind::Knee,  LandmarkKind::Ankle,    LandmarkKind::Hemline};

std::string_view to_string(LandmarkKind kind);  // "ne", "wa", ...
LandmarkKind landmark_from_string(std::string_view code);

/// Limb side for paired lines; None for midline loops (neck, waist, hemline).
enum class Side { None, Left, Right };

std::string_view to_string(Side side);  // "", "L", "R"
Side side_from_string(std::string_view code);

/// Closed polyline on a template mesh, stored as an ordered vertex loop.
struct FeatureLine {
  LandmarkKind kind = LandmarkKind::Neck;
  Side side = Side::None;
  std::vector<int> vertex_indices;
  bool closed = true;

  void validate(int vertex_count) const;
};

/// Annotated landmark points sampled around a landmark on a ground-truth cloud.
struct FeatureLineAnnotation {
  LandmarkKind kind = LandmarkKind::Neck;
  Side side = Side::None;
  PointCloud points;

  Vec3 centroid() const;
};

/// A predicted line: landmark identity plus current vertex positions.
struct LinePositions {
  LandmarkKind kind = LandmarkKind::Neck;
  Side side = Side::None;
  std::vector<Vec3> positions;
};

inline constexpr double kDefaultEdgeWeight = 0.2;

/// Symmetric squared Chamfer between predicted vertices and annotation points.
double line_loss(std::span<const Vec3> predicted, std::span<const Vec3> annotation);
double line_loss(std::span<const Vec3> predicted, const FeatureLineAnnotation& annotation);

/// Mean squared length of consecutive edges, closing edge included.
double edge_reg(std::span<const Vec3> loop);

struct FittingTerms {
  double line = 0.0;
  double edge = 0.0;
  double total = 0.0;
};

/// Sum over lines of line_loss + lambda_edge * edge_reg. Each line is matched
/// to the annotation with the same (kind, side); unmatched lines throw.
FittingTerms fitting_terms(std::span<const LinePositions> lines,
                           std::span<const FeatureLineAnnotation> annotations,
                           double lambda_edge = kDefaultEdgeWeight);
double fitting_loss(std::span<const LinePositions> lines,
                    std::span<const FeatureLineAnnotation> annotations,
                    double lambda_edge = kDefaultEdgeWeight);

/// Index of the annotation matching (kind, side), if any.
std::optional<std::size_t> find_annotation(std::span<const FeatureLineAnnotation> annotations,
                                           LandmarkKind kind, Side side);

/// Uniform umbrella smoothing on a closed loop: x_i += step * (mid(x_{i-1}, x_{i+1}) - x_i).
std::vector<Vec3> laplacian_smooth_line(std::span<const Vec3> loop, int iterations, double step);

/// Gathers loop positions from a mesh.
std::vector<Vec3> line_positions(const Mesh& mesh, const FeatureLine& line);

// Annotation file: {"category": ..., "lines": [{"kind", "side"?, "points": [[x,y,z], ...]}]}
struct AnnotationFile {
  std::string category;
  std::vector<FeatureLineAnnotation> lines;
};

std::string annotations_to_json(const AnnotationFile& file);
AnnotationFile annotations_from_json(std::string_view text);

}  // namespace garment
