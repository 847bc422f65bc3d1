#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "garment/body.hpp"
#include "garment/implicit.hpp"
#include "garment/silhouette.hpp"
#include "garment/template.hpp"

namespace garment {

inline constexpr double kGarmentOffset = 0.007;     // smooth base distance off the body
inline constexpr double kAnnotationJitter = 0.002;  // max jitter per annotation point
inline constexpr double kShellThickness = 0.015;    // closed variant wall thickness
inline constexpr double kPerturbSigma = 0.02;       // near-surface label sampling
inline constexpr double kOccupancyRamp = 0.03;      // analytic field transition width

/// Synthetic garment with its ground truth. `template_vertex` maps every
/// ground-truth vertex to its vertex in the category-activated template, so
/// the template lines carry over as `lines`.
struct SynthGarment {
  ClothCategory category = ClothCategory::LongSleeveCoat;
  Mesh ground_truth_mesh;
  Mesh closed_mesh;
  Pose pose;
  std::vector<FeatureLineAnnotation> annotations;
  std::uint64_t wrinkle_seed = 0;

  std::uint64_t seed = 0;
  double pose_magnitude = 0.0;
  double wrinkle_amplitude = 0.0;
  std::vector<int> template_vertex;
  std::vector<FeatureLine> lines;  // indexed on ground_truth_mesh

  void validate() const;
};

/// Category-activated template built once per category and shared.
const AdaptableTemplate& category_template(ClothCategory category);

/// Pose with active joints rotated about a uniform random axis by an angle
/// uniform in [0, magnitude].
Pose random_pose(double magnitude, std::uint64_t seed);

/// Three octaves of trigonometric noise, amplitude halving per octave.
double wrinkle_field(const Vec3& p, double amplitude, std::uint64_t seed);

SynthGarment generate(ClothCategory category, double pose_magnitude, double wrinkle_amplitude,
                      std::uint64_t seed);

/// Watertight shell: the open surface, a reversed copy offset inward by
/// `thickness`, and quads stitching each boundary edge to its copy.
Mesh close_surface(const Mesh& open, double thickness = kShellThickness);

struct LabeledPoints {
  std::vector<Vec3> points;
  std::vector<double> labels;
};

/// Half uniform in the inflated bounds, half surface samples perturbed by
/// N(0, kPerturbSigma^2); labelled by the parity test.
LabeledPoints occupancy_labels(const Mesh& closed, int n, std::uint64_t seed);
LabeledPoints occupancy_labels(const SynthGarment& garment, int n, std::uint64_t seed);

SilhouetteDescriptor render_silhouette(const SynthGarment& garment, int size = kDefaultRasterSize);

/// clamp(0.5 - sd / ramp, 0, 1) of the signed distance to a closed mesh.
/// Beyond ramp / 2 the field saturates, so only the sign is needed there.
/// With `thin_shell` set, points farther than ramp / 2 from the surface are
/// taken as outside, which holds when the wall is thinner than ramp.
OccupancyField analytic_occupancy(const Mesh& closed, double ramp = kOccupancyRamp,
                                  bool thin_shell = false);
OccupancyField analytic_occupancy(const SynthGarment& garment);

// Dataset item: garment.obj, closed.obj, annotations.json, pose.json,
// silhouette.pgm, meta.json.
void write_garment(const SynthGarment& garment, const std::filesystem::path& dir);
SynthGarment read_garment(const std::filesystem::path& dir);

/// Garment id i of a family: seed + i, categories cycling through the table.
std::vector<SynthGarment> generate_family(int count, double pose_magnitude, double wrinkle_amplitude,
                                          std::uint64_t seed);
void write_dataset(std::span<const SynthGarment> garments, const std::filesystem::path& root);
std::vector<std::filesystem::path> dataset_items(const std::filesystem::path& root);

}  // namespace garment
