#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "garment/feature_line.hpp"
#include "garment/mesh.hpp"
#include "garment/region.hpp"

namespace garment {

/// Joint order of the procedural skeleton. The pelvis is the root and carries
/// the whole-body rotation; the spine drives the upper body.
enum class Joint : int {
  Pelvis,
  Spine,
  ShoulderL,
  ShoulderR,
  ElbowL,
  ElbowR,
  WristL,
  WristR,
  HipL,
  HipR,
  KneeL,
  KneeR,
  AnkleL,
  AnkleR,
};

inline constexpr int kJointCount = 14;

constexpr int index(Joint j) { return static_cast<int>(j); }

struct Skeleton {
  std::vector<Vec3> joints;  // rest positions
  std::vector<int> parents;  // root is its own parent
  std::vector<std::string> names;

  int size() const { return static_cast<int>(joints.size()); }
  int find(std::string_view name) const;
  void validate() const;
};

/// Per-joint axis-angle rotations in the world frame of the rest pose.
struct Pose {
  std::vector<Vec3> theta;
  std::vector<bool> active_mask;

  int size() const { return static_cast<int>(theta.size()); }
  /// Zero pose with the default active set: spine, shoulders, elbows, hips,
  /// knees. The root rotation, wrists and ankles stay fixed at zero.
  static Pose zero();
  /// Inactive entries forced to zero.
  Pose masked() const;
  int active_scalar_count() const;
  void validate() const;

  std::string to_json() const;
  static Pose from_json(std::string_view text);
};

std::vector<bool> default_active_mask();

struct JointWeight {
  int joint = 0;
  double weight = 0.0;
};

using SkinWeights = std::vector<std::vector<JointWeight>>;

struct BodyModel {
  Mesh rest_mesh;
  Skeleton skeleton;
  SkinWeights skin_weights;

  void validate() const;
};

/// Procedural body plus the semantic layout the template is built from.
struct ProceduralBody {
  BodyModel model;
  std::vector<Region> face_regions;
  std::vector<Region> vertex_regions;
  std::vector<FeatureLine> lines;
  /// Canonical height (y extent) of the rest mesh.
  double height = 0.0;
};

/// Builds the canonical template body: bounding-box diagonal 1, centred at the origin,
/// +y up, +z facing the viewer, +x toward the body's left.
ProceduralBody make_procedural_body();

Eigen::Matrix3d rotation_from_axis_angle(const Vec3& axis_angle);

struct JointTransforms {
  std::vector<Eigen::Matrix3d> rotation;  // world rotation per joint
  std::vector<Vec3> position;             // posed joint position
};

JointTransforms forward_kinematics(const Skeleton& skeleton, const Pose& pose);

/// Linear blend skinning; inactive pose entries are ignored. The all-zero
/// effective pose returns the rest mesh unchanged.
Mesh pose_mesh(const BodyModel& model, const Pose& pose);

/// Skinned positions for a vertex subset only.
std::vector<Vec3> pose_vertices(const BodyModel& model, const Pose& pose,
                                std::span<const int> vertices);

inline constexpr double kDefaultPoseRegularization = 1e-5;

/// Mean squared error over active scalar entries plus lambda_reg times the
/// squared norm of the predicted parameters.
double pose_loss(const Pose& predicted, const Pose& target,
                 double lambda_reg = kDefaultPoseRegularization);

struct PoseFitOptions {
  int max_iterations = 100;
  double min_improvement = 1e-6;
  double fd_step = 1e-5;
  double initial_damping = 1e-3;
};

struct PoseFit {
  Pose pose;
  /// Rigid map from annotation frame to model frame: x_model = R x + t.
  Eigen::Matrix3d align_rotation = Eigen::Matrix3d::Identity();
  Vec3 align_translation = Vec3::Zero();
  double rms_error = 0.0;
  int iterations = 0;
};

/// Fits the active pose parameters so the centroids of the posed template
/// lines meet the centroids of the matching annotations. Torso landmarks
/// (ne, wa, sh) first fix a rigid alignment; the pose is then refined by
/// damped Gauss-Newton with a central-difference Jacobian.
PoseFit fit_pose_to_annotations(const BodyModel& model, std::span<const FeatureLine> lines,
                                std::span<const FeatureLineAnnotation> annotations,
                                const PoseFitOptions& options = {});

/// Centroids of posed template lines, one per line.
std::vector<Vec3> posed_line_centroids(const BodyModel& model, const Pose& pose,
                                       std::span<const FeatureLine> lines);

}  // namespace garment
