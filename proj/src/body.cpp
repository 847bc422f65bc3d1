#include "garment/body.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

namespace garment {

namespace {

constexpr std::array<const char*, kJointCount> kJointNames = {
    "pelvis", "spine", "shoulder_l", "shoulder_r", "elbow_l", "elbow_r", "wrist_l",
    "wrist_r", "hip_l", "hip_r", "knee_l", "knee_r", "ankle_l", "ankle_r"};

constexpr std::array<int, kJointCount> kJointParents = {0, 0, 1, 1, 2, 3, 4, 5, 0, 0, 8, 9, 10, 11};

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

// ---- Procedural body in raw units (roughly metres, feet at y = 0). ----

struct RingSpec {
  double y, rx, rz;
};

constexpr int kTorsoSegments = 32;
constexpr std::array<RingSpec, 15> kTorsoRings = {{
    {0.80, 0.175, 0.115},   // hemline / crotch level
    {0.86, 0.178, 0.115},
    {0.92, 0.175, 0.112},
    {0.98, 0.165, 0.108},
    {1.04, 0.150, 0.100},   // waist
    {1.10, 0.150, 0.100},
    {1.16, 0.158, 0.104},
    {1.22, 0.165, 0.108},
    {1.28, 0.170, 0.110},   // armpit
    {1.32, 0.172, 0.108},
    {1.36, 0.172, 0.104},
    {1.40, 0.168, 0.095},   // top of arm hole
    {1.43, 0.140, 0.080},
    {1.455, 0.095, 0.065},
    {1.47, 0.065, 0.060},   // neck
}};
constexpr int kHemRing = 0;
constexpr int kWaistRing = 4;
constexpr int kHoleBottom = 8;
constexpr int kHoleTop = 11;
constexpr int kHoleWidth = 4;  // quads around the side
constexpr int kHoleStartL = 6;
constexpr int kHoleStartR = 22;

constexpr double kArmDrop = 35.0 * std::numbers::pi / 180.0;
const Vec3 kShoulderL(0.14, 1.34, 0.0);
constexpr std::array<double, 10> kArmS = {0.09, 0.14, 0.19, 0.24, 0.29, 0.34, 0.39, 0.44, 0.49, 0.54};
constexpr std::array<double, 10> kArmR = {0.050, 0.047, 0.045, 0.043, 0.041,
                                          0.039, 0.037, 0.035, 0.033, 0.031};
constexpr int kElbowRing = 4;
constexpr int kWristRing = 9;
constexpr double kElbowS = 0.29;
constexpr double kWristS = 0.54;

constexpr double kCrotchY = 0.775;
constexpr std::array<double, 9> kLegY = {0.72, 0.64, 0.56, 0.48, 0.40, 0.32, 0.24, 0.16, 0.08};
constexpr std::array<double, 9> kLegR = {0.080, 0.072, 0.064, 0.055, 0.050,
                                         0.047, 0.042, 0.038, 0.036};
constexpr int kKneeRing = 3;
constexpr int kAnkleRing = 8;
constexpr double kHipX = 0.095;
constexpr double kAnkleX = 0.09;
constexpr double kHipY = 0.84;
constexpr double kPelvisY = 0.92;
constexpr double kSpineY = 1.10;

enum class Part { Torso, Crotch, ArmL, ArmR, LegL, LegR };

struct Builder {
  std::vector<Vec3> vertices;
  std::vector<Part> parts;
  std::vector<Face> faces;
  std::vector<Region> regions;

  int add(const Vec3& p, Part part) {
    vertices.push_back(p);
    parts.push_back(part);
    return static_cast<int>(vertices.size()) - 1;
  }

  // Quad strip between two equally sized closed rings. Orientation is chosen
  // so the normals point away from the axis through `center` along `axis`.
  void strip(const std::vector<int>& a, const std::vector<int>& b, Region region,
             const Vec3& center, const Vec3& axis) {
    const std::size_t n = a.size();
    double score = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = (i + 1) % n;
      const Vec3& p0 = vertices[a[i]];
      const Vec3 normal = (vertices[a[k]] - p0).cross(vertices[b[k]] - p0);
      Vec3 radial = p0 - center;
      radial -= radial.dot(axis) * axis;
      score += normal.dot(radial);
    }
    const bool flip = score < 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = (i + 1) % n;
      if (!flip) {
        emit({a[i], a[k], b[k]}, region);
        emit({a[i], b[k], b[i]}, region);
      } else {
        emit({a[i], b[k], a[k]}, region);
        emit({a[i], b[i], b[k]}, region);
      }
    }
  }

  void emit(const Face& f, Region region) {
    faces.push_back(f);
    regions.push_back(region);
  }
};

struct Limb {
  std::vector<std::vector<int>> rings;
};

bool in_hole(int ring, int k) {
  if (ring < kHoleBottom || ring >= kHoleTop) return false;
  return (k >= kHoleStartL && k < kHoleStartL + kHoleWidth) ||
         (k >= kHoleStartR && k < kHoleStartR + kHoleWidth);
}

// Grid vertices strictly inside an arm hole belong to no face.
bool inside_hole(int ring, int k) {
  if (ring <= kHoleBottom || ring >= kHoleTop) return false;
  return (k > kHoleStartL && k < kHoleStartL + kHoleWidth) ||
         (k > kHoleStartR && k < kHoleStartR + kHoleWidth);
}

std::vector<int> hole_loop(const std::vector<std::vector<int>>& torso, int k0) {
  std::vector<int> loop;
  for (int k = k0; k <= k0 + kHoleWidth; ++k) loop.push_back(torso[kHoleBottom][k]);
  for (int r = kHoleBottom + 1; r < kHoleTop; ++r) loop.push_back(torso[r][k0 + kHoleWidth]);
  for (int k = k0 + kHoleWidth; k >= k0; --k) loop.push_back(torso[kHoleTop][k]);
  for (int r = kHoleTop - 1; r > kHoleBottom; --r) loop.push_back(torso[r][k0]);
  return loop;
}

Vec3 arm_direction(double sign) { return Vec3(sign * std::cos(kArmDrop), -std::sin(kArmDrop), 0.0); }

Vec3 shoulder(double sign) { return Vec3(sign * kShoulderL.x(), kShoulderL.y(), kShoulderL.z()); }

Limb build_arm(Builder& b, const std::vector<int>& hole, double sign, Region upper, Region lower) {
  const Vec3 s0 = shoulder(sign);
  const Vec3 d = arm_direction(sign);
  const Vec3 u(0.0, 0.0, 1.0);
  const Vec3 w = d.cross(u).normalized();
  std::vector<double> angle;
  for (int v : hole) {
    const Vec3 rel = b.vertices[v] - s0;
    angle.push_back(std::atan2(rel.dot(w), rel.dot(u)));
  }
  const Part part = sign > 0 ? Part::ArmL : Part::ArmR;
  Limb limb;
  for (std::size_t j = 0; j < kArmS.size(); ++j) {
    std::vector<int> ring;
    for (double a : angle) {
      ring.push_back(b.add(s0 + kArmS[j] * d + kArmR[j] * (std::cos(a) * u + std::sin(a) * w), part));
    }
    limb.rings.push_back(std::move(ring));
  }
  b.strip(hole, limb.rings[0], upper, s0, d);
  for (std::size_t j = 0; j + 1 < limb.rings.size(); ++j) {
    b.strip(limb.rings[j], limb.rings[j + 1], static_cast<int>(j) < kElbowRing ? upper : lower, s0, d);
  }
  return limb;
}

double leg_center_x(double y, double sign) {
  const double t = (kLegY.front() - y) / (kLegY.front() - kLegY.back());
  return sign * (kHipX + std::clamp(t, 0.0, 1.0) * (kAnkleX - kHipX));
}

Limb build_leg(Builder& b, const std::vector<int>& first, double sign, Region upper, Region lower) {
  std::vector<double> angle;
  for (int v : first) {
    const Vec3& p = b.vertices[v];
    angle.push_back(std::atan2(p.z(), p.x() - sign * kHipX));
  }
  const Part part = sign > 0 ? Part::LegL : Part::LegR;
  Limb limb;
  for (std::size_t j = 0; j < kLegY.size(); ++j) {
    const double cx = leg_center_x(kLegY[j], sign);
    std::vector<int> ring;
    for (double a : angle) {
      ring.push_back(b.add(Vec3(cx + kLegR[j] * std::cos(a), kLegY[j], kLegR[j] * std::sin(a)), part));
    }
    limb.rings.push_back(std::move(ring));
  }
  const Vec3 axis(0.0, 1.0, 0.0);
  const Vec3 top_center(sign * kHipX, 0.0, 0.0);
  b.strip(first, limb.rings[0], upper, top_center, axis);
  for (std::size_t j = 0; j + 1 < limb.rings.size(); ++j) {
    const Vec3 c(leg_center_x(kLegY[j], sign), 0.0, 0.0);
    b.strip(limb.rings[j], limb.rings[j + 1], static_cast<int>(j) < kKneeRing ? upper : lower, c, axis);
  }
  return limb;
}

std::vector<JointWeight> normalized(std::vector<JointWeight> w) {
  std::erase_if(w, [](const JointWeight& jw) { return jw.weight <= 0.0; });
  double total = 0.0;
  for (const auto& jw : w) total += jw.weight;
  for (auto& jw : w) jw.weight /= total;
  return w;
}

std::vector<JointWeight> arm_weights(double s, int side) {
  const double sh = smoothstep((s + 0.03) / 0.09);
  const double el = smoothstep((s - (kElbowS - 0.04)) / 0.08);
  const int shoulder_j = side > 0 ? index(Joint::ShoulderL) : index(Joint::ShoulderR);
  const int elbow_j = side > 0 ? index(Joint::ElbowL) : index(Joint::ElbowR);
  return {{index(Joint::Spine), 1.0 - sh}, {shoulder_j, sh * (1.0 - el)}, {elbow_j, sh * el}};
}

std::vector<JointWeight> skin_vertex(const Vec3& p, Part part) {
  switch (part) {
    case Part::Torso: {
      const double sp = smoothstep((p.y() - 0.98) / (1.12 - 0.98));
      std::vector<JointWeight> w = {{index(Joint::Pelvis), 1.0 - sp}, {index(Joint::Spine), sp}};
      if (p.y() > 1.2) {
        const double sign = p.x() >= 0.0 ? 1.0 : -1.0;
        const double s = (p - shoulder(sign)).dot(arm_direction(sign));
        auto arm = arm_weights(s, sign > 0 ? 1 : -1);
        const double sh = 1.0 - arm[0].weight;
        for (auto& jw : w) jw.weight *= 1.0 - sh;
        w.push_back(arm[1]);
        w.push_back(arm[2]);
      }
      return normalized(std::move(w));
    }
    case Part::Crotch: return {{index(Joint::Pelvis), 1.0}};
    case Part::ArmL:
    case Part::ArmR: {
      const double sign = part == Part::ArmL ? 1.0 : -1.0;
      const double s = (p - shoulder(sign)).dot(arm_direction(sign));
      return normalized(arm_weights(s, sign > 0 ? 1 : -1));
    }
    case Part::LegL:
    case Part::LegR: {
      const bool left = part == Part::LegL;
      const double hip = smoothstep((0.80 - p.y()) / 0.16);
      const double knee = smoothstep((kLegY[kKneeRing] + 0.04 - p.y()) / 0.08);
      return normalized({{index(Joint::Pelvis), 1.0 - hip},
                         {left ? index(Joint::HipL) : index(Joint::HipR), hip * (1.0 - knee)},
                         {left ? index(Joint::KneeL) : index(Joint::KneeR), hip * knee}});
    }
  }
  return {};
}

Skeleton raw_skeleton() {
  Skeleton s;
  s.names.assign(kJointNames.begin(), kJointNames.end());
  s.parents.assign(kJointParents.begin(), kJointParents.end());
  s.joints.resize(kJointCount);
  auto set = [&](Joint j, const Vec3& p) { s.joints[index(j)] = p; };
  set(Joint::Pelvis, Vec3(0.0, kPelvisY, 0.0));
  set(Joint::Spine, Vec3(0.0, kSpineY, 0.0));
  for (double sign : {1.0, -1.0}) {
    const bool left = sign > 0;
    const Vec3 s0 = shoulder(sign);
    const Vec3 d = arm_direction(sign);
    set(left ? Joint::ShoulderL : Joint::ShoulderR, s0);
    set(left ? Joint::ElbowL : Joint::ElbowR, s0 + kElbowS * d);
    set(left ? Joint::WristL : Joint::WristR, s0 + kWristS * d);
    set(left ? Joint::HipL : Joint::HipR, Vec3(sign * kHipX, kHipY, 0.0));
    set(left ? Joint::KneeL : Joint::KneeR,
        Vec3(leg_center_x(kLegY[kKneeRing], sign), kLegY[kKneeRing], 0.0));
    set(left ? Joint::AnkleL : Joint::AnkleR,
        Vec3(leg_center_x(kLegY[kAnkleRing], sign), kLegY[kAnkleRing], 0.0));
  }
  return s;
}

FeatureLine make_line(LandmarkKind kind, Side side, std::vector<int> loop) {
  FeatureLine line;
  line.kind = kind;
  line.side = side;
  line.vertex_indices = std::move(loop);
  return line;
}

}  // namespace

int Skeleton::find(std::string_view name) const {
  for (int i = 0; i < size(); ++i)
    if (names[i] == name) return i;
  return -1;
}

void Skeleton::validate() const {
  if (joints.empty()) throw std::invalid_argument("skeleton has no joints");
  if (parents.size() != joints.size()) throw std::invalid_argument("skeleton parents size mismatch");
  if (!names.empty() && names.size() != joints.size()) {
    throw std::invalid_argument("skeleton names size mismatch");
  }
  if (parents[0] != 0) throw std::invalid_argument("skeleton root must be its own parent");
  for (int j = 1; j < size(); ++j) {
    if (parents[j] < 0 || parents[j] >= j) {
      throw std::invalid_argument("skeleton parents must precede children");
    }
  }
}

std::vector<bool> default_active_mask() {
  std::vector<bool> mask(kJointCount, false);
  for (Joint j : {Joint::Spine, Joint::ShoulderL, Joint::ShoulderR, Joint::ElbowL,
                  Joint::ElbowR, Joint::HipL, Joint::HipR, Joint::KneeL, Joint::KneeR}) {
    mask[index(j)] = true;
  }
  return mask;
}

Pose Pose::zero() {
  Pose p;
  p.theta.assign(kJointCount, Vec3::Zero());
  p.active_mask = default_active_mask();
  return p;
}

Pose Pose::masked() const {
  Pose p = *this;
  for (int j = 0; j < size(); ++j)
    if (!active_mask[j]) p.theta[j].setZero();
  return p;
}

int Pose::active_scalar_count() const {
  return 3 * static_cast<int>(std::count(active_mask.begin(), active_mask.end(), true));
}

void Pose::validate() const {
  if (theta.size() != active_mask.size()) throw std::invalid_argument("pose mask size mismatch");
  for (const Vec3& t : theta)
    if (!t.allFinite()) throw std::invalid_argument("pose contains non-finite values");
}

std::string Pose::to_json() const {
  nlohmann::ordered_json j;
  auto& th = j["theta"] = nlohmann::ordered_json::array();
  for (const Vec3& t : theta) th.push_back({t.x(), t.y(), t.z()});
  j["active_mask"] = active_mask;
  return j.dump(2) + "\n";
}

Pose Pose::from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  Pose p;
  for (const auto& t : j.at("theta")) {
    p.theta.emplace_back(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
  }
  p.active_mask = j.at("active_mask").get<std::vector<bool>>();
  p.validate();
  return p;
}

void BodyModel::validate() const {
  rest_mesh.validate();
  skeleton.validate();
  if (skin_weights.size() != rest_mesh.vertices.size()) {
    throw std::invalid_argument("skin weights do not cover every vertex");
  }
  for (const auto& w : skin_weights) {
    double total = 0.0;
    for (const auto& jw : w) {
      if (jw.joint < 0 || jw.joint >= skeleton.size()) throw std::invalid_argument("skin weight joint out of range");
      if (jw.weight < 0.0) throw std::invalid_argument("negative skin weight");
      total += jw.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("skin weights must sum to 1");
  }
}

ProceduralBody make_procedural_body() {
  Builder b;
  std::vector<std::vector<int>> torso;
  for (int r = 0; r < static_cast<int>(kTorsoRings.size()); ++r) {
    const RingSpec& spec = kTorsoRings[r];
    std::vector<int> ring;
    for (int k = 0; k < kTorsoSegments; ++k) {
      if (inside_hole(r, k)) {
        ring.push_back(-1);
        continue;
      }
      const double phi = 2.0 * std::numbers::pi * k / kTorsoSegments;
      ring.push_back(b.add(Vec3(spec.rx * std::sin(phi), spec.y, spec.rz * std::cos(phi)), Part::Torso));
    }
    torso.push_back(std::move(ring));
  }
  // Torso quads; faces between the hem and waist rings form the waist region.
  for (int r = 0; r + 1 < static_cast<int>(torso.size()); ++r) {
    const Region region = r < kWaistRing ? Region::Waist : Region::Torso;
    for (int k = 0; k < kTorsoSegments; ++k) {
      if (in_hole(r, k)) continue;
      const int k1 = (k + 1) % kTorsoSegments;
      b.emit({torso[r][k], torso[r][k1], torso[r + 1][k1]}, region);
      b.emit({torso[r][k], torso[r + 1][k1], torso[r + 1][k]}, region);
    }
  }

  const std::vector<int> hole_l = hole_loop(torso, kHoleStartL);
  const std::vector<int> hole_r = hole_loop(torso, kHoleStartR);
  const Limb arm_l = build_arm(b, hole_l, 1.0, Region::UpperLimbL, Region::LowerLimbL);
  const Limb arm_r = build_arm(b, hole_r, -1.0, Region::UpperLimbR, Region::LowerLimbR);

  // Pair-of-pants split: each leg starts from half the hem ring plus a short
  // crotch seam running front to back between the legs.
  const double hem_rz = kTorsoRings[kHemRing].rz;
  std::array<int, 3> crotch{};
  for (int i = 0; i < 3; ++i) {
    crotch[i] = b.add(Vec3(0.0, kCrotchY, hem_rz * (i - 1) * 0.5), Part::Crotch);
  }
  const int half = kTorsoSegments / 2;
  std::vector<int> leg_l_top, leg_r_top;
  for (int k = 0; k <= half; ++k) leg_l_top.push_back(torso[kHemRing][k]);
  for (int i = 0; i < 3; ++i) leg_l_top.push_back(crotch[i]);
  for (int k = half; k <= kTorsoSegments; ++k) leg_r_top.push_back(torso[kHemRing][k % kTorsoSegments]);
  for (int i = 2; i >= 0; --i) leg_r_top.push_back(crotch[i]);
  const Limb leg_l = build_leg(b, leg_l_top, 1.0, Region::UpperLegL, Region::LowerLegL);
  const Limb leg_r = build_leg(b, leg_r_top, -1.0, Region::UpperLegR, Region::LowerLegR);

  ProceduralBody body;
  body.face_regions = b.regions;
  body.model.skeleton = raw_skeleton();
  body.model.skin_weights.reserve(b.vertices.size());
  for (std::size_t i = 0; i < b.vertices.size(); ++i) {
    body.model.skin_weights.push_back(skin_vertex(b.vertices[i], b.parts[i]));
  }

  // Vertices on a seam take the lowest-numbered adjacent region.
  body.vertex_regions.assign(b.vertices.size(), static_cast<Region>(kRegionCount - 1));
  for (std::size_t f = 0; f < b.faces.size(); ++f) {
    for (int v : b.faces[f]) body.vertex_regions[v] = std::min(body.vertex_regions[v], b.regions[f]);
  }

  auto& lines = body.lines;
  lines.push_back(make_line(LandmarkKind::Neck, Side::None, torso.back()));
  lines.push_back(make_line(LandmarkKind::Waist, Side::None, torso[kWaistRing]));
  lines.push_back(make_line(LandmarkKind::Shoulder, Side::Left, hole_l));
  lines.push_back(make_line(LandmarkKind::Shoulder, Side::Right, hole_r));
  lines.push_back(make_line(LandmarkKind::Elbow, Side::Left, arm_l.rings[kElbowRing]));
  lines.push_back(make_line(LandmarkKind::Elbow, Side::Right, arm_r.rings[kElbowRing]));
  lines.push_back(make_line(LandmarkKind::Wrist, Side::Left, arm_l.rings[kWristRing]));
  lines.push_back(make_line(LandmarkKind::Wrist, Side::Right, arm_r.rings[kWristRing]));
  lines.push_back(make_line(LandmarkKind::Knee, Side::Left, leg_l.rings[kKneeRing]));
  lines.push_back(make_line(LandmarkKind::Knee, Side::Right, leg_r.rings[kKneeRing]));
  lines.push_back(make_line(LandmarkKind::Ankle, Side::Left, leg_l.rings[kAnkleRing]));
  lines.push_back(make_line(LandmarkKind::Ankle, Side::Right, leg_r.rings[kAnkleRing]));
  lines.push_back(make_line(LandmarkKind::Hemline, Side::None, torso[kHemRing]));

  // Normalize to unit bounding-box diagonal, centred at the origin.
  const Bounds box = bounding_box(b.vertices);
  const Vec3 center = 0.5 * (box.lo + box.hi);
  const double scale = 1.0 / box.diagonal();
  auto& mesh = body.model.rest_mesh;
  mesh.faces = b.faces;
  for (const Vec3& p : b.vertices) mesh.vertices.push_back((p - center) * scale);
  for (Vec3& j : body.model.skeleton.joints) j = (j - center) * scale;
  body.height = (box.hi.y() - box.lo.y()) * scale;
  body.model.validate();
  return body;
}

Eigen::Matrix3d rotation_from_axis_angle(const Vec3& axis_angle) {
  const double angle = axis_angle.norm();
  if (angle < 1e-14) {
    Eigen::Matrix3d skew;
    skew << 0, -axis_angle.z(), axis_angle.y(), axis_angle.z(), 0, -axis_angle.x(), -axis_angle.y(),
        axis_angle.x(), 0;
    return Eigen::Matrix3d::Identity() + skew;
  }
  return Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
}

JointTransforms forward_kinematics(const Skeleton& skeleton, const Pose& pose) {
  if (pose.size() != skeleton.size()) throw std::invalid_argument("pose does not match skeleton");
  const Pose eff = pose.masked();
  JointTransforms t;
  t.rotation.resize(skeleton.size());
  t.position.resize(skeleton.size());
  t.rotation[0] = rotation_from_axis_angle(eff.theta[0]);
  t.position[0] = skeleton.joints[0];
  for (int j = 1; j < skeleton.size(); ++j) {
    const int p = skeleton.parents[j];
    t.rotation[j] = t.rotation[p] * rotation_from_axis_angle(eff.theta[j]);
    t.position[j] = t.position[p] + t.rotation[p] * (skeleton.joints[j] - skeleton.joints[p]);
  }
  return t;
}

namespace {

bool is_identity_pose(const Pose& pose) {
  for (int j = 0; j < pose.size(); ++j)
    if (pose.active_mask[j] && !pose.theta[j].isZero(0.0)) return false;
  return true;
}

Vec3 skin(const BodyModel& model, const JointTransforms& t, int v) {
  const Vec3& x = model.rest_mesh.vertices[v];
  Vec3 out = Vec3::Zero();
  for (const JointWeight& jw : model.skin_weights[v]) {
    out += jw.weight *
           (t.rotation[jw.joint] * (x - model.skeleton.joints[jw.joint]) + t.position[jw.joint]);
  }
  return out;
}

}  // namespace

Mesh pose_mesh(const BodyModel& model, const Pose& pose) {
  pose.validate();
  if (is_identity_pose(pose)) return model.rest_mesh;
  const JointTransforms t = forward_kinematics(model.skeleton, pose);
  Mesh out;
  out.faces = model.rest_mesh.faces;
  out.vertices.resize(model.rest_mesh.vertices.size());
  for (std::size_t v = 0; v < out.vertices.size(); ++v) out.vertices[v] = skin(model, t, static_cast<int>(v));
  return out;
}

std::vector<Vec3> pose_vertices(const BodyModel& model, const Pose& pose, std::span<const int> vertices) {
  pose.validate();
  std::vector<Vec3> out;
  out.reserve(vertices.size());
  if (is_identity_pose(pose)) {
    for (int v : vertices) out.push_back(model.rest_mesh.vertices.at(v));
    return out;
  }
  const JointTransforms t = forward_kinematics(model.skeleton, pose);
  for (int v : vertices) out.push_back(skin(model, t, v));
  return out;
}

double pose_loss(const Pose& predicted, const Pose& target, double lambda_reg) {
  predicted.validate();
  target.validate();
  if (predicted.size() != target.size()) throw std::invalid_argument("pose_loss: size mismatch");
  if (predicted.active_mask != target.active_mask) throw std::invalid_argument("pose_loss: mask mismatch");
  const int count = target.active_scalar_count();
  if (count == 0) throw std::invalid_argument("pose_loss: no active parameters");
  double mse = 0.0;
  double reg = 0.0;
  for (int j = 0; j < target.size(); ++j) {
    if (!target.active_mask[j]) continue;
    mse += (predicted.theta[j] - target.theta[j]).squaredNorm();
    reg += predicted.theta[j].squaredNorm();
  }
  return mse / count + lambda_reg * reg;
}

std::vector<Vec3> posed_line_centroids(const BodyModel& model, const Pose& pose,
                                       std::span<const FeatureLine> lines) {
  std::vector<int> all;
  for (const auto& line : lines) all.insert(all.end(), line.vertex_indices.begin(), line.vertex_indices.end());
  const std::vector<Vec3> posed = pose_vertices(model, pose, all);
  std::vector<Vec3> out;
  std::size_t at = 0;
  for (const auto& line : lines) {
    if (line.vertex_indices.empty()) throw std::invalid_argument("feature line has no vertices");
    Vec3 c = Vec3::Zero();
    for (std::size_t i = 0; i < line.vertex_indices.size(); ++i) c += posed[at++];
    out.push_back(c / static_cast<double>(line.vertex_indices.size()));
  }
  return out;
}

namespace {

bool is_torso_landmark(LandmarkKind k) {
  return k == LandmarkKind::Neck || k == LandmarkKind::Waist || k == LandmarkKind::Shoulder;
}

// Rigid (R, t) minimising sum |R a_i + t - b_i|^2.
void kabsch(const std::vector<Vec3>& a, const std::vector<Vec3>& b, Eigen::Matrix3d& r, Vec3& t) {
  Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca += a[i];
    cb += b[i];
  }
  ca /= static_cast<double>(a.size());
  cb /= static_cast<double>(b.size());
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) h += (a[i] - ca) * (b[i] - cb).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  r = svd.matrixV() * d * svd.matrixU().transpose();
  t = cb - r * ca;
}

}  // namespace

PoseFit fit_pose_to_annotations(const BodyModel& model, std::span<const FeatureLine> lines,
                                std::span<const FeatureLineAnnotation> annotations,
                                const PoseFitOptions& options) {
  std::vector<FeatureLine> used;
  std::vector<Vec3> targets;
  for (const auto& line : lines) {
    if (const auto idx = find_annotation(annotations, line.kind, line.side)) {
      used.push_back(line);
      targets.push_back(annotations[*idx].centroid());
    }
  }
  if (used.empty()) throw std::invalid_argument("fit_pose_to_annotations: no annotated landmarks");

  PoseFit fit;
  fit.pose = Pose::zero();
  const std::vector<Vec3> rest = posed_line_centroids(model, fit.pose, used);

  std::vector<Vec3> torso_data, torso_model;
  for (std::size_t i = 0; i < used.size(); ++i) {
    if (is_torso_landmark(used[i].kind)) {
      torso_data.push_back(targets[i]);
      torso_model.push_back(rest[i]);
    }
  }
  if (torso_data.size() >= 3) {
    kabsch(torso_data, torso_model, fit.align_rotation, fit.align_translation);
  } else {
    const auto& from = torso_data.empty() ? targets : torso_data;
    const auto& to = torso_data.empty() ? rest : torso_model;
    Vec3 shift = Vec3::Zero();
    for (std::size_t i = 0; i < from.size(); ++i) shift += to[i] - from[i];
    fit.align_translation = shift / static_cast<double>(from.size());
  }
  for (Vec3& t : targets) t = fit.align_rotation * t + fit.align_translation;

  std::vector<int> active;
  for (int j = 0; j < fit.pose.size(); ++j)
    if (fit.pose.active_mask[j]) active.push_back(j);
  const int n_params = 3 * static_cast<int>(active.size());
  const int n_res = 3 * static_cast<int>(used.size());

  auto residual = [&](const Eigen::VectorXd& x) {
    Pose p = Pose::zero();
    for (std::size_t a = 0; a < active.size(); ++a) p.theta[active[a]] = x.segment<3>(3 * a);
    const auto c = posed_line_centroids(model, p, used);
    Eigen::VectorXd r(n_res);
    for (std::size_t i = 0; i < used.size(); ++i) r.segment<3>(3 * i) = c[i] - targets[i];
    return r;
  };

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n_params);
  Eigen::VectorXd r = residual(x);
  double cost = r.squaredNorm();
  double lambda = options.initial_damping;
  auto rms = [&](double c) { return std::sqrt(c / static_cast<double>(used.size())); };

  int it = 0;
  bool converged = false;
  while (!converged && it < options.max_iterations) {
    ++it;
    Eigen::MatrixXd jac(n_res, n_params);
    for (int k = 0; k < n_params; ++k) {
      Eigen::VectorXd xp = x, xm = x;
      xp[k] += options.fd_step;
      xm[k] -= options.fd_step;
      jac.col(k) = (residual(xp) - residual(xm)) / (2.0 * options.fd_step);
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    bool accepted = false;
    for (int attempt = 0; attempt < 20 && !accepted; ++attempt) {
      Eigen::MatrixXd a = jtj;
      a.diagonal().array() += lambda;
      const Eigen::VectorXd step = a.ldlt().solve(-g);
      const Eigen::VectorXd x_new = x + step;
      const Eigen::VectorXd r_new = residual(x_new);
      const double cost_new = r_new.squaredNorm();
      if (cost_new < cost) {
        const double improvement = rms(cost) - rms(cost_new);
        x = x_new;
        r = r_new;
        cost = cost_new;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        converged = improvement < options.min_improvement;
      } else {
        lambda *= 4.0;
      }
    }
    if (!accepted) break;
  }
  for (std::size_t a = 0; a < active.size(); ++a) fit.pose.theta[active[a]] = x.segment<3>(3 * a);
  fit.rms_error = rms(cost);
  fit.iterations = it;
  return fit;
}

}  // namespace garment
