#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "garment/body.hpp"

using namespace garment;

namespace {

const ProceduralBody& body() {
  static const ProceduralBody b = make_procedural_body();
  return b;
}

std::vector<FeatureLineAnnotation> annotate(const Mesh& mesh, const std::vector<FeatureLine>& lines) {
  std::vector<FeatureLineAnnotation> out;
  for (const auto& line : lines) {
    FeatureLineAnnotation a;
    a.kind = line.kind;
    a.side = line.side;
    a.points.points = line_positions(mesh, line);
    out.push_back(std::move(a));
  }
  return out;
}

double max_deviation(const Mesh& a, const Mesh& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.vertices.size(); ++i) m = std::max(m, (a.vertices[i] - b.vertices[i]).norm());
  return m;
}

}  // namespace

TEST_CASE("procedural body is a consistently oriented open manifold") {
  const Mesh& m = body().model.rest_mesh;
  CHECK(m.vertices.size() > 1000);
  CHECK(is_edge_manifold(m));
  std::vector<bool> used(m.vertices.size(), false);
  for (const Face& f : m.faces)
    for (int v : f) used[v] = true;
  CHECK(std::count(used.begin(), used.end(), false) == 0);
  std::set<std::pair<int, int>> directed;
  for (const Face& f : m.faces)
    for (int k = 0; k < 3; ++k) CHECK(directed.insert({f[k], f[(k + 1) % 3]}).second);
  // Open at the neck, both wrists and both ankles.
  CHECK(boundary_loops(m).size() == 5);
  CHECK(euler_characteristic(m) == 2 - 5);
  const Bounds box = bounding_box(m.vertices);
  CHECK(box.diagonal() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((box.lo + box.hi).norm() < 1e-12);
  CHECK(body().face_regions.size() == m.faces.size());
  CHECK(body().vertex_regions.size() == m.vertices.size());
}

TEST_CASE("body normals point away from the skeleton") {
  const auto& b = body();
  const Mesh& m = b.model.rest_mesh;
  const auto& sk = b.model.skeleton;
  // Distance from a point to the nearest bone segment, returning the foot point.
  auto nearest_bone_point = [&](const Vec3& p) {
    Vec3 best = sk.joints[0];
    double best_d = 1e300;
    for (int j = 1; j < sk.size(); ++j) {
      const Vec3 a = sk.joints[sk.parents[j]], c = sk.joints[j];
      const Vec3 ab = c - a;
      const double t = std::clamp((p - a).dot(ab) / std::max(ab.squaredNorm(), 1e-30), 0.0, 1.0);
      const Vec3 q = a + t * ab;
      if ((p - q).norm() < best_d) {
        best_d = (p - q).norm();
        best = q;
      }
    }
    return best;
  };
  const auto normals = compute_face_normals(m);
  int outward = 0;
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    const Vec3 c = (m.vertices[m.faces[f][0]] + m.vertices[m.faces[f][1]] + m.vertices[m.faces[f][2]]) / 3.0;
    if (normals[f].dot(c - nearest_bone_point(c)) > 0.0) ++outward;
  }
  CHECK(outward > 0.97 * m.faces.size());
}

TEST_CASE("feature lines sit on the expected anatomy") {
  const auto& b = body();
  CHECK(b.lines.size() == 13);
  std::map<std::pair<LandmarkKind, Side>, Vec3> c;
  for (const auto& line : b.lines) {
    line.validate(static_cast<int>(b.model.rest_mesh.vertices.size()));
    const auto pts = line_positions(b.model.rest_mesh, line);
    Vec3 s = Vec3::Zero();
    for (const Vec3& p : pts) s += p;
    c[{line.kind, line.side}] = s / pts.size();
  }
  const auto y = [&](LandmarkKind k, Side s = Side::None) { return c.at({k, s}).y(); };
  CHECK(y(LandmarkKind::Neck) > y(LandmarkKind::Shoulder, Side::Left));
  CHECK(y(LandmarkKind::Shoulder, Side::Left) > y(LandmarkKind::Waist));
  CHECK(y(LandmarkKind::Waist) > y(LandmarkKind::Hemline));
  CHECK(y(LandmarkKind::Hemline) > y(LandmarkKind::Knee, Side::Left));
  CHECK(y(LandmarkKind::Knee, Side::Left) > y(LandmarkKind::Ankle, Side::Left));
  CHECK(c.at({LandmarkKind::Wrist, Side::Left}).x() > c.at({LandmarkKind::Elbow, Side::Left}).x());
  CHECK(c.at({LandmarkKind::Wrist, Side::Right}).x() < c.at({LandmarkKind::Elbow, Side::Right}).x());
  CHECK(c.at({LandmarkKind::Shoulder, Side::Left}).x() ==
        doctest::Approx(-c.at({LandmarkKind::Shoulder, Side::Right}).x()).epsilon(1e-9));
}

TEST_CASE("skin weights are partitions of unity") {
  const auto& b = body();
  CHECK_NOTHROW(b.model.validate());
  // The wrist ring is driven by the elbow alone.
  for (const auto& line : b.lines) {
    if (line.kind != LandmarkKind::Wrist) continue;
    const int elbow = index(line.side == Side::Left ? Joint::ElbowL : Joint::ElbowR);
    for (int v : line.vertex_indices) {
      REQUIRE(b.model.skin_weights[v].size() == 1);
      CHECK(b.model.skin_weights[v][0].joint == elbow);
      CHECK(b.model.skin_weights[v][0].weight == 1.0);
    }
  }
}

TEST_CASE("zero pose returns the rest mesh exactly") {
  const auto& model = body().model;
  const Mesh posed = pose_mesh(model, Pose::zero());
  CHECK(posed.vertices == model.rest_mesh.vertices);
  CHECK(posed.faces == model.rest_mesh.faces);

  Pose masked_only = Pose::zero();
  masked_only.theta[index(Joint::Pelvis)] = Vec3(0.3, -1.0, 2.0);
  masked_only.theta[index(Joint::WristL)] = Vec3(1.0, 0.0, 0.0);
  CHECK(pose_mesh(model, masked_only).vertices == model.rest_mesh.vertices);
}

TEST_CASE("elbow rotation is an exact rigid motion of the forearm") {
  const auto& model = body().model;
  const int elbow = index(Joint::ElbowL);
  const Vec3 axis = Vec3(0.2, 0.5, 1.0).normalized();
  Pose pose = Pose::zero();
  pose.theta[elbow] = axis * (std::numbers::pi / 2.0);
  const Mesh posed = pose_mesh(model, pose);
  const Eigen::Matrix3d r = Eigen::AngleAxisd(std::numbers::pi / 2.0, axis).toRotationMatrix();
  const Vec3 j = model.skeleton.joints[elbow];
  int checked = 0;
  for (std::size_t v = 0; v < posed.vertices.size(); ++v) {
    const auto& w = model.skin_weights[v];
    const bool has_elbow = std::any_of(w.begin(), w.end(), [&](const JointWeight& jw) { return jw.joint == elbow; });
    if (w.size() == 1 && w[0].joint == elbow) {
      CHECK((posed.vertices[v] - (r * (model.rest_mesh.vertices[v] - j) + j)).norm() < 1e-12);
      ++checked;
    } else if (!has_elbow) {
      CHECK((posed.vertices[v] - model.rest_mesh.vertices[v]).norm() < 1e-15);
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("forward kinematics carries children with their parents") {
  const auto& sk = body().model.skeleton;
  Pose pose = Pose::zero();
  const Vec3 theta(0.0, 0.0, 0.7);
  pose.theta[index(Joint::ShoulderL)] = theta;
  const auto t = forward_kinematics(sk, pose);
  const Eigen::Matrix3d r = rotation_from_axis_angle(theta);
  const Vec3 s = sk.joints[index(Joint::ShoulderL)];
  for (Joint child : {Joint::ElbowL, Joint::WristL}) {
    const Vec3 expected = r * (sk.joints[index(child)] - s) + s;
    CHECK((t.position[index(child)] - expected).norm() < 1e-14);
    CHECK((t.rotation[index(child)] - r).norm() < 1e-14);
  }
  CHECK((t.position[index(Joint::ElbowR)] - sk.joints[index(Joint::ElbowR)]).norm() < 1e-15);
}

TEST_CASE("skinning is equivariant under rigid transforms") {
  const auto& model = body().model;
  const Eigen::Matrix3d q = rotation_from_axis_angle(Vec3(0.3, -0.8, 0.5));
  const Vec3 shift(0.4, -0.2, 1.1);
  BodyModel moved = model;
  for (Vec3& v : moved.rest_mesh.vertices) v = q * v + shift;
  for (Vec3& j : moved.skeleton.joints) j = q * j + shift;

  Pose pose = Pose::zero();
  pose.theta[index(Joint::Spine)] = Vec3(0.1, 0.2, -0.1);
  pose.theta[index(Joint::ElbowR)] = Vec3(0.0, 0.9, 0.3);
  pose.theta[index(Joint::KneeL)] = Vec3(0.6, 0.0, 0.0);
  Pose rotated = pose;
  for (Vec3& t : rotated.theta) t = q * t;

  Mesh expected = pose_mesh(model, pose);
  for (Vec3& v : expected.vertices) v = q * v + shift;
  CHECK(max_deviation(pose_mesh(moved, rotated), expected) < 1e-12);
}

TEST_CASE("pose loss") {
  Pose target = Pose::zero();
  Pose pred = Pose::zero();
  CHECK(pred.active_scalar_count() == 27);
  CHECK(pose_loss(pred, target, 0.0) == 0.0);
  pred.theta[index(Joint::Spine)].x() = 1.0;
  CHECK(pose_loss(pred, target, 0.0) == doctest::Approx(1.0 / 27.0).epsilon(1e-15));
  CHECK(pose_loss(pred, target, 0.5) == doctest::Approx(1.0 / 27.0 + 0.5).epsilon(1e-15));
  CHECK(pose_loss(pred, target) == doctest::Approx(1.0 / 27.0 + 1e-5).epsilon(1e-15));
  Pose other_mask = Pose::zero();
  other_mask.active_mask[0] = true;
  CHECK_THROWS_AS(pose_loss(pred, other_mask), std::invalid_argument);
}

TEST_CASE("pose JSON round trip") {
  Pose p = Pose::zero();
  p.theta[3] = Vec3(0.1, -0.25, 1.0 / 3.0);
  const Pose q = Pose::from_json(p.to_json());
  CHECK(q.theta == p.theta);
  CHECK(q.active_mask == p.active_mask);
  CHECK_THROWS(Pose::from_json(R"({"theta": [[0,0,0]], "active_mask": [true, false]})"));
}

TEST_CASE("fitting recovers the rest pose from its own landmarks") {
  const auto& b = body();
  const auto ann = annotate(b.model.rest_mesh, b.lines);
  const PoseFit fit = fit_pose_to_annotations(b.model, b.lines, ann);
  double norm = 0.0;
  for (const Vec3& t : fit.pose.theta) norm += t.squaredNorm();
  CHECK(std::sqrt(norm) < 1e-3);
  CHECK(fit.rms_error < 1e-9);
  CHECK((fit.align_rotation - Eigen::Matrix3d::Identity()).norm() < 1e-9);
}

TEST_CASE("fitting recovers an elbow bend and a rigid offset") {
  const auto& b = body();
  Pose truth = Pose::zero();
  truth.theta[index(Joint::ElbowL)] = Vec3(0.0, 0.0, 0.4);
  const Mesh posed = pose_mesh(b.model, truth);
  auto ann = annotate(posed, b.lines);
  const Eigen::Matrix3d q = rotation_from_axis_angle(Vec3(0.0, 0.25, 0.0));
  const Vec3 shift(0.05, 0.1, -0.02);
  for (auto& a : ann)
    for (Vec3& p : a.points.points) p = q * p + shift;

  const PoseFit fit = fit_pose_to_annotations(b.model, b.lines, ann);
  CHECK(std::abs(fit.pose.theta[index(Joint::ElbowL)].norm() - 0.4) < 0.02);
  CHECK(fit.pose.theta[index(Joint::ElbowR)].norm() < 0.02);
  CHECK((fit.align_rotation - q.transpose()).norm() < 1e-6);
  CHECK(fit.rms_error < 1e-4);
}

TEST_CASE("fitting uses translation only without enough torso landmarks") {
  const auto& b = body();
  std::vector<FeatureLine> legs;
  for (const auto& line : b.lines)
    if (line.kind == LandmarkKind::Knee || line.kind == LandmarkKind::Waist) legs.push_back(line);
  auto ann = annotate(b.model.rest_mesh, legs);
  for (auto& a : ann)
    for (Vec3& p : a.points.points) p += Vec3(0.3, 0.0, 0.0);
  const PoseFit fit = fit_pose_to_annotations(b.model, legs, ann);
  CHECK((fit.align_translation - Vec3(-0.3, 0.0, 0.0)).norm() < 1e-12);
  CHECK(fit.align_rotation == Eigen::Matrix3d::Identity());
}

TEST_CASE("fitting without annotations is an error") {
  const auto& b = body();
  CHECK_THROWS_AS(fit_pose_to_annotations(b.model, b.lines, {}), std::invalid_argument);
}
