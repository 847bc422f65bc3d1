#include "garment/feature_line.hpp"

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "garment/spatial.hpp"

namespace garment {

namespace {

constexpr std::array<std::string_view, 8> kLandmarkCodes = {"ne", "wa", "sh", "el",
                                                            "wr", "kn", "an", "he"};

double directed(std::span<const Vec3> from, const KdTree& to) {
  double sum = 0.0;
  for (const Vec3& p : from) sum += to.nearest(p).squared_distance;
  return sum / static_cast<double>(from.size());
}

}  // namespace

std::string_view to_string(LandmarkKind kind) {
  return kLandmarkCodes[static_cast<std::size_t>(kind)];
}

LandmarkKind landmark_from_string(std::string_view code) {
  for (std::size_t i = 0; i < kLandmarkCodes.size(); ++i)
    if (kLandmarkCodes[i] == code) return static_cast<LandmarkKind>(i);
  throw std::invalid_argument("unknown landmark kind '" + std::string(code) + "'");
}

std::string_view to_string(Side side) {
  switch (side) {
    case Side::Left: return "L";
    case Side::Right: return "R";
    default: return "";
  }
}

Side side_from_string(std::string_view code) {
  if (code.empty()) return Side::None;
  if (code == "L") return Side::Left;
  if (code == "R") return Side::Right;
  throw std::invalid_argument("unknown side '" + std::string(code) + "'");
}

void FeatureLine::validate(int vertex_count) const {
  if (closed && vertex_indices.size() < 3) {
    throw std::invalid_argument("closed feature line needs at least 3 vertices");
  }
  for (int v : vertex_indices) {
    if (v < 0 || v >= vertex_count) throw std::invalid_argument("feature line index out of range");
  }
}

Vec3 FeatureLineAnnotation::centroid() const {
  if (points.empty()) throw std::invalid_argument("annotation has no points");
  Vec3 c = Vec3::Zero();
  for (const Vec3& p : points.points) c += p;
  return c / points.size();
}

double line_loss(std::span<const Vec3> predicted, std::span<const Vec3> annotation) {
  if (predicted.empty() || annotation.empty()) {
    throw std::invalid_argument("line_loss: empty point set");
  }
  const KdTree pred_tree(predicted);
  const KdTree ann_tree(annotation);
  return directed(predicted, ann_tree) + directed(annotation, pred_tree);
}

double line_loss(std::span<const Vec3> predicted, const FeatureLineAnnotation& annotation) {
  return line_loss(predicted, std::span<const Vec3>(annotation.points.points));
}

double edge_reg(std::span<const Vec3> loop) {
  if (loop.size() < 3) throw std::invalid_argument("edge_reg: loop needs at least 3 vertices");
  double sum = 0.0;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    sum += (loop[(i + 1) % loop.size()] - loop[i]).squaredNorm();
  }
  return sum / static_cast<double>(loop.size());
}

std::optional<std::size_t> find_annotation(std::span<const FeatureLineAnnotation> annotations,
                                           LandmarkKind kind, Side side) {
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    if (annotations[i].kind == kind && annotations[i].side == side) return i;
  }
  return std::nullopt;
}

FittingTerms fitting_terms(std::span<const LinePositions> lines,
                           std::span<const FeatureLineAnnotation> annotations,
                           double lambda_edge) {
  FittingTerms terms;
  for (const LinePositions& line : lines) {
    const auto idx = find_annotation(annotations, line.kind, line.side);
    if (!idx) {
      throw std::invalid_argument("fitting_loss: no annotation for line '" +
                                  std::string(to_string(line.kind)) +
                                  std::string(to_string(line.side)) + "'");
    }
    terms.line += line_loss(line.positions, annotations[*idx]);
    terms.edge += edge_reg(line.positions);
  }
  terms.total = terms.line + lambda_edge * terms.edge;
  return terms;
}

double fitting_loss(std::span<const LinePositions> lines,
                    std::span<const FeatureLineAnnotation> annotations, double lambda_edge) {
  return fitting_terms(lines, annotations, lambda_edge).total;
}

std::vector<Vec3> laplacian_smooth_line(std::span<const Vec3> loop, int iterations, double step) {
  if (loop.size() < 3) throw std::invalid_argument("laplacian_smooth_line: loop too short");
  std::vector<Vec3> cur(loop.begin(), loop.end());
  std::vector<Vec3> next(cur.size());
  const std::size_t n = cur.size();
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 mid = 0.5 * (cur[(i + n - 1) % n] + cur[(i + 1) % n]);
      next[i] = cur[i] + step * (mid - cur[i]);
    }
    std::swap(cur, next);
  }
  return cur;
}

std::vector<Vec3> line_positions(const Mesh& mesh, const FeatureLine& line) {
  std::vector<Vec3> out;
  out.reserve(line.vertex_indices.size());
  for (int v : line.vertex_indices) out.push_back(mesh.vertices.at(v));
  return out;
}

std::string annotations_to_json(const AnnotationFile& file) {
  nlohmann::ordered_json j;
  j["category"] = file.category;
  auto& lines = j["lines"] = nlohmann::ordered_json::array();
  for (const auto& a : file.lines) {
    nlohmann::ordered_json line;
    line["kind"] = std::string(to_string(a.kind));
    if (a.side != Side::None) line["side"] = std::string(to_string(a.side));
    auto& pts = line["points"] = nlohmann::ordered_json::array();
    for (const Vec3& p : a.points.points) pts.push_back({p.x(), p.y(), p.z()});
    lines.push_back(std::move(line));
  }
  return j.dump(2) + "\n";
}

AnnotationFile annotations_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  AnnotationFile file;
  file.category = j.value("category", "");
  for (const auto& line : j.at("lines")) {
    FeatureLineAnnotation a;
    a.kind = landmark_from_string(line.at("kind").get<std::string>());
    a.side = side_from_string(line.value("side", ""));
    for (const auto& p : line.at("points")) {
      a.points.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(),
                                   p.at(2).get<double>());
    }
    if (a.points.empty()) throw std::invalid_argument("annotation line has no points");
    file.lines.push_back(std::move(a));
  }
  return file;
}

}  // namespace garment
