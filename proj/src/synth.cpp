#include "garment/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "garment/mesh_io.hpp"
#include "garment/parallel.hpp"
#include "garment/spatial.hpp"

namespace garment {

namespace {

using json = nlohmann::ordered_json;

// hash_uniform streams; one per independent random quantity.
enum Stream : std::uint64_t {
  kPoseAxis = 10,
  kPoseAngle = 11,
  kWrinkleSeed = 20,
  kJitterDir = 30,
  kJitterLen = 31,
  kLabelUniform = 40,
  kLabelNormal = 41,
};

Vec3 unit_vector(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const double z = 2.0 * hash_uniform(seed, stream, 2 * index) - 1.0;
  const double phi = 2.0 * std::numbers::pi * hash_uniform(seed, stream, 2 * index + 1);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

// Box-Muller on two counter-based uniforms.
double normal_sample(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const double u1 = 1.0 - hash_uniform(seed, stream, 2 * index);
  const double u2 = hash_uniform(seed, stream, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double mean_y(const Mesh& mesh, const FeatureLine& line) {
  double y = 0.0;
  for (int v : line.vertex_indices) y += mesh.vertices[v].y();
  return y / static_cast<double>(line.vertex_indices.size());
}

const FeatureLine& find_line(std::span<const FeatureLine> lines, LandmarkKind kind, Side side) {
  for (const auto& l : lines)
    if (l.kind == kind && l.side == side) return l;
  throw std::logic_error("template line missing");
}

bool is_skirted(ClothCategory c) {
  const auto& info = category_info(c);
  return info.active(RegionClass::Waist) && !info.active(RegionClass::UpperLegs);
}

bool reaches_ankle(ClothCategory c) {
  return c == ClothCategory::LongSkirt || c == ClothCategory::LongSleeveDress;
}

// Skirts and dresses hang from the waist: the waist band is stretched down to
// knee or ankle height and flared, in proportion to its rest depth below the
// waist line.
void drape_waist_band(const AdaptableTemplate& tmpl, std::vector<Vec3>& posed) {
  const Mesh& rest = tmpl.mesh();
  const auto& base_lines = tmpl.base->feature_lines;
  const double y_waist = mean_y(rest, find_line(base_lines, LandmarkKind::Waist, Side::None));
  const double y_hem = mean_y(rest, find_line(base_lines, LandmarkKind::Hemline, Side::None));
  const bool long_hem = reaches_ankle(*tmpl.category);
  const double y_target =
      long_hem ? mean_y(rest, find_line(base_lines, LandmarkKind::Ankle, Side::Left)) + 0.04
               : mean_y(rest, find_line(base_lines, LandmarkKind::Knee, Side::Left));
  const double flare = long_hem ? 0.35 : 0.25;

  Vec3 centre = Vec3::Zero();
  const auto& waist = find_line(base_lines, LandmarkKind::Waist, Side::None).vertex_indices;
  for (int v : waist) centre += posed[v];
  centre /= static_cast<double>(waist.size());

  for (int v = 0; v < rest.num_vertices(); ++v) {
    if (tmpl.region_labels[v] != Region::Waist) continue;
    const double t = std::clamp((y_waist - rest.vertices[v].y()) / (y_waist - y_hem), 0.0, 1.0);
    Vec3& p = posed[v];
    p.y() -= t * (y_hem - y_target);
    const double s = 1.0 + flare * t;
    p.x() = centre.x() + s * (p.x() - centre.x());
    p.z() = centre.z() + s * (p.z() - centre.z());
  }
}

void check_amplitude(double a, const char* what) {
  if (!(a >= 0.0) || !std::isfinite(a)) throw std::invalid_argument(std::string("generate: negative ") + what);
}

// Directed boundary edges a->b whose twin b->a is absent.
std::vector<Edge> boundary_half_edges(const Mesh& mesh) {
  std::map<Edge, int> count;
  for (const Face& f : mesh.faces)
    for (int k = 0; k < 3; ++k) ++count[{f[k], f[(k + 1) % 3]}];
  std::vector<Edge> out;
  for (const auto& [e, n] : count)
    if (!count.contains({e.second, e.first})) out.push_back(e);
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

void SynthGarment::validate() const {
  ground_truth_mesh.validate();
  if (!is_watertight(closed_mesh)) throw std::invalid_argument("SynthGarment: closed mesh not watertight");
  if (template_vertex.size() != ground_truth_mesh.vertices.size())
    throw std::invalid_argument("SynthGarment: template map size mismatch");
  const auto& wanted = category_info(category).landmarks;
  for (const auto& a : annotations)
    if (std::find(wanted.begin(), wanted.end(), a.kind) == wanted.end())
      throw std::invalid_argument("SynthGarment: annotation outside the category's landmarks");
  for (LandmarkKind k : wanted)
    if (std::none_of(annotations.begin(), annotations.end(), [&](const auto& a) { return a.kind == k; }))
      throw std::invalid_argument("SynthGarment: landmark without annotation");
  for (const auto& l : lines) l.validate(ground_truth_mesh.num_vertices());
}

const AdaptableTemplate& category_template(ClothCategory category) {
  static const std::array<AdaptableTemplate, kCategoryCount> templates = [] {
    const AdaptableTemplate base = make_template();
    std::array<AdaptableTemplate, kCategoryCount> t;
    for (ClothCategory c : kAllCategories) t[static_cast<int>(c)] = activate(base, c);
    return t;
  }();
  return templates[static_cast<int>(category)];
}

Pose random_pose(double magnitude, std::uint64_t seed) {
  Pose pose = Pose::zero();
  for (int j = 0; j < pose.size(); ++j) {
    if (!pose.active_mask[j]) continue;
    const double angle = magnitude * hash_uniform(seed, kPoseAngle, j);
    pose.theta[j] = angle * unit_vector(seed, kPoseAxis, j);
  }
  return pose;
}

double wrinkle_field(const Vec3& p, double amplitude, std::uint64_t seed) {
  if (amplitude == 0.0) return 0.0;
  constexpr double kBaseFrequency = 25.0;
  double sum = 0.0;
  for (int o = 0; o < 3; ++o) {
    const Vec3 k = unit_vector(seed, kWrinkleSeed, o);
    const double phase = 2.0 * std::numbers::pi * hash_uniform(seed, kWrinkleSeed + 1, o);
    sum += std::pow(0.5, o) * std::sin(kBaseFrequency * std::pow(2.0, o) * k.dot(p) + phase);
  }
  return amplitude * sum;
}

SynthGarment generate(ClothCategory category, double pose_magnitude, double wrinkle_amplitude,
                      std::uint64_t seed) {
  check_amplitude(pose_magnitude, "pose magnitude");
  check_amplitude(wrinkle_amplitude, "wrinkle amplitude");
  const AdaptableTemplate& tmpl = category_template(category);

  SynthGarment g;
  g.category = category;
  g.seed = seed;
  g.pose_magnitude = pose_magnitude;
  g.wrinkle_amplitude = wrinkle_amplitude;
  g.wrinkle_seed = seed * 2654435761ULL + 17;
  g.pose = random_pose(pose_magnitude, seed);

  Mesh full = pose_mesh(tmpl.body, g.pose);
  if (is_skirted(category)) drape_waist_band(tmpl, full.vertices);
  const auto normals = compute_vertex_normals(full);
  std::vector<Vec3> dressed = full.vertices;
  for (int v = 0; v < full.num_vertices(); ++v) {
    if (!tmpl.activation[v]) continue;
    const double d = kGarmentOffset + wrinkle_field(full.vertices[v], wrinkle_amplitude, g.wrinkle_seed);
    dressed[v] += d * normals[v];
  }

  const ActiveMesh active = extract_active_mesh(tmpl);
  g.ground_truth_mesh = active.mesh;
  for (int i = 0; i < active.mesh.num_vertices(); ++i)
    g.ground_truth_mesh.vertices[i] = dressed[active.new_to_old[i]];
  g.template_vertex = active.new_to_old;
  g.lines = remap_lines(tmpl.feature_lines, active);

  std::uint64_t k = 0;
  for (const FeatureLine& line : g.lines) {
    FeatureLineAnnotation a{line.kind, line.side, {}};
    for (int v : line.vertex_indices) {
      const double len = kAnnotationJitter * hash_uniform(seed, kJitterLen, k);
      a.points.points.push_back(g.ground_truth_mesh.vertices[v] + len * unit_vector(seed, kJitterDir, k));
      ++k;
    }
    g.annotations.push_back(std::move(a));
  }
  g.closed_mesh = close_surface(g.ground_truth_mesh);
  return g;
}

Mesh close_surface(const Mesh& open, double thickness) {
  open.validate();
  const int n = open.num_vertices();
  const auto normals = compute_vertex_normals(open);
  Mesh out = open;
  for (int v = 0; v < n; ++v) out.vertices.push_back(open.vertices[v] - thickness * normals[v]);
  for (const Face& f : open.faces) out.faces.push_back({f[0] + n, f[2] + n, f[1] + n});
  // Outer a->b pairs with b->a in the stitch; inner b'->a' pairs with a'->b'.
  for (const auto& [a, b] : boundary_half_edges(open)) {
    out.faces.push_back({b, a, a + n});
    out.faces.push_back({b, a + n, b + n});
  }
  return out;
}

LabeledPoints occupancy_labels(const Mesh& closed, int n, std::uint64_t seed) {
  if (!is_watertight(closed)) throw std::invalid_argument("occupancy_labels: closed mesh not watertight");
  if (n < 0) throw std::invalid_argument("occupancy_labels: negative count");
  const TriangleTree tree(closed);
  const Bounds box = bounding_box(closed.vertices).inflated(0.1);
  const int near = n / 2;
  const auto surface = sample_surface_detailed(closed, near, seed);
  LabeledPoints out;
  out.points.resize(n);
  out.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    Vec3& p = out.points[i];
    if (i < near) {
      p = surface[i].point;
      for (int c = 0; c < 3; ++c) p[c] += kPerturbSigma * normal_sample(seed, kLabelNormal, 3 * i + c);
    } else {
      for (int c = 0; c < 3; ++c)
        p[c] = box.lo[c] + box.extent()[c] * hash_uniform(seed, kLabelUniform, 3 * i + c);
    }
  }
  parallel_for(n, [&](std::size_t i) { out.labels[i] = tree.contains(out.points[i]) ? 1.0 : 0.0; });
  return out;
}

LabeledPoints occupancy_labels(const SynthGarment& garment, int n, std::uint64_t seed) {
  return occupancy_labels(garment.closed_mesh, n, seed);
}

SilhouetteDescriptor render_silhouette(const SynthGarment& garment, int size) {
  return silhouette_of(garment.ground_truth_mesh, size);
}

OccupancyField analytic_occupancy(const Mesh& closed, double ramp, bool thin_shell) {
  if (!is_watertight(closed)) throw std::invalid_argument("analytic_occupancy: closed mesh not watertight");
  if (!(ramp > 0.0)) throw std::invalid_argument("analytic_occupancy: ramp must be positive");
  const auto tree = std::make_shared<const TriangleTree>(closed);
  auto eval = [tree, ramp, thin_shell](const Vec3& p) {
    const auto hit = tree->closest_within(p, 0.5 * ramp);
    if (hit.face < 0) return (!thin_shell && tree->contains(p)) ? 1.0 : 0.0;
    const double d = std::sqrt(hit.squared_distance);
    const double sd = tree->contains(p) ? -d : d;
    return std::clamp(0.5 - sd / ramp, 0.0, 1.0);
  };
  OccupancyField field;
  field.evaluate = eval;
  field.evaluate_batch = [eval](std::span<const Vec3> points, std::span<double> out) {
    parallel_for(points.size(), [&](std::size_t i) { out[i] = eval(points[i]); });
  };
  field.provenance = FieldProvenance::Analytic;
  return field;
}

OccupancyField analytic_occupancy(const SynthGarment& garment) {
  return analytic_occupancy(garment.closed_mesh, kOccupancyRamp, true);
}

void write_garment(const SynthGarment& garment, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::write_obj(dir / "garment.obj", garment.ground_truth_mesh);
  io::write_obj(dir / "closed.obj", garment.closed_mesh);
  write_text(dir / "annotations.json",
             annotations_to_json({std::string(to_string(garment.category)), garment.annotations}));
  write_text(dir / "pose.json", garment.pose.to_json());
  write_pgm(dir / "silhouette.pgm", render_silhouette(garment));
  json meta;
  meta["category"] = to_string(garment.category);
  meta["seed"] = garment.seed;
  meta["pose_magnitude"] = garment.pose_magnitude;
  meta["wrinkle_amplitude"] = garment.wrinkle_amplitude;
  meta["wrinkle_seed"] = garment.wrinkle_seed;
  meta["vertices"] = garment.ground_truth_mesh.num_vertices();
  meta["faces"] = garment.ground_truth_mesh.num_faces();
  write_text(dir / "meta.json", meta.dump(2) + "\n");
}

SynthGarment read_garment(const std::filesystem::path& dir) {
  const json meta = json::parse(read_text(dir / "meta.json"));
  SynthGarment g;
  g.category = category_from_string(meta.at("category").get<std::string>());
  g.seed = meta.at("seed").get<std::uint64_t>();
  g.pose_magnitude = meta.at("pose_magnitude").get<double>();
  g.wrinkle_amplitude = meta.at("wrinkle_amplitude").get<double>();
  g.wrinkle_seed = meta.at("wrinkle_seed").get<std::uint64_t>();
  g.ground_truth_mesh = io::read_obj(dir / "garment.obj");
  g.closed_mesh = io::read_obj(dir / "closed.obj");
  const AnnotationFile ann = annotations_from_json(read_text(dir / "annotations.json"));
  if (category_from_string(ann.category) != g.category)
    throw std::invalid_argument("read_garment: annotation category mismatch");
  g.annotations = ann.lines;
  g.pose = Pose::from_json(read_text(dir / "pose.json"));
  const ActiveMesh active = extract_active_mesh(category_template(g.category));
  if (active.mesh.num_vertices() != g.ground_truth_mesh.num_vertices() ||
      active.mesh.faces != g.ground_truth_mesh.faces)
    throw std::invalid_argument("read_garment: mesh does not match the category template");
  g.template_vertex = active.new_to_old;
  g.lines = remap_lines(category_template(g.category).feature_lines, active);
  g.validate();
  return g;
}

std::vector<SynthGarment> generate_family(int count, double pose_magnitude, double wrinkle_amplitude,
                                          std::uint64_t seed) {
  if (count < 0) throw std::invalid_argument("generate_family: negative count");
  std::vector<SynthGarment> out(count);
  category_template(ClothCategory::LongSleeveCoat);  // build the shared templates once
  parallel_for(count, [&](std::size_t i) {
    out[i] = generate(kAllCategories[i % kCategoryCount], pose_magnitude, wrinkle_amplitude, seed + i);
  });
  return out;
}

void write_dataset(std::span<const SynthGarment> garments, const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  parallel_for(garments.size(), [&](std::size_t i) {
    char id[32];
    std::snprintf(id, sizeof(id), "%04zu", i);
    write_garment(garments[i], root / id);
  });
}

std::vector<std::filesystem::path> dataset_items(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) throw std::invalid_argument("not a dataset directory: " + root.string());
  std::vector<std::filesystem::path> items;
  for (const auto& entry : std::filesystem::directory_iterator(root))
    if (entry.is_directory()) items.push_back(entry.path());
  std::sort(items.begin(), items.end());
  return items;
}

}  // namespace garment
