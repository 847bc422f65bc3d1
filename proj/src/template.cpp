#include "garment/template.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "garment/mesh_io.hpp"

namespace garment {

namespace {

using LK = LandmarkKind;
using RC = RegionClass;

constexpr std::array<std::string_view, kCategoryCount> kCategoryNames = {
    "long_sleeve_coat",  "short_sleeve_coat", "none_sleeve_coat", "long_sleeve_dress",
    "short_sleeve_dress", "none_sleeve_dress", "long_trousers",    "short_trousers",
    "long_skirt",         "short_skirt"};

CategoryInfo info(std::initializer_list<RC> regions, std::vector<LK> landmarks) {
  CategoryInfo c;
  for (RC r : regions) c.regions[static_cast<int>(r)] = true;
  c.landmarks = std::move(landmarks);
  return c;
}

const std::array<CategoryInfo, kCategoryCount>& category_table() {
  static const std::array<CategoryInfo, kCategoryCount> table = {
      info({RC::Torso, RC::UpperLimbs, RC::LowerLimbs}, {LK::Neck, LK::Waist, LK::Shoulder, LK::Elbow, LK::Wrist}),
      info({RC::Torso, RC::UpperLimbs}, {LK::Neck, LK::Waist, LK::Shoulder, LK::Elbow}),
      info({RC::Torso}, {LK::Neck, LK::Waist, LK::Shoulder}),
      info({RC::Torso, RC::Waist, RC::UpperLimbs, RC::LowerLimbs},
           {LK::Neck, LK::Waist, LK::Shoulder, LK::Elbow, LK::Wrist, LK::Hemline}),
      info({RC::Torso, RC::Waist, RC::UpperLimbs},
           {LK::Neck, LK::Waist, LK::Shoulder, LK::Elbow, LK::Hemline}),
      info({RC::Torso, RC::Waist}, {LK::Neck, LK::Waist, LK::Shoulder, LK::Hemline}),
      info({RC::Waist, RC::UpperLegs, RC::LowerLegs}, {LK::Waist, LK::Knee, LK::Ankle}),
      info({RC::Waist, RC::UpperLegs}, {LK::Waist, LK::Knee}),
      info({RC::Waist}, {LK::Waist, LK::Hemline}),
      info({RC::Waist}, {LK::Waist, LK::Hemline}),
  };
  return table;
}

std::vector<JointWeight> blend(const std::vector<JointWeight>& a, const std::vector<JointWeight>& b) {
  std::map<int, double> acc;
  for (const auto& jw : a) acc[jw.joint] += 0.5 * jw.weight;
  for (const auto& jw : b) acc[jw.joint] += 0.5 * jw.weight;
  std::vector<JointWeight> out;
  for (const auto& [j, w] : acc) out.push_back({j, w});
  return out;
}

std::vector<Region> vertex_labels(std::size_t vertex_count, const std::vector<Face>& faces,
                                  const std::vector<Region>& face_regions) {
  std::vector<Region> labels(vertex_count, static_cast<Region>(kRegionCount - 1));
  std::vector<bool> touched(vertex_count, false);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int v : faces[f]) {
      labels[v] = std::min(labels[v], face_regions[f]);
      touched[v] = true;
    }
  }
  for (std::size_t v = 0; v < vertex_count; ++v) {
    if (!touched[v]) throw std::invalid_argument("template vertex not referenced by any face");
  }
  return labels;
}

// Splices midpoints into loops wherever a loop edge was split; repeats so
// that edges split on later subdivision levels are picked up too.
void insert_midpoints(std::vector<FeatureLine>& lines, const std::map<std::pair<int, int>, int>& mids) {
  for (FeatureLine& line : lines) {
    bool changed = true;
    while (changed) {
      changed = false;
      std::vector<int> out;
      const auto& loop = line.vertex_indices;
      const std::size_t n = loop.size();
      for (std::size_t i = 0; i < n; ++i) {
        out.push_back(loop[i]);
        if (!line.closed && i + 1 == n) break;
        const int a = loop[i], b = loop[(i + 1) % n];
        const auto it = mids.find({std::min(a, b), std::max(a, b)});
        if (it != mids.end()) {
          out.push_back(it->second);
          changed = true;
        }
      }
      line.vertex_indices = std::move(out);
    }
  }
}

AdaptableTemplate densify_waist(const AdaptableTemplate& base, int levels) {
  std::vector<int> waist;
  for (std::size_t f = 0; f < base.face_regions.size(); ++f)
    if (base.face_regions[f] == Region::Waist) waist.push_back(static_cast<int>(f));
  if (waist.empty()) return base;
  const Subdivision sub = subdivide_region_detailed(base.mesh(), waist, levels);

  AdaptableTemplate out = base;
  out.body.rest_mesh = sub.mesh;
  out.face_regions.clear();
  for (int parent : sub.face_parent) out.face_regions.push_back(base.face_regions[parent]);

  const int n0 = base.mesh().num_vertices();
  std::map<std::pair<int, int>, int> mids;
  for (std::size_t i = 0; i < sub.new_vertex_edges.size(); ++i) {
    const auto& e = sub.new_vertex_edges[i];
    const int v = n0 + static_cast<int>(i);
    out.body.skin_weights.push_back(blend(out.body.skin_weights[e.first], out.body.skin_weights[e.second]));
    mids[e] = v;
  }
  insert_midpoints(out.feature_lines, mids);
  out.region_labels = vertex_labels(sub.mesh.vertices.size(), sub.mesh.faces, out.face_regions);
  return out;
}

}  // namespace

std::string_view to_string(ClothCategory c) { return kCategoryNames[static_cast<int>(c)]; }

ClothCategory category_from_string(std::string_view name) {
  for (int i = 0; i < kCategoryCount; ++i)
    if (kCategoryNames[i] == name) return static_cast<ClothCategory>(i);
  throw std::invalid_argument("unknown cloth category '" + std::string(name) + "'");
}

const CategoryInfo& category_info(ClothCategory c) { return category_table()[static_cast<int>(c)]; }

int waist_levels(ClothCategory c, const ActivationOptions& options) {
  if (c == ClothCategory::LongSkirt) return options.long_skirt_waist_levels;
  if (c == ClothCategory::LongSleeveDress) return options.long_dress_waist_levels;
  return 0;
}

bool AdaptableTemplate::face_active(int f) const {
  if (!category) return true;
  return category_info(*category).active(region_class(face_regions[f]));
}

int AdaptableTemplate::active_vertex_count() const {
  return static_cast<int>(std::count(activation.begin(), activation.end(), true));
}

void AdaptableTemplate::validate() const {
  body.validate();
  const std::size_t nv = body.rest_mesh.vertices.size();
  if (face_regions.size() != body.rest_mesh.faces.size()) {
    throw std::invalid_argument("template: one region per face required");
  }
  if (region_labels.size() != nv || activation.size() != nv) {
    throw std::invalid_argument("template: per-vertex arrays do not match the mesh");
  }
  for (const auto& line : feature_lines) line.validate(static_cast<int>(nv));
}

AdaptableTemplate make_template() {
  ProceduralBody body = make_procedural_body();
  AdaptableTemplate t;
  t.body = std::move(body.model);
  t.face_regions = std::move(body.face_regions);
  t.region_labels = std::move(body.vertex_regions);
  t.activation.assign(t.body.rest_mesh.vertices.size(), true);
  t.feature_lines = std::move(body.lines);
  return t;
}

AdaptableTemplate activate(const AdaptableTemplate& tmpl, ClothCategory category,
                           const ActivationOptions& options) {
  const std::shared_ptr<const AdaptableTemplate> base =
      tmpl.base ? tmpl.base : std::make_shared<const AdaptableTemplate>(tmpl);
  const int levels = waist_levels(category, options);
  AdaptableTemplate out = levels > 0 ? densify_waist(*base, levels) : *base;
  out.base = base;
  out.category = category;

  const Mesh& mesh = out.mesh();
  out.activation.assign(mesh.vertices.size(), false);
  for (int f = 0; f < mesh.num_faces(); ++f) {
    if (!out.face_active(f)) continue;
    for (int v : mesh.faces[f]) out.activation[v] = true;
  }

  const auto& wanted = category_info(category).landmarks;
  std::erase_if(out.feature_lines, [&](const FeatureLine& line) {
    return std::find(wanted.begin(), wanted.end(), line.kind) == wanted.end();
  });
  return out;
}

ActiveMesh extract_active_mesh(const AdaptableTemplate& tmpl) {
  const Mesh& mesh = tmpl.mesh();
  ActiveMesh out;
  out.old_to_new.assign(mesh.vertices.size(), -1);
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Face& face = mesh.faces[f];
    const bool keep = tmpl.face_active(f) && tmpl.activation[face[0]] && tmpl.activation[face[1]] &&
                      tmpl.activation[face[2]];
    if (!keep) continue;
    Face g;
    for (int k = 0; k < 3; ++k) {
      int& slot = out.old_to_new[face[k]];
      if (slot < 0) {
        slot = static_cast<int>(out.new_to_old.size());
        out.new_to_old.push_back(face[k]);
      }
      g[k] = slot;
    }
    out.mesh.faces.push_back(g);
    out.face_source.push_back(f);
  }
  if (out.mesh.faces.empty()) throw std::invalid_argument("extract_active_mesh: no active region");
  // Restore original vertex order among the survivors so the map is monotone.
  std::vector<int> order = out.new_to_old;
  std::sort(order.begin(), order.end());
  std::vector<int> relabel(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) relabel[out.old_to_new[order[i]]] = static_cast<int>(i);
  for (std::size_t i = 0; i < order.size(); ++i) out.old_to_new[order[i]] = static_cast<int>(i);
  for (Face& f : out.mesh.faces)
    for (int& v : f) v = relabel[v];
  out.new_to_old = std::move(order);
  for (int old : out.new_to_old) out.mesh.vertices.push_back(mesh.vertices[old]);
  return out;
}

std::vector<FeatureLine> remap_lines(std::span<const FeatureLine> lines, const ActiveMesh& active) {
  std::vector<FeatureLine> out;
  for (const auto& line : lines) {
    FeatureLine l = line;
    for (int& v : l.vertex_indices) {
      v = active.old_to_new.at(v);
      if (v < 0) throw std::invalid_argument("remap_lines: line vertex was removed");
    }
    out.push_back(std::move(l));
  }
  return out;
}

std::string template_sidecar_json(const AdaptableTemplate& tmpl) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["category"] = tmpl.category ? ordered_json(std::string(to_string(*tmpl.category))) : ordered_json(nullptr);
  auto& labels = j["region_labels"] = ordered_json::array();
  for (Region r : tmpl.region_labels) labels.push_back(std::string(to_string(r)));
  auto& faces = j["face_regions"] = ordered_json::array();
  for (Region r : tmpl.face_regions) faces.push_back(std::string(to_string(r)));
  j["activation"] = tmpl.activation;
  auto& lines = j["feature_lines"] = ordered_json::array();
  for (const auto& line : tmpl.feature_lines) {
    lines.push_back({{"kind", std::string(to_string(line.kind))},
                     {"side", std::string(to_string(line.side))},
                     {"closed", line.closed},
                     {"vertices", line.vertex_indices}});
  }
  auto& table = j["category_table"] = ordered_json::object();
  for (ClothCategory c : kAllCategories) {
    const auto& ci = category_info(c);
    ordered_json regions = ordered_json::array();
    for (int r = 0; r < kRegionClassCount; ++r)
      if (ci.regions[r]) regions.push_back(std::string(to_string(static_cast<RegionClass>(r))));
    ordered_json marks = ordered_json::array();
    for (LandmarkKind k : ci.landmarks) marks.push_back(std::string(to_string(k)));
    table[std::string(to_string(c))] = {{"regions", regions}, {"lines", marks}, {"waist_levels", waist_levels(c)}};
  }
  const Skeleton& sk = tmpl.body.skeleton;
  auto& skel = j["skeleton"];
  skel["names"] = sk.names;
  skel["parents"] = sk.parents;
  auto& joints = skel["joints"] = ordered_json::array();
  for (const Vec3& p : sk.joints) joints.push_back({p.x(), p.y(), p.z()});
  auto& weights = j["skin_weights"] = ordered_json::array();
  for (const auto& row : tmpl.body.skin_weights) {
    ordered_json r = ordered_json::array();
    for (const auto& jw : row) r.push_back({jw.joint, jw.weight});
    weights.push_back(std::move(r));
  }
  return j.dump(1) + "\n";
}

void save_template(const AdaptableTemplate& tmpl, const std::filesystem::path& obj_path,
                   const std::filesystem::path& json_path) {
  io::write_obj(obj_path, tmpl.mesh());
  std::ofstream out(json_path);
  if (!out) throw std::runtime_error("cannot write " + json_path.string());
  out << template_sidecar_json(tmpl);
}

namespace {

Region region_from_string(std::string_view name) {
  for (int r = 0; r < kRegionCount; ++r)
    if (to_string(static_cast<Region>(r)) == name) return static_cast<Region>(r);
  throw std::invalid_argument("unknown region '" + std::string(name) + "'");
}

}  // namespace

AdaptableTemplate load_template(const std::filesystem::path& obj_path,
                                const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw std::runtime_error("cannot read " + json_path.string());
  const auto j = nlohmann::json::parse(in);
  AdaptableTemplate t;
  t.body.rest_mesh = io::read_obj(obj_path);
  if (!j.at("category").is_null()) t.category = category_from_string(j["category"].get<std::string>());
  for (const auto& r : j.at("region_labels")) t.region_labels.push_back(region_from_string(r.get<std::string>()));
  for (const auto& r : j.at("face_regions")) t.face_regions.push_back(region_from_string(r.get<std::string>()));
  t.activation = j.at("activation").get<std::vector<bool>>();
  for (const auto& l : j.at("feature_lines")) {
    FeatureLine line;
    line.kind = landmark_from_string(l.at("kind").get<std::string>());
    line.side = side_from_string(l.at("side").get<std::string>());
    line.closed = l.at("closed").get<bool>();
    line.vertex_indices = l.at("vertices").get<std::vector<int>>();
    t.feature_lines.push_back(std::move(line));
  }
  const auto& skel = j.at("skeleton");
  t.body.skeleton.names = skel.at("names").get<std::vector<std::string>>();
  t.body.skeleton.parents = skel.at("parents").get<std::vector<int>>();
  for (const auto& p : skel.at("joints")) {
    t.body.skeleton.joints.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
  }
  for (const auto& row : j.at("skin_weights")) {
    std::vector<JointWeight> w;
    for (const auto& e : row) w.push_back({e.at(0).get<int>(), e.at(1).get<double>()});
    t.body.skin_weights.push_back(std::move(w));
  }
  t.validate();
  return t;
}

}  // namespace garment
