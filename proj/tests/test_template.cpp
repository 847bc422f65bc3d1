#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "garment/template.hpp"

using namespace garment;

namespace {

const AdaptableTemplate& base() {
  static const AdaptableTemplate t = make_template();
  return t;
}

std::multiset<std::string> line_codes(const AdaptableTemplate& t) {
  std::multiset<std::string> out;
  for (const auto& line : t.feature_lines) out.insert(std::string(to_string(line.kind)));
  return out;
}

std::set<std::string> kinds(const AdaptableTemplate& t) {
  std::set<std::string> out;
  for (const auto& line : t.feature_lines) out.insert(std::string(to_string(line.kind)));
  return out;
}

bool same_template(const AdaptableTemplate& a, const AdaptableTemplate& b) {
  if (a.mesh().vertices != b.mesh().vertices || a.mesh().faces != b.mesh().faces) return false;
  if (a.activation != b.activation || a.region_labels != b.region_labels) return false;
  if (a.feature_lines.size() != b.feature_lines.size()) return false;
  for (std::size_t i = 0; i < a.feature_lines.size(); ++i) {
    if (a.feature_lines[i].vertex_indices != b.feature_lines[i].vertex_indices) return false;
  }
  return a.category == b.category;
}

}  // namespace

TEST_CASE("category table lists the landmark lines per category") {
  using C = ClothCategory;
  const std::vector<std::pair<C, std::set<std::string>>> table = {
      {C::LongSleeveCoat, {"ne", "wa", "sh", "el", "wr"}},
      {C::ShortSleeveCoat, {"ne", "wa", "sh", "el"}},
      {C::NoneSleeveCoat, {"ne", "wa", "sh"}},
      {C::LongSleeveDress, {"ne", "wa", "sh", "el", "wr", "he"}},
      {C::ShortSleeveDress, {"ne", "wa", "sh", "el", "he"}},
      {C::NoneSleeveDress, {"ne", "wa", "sh", "he"}},
      {C::LongTrousers, {"wa", "kn", "an"}},
      {C::ShortTrousers, {"wa", "kn"}},
      {C::LongSkirt, {"wa", "he"}},
      {C::ShortSkirt, {"wa", "he"}},
  };
  for (const auto& [category, expected] : table) {
    CAPTURE(to_string(category));
    CHECK(kinds(activate(base(), category)) == expected);
  }
}

TEST_CASE("paired landmarks keep one loop per side") {
  const auto t = activate(base(), ClothCategory::LongSleeveCoat);
  CHECK(line_codes(t) == std::multiset<std::string>{"ne", "wa", "sh", "sh", "el", "el", "wr", "wr"});
}

TEST_CASE("category names round trip") {
  for (ClothCategory c : kAllCategories) CHECK(category_from_string(to_string(c)) == c);
  CHECK_THROWS_AS(category_from_string("poncho"), std::invalid_argument);
}

TEST_CASE("activation is idempotent") {
  for (ClothCategory c : kAllCategories) {
    CAPTURE(to_string(c));
    const auto once = activate(base(), c);
    const auto twice = activate(once, c);
    CHECK(same_template(once, twice));
    // Switching category goes back through the base template.
    const auto other = activate(activate(base(), ClothCategory::LongSkirt), c);
    CHECK(same_template(once, other));
  }
}

TEST_CASE("activation respects region granularity") {
  for (ClothCategory c : kAllCategories) {
    CAPTURE(to_string(c));
    const auto t = activate(base(), c);
    CHECK_NOTHROW(t.validate());
    const Mesh& m = t.mesh();
    // Vertices whose incident faces all lie in one region share its activation.
    std::vector<int> region(m.vertices.size(), -1);
    std::vector<bool> mixed(m.vertices.size(), false);
    for (int f = 0; f < m.num_faces(); ++f) {
      for (int v : m.faces[f]) {
        const int r = static_cast<int>(t.face_regions[f]);
        if (region[v] >= 0 && region[v] != r) mixed[v] = true;
        region[v] = r;
      }
    }
    const auto& info = category_info(c);
    for (std::size_t v = 0; v < m.vertices.size(); ++v) {
      if (mixed[v]) continue;
      CHECK(t.activation[v] == info.active(region_class(static_cast<Region>(region[v]))));
    }
  }
}

TEST_CASE("all regions active extracts the whole template") {
  const ActiveMesh a = extract_active_mesh(base());
  CHECK(a.mesh.vertices == base().mesh().vertices);
  CHECK(a.mesh.faces == base().mesh().faces);
  for (std::size_t i = 0; i < a.old_to_new.size(); ++i) CHECK(a.old_to_new[i] == static_cast<int>(i));
}

TEST_CASE("trousers carry nothing above the waist line") {
  const auto t = activate(base(), ClothCategory::LongTrousers);
  double waist_y = -1e300;
  for (const auto& line : base().feature_lines)
    if (line.kind == LandmarkKind::Waist)
      for (int v : line.vertex_indices) waist_y = std::max(waist_y, base().mesh().vertices[v].y());
  const ActiveMesh a = extract_active_mesh(t);
  for (const Vec3& p : a.mesh.vertices) CHECK(p.y() <= waist_y + 1e-12);
  for (int f : a.face_source) {
    const RegionClass c = region_class(t.face_regions[f]);
    CHECK((c == RegionClass::Waist || c == RegionClass::UpperLegs || c == RegionClass::LowerLegs));
  }
}

TEST_CASE("extracted garments open exactly at their feature lines") {
  const std::vector<std::pair<ClothCategory, int>> openings = {
      {ClothCategory::LongSleeveCoat, 4},  {ClothCategory::ShortSleeveCoat, 4},
      {ClothCategory::NoneSleeveCoat, 4},  {ClothCategory::LongSleeveDress, 4},
      {ClothCategory::ShortSleeveDress, 4}, {ClothCategory::NoneSleeveDress, 4},
      {ClothCategory::LongTrousers, 3},    {ClothCategory::ShortTrousers, 3},
      {ClothCategory::LongSkirt, 2},       {ClothCategory::ShortSkirt, 2},
  };
  for (const auto& [c, count] : openings) {
    CAPTURE(to_string(c));
    const auto t = activate(base(), c);
    const ActiveMesh a = extract_active_mesh(t);
    CHECK(is_edge_manifold(a.mesh));
    const auto loops = boundary_loops(a.mesh);
    CHECK(loops.size() == static_cast<std::size_t>(count));
    const auto lines = remap_lines(t.feature_lines, a);
    for (const auto& loop : loops) {
      const std::set<int> boundary(loop.begin(), loop.end());
      const bool matched = std::any_of(lines.begin(), lines.end(), [&](const FeatureLine& l) {
        return std::set<int>(l.vertex_indices.begin(), l.vertex_indices.end()) == boundary;
      });
      CHECK(matched);
    }
  }
}

TEST_CASE("long skirts and long dresses densify the waist") {
  const auto short_skirt = activate(base(), ClothCategory::ShortSkirt);
  const auto long_skirt = activate(base(), ClothCategory::LongSkirt);
  const auto long_dress = activate(base(), ClothCategory::LongSleeveDress);
  auto loop_size = [](const AdaptableTemplate& t, LandmarkKind k) {
    for (const auto& l : t.feature_lines)
      if (l.kind == k) return l.vertex_indices.size();
    return std::size_t{0};
  };
  CHECK(loop_size(long_skirt, LandmarkKind::Hemline) == 2 * loop_size(short_skirt, LandmarkKind::Hemline));
  CHECK(loop_size(long_skirt, LandmarkKind::Waist) == 2 * loop_size(short_skirt, LandmarkKind::Waist));
  CHECK(loop_size(long_dress, LandmarkKind::Hemline) == 4 * loop_size(short_skirt, LandmarkKind::Hemline));
  CHECK(surface_area(long_skirt.mesh()) == doctest::Approx(surface_area(base().mesh())).epsilon(1e-12));
  CHECK_NOTHROW(long_dress.body.validate());
  CHECK(is_edge_manifold(long_dress.mesh()));
  CHECK(boundary_loops(long_dress.mesh()).size() == 5);

  ActivationOptions none;
  none.long_skirt_waist_levels = 0;
  const auto plain = activate(base(), ClothCategory::LongSkirt, none);
  CHECK(plain.mesh().vertices.size() == base().mesh().vertices.size());

  // Zero pose still reproduces the densified rest mesh.
  CHECK(pose_mesh(long_dress.body, Pose::zero()).vertices == long_dress.mesh().vertices);
}

TEST_CASE("deactivating the only region is an error") {
  AdaptableTemplate toy;
  toy.body.rest_mesh = {{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {{0, 1, 2}}};
  toy.body.skeleton.joints = {Vec3::Zero()};
  toy.body.skeleton.parents = {0};
  toy.body.skin_weights.assign(3, {{0, 1.0}});
  toy.face_regions = {Region::Torso};
  toy.region_labels.assign(3, Region::Torso);
  toy.activation.assign(3, true);
  CHECK(extract_active_mesh(toy).mesh.faces.size() == 1);
  toy.activation.assign(3, false);
  CHECK_THROWS_AS(extract_active_mesh(toy), std::invalid_argument);
}

TEST_CASE("template bundle round trip") {
  const auto t = activate(base(), ClothCategory::LongSkirt);
  const auto dir = std::filesystem::temp_directory_path() / "garment_template_test";
  std::filesystem::create_directories(dir);
  save_template(t, dir / "template.obj", dir / "template.json");
  const auto back = load_template(dir / "template.obj", dir / "template.json");
  CHECK(same_template(t, back));
  CHECK(back.face_regions == t.face_regions);
  REQUIRE(back.body.skin_weights.size() == t.body.skin_weights.size());
  for (std::size_t v = 0; v < t.body.skin_weights.size(); ++v) {
    REQUIRE(back.body.skin_weights[v].size() == t.body.skin_weights[v].size());
    for (std::size_t k = 0; k < t.body.skin_weights[v].size(); ++k) {
      CHECK(back.body.skin_weights[v][k].weight == t.body.skin_weights[v][k].weight);
    }
  }
  CHECK(back.body.skeleton.joints == t.body.skeleton.joints);
  std::filesystem::remove_all(dir);
}
