#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "garment/body.hpp"
#include "garment/feature_line.hpp"
#include "garment/region.hpp"

namespace garment {

enum class ClothCategory {
  LongSleeveCoat,
  ShortSleeveCoat,
  NoneSleeveCoat,
  LongSleeveDress,
  ShortSleeveDress,
  NoneSleeveDress,
  LongTrousers,
  ShortTrousers,
  LongSkirt,
  ShortSkirt,
};

inline constexpr int kCategoryCount = 10;

inline constexpr std::array<ClothCategory, kCategoryCount> kAllCategories = {
    ClothCategory::LongSleeveCoat,   ClothCategory::ShortSleeveCoat, ClothCategory::NoneSleeveCoat,
    ClothCategory::LongSleeveDress,  ClothCategory::ShortSleeveDress, ClothCategory::NoneSleeveDress,
    ClothCategory::LongTrousers,     ClothCategory::ShortTrousers,   ClothCategory::LongSkirt,
    ClothCategory::ShortSkirt};

std::string_view to_string(ClothCategory c);  // "long_sleeve_coat", ...
ClothCategory category_from_string(std::string_view name);

/// Regions and landmark lines a category switches on.
struct CategoryInfo {
  std::array<bool, kRegionClassCount> regions{};
  std::vector<LandmarkKind> landmarks;

  bool active(RegionClass c) const { return regions[static_cast<int>(c)]; }
};

const CategoryInfo& category_info(ClothCategory c);

struct ActivationOptions {
  int long_skirt_waist_levels = 1;
  int long_dress_waist_levels = 2;
};

/// Waist subdivision levels applied when activating a category.
int waist_levels(ClothCategory c, const ActivationOptions& options = {});

/// Body template with semantic regions and a per-vertex activation mask.
/// Faces carry the region they were built in; a vertex is active when any
/// incident face belongs to an active region, so the loop shared by an active
/// and an inactive region stays on the active side.
struct AdaptableTemplate {
  BodyModel body;
  std::vector<Region> face_regions;
  std::vector<Region> region_labels;  // per vertex; seam vertices take the lower region
  std::vector<bool> activation;       // per vertex
  std::vector<FeatureLine> feature_lines;
  std::optional<ClothCategory> category;
  /// The unactivated template this one was derived from; null for a base template.
  std::shared_ptr<const AdaptableTemplate> base;

  const Mesh& mesh() const { return body.rest_mesh; }
  bool face_active(int f) const;
  int active_vertex_count() const;
  void validate() const;
};

/// Base template over the procedural body: every region active, all 13 lines.
AdaptableTemplate make_template();

/// Activates the category's regions and restricts the feature lines to its
/// landmarks. Long skirts and long dresses densify the waist region first.
/// Always derives from the base template, so re-activation is idempotent.
AdaptableTemplate activate(const AdaptableTemplate& tmpl, ClothCategory category,
                           const ActivationOptions& options = {});

struct ActiveMesh {
  Mesh mesh;
  std::vector<int> old_to_new;  // -1 for removed vertices
  std::vector<int> new_to_old;
  std::vector<int> face_source;  // template face index per output face
};

/// Keeps faces of active regions and compacts the vertices.
ActiveMesh extract_active_mesh(const AdaptableTemplate& tmpl);

/// Active feature lines re-indexed onto an extracted mesh.
std::vector<FeatureLine> remap_lines(std::span<const FeatureLine> lines, const ActiveMesh& active);

// Bundle: OBJ mesh plus a JSON sidecar with regions, activation, lines,
// skeleton, skin weights and the category table. A loaded bundle acts as a base.
void save_template(const AdaptableTemplate& tmpl, const std::filesystem::path& obj_path,
                   const std::filesystem::path& json_path);
AdaptableTemplate load_template(const std::filesystem::path& obj_path,
                                const std::filesystem::path& json_path);
std::string template_sidecar_json(const AdaptableTemplate& tmpl);

}  // namespace garment
