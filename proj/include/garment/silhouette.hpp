#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "garment/mesh.hpp"

namespace garment {

inline constexpr int kDefaultRasterSize = 64;
// Square view window [-h, h]^2 in x/y, centred on the origin. Canonical
// bodies have a unit bounding-box diagonal, so they always fit.
inline constexpr double kViewHalfExtent = 0.5;
inline constexpr std::array<int, 3> kPyramidCells = {8, 4, 2};
inline constexpr int kDescriptorDim = 8 * 8 + 4 * 4 + 2 * 2;  // 84
inline constexpr int kLocalFeatureDim = 3;

/// Binary front-view raster plus its pooled occupancy pyramid.
struct SilhouetteDescriptor {
  int size = 0;
  std::vector<std::uint8_t> raster;  // row 0 is the top row
  std::vector<double> pyramid;       // 8x8, then 4x4, then 2x2 cell means, row-major

  std::uint8_t at(int row, int col) const { return raster[static_cast<std::size_t>(row) * size + col]; }
  double occupied_fraction() const;
  void validate() const;
};

/// Orthographic projection along -z onto the view window; a pixel is set when
/// its centre lies inside any projected triangle.
std::vector<std::uint8_t> rasterize_front(const Mesh& mesh, int size = kDefaultRasterSize);

SilhouetteDescriptor make_descriptor(std::vector<std::uint8_t> raster, int size);
SilhouetteDescriptor silhouette_of(const Mesh& mesh, int size = kDefaultRasterSize);

/// Pyramid cell values under the projection of p, one per pyramid level.
std::array<double, kLocalFeatureDim> local_features(const SilhouetteDescriptor& d, const Vec3& p);

void write_pgm(const std::filesystem::path& path, const SilhouetteDescriptor& d);
SilhouetteDescriptor read_pgm(const std::filesystem::path& path);

}  // namespace garment
