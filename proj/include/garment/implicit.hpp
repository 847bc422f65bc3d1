#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>

#include "garment/mesh.hpp"

namespace garment {

enum class FieldProvenance { Analytic, Trained };

/// Occupancy probability in [0, 1]; high inside the surface.
struct OccupancyField {
  std::function<double(const Vec3&)> evaluate;
  /// Optional batched evaluation; used in preference to `evaluate` when set.
  std::function<void(std::span<const Vec3>, std::span<double>)> evaluate_batch;
  FieldProvenance provenance = FieldProvenance::Analytic;
};

inline constexpr int kDefaultGridResolution = 64;
inline constexpr double kDefaultIso = 0.5;

/// Samples the field on the (resolution + 1)^3 corner lattice of `bounds`.
ScalarGrid sample_grid(const OccupancyField& field, int resolution, const Bounds& bounds);

/// Lookup-table marching cubes with linear edge interpolation. Vertices are
/// shared between neighbouring cubes; normals point toward lower values.
Mesh marching_cubes(const ScalarGrid& grid, double iso = kDefaultIso);

/// Trilinear interpolation of the grid at p (clamped to the grid).
double trilinear(const ScalarGrid& grid, const Vec3& p);

/// Raw little-endian float64 values (x fastest) plus a JSON header.
void write_grid(const ScalarGrid& grid, const std::filesystem::path& raw_path,
                const std::filesystem::path& json_path);

}  // namespace garment
