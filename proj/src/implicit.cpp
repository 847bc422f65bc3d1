#include "garment/implicit.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "garment/parallel.hpp"
#include "mc_tables.hpp"

namespace garment {

namespace {

constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeCorners[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                     {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

}  // namespace

ScalarGrid sample_grid(const OccupancyField& field, int resolution, const Bounds& bounds) {
  if (resolution < 8) throw std::invalid_argument("sample_grid: resolution must be >= 8");
  const Vec3 extent = bounds.extent();
  if (!(extent.minCoeff() > 0.0) || !extent.allFinite()) {
    throw std::invalid_argument("sample_grid: degenerate bounds");
  }
  if (!field.evaluate && !field.evaluate_batch) throw std::invalid_argument("sample_grid: empty field");

  ScalarGrid grid;
  grid.resolution = {resolution + 1, resolution + 1, resolution + 1};
  grid.origin = bounds.lo;
  grid.spacing = extent / resolution;
  const int n = resolution + 1;
  grid.values.resize(static_cast<std::size_t>(n) * n * n);

  // One z-slab per task; each slab writes only its own slice.
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t k) {
    const int kk = static_cast<int>(k);
    if (field.evaluate_batch) {
      std::vector<Vec3> pts;
      pts.reserve(static_cast<std::size_t>(n) * n);
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) pts.push_back(grid.point(i, j, kk));
      field.evaluate_batch(pts, std::span<double>(grid.values.data() + grid.index(0, 0, kk), pts.size()));
    } else {
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) grid.values[grid.index(i, j, kk)] = field.evaluate(grid.point(i, j, kk));
    }
  });
  for (double v : grid.values) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::runtime_error("occupancy field returned a value outside [0, 1]");
  }
  return grid;
}

Mesh marching_cubes(const ScalarGrid& grid, double iso) {
  grid.validate();
  Mesh mesh;
  const int nx = grid.resolution[0], ny = grid.resolution[1], nz = grid.resolution[2];
  std::unordered_map<std::uint64_t, int> welded;

  auto edge_vertex = [&](int i, int j, int k, int edge) {
    const int* a = kCorner[kEdgeCorners[edge][0]];
    const int* b = kCorner[kEdgeCorners[edge][1]];
    // Key on the lattice edge: lower endpoint plus axis.
    const int ai = i + std::min(a[0], b[0]), aj = j + std::min(a[1], b[1]), ak = k + std::min(a[2], b[2]);
    const int axis = a[0] != b[0] ? 0 : (a[1] != b[1] ? 1 : 2);
    const std::uint64_t key = 3 * static_cast<std::uint64_t>(grid.index(ai, aj, ak)) + axis;
    const auto it = welded.find(key);
    if (it != welded.end()) return it->second;
    const double va = grid.at(i + a[0], j + a[1], k + a[2]);
    const double vb = grid.at(i + b[0], j + b[1], k + b[2]);
    const double t = va == vb ? 0.5 : (iso - va) / (vb - va);
    const Vec3 pa = grid.point(i + a[0], j + a[1], k + a[2]);
    const Vec3 pb = grid.point(i + b[0], j + b[1], k + b[2]);
    const int idx = mesh.num_vertices();
    mesh.vertices.push_back(pa + t * (pb - pa));
    welded.emplace(key, idx);
    return idx;
  };

  for (int k = 0; k + 1 < nz; ++k) {
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i + 1 < nx; ++i) {
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          if (grid.at(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]) < iso) cube |= 1 << c;
        }
        if (mc_tables::kEdgeMask[cube] == 0) continue;
        const auto& tris = mc_tables::kTriangles[cube];
        for (int t = 0; tris[t] != -1; t += 3) {
          const int a = edge_vertex(i, j, k, tris[t]);
          const int b = edge_vertex(i, j, k, tris[t + 1]);
          const int c = edge_vertex(i, j, k, tris[t + 2]);
          // With this corner order the table winding already faces the below-iso side.
          mesh.faces.push_back({a, b, c});
        }
      }
    }
  }
  return mesh;
}

double trilinear(const ScalarGrid& grid, const Vec3& p) {
  Vec3 u = (p - grid.origin).cwiseQuotient(grid.spacing);
  int base[3];
  double f[3];
  for (int d = 0; d < 3; ++d) {
    const double hi = grid.resolution[d] - 1;
    const double x = std::clamp(u[d], 0.0, hi);
    base[d] = std::min(static_cast<int>(std::floor(x)), grid.resolution[d] - 2);
    f[d] = x - base[d];
  }
  double out = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    const double w = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) * (dz ? f[2] : 1 - f[2]);
    out += w * grid.at(base[0] + dx, base[1] + dy, base[2] + dz);
  }
  return out;
}

void write_grid(const ScalarGrid& grid, const std::filesystem::path& raw_path,
                const std::filesystem::path& json_path) {
  grid.validate();
  std::ofstream raw(raw_path, std::ios::binary);
  if (!raw) throw std::runtime_error("cannot write " + raw_path.string());
  raw.write(reinterpret_cast<const char*>(grid.values.data()),
            static_cast<std::streamsize>(grid.values.size() * sizeof(double)));
  nlohmann::ordered_json j;
  j["dtype"] = "float64";
  j["layout"] = "x fastest, then y, then z";
  j["resolution"] = grid.resolution;
  j["origin"] = {grid.origin.x(), grid.origin.y(), grid.origin.z()};
  j["spacing"] = {grid.spacing.x(), grid.spacing.y(), grid.spacing.z()};
  j["raw_file"] = raw_path.filename().string();
  std::ofstream out(json_path);
  if (!out) throw std::runtime_error("cannot write " + json_path.string());
  out << j.dump(2) << "\n";
}

}  // namespace garment
