#include "garment/silhouette.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace garment {

namespace {

double pixel_center(int index, int size) { return -kViewHalfExtent + (index + 0.5) * 2.0 * kViewHalfExtent / size; }

int to_pixel(double coord, int size) {
  return static_cast<int>(std::floor((coord + kViewHalfExtent) / (2.0 * kViewHalfExtent) * size));
}

}  // namespace

double SilhouetteDescriptor::occupied_fraction() const {
  if (raster.empty()) return 0.0;
  double s = 0.0;
  for (auto v : raster) s += v;
  return s / static_cast<double>(raster.size());
}

void SilhouetteDescriptor::validate() const {
  if (size <= 0 || raster.size() != static_cast<std::size_t>(size) * size) {
    throw std::invalid_argument("silhouette raster does not match its size");
  }
  if (size % kPyramidCells[0] != 0) throw std::invalid_argument("raster size must be a multiple of 8");
  if (pyramid.size() != static_cast<std::size_t>(kDescriptorDim)) {
    throw std::invalid_argument("silhouette pyramid has the wrong length");
  }
  for (auto v : raster)
    if (v > 1) throw std::invalid_argument("silhouette raster must be binary");
}

std::vector<std::uint8_t> rasterize_front(const Mesh& mesh, int size) {
  if (size <= 0) throw std::invalid_argument("rasterize_front: size must be positive");
  std::vector<std::uint8_t> raster(static_cast<std::size_t>(size) * size, 0);
  for (const Face& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    const double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
    if (std::abs(det) < 1e-18) continue;  // edge-on
    const int c0 = std::max(0, to_pixel(std::min({a.x(), b.x(), c.x()}), size));
    const int c1 = std::min(size - 1, to_pixel(std::max({a.x(), b.x(), c.x()}), size));
    // Rows count downward from +y.
    const int r0 = std::max(0, size - 1 - to_pixel(std::max({a.y(), b.y(), c.y()}), size));
    const int r1 = std::min(size - 1, size - 1 - to_pixel(std::min({a.y(), b.y(), c.y()}), size));
    for (int r = r0; r <= r1; ++r) {
      const double y = pixel_center(size - 1 - r, size);
      for (int col = c0; col <= c1; ++col) {
        const double x = pixel_center(col, size);
        const double u = ((x - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (y - a.y())) / det;
        const double v = ((b.x() - a.x()) * (y - a.y()) - (x - a.x()) * (b.y() - a.y())) / det;
        if (u >= 0.0 && v >= 0.0 && u + v <= 1.0) raster[static_cast<std::size_t>(r) * size + col] = 1;
      }
    }
  }
  return raster;
}

SilhouetteDescriptor make_descriptor(std::vector<std::uint8_t> raster, int size) {
  SilhouetteDescriptor d;
  d.size = size;
  d.raster = std::move(raster);
  d.pyramid.assign(kDescriptorDim, 0.0);
  if (size <= 0 || size % kPyramidCells[0] != 0 || d.raster.size() != static_cast<std::size_t>(size) * size) {
    throw std::invalid_argument("make_descriptor: raster size must be a positive multiple of 8");
  }
  std::size_t offset = 0;
  for (int cells : kPyramidCells) {
    const int span = size / cells;
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c) d.pyramid[offset + (r / span) * cells + c / span] += d.at(r, c);
    for (int i = 0; i < cells * cells; ++i) d.pyramid[offset + i] /= static_cast<double>(span * span);
    offset += static_cast<std::size_t>(cells) * cells;
  }
  d.validate();
  return d;
}

SilhouetteDescriptor silhouette_of(const Mesh& mesh, int size) {
  return make_descriptor(rasterize_front(mesh, size), size);
}

std::array<double, kLocalFeatureDim> local_features(const SilhouetteDescriptor& d, const Vec3& p) {
  std::array<double, kLocalFeatureDim> out{};
  const double u = std::clamp((p.x() + kViewHalfExtent) / (2.0 * kViewHalfExtent), 0.0, 1.0 - 1e-12);
  const double v = std::clamp((kViewHalfExtent - p.y()) / (2.0 * kViewHalfExtent), 0.0, 1.0 - 1e-12);
  std::size_t offset = 0;
  for (std::size_t level = 0; level < kPyramidCells.size(); ++level) {
    const int cells = kPyramidCells[level];
    const int col = static_cast<int>(u * cells);
    const int row = static_cast<int>(v * cells);
    out[level] = d.pyramid[offset + static_cast<std::size_t>(row) * cells + col];
    offset += static_cast<std::size_t>(cells) * cells;
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const SilhouetteDescriptor& d) {
  d.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << d.size << " " << d.size << "\n255\n";
  for (auto v : d.raster) out.put(static_cast<char>(v ? 255 : 0));
}

SilhouetteDescriptor read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  if (magic != "P5" || w != h || w <= 0 || maxval != 255) throw std::runtime_error("unsupported PGM " + path.string());
  std::vector<std::uint8_t> raster(static_cast<std::size_t>(w) * h);
  for (auto& v : raster) {
    const int c = in.get();
    if (c == EOF) throw std::runtime_error("truncated PGM " + path.string());
    v = c >= 128 ? 1 : 0;
  }
  return make_descriptor(std::move(raster), w);
}

}  // namespace garment
