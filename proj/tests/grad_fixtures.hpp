#pragma once

// Randomised gradient-check fixtures shared by the unit tests and the
// acceptance runner. Each fixture returns the worst relative error between the
// analytic and central-difference gradients.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "garment/autograd.hpp"
#include "garment/gcn.hpp"
#include "garment/occupancy_net.hpp"

namespace garment::testing {

inline nn::Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  nn::Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

struct GradFixture {
  std::string name;
  std::function<double(std::uint64_t seed)> run;
};

// Three closed loops of 4, 5 and 3 nodes with random features.
inline LineGraph random_line_graph(std::mt19937_64& rng, int node_dim, int image_dim) {
  LineGraph g;
  g.spans = {{LandmarkKind::Neck, Side::None, 0, 4},
             {LandmarkKind::Wrist, Side::Left, 4, 5},
             {LandmarkKind::Wrist, Side::Right, 9, 3}};
  const int n = 12;
  g.positions = random_matrix(rng, n, 3, 0.3);
  g.node_features = random_matrix(rng, n, node_dim);
  g.image_features = random_matrix(rng, n, image_dim).cwiseAbs();
  g.neighbor_mean = loop_neighbor_mean(g.spans, n);
  return g;
}

inline std::vector<FeatureLineAnnotation> random_annotations(std::mt19937_64& rng, const LineGraph& g) {
  std::vector<FeatureLineAnnotation> out;
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (const LineSpan& s : g.spans) {
    FeatureLineAnnotation a{s.kind, s.side, {}};
    for (int i = 0; i < 7; ++i) a.points.points.emplace_back(u(rng), u(rng), u(rng));
    out.push_back(a);
  }
  return out;
}

inline std::vector<GradFixture> gradient_fixtures() {
  using namespace nn;
  std::vector<GradFixture> f;
  f.push_back({"matmul+add_row+relu+sum", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 Tensor x = parameter(random_matrix(rng, 5, 4));
                 Tensor w = parameter(random_matrix(rng, 4, 3));
                 Tensor b = parameter(random_matrix(rng, 1, 3));
                 return max_gradient_error([&] { return sum(square(relu(add_row(matmul(x, w), b)))); }, {x, w, b});
               }});
  f.push_back({"add+sub+scale+mean", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 Tensor a = parameter(random_matrix(rng, 3, 4));
                 Tensor b = parameter(random_matrix(rng, 3, 4));
                 return max_gradient_error([&] { return mean(square(scale(sub(add(a, b), scale(b, 2.5)), 0.7))); },
                                           {a, b});
               }});
  f.push_back({"spmm+rows+concat", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 const std::vector<LineSpan> spans{{LandmarkKind::Neck, Side::None, 0, 6}};
                 const SparseMatrix a = loop_neighbor_mean(spans, 6);
                 Tensor x = parameter(random_matrix(rng, 6, 2));
                 Tensor y = parameter(random_matrix(rng, 6, 3));
                 return max_gradient_error(
                     [&] {
                       const Tensor parts[] = {spmm(a, x), y};
                       return sum(square(rows(concat_cols(parts), 1, 4)));
                     },
                     {x, y});
               }});
  f.push_back({"sigmoid", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 Tensor x = parameter(random_matrix(rng, 4, 3, 2.0));
                 return max_gradient_error([&] { return sum(square(sigmoid(x))); }, {x});
               }});
  f.push_back({"bce_with_logits", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 Tensor z = parameter(random_matrix(rng, 9, 1, 3.0));
                 Matrix y(9, 1);
                 for (int i = 0; i < 9; ++i) y(i, 0) = static_cast<double>((rng() >> 7) & 1);
                 return max_gradient_error([&] { return bce_with_logits(z, y); }, {z});
               }});
  f.push_back({"chamfer_to+loop_edge_reg", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 Tensor x = parameter(random_matrix(rng, 6, 3));
                 const Matrix pts = random_matrix(rng, 8, 3);
                 return max_gradient_error([&] { return add(chamfer_to(x, pts), scale(loop_edge_reg(x), 0.2)); }, {x});
               }});
  f.push_back({"gcn line fitting loss", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 GcnConfig c;
                 c.hidden = 6;
                 c.layers = 2;
                 c.node_dim = 5;
                 c.image_dim = 4;
                 const LineGraph g = random_line_graph(rng, c.node_dim, c.image_dim);
                 const auto ann = random_annotations(rng, g);
                 GcnModel m = init_gcn(c, seed, 1.0);
                 for (GcnLayer& l : m.layers) l.bias.value() = random_matrix(rng, 1, c.hidden, 0.5);
                 return max_gradient_error([&] { return line_fitting_loss(g, gcn_forward(g, m), ann); },
                                           m.parameters());
               }});
  f.push_back({"occupancy mlp bce", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 OccupancyNetConfig c;
                 c.hidden = 5;
                 c.layers = 2;
                 c.image_dim = 4;
                 OccupancyNet net = init_occupancy_net(c, seed);
                 // Non-zero biases keep pre-activations off the ReLU kink.
                 for (std::size_t i = 1; i < net.weights.size(); i += 2)
                   net.weights[i].value() = random_matrix(rng, 1, net.weights[i].cols(), 0.5);
                 const Matrix x = random_matrix(rng, 10, kPointEncodingDim + c.image_dim);
                 Matrix y(10, 1);
                 for (int i = 0; i < 10; ++i) y(i, 0) = i % 2;
                 return max_gradient_error([&] { return bce_with_logits(occupancy_logits(net, x), y); }, net.weights);
               }});
  return f;
}

}  // namespace garment::testing
