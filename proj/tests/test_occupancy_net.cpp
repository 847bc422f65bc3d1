#include <doctest.h>

#include <filesystem>
#include <random>

#include "garment/occupancy_net.hpp"

using namespace garment;

namespace {

// Points half uniform in the window cube, half near a sphere of radius 0.25.
OccupancySample sphere_sample(int n, std::uint64_t seed, bool all_zero = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::normal_distribution<double> g(0.0, 1.0);
  std::normal_distribution<double> band(0.0, 0.02);
  OccupancySample s;
  s.descriptor = make_descriptor(std::vector<std::uint8_t>(64 * 64, 0), 64);
  for (int i = 0; i < n; ++i) {
    Vec3 p;
    if (i % 2 == 0) {
      p = Vec3(u(rng), u(rng), u(rng));
    } else {
      const Vec3 dir = Vec3(g(rng), g(rng), g(rng)).normalized();
      p = dir * (0.25 + band(rng));
    }
    s.points.push_back(p);
    s.labels.push_back(all_zero ? 0.0 : (p.norm() < 0.25 ? 1.0 : 0.0));
  }
  return s;
}

double accuracy(const OccupancyField& f, const OccupancySample& s) {
  int ok = 0;
  for (std::size_t i = 0; i < s.points.size(); ++i) ok += (f.evaluate(s.points[i]) >= 0.5) == (s.labels[i] == 1.0);
  return static_cast<double>(ok) / s.points.size();
}

}  // namespace

TEST_CASE("all-zero labels give an empty field") {
  const OccupancySample train = sphere_sample(2000, 1, true);
  OccupancyTrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_points = 256;
  const auto r = train_occupancy(std::span(&train, 1), cfg);
  const auto field = occupancy_field(r.net, train.descriptor);
  const OccupancySample held = sphere_sample(500, 2);
  for (const Vec3& p : held.points) CHECK(field.evaluate(p) < 0.5);
  CHECK(field.provenance == FieldProvenance::Trained);
}

TEST_CASE("convex shape is learned to 97% held-out accuracy") {
  const OccupancySample train = sphere_sample(20000, 3);
  const OccupancySample held = sphere_sample(4000, 4);
  OccupancyTrainConfig cfg;
  cfg.epochs = 30;
  const auto r = train_occupancy(std::span(&train, 1), cfg);
  CHECK(r.history.back() < r.history.front());
  const double acc = accuracy(occupancy_field(r.net, train.descriptor), held);
  CAPTURE(acc);
  CHECK(acc >= 0.97);
}

TEST_CASE("fixed seed retrains identically") {
  const OccupancySample train = sphere_sample(1500, 5);
  OccupancyTrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_points = 200;
  const auto a = train_occupancy(std::span(&train, 1), cfg);
  const auto b = train_occupancy(std::span(&train, 1), cfg);
  CHECK(a.history == b.history);
}

TEST_CASE("batched and single evaluation agree") {
  const OccupancyNet net = init_occupancy_net(OccupancyNetConfig{}, 3);
  const OccupancySample s = sphere_sample(20, 6);
  const auto field = occupancy_field(net, s.descriptor);
  std::vector<double> out(s.points.size());
  field.evaluate_batch(s.points, out);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i] == doctest::Approx(field.evaluate(s.points[i])).epsilon(1e-14));
    CHECK(out[i] > 0.0);
    CHECK(out[i] < 1.0);
  }
}

TEST_CASE("invalid training input") {
  OccupancySample bad = sphere_sample(10, 7);
  bad.labels[3] = 0.5;
  CHECK_THROWS_AS(train_occupancy(std::span(&bad, 1)), std::invalid_argument);
  CHECK_THROWS_AS(train_occupancy(std::span<const OccupancySample>{}), std::invalid_argument);
}

TEST_CASE("occupancy weights round trip") {
  const OccupancyNet net = init_occupancy_net(OccupancyNetConfig{32, 2}, 8);
  const auto path = std::filesystem::temp_directory_path() / "garment_occ.bin";
  save_occupancy_net(path, net, 8);
  const OccupancyNet back = load_occupancy_net(path);
  const auto a = net.values();
  const auto b = back.values();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  std::filesystem::remove(path);
}
