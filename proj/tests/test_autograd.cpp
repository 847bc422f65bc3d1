#include <doctest.h>

#include <filesystem>

#include "grad_fixtures.hpp"

using namespace garment;
using namespace garment::nn;
using namespace garment::testing;

TEST_CASE("gradients match central differences over 20 seeds") {
  for (const auto& fixture : gradient_fixtures()) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      CAPTURE(fixture.name);
      CAPTURE(seed);
      CHECK(fixture.run(seed) < 1e-4);
    }
  }
}

TEST_CASE("sum of squares gives twice the values") {
  Matrix v(2, 3);
  v << 1, -2, 3, 0.5, 0, -4;
  Tensor x = parameter(v);
  backward(sum(square(x)));
  CHECK(x.grad().isApprox(2.0 * v));
}

TEST_CASE("disconnected tensors get zero gradient") {
  Tensor x = parameter(Matrix::Ones(2, 2));
  Tensor unused = parameter(Matrix::Ones(3, 1));
  backward(sum(x));
  CHECK(unused.grad().isZero());
  CHECK(x.grad().isOnes());
}

TEST_CASE("gradients accumulate until cleared") {
  Tensor x = parameter(Matrix::Constant(1, 1, 3.0));
  backward(square(x));
  backward(square(x));
  CHECK(x.grad()(0, 0) == 12.0);
  x.zero_grad();
  CHECK(x.grad()(0, 0) == 0.0);
}

TEST_CASE("shared subexpressions are visited once") {
  Tensor x = parameter(Matrix::Constant(1, 1, 2.0));
  const Tensor y = square(x);
  backward(add(y, y));  // d(2 x^2)/dx = 4x
  CHECK(x.grad()(0, 0) == 8.0);
}

TEST_CASE("backward rejects non-scalar losses") {
  Tensor x = parameter(Matrix::Ones(2, 2));
  CHECK_THROWS_AS(backward(square(x)), std::invalid_argument);
}

TEST_CASE("shape errors") {
  Tensor a = parameter(Matrix::Ones(2, 3));
  Tensor b = parameter(Matrix::Ones(2, 3));
  CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
  CHECK_THROWS_AS(add(a, parameter(Matrix::Ones(3, 2))), std::invalid_argument);
  CHECK_THROWS_AS(add_row(a, parameter(Matrix::Ones(1, 2))), std::invalid_argument);
  CHECK_THROWS_AS(bce_with_logits(parameter(Matrix::Zero(2, 1)), Matrix::Constant(2, 1, 0.5)),
                  std::invalid_argument);
}

TEST_CASE("chamfer_to matches line_loss") {
  std::mt19937_64 rng(3);
  const Matrix a = random_matrix(rng, 7, 3);
  const Matrix b = random_matrix(rng, 5, 3);
  std::vector<Vec3> pa, pb;
  for (int i = 0; i < 7; ++i) pa.push_back(a.row(i).transpose());
  for (int i = 0; i < 5; ++i) pb.push_back(b.row(i).transpose());
  CHECK(chamfer_to(constant(a), b).scalar() == doctest::Approx(line_loss(pa, pb)).epsilon(1e-14));
  CHECK(loop_edge_reg(constant(a)).scalar() == doctest::Approx(edge_reg(pa)).epsilon(1e-14));
}

TEST_CASE("adam step on a quadratic") {
  Tensor x = parameter(Matrix::Constant(1, 1, 1.0));
  Adam opt({x}, 0.1);
  opt.zero_grad();
  backward(square(x));
  opt.step();
  // First bias-corrected step moves by lr * sign(g).
  CHECK(x.value()(0, 0) == doctest::Approx(0.9).epsilon(1e-7));
  for (int i = 0; i < 200; ++i) {
    opt.zero_grad();
    backward(square(x));
    opt.step();
  }
  CHECK(std::abs(x.value()(0, 0)) < 0.05);
}

TEST_CASE("weights blob round trip") {
  std::mt19937_64 rng(1);
  const std::vector<Matrix> w{random_matrix(rng, 3, 4), random_matrix(rng, 1, 4), random_matrix(rng, 4, 1)};
  const auto path = std::filesystem::temp_directory_path() / "garment_weights.bin";
  save_weights(path, w, R"({"seed": 7})");
  std::string header;
  const auto back = load_weights(path, &header);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(back[i] == w[i]);
  CHECK(header.find("\"seed\":7") != std::string::npos);
  CHECK(header.find("\"shapes\":[[3,4],[1,4],[4,1]]") != std::string::npos);
  std::filesystem::remove(path);
}
