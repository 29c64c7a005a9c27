#include <doctest.h>

#include <cmath>
#include <string>

#include "capnet/gradcheck.hpp"
#include "capnet/numeric.hpp"
#include "capnet/random.hpp"

using namespace capnet;

TEST_CASE("matmul") {
  CHECK(matmul(Matrix::identity(3), Vector{1, 2, 3}) == Vector{1, 2, 3});
  CHECK(matmul(Matrix(2, 3), Vector{5, 5, 5}) == Vector{0, 0});
  CHECK(matmul(Matrix(2, 2, {1, 2, 3, 4}), Vector{1, 1}) == Vector{3, 7});

  try {
    matmul(Matrix(2, 3), Vector{1, 2});
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    CHECK(what.find("[2x3]") != std::string::npos);
    CHECK(what.find("[2]") != std::string::npos);
  }
}

TEST_CASE("matmul_transposed and add_outer agree with explicit loops") {
  const Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(matmul_transposed(a, Vector{1, -1}) == Vector{-3, -3, -3});
  Matrix m(2, 3);
  add_outer(m, Vector{1, 2}, Vector{3, 4, 5});
  CHECK(m == Matrix(2, 3, {3, 4, 5, 6, 8, 10}));
  CHECK_THROWS_AS(add_outer(m, Vector{1}, Vector{1, 2, 3}), ShapeError);
}

TEST_CASE("softmax examples") {
  const auto u = softmax(Vector{0, 0, 0, 0});
  for (double p : u) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));

  for (double c : {-50.0, 0.0, 3.5, 700.0}) {
    const auto p = softmax(Vector{c, c + std::log(3.0)});
    CHECK(std::abs(p[0] - 0.25) < 1e-12);
    CHECK(std::abs(p[1] - 0.75) < 1e-12);
  }
  CHECK_THROWS_AS(softmax(Vector{}), ShapeError);
}

TEST_CASE("softmax properties on random logits") {
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    Vector z(n);
    for (auto& x : z) x = rng.uniform(-30, 30);
    const auto p = softmax(z);
    double sum = 0.0;
    for (double v : p) {
      CHECK(v > 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);

    const double k = rng.uniform(-100, 100);
    Vector shifted = z;
    for (auto& x : shifted) x += k;
    const auto q = softmax(shifted);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(p[i] - q[i]) <= 1e-12);
  }
}

TEST_CASE("neg_log_likelihood") {
  CHECK(neg_log_likelihood(Vector{0, 1, 0}, 1) == 0.0);
  CHECK(neg_log_likelihood(Vector(10, 0.1), 4) == doctest::Approx(2.302585093).epsilon(1e-9));
  CHECK(neg_log_likelihood(Vector{0.5, 0.5}, 0) == doctest::Approx(0.693147181).epsilon(1e-9));
  // Floor keeps the loss finite.
  CHECK(neg_log_likelihood(Vector{1, 0}, 1) == doctest::Approx(-std::log(1e-12)));
  CHECK_THROWS_AS(neg_log_likelihood(Vector{1}, 1), IndexError);
}

TEST_CASE("neg_log_likelihood is nonnegative and zero only at certainty") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Vector z(5);
    for (auto& x : z) x = rng.uniform(-5, 5);
    const auto p = softmax(z);
    const auto t = rng.below(5);
    const double l = neg_log_likelihood(p, t);
    CHECK(l >= 0.0);
    CHECK((l == 0.0) == (p[t] == 1.0));
  }
}

TEST_CASE("elementwise ops") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(tanh(Vector{0})[0] == 0.0);
  CHECK(hadamard(Vector{1, 2}, Vector{3, 4}) == Vector{3, 8});
  CHECK(add(Vector{1, 2}, Vector{3, 4}) == Vector{4, 6});
  CHECK_THROWS_AS(hadamard(Vector{1}, Vector{1, 2}), ShapeError);
  CHECK_THROWS_AS(add(Vector{1}, Vector{1, 2}), ShapeError);

  // Saturation stays inside the open ranges and finite.
  for (double x : {-800.0, -40.0, 40.0, 800.0}) {
    const double s = sigmoid(x);
    CHECK(std::isfinite(s));
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
  CHECK(sigmoid(-30.0) > 0.0);
  CHECK(sigmoid(30.0) < 1.0);
}

namespace {

struct Scalar {
  double theta = 0.0;
  std::vector<ParamView> views() { return {{"theta", std::span(&theta, 1)}}; }
};

}  // namespace

TEST_CASE("finite_difference_check on a quadratic") {
  auto loss = [](const Scalar& s) { return s.theta * s.theta; };
  const auto rep = finite_difference_check(loss, Scalar{3.0}, Scalar{6.0}, 1e-5, 1e-8);
  CHECK(rep.pass);
  CHECK(rep.max_rel_error.at("theta") < 1e-8);
  CHECK(rep.epsilon == 1e-5);

  const auto bad = finite_difference_check(loss, Scalar{3.0}, Scalar{12.0}, 1e-5, 1e-4);
  CHECK_FALSE(bad.pass);
  CHECK(bad.worst == doctest::Approx(0.5));
}

TEST_CASE("finite_difference_check rejects a nondeterministic loss") {
  int calls = 0;
  auto loss = [&calls](const Scalar& s) { return s.theta + 1e-3 * ++calls; };
  CHECK_THROWS_AS(finite_difference_check(loss, Scalar{1.0}, Scalar{1.0}, 1e-5, 1e-4),
                  DeterminismError);
  CHECK_THROWS_AS(
      finite_difference_check([](const Scalar& s) { return s.theta; }, Scalar{}, Scalar{}, 0.0, 1e-4),
      std::invalid_argument);
}
