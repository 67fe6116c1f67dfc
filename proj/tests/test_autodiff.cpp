#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "mftraj/ad/gradcheck.hpp"
#include "mftraj/ad/ops.hpp"
#include "gradient_suites.hpp"
#include "test_util.hpp"

using namespace mftraj;
using namespace mftraj::ad;
using mftraj::testing::random_tensor;
using mftraj::testing::T;

namespace {

// Contracts a tensor to a scalar with fixed random weights so that every
// output component contributes a distinct coefficient to the check.
T weighted_sum(const T& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  return sum(mul(y, random_tensor(rng, y.shape(), false)));
}

void expect_gradients(const std::function<T()>& f, std::initializer_list<GradInput> inputs) {
  std::vector<GradInput> list(inputs);
  const GradCheckReport report = gradient_check(f, list);
  INFO(report.table());
  CHECK(report.passed());
}

}  // namespace

TEST_CASE("forward values of the nonlinearities") {
  const T zero = T::scalar(0.0);
  CHECK(sigmoid(zero).item() == 0.5);
  CHECK(softplus(zero).item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(softplus(T::scalar(800.0)).item() == 800.0);
  CHECK(std::isfinite(softplus(T::scalar(-800.0)).item()));
  CHECK(relu(T::scalar(-2.0)).item() == 0.0);
  CHECK(tanh(zero).item() == 0.0);
}

TEST_CASE("group_norm of a constant vector is zero") {
  const T x = T::full({1, 8}, 3.25);
  const T y = group_norm(x, 2, 1e-5, T::full({8}, 1.0), T::zeros({8}));
  CHECK(y.values().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("group_norm rejects group counts that do not divide the channels") {
  const T x = T::zeros({1, 6});
  CHECK_THROWS_AS(group_norm(x, 4, 1e-5, T::full({6}, 1.0), T::zeros({6})), ConfigError);
}

TEST_CASE("smooth_l1 branches") {
  const T pred = T::constant({3}, Vector<double>::Constant(3, 0.5));
  const T target = T::zeros({3});
  CHECK(smooth_l1(pred, target).values().isApproxToConstant(0.125));
  const T far = T::constant({2}, Vector<double>::Constant(2, 2.0));
  CHECK(smooth_l1(far, T::zeros({2})).values().isApproxToConstant(1.5));
}

TEST_CASE("shape errors name the operation and both shapes") {
  const T a = T::zeros({2, 3});
  const T b = T::zeros({4, 5});
  try {
    (void)matmul(a, b);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    CHECK(what.find("matmul") != std::string::npos);
    CHECK(what.find("[2, 3]") != std::string::npos);
    CHECK(what.find("[4, 5]") != std::string::npos);
  }
  CHECK_THROWS_AS(add(T::zeros({3}), T::zeros({4})), ShapeError);
  CHECK_THROWS_AS(smooth_l1(T::zeros({3}), T::zeros({2})), ShapeError);
}

TEST_CASE("trailing-axis broadcasting") {
  const T m = T::from_matrix(Eigen::MatrixXd::Ones(2, 3));
  Vector<double> bias(3);
  bias << 1, 2, 3;
  const T b = T::constant({3}, bias);
  const T y = add(m, b);
  CHECK(y.shape() == Shape{2, 3});
  CHECK(y.values()[4] == 3.0);
  CHECK(y.values()[5] == 4.0);
  CHECK(add(T::scalar(1.0), m).values().isApproxToConstant(2.0));
}

TEST_CASE("backward basics") {
  Vector<double> v(3);
  v << 1, 2, 3;
  SUBCASE("sum") {
    const T x = T::variable({3}, v);
    Tape<double> tape;
    tape.backward(sum(x));
    CHECK(x.grad().isApproxToConstant(1.0));
  }
  SUBCASE("quadratic") {
    const T x = T::variable({3}, v);
    Tape<double> tape;
    tape.backward(sum(mul(x, x)));
    CHECK(x.grad() == 2.0 * v);
  }
  SUBCASE("fan-out accumulates every contribution") {
    const T x = T::variable({3}, v);
    Tape<double> tape;
    T total = sum(x);
    for (int m = 1; m < 5; ++m) total = add(total, sum(x));
    tape.backward(total);
    CHECK(x.grad().isApproxToConstant(5.0));
    CHECK(tape.size() == 0);
  }
  SUBCASE("non-scalar loss") {
    const T x = T::variable({3}, v);
    Tape<double> tape;
    CHECK_THROWS_AS(tape.backward(mul(x, x)), ShapeError);
  }
  SUBCASE("constants stay off the tape") {
    const T c = T::constant({3}, v);
    Tape<double> tape;
    const T y = mul(c, c);
    CHECK_FALSE(y.requires_grad());
    CHECK(tape.size() == 0);
  }
}

TEST_CASE("softmax rows sum to one and ignore constant shifts") {
  std::mt19937_64 rng(3);
  const T x = random_tensor(rng, {4, 7}, false, -5.0, 5.0);
  const T y = softmax(x, 1);
  for (Index r = 0; r < 4; ++r) CHECK(std::abs(y.matrix().row(r).sum() - 1.0) < 1e-12);
  const T shifted = softmax(add(x, T::scalar(12.5)), 1);
  CHECK((shifted.values() - y.values()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gaussian_sample with zero noise returns mu exactly") {
  std::mt19937_64 rng(5);
  const T mu = random_tensor(rng, {3, 4}, false);
  const T logvar = random_tensor(rng, {3, 4}, false);
  CHECK(gaussian_sample(mu, logvar, T::zeros({3, 4})).values() == mu.values());
}

TEST_CASE("gradient_check omits inputs without gradients") {
  std::mt19937_64 rng(1);
  const T w = random_tensor(rng, {3, 2});
  const T x = random_tensor(rng, {2, 3}, false);
  const std::vector<GradInput> inputs{{"w", w}, {"x", x}};
  const auto report = gradient_check([&] { return sum(sigmoid(matmul(x, w))); }, inputs);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].name == "w");
  CHECK(report.passed());
  CHECK(report.table().find("w") != std::string::npos);
}

TEST_CASE("gradient_check detects non-deterministic functions") {
  std::mt19937_64 rng(2);
  const T x = random_tensor(rng, {2});
  int calls = 0;
  const std::vector<GradInput> inputs{{"x", x}};
  CHECK_THROWS_AS(gradient_check([&] { return scale(sum(x), static_cast<double>(++calls)); }, inputs),
                  DeterminismError);
}

TEST_CASE("every primitive passes the finite-difference check on 20 seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    mftraj::testing::primitive_gradients(seed, [](const std::string& label, const GradCheckReport& report) {
      INFO(label << "\n" << report.table());
      CHECK(report.passed());
    });
  }
}
