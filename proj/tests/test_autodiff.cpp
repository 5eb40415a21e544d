#include <doctest.h>

#include <cmath>

#include "csrobust/autodiff.hpp"
#include "gradcheck.hpp"

using namespace csr;
using namespace csr::ad;

TEST_CASE("finite differences recover a known gradient") {
  auto f = [](std::span<const double> x) { return x[0] * x[0] * x[1] + std::sin(x[1]); };
  const std::vector<double> x{0.3, -1.2};
  const auto central = finite_diff_gradient(f, x, 1e-6);
  CHECK(central[0] == doctest::Approx(2 * 0.3 * -1.2).epsilon(1e-8));
  CHECK(central[1] == doctest::Approx(0.09 + std::cos(-1.2)).epsilon(1e-8));
  const auto forward = finite_diff_gradient(f, x, 1e-7, Difference::Forward);
  CHECK(forward[0] == doctest::Approx(-0.72).epsilon(1e-5));
}

TEST_CASE("every op and composite matches finite differences") {
  for (const auto& c : testutil::gradient_cases()) {
    INFO(c.name);
    for (const auto& in : c.inputs) CHECK(in.value.size() <= 16);
    CHECK(testutil::gradient_error(c.op, c.inputs) < 1e-4);
  }
}

TEST_CASE("gradients accumulate when a variable is reused") {
  Tape tape;
  Var x = tape.variable({1, 1, 2}, {1.5, -2.0});
  Var y = add(mul(x, x), scale(x, 3.0));
  Var loss = sum_squares(y);
  tape.backward(loss);
  for (int i = 0; i < 2; ++i) {
    const double xv = x.value()[i], yv = y.value()[i];
    CHECK(x.grad()[i] == doctest::Approx(2 * yv * (2 * xv + 3)));
  }
}

TEST_CASE("shape errors and non-finite values are reported") {
  Tape tape;
  Var a = tape.variable({1, 2, 2}, {1, 2, 3, 4});
  Var b = tape.variable({1, 2, 3}, {1, 2, 3, 4, 5, 6});
  try {
    add(a, b);
    FAIL("expected a shape error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
  CHECK_THROWS_AS(fft2c(tape.variable({1, 2, 2}, {1, 2, 3, 4})), Error);
  Var big = tape.variable({1}, {1e200});
  try {
    mul(big, big);
    FAIL("expected a numerical failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NumericalFailure);
  }
}
