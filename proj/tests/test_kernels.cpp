#include <doctest.h>

#include <cmath>
#include <random>

#include "metasre/kernels.hpp"
#include "support.hpp"

using namespace metasre;
using testing::random_tensor;

// Sizes straddle the threshold at which the parallel path kicks in.
TEST_CASE("parallel kernels are bitwise equal to the serial reference") {
  std::mt19937_64 rng(21);
  const std::size_t shapes[][3] = {{1, 1, 1}, {3, 5, 2}, {64, 48, 33}, {200, 64, 64}, {7, 300, 9}};
  for (const auto& s : shapes) {
    const Tensor a = random_tensor(rng, s[0], s[1]), b = random_tensor(rng, s[1], s[2]);
    CHECK(kernels::matmul(a, b) == kernels::matmul_serial(a, b));
    CHECK(kernels::tanh(a) == kernels::tanh_serial(a));
    CHECK(kernels::softmax_rows(a) == kernels::softmax_rows_serial(a));
  }
}

TEST_CASE("matmul and transpose on a hand example") {
  const Tensor a(2, 3, {1, 2, 3, 4, 5, 6});
  const Tensor b(3, 1, {1, 0, -1});
  CHECK(kernels::matmul(a, b) == Tensor(2, 1, {-2, -2}));
  CHECK(kernels::transpose(a) == Tensor(3, 2, {1, 4, 2, 5, 3, 6}));
}

TEST_CASE("softmax rows are distributions and survive large logits") {
  std::mt19937_64 rng(22);
  Tensor a = random_tensor(rng, 5, 7, -3, 3);
  a(0, 0) = 800.0;
  a(1, 2) = -800.0;
  const Tensor p = kernels::softmax_rows(a);
  CHECK(p.all_finite());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < p.cols(); ++j) {
      CHECK(p(i, j) >= 0.0);
      total += p(i, j);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(p(0, 0) == doctest::Approx(1.0));
}
