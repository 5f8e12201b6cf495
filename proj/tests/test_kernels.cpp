#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>
#include <vector>

#include "doctest.h"
#include "treeattn/kernels.hpp"

using namespace treeattn;

namespace {

std::vector<Scalar> random_buf(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Scalar> v(n);
  for (Scalar& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("parallel matmul is bitwise identical to the serial reference") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<std::size_t> dim(1, 40);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t m = dim(rng), n = dim(rng), k = dim(rng);
    bool ta = trial % 2, tb = trial % 3 == 0, acc = trial % 5 == 0;
    auto a = random_buf(m * k, rng);
    auto b = random_buf(k * n, rng);
    auto c0 = random_buf(m * n, rng);
    auto c1 = c0;
    auto c2 = c0;
    kernels::matmul_serial(m, n, k, a.data(), ta, b.data(), tb, c0.data(), acc);
    kernels::matmul_parallel(m, n, k, a.data(), ta, b.data(), tb, c1.data(), acc);
    kernels::matmul(m, n, k, a.data(), ta, b.data(), tb, c2.data(), acc);
    CHECK(c0 == c1);
    CHECK(c0 == c2);
  }
}

TEST_CASE("transposed operands match explicit transposition") {
  // (A^T B)_{ij} = sum_p A_{pi} B_{pj}
  std::vector<Scalar> a = {1, 2, 3, 4, 5, 6};  // 3x2
  std::vector<Scalar> b = {1, 0, 0, 1, 1, 1};  // 3x2
  std::vector<Scalar> c(4, 0);
  kernels::matmul_serial(2, 2, 3, a.data(), true, b.data(), false, c.data(), false);
  CHECK(c == std::vector<Scalar>{1 + 0 + 5, 3 + 5, 2 + 0 + 6, 4 + 6});
}

TEST_CASE("parallel elementwise kernels match serial") {
  std::mt19937_64 rng(9);
  auto x = random_buf(1000, rng);
  std::vector<Scalar> y0(x.size()), y1(x.size());
  kernels::tanh_serial(x.size(), x.data(), y0.data());
  kernels::tanh_parallel(x.size(), x.data(), y1.data());
  CHECK(y0 == y1);
  kernels::sigmoid_serial(x.size(), x.data(), y0.data());
  kernels::sigmoid_parallel(x.size(), x.data(), y1.data());
  CHECK(y0 == y1);
}
