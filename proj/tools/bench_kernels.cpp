// Times the serial reference against the OpenMP kernels and checks that
// both produce bitwise-identical output.
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#include "treeattn/kernels.hpp"

using namespace treeattn;
using Clock = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count() /
         reps;
}

}  // namespace

int main() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  std::printf("%8s %12s %12s %9s %8s\n", "size", "serial(ms)", "parallel(ms)",
              "speedup", "equal");
  bool all_equal = true;
  for (std::size_t n : {64, 128, 256, 512, 1024}) {
    std::vector<Scalar> a(n * n), b(n * n), c0(n * n, 0), c1(n * n, 0);
    for (Scalar& v : a) v = u(rng);
    for (Scalar& v : b) v = u(rng);
    int reps = n <= 256 ? 20 : 3;
    double serial = time_ms(
        [&] { kernels::matmul_serial(n, n, n, a.data(), false, b.data(), false,
                                     c0.data(), false); },
        reps);
    double parallel = time_ms(
        [&] { kernels::matmul_parallel(n, n, n, a.data(), false, b.data(),
                                       false, c1.data(), false); },
        reps);
    bool equal = c0 == c1;
    all_equal = all_equal && equal;
    std::printf("%8zu %12.3f %12.3f %8.2fx %8s\n", n, serial, parallel,
                serial / parallel, equal ? "yes" : "NO");
  }
  return all_equal ? 0 : 1;
}
