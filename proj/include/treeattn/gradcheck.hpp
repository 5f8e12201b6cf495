#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "treeattn/model.hpp"

namespace treeattn {

/// Central finite differences over every entry of `t`, compared against the
/// analytic gradient already stored in t.grad. Relative error denominator
/// is max(|analytic|, |numeric|, 1e-8).
double max_rel_err_fd(const std::function<double()>& loss_fn, Tensor& t,
                      double step = 1e-5);

struct BlockError {
  std::string name;
  double max_rel_err = 0;
};

/// Builds a tiny random example for the variant (trees/sentences of at most
/// `max_nodes` nodes), runs one forward/backward, and finite-differences
/// every parameter block.
std::vector<BlockError> check_model_gradients(ModelVariant variant,
                                              std::uint64_t seed,
                                              std::size_t hidden = 8,
                                              std::size_t embed = 8,
                                              std::size_t max_nodes = 6,
                                              double step = 1e-5);

/// Random example generator shared with tests: tokens drawn from a small
/// fixed vocabulary, constituency trees random-binarized, dependency heads
/// drawn acyclically.
Example random_example(std::mt19937_64& rng, std::size_t max_tokens = 3);

const Vocabulary& gradcheck_vocab();

}  // namespace treeattn
