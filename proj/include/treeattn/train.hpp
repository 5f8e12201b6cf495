#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "treeattn/model.hpp"

namespace treeattn {

struct TrainConfig {
  std::size_t embedding_size = 100;
  std::size_t hidden_size = 100;
  double learning_rate = 0.005;
  double l2 = 0.0;
  double clip_threshold = 50.0;  // rho
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  std::size_t early_stop_patience = 5;
  bool share_encoders = false;
  bool tie_attention_weights = false;
  bool freeze_embeddings = false;
};

/// Diagonal AdaGrad accumulators, keyed by parameter name.
struct OptimizerState {
  std::map<std::string, std::vector<Scalar>> accum;
  Scalar epsilon = Scalar(1e-8);
};

/// Orthogonalizes `m` blockwise: each `block` x `block` tile gets the Q of
/// a QR-decomposed standard-normal matrix (R's diagonal positive by
/// construction); partial edge tiles are cropped from a full square Q.
void orthogonal_init(Tensor& m, std::size_t block, std::mt19937_64& rng);

/// Recurrent matrices orthogonal, biases zero, embeddings from the
/// pretrained table (uniform [-0.1, 0.1] for words absent from it), all
/// other weights uniform [-0.1, 0.1].
ModelParams init_params(ModelVariant variant, const TrainConfig& config,
                        const Vocabulary& vocab, const EmbeddingTable& table,
                        std::mt19937_64& rng);

/// Global-norm clipping over all parameter gradients; returns the
/// pre-clip norm.
Scalar clip_gradients(ModelParams& params, Scalar rho);

/// accum += g^2; theta -= lr * g / (sqrt(accum) + eps); gradients zeroed.
void adagrad_step(ModelParams& params, OptimizerState& state, Scalar lr,
                  bool freeze_embeddings = false);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double dev_acc = 0;
};

struct TrainResult {
  ModelParams best_params;
  std::vector<EpochRecord> history;
  double best_dev_acc = 0;
};

struct EvalResult {
  double accuracy = 0;
  std::size_t total = 0;
  int confusion[kNumClasses][kNumClasses] = {};  // [gold][predicted]
  std::vector<int> predicted;                    // input order
};

/// Read-only forward passes, fanned out across threads; the aggregate is
/// order-independent.
EvalResult evaluate(ModelParams& params, const Vocabulary& vocab,
                    const std::vector<Example>& examples);

TrainResult train_loop(ModelVariant variant, const TrainConfig& config,
                       const Vocabulary& vocab, const EmbeddingTable& table,
                       const std::vector<Example>& train_set,
                       const std::vector<Example>& dev_set);

struct GridSpec {
  std::vector<double> learning_rates{0.05, 0.0005, 0.0001};
  std::vector<double> l2s{0.0, 5e-5, 1e-5, 1e-6};
  std::vector<double> rhos{5, 10, 50};
  std::size_t budget_epochs = 3;
};

/// Trains every combination on a short budget; returns the config with the
/// best dev accuracy, ties broken by lower lr, then lower l2, then lower rho.
TrainConfig grid_search(ModelVariant variant, const TrainConfig& base,
                        const GridSpec& grid, const Vocabulary& vocab,
                        const EmbeddingTable& table,
                        const std::vector<Example>& train_set,
                        const std::vector<Example>& dev_set);

}  // namespace treeattn
