#include "treeattn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "treeattn/errors.hpp"

namespace treeattn {

void orthogonal_init(Tensor& m, std::size_t block, std::mt19937_64& rng) {
  if (!m.is_matrix() || block == 0) {
    throw ShapeError("orthogonal_init: expected a matrix, got " + m.shape_str());
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t rows = m.rows(), cols = m.cols();
  for (std::size_t br = 0; br < rows; br += block) {
    for (std::size_t bc = 0; bc < cols; bc += block) {
      // Modified Gram-Schmidt on a standard-normal block x block matrix.
      // The implied R has a positive diagonal (column norms), so no sign
      // correction is needed.
      std::vector<std::vector<double>> q(block, std::vector<double>(block));
      for (auto& col : q) {
        for (double& v : col) v = normal(rng);
      }
      for (std::size_t j = 0; j < block; ++j) {
        for (int pass = 0; pass < 2; ++pass) {
          for (std::size_t i = 0; i < j; ++i) {
            double proj = std::inner_product(q[j].begin(), q[j].end(),
                                             q[i].begin(), 0.0);
            for (std::size_t r = 0; r < block; ++r) q[j][r] -= proj * q[i][r];
          }
        }
        double norm = std::sqrt(
            std::inner_product(q[j].begin(), q[j].end(), q[j].begin(), 0.0));
        for (double& v : q[j]) v /= norm;
      }
      for (std::size_t r = br; r < std::min(br + block, rows); ++r) {
        for (std::size_t c = bc; c < std::min(bc + block, cols); ++c) {
          m.at(r, c) = static_cast<Scalar>(q[c - bc][r - br]);
        }
      }
    }
  }
}

ModelParams init_params(ModelVariant variant, const TrainConfig& config,
                        const Vocabulary& vocab, const EmbeddingTable& table,
                        std::mt19937_64& rng) {
  std::size_t d = config.hidden_size, e = config.embedding_size;
  for (const auto& [tok, vec] : table) {
    if (vec.size() != e) {
      throw ConfigError("init_params: embedding table dimension " +
                        std::to_string(vec.size()) + " != configured " +
                        std::to_string(e));
    }
    break;  // load_embeddings guarantees uniform arity
  }
  ModelParams params = ModelParams::sized(variant, vocab.size(), d, e,
                                          config.share_encoders);
  if (params.attn) params.attn->tied = config.tie_attention_weights;

  std::uniform_real_distribution<double> uniform(-0.1, 0.1);
  params.for_each([&](const std::string& name, Tensor& t, ParamKind kind) {
    switch (kind) {
      case ParamKind::kEmbedding: {
        for (std::size_t row = 0; row < vocab.size(); ++row) {
          auto it = table.find(vocab.tokens[row]);
          if (it != table.end()) {
            std::copy(it->second.begin(), it->second.end(),
                      t.data.begin() + row * e);
          } else {
            for (std::size_t c = 0; c < e; ++c) {
              t.data[row * e + c] = static_cast<Scalar>(uniform(rng));
            }
          }
        }
        break;
      }
      case ParamKind::kRecurrent:
        orthogonal_init(t, d, rng);
        break;
      case ParamKind::kBias:
        break;  // zero
      case ParamKind::kOther:
        for (Scalar& v : t.data) v = static_cast<Scalar>(uniform(rng));
        break;
    }
  });
  return params;
}

Scalar clip_gradients(ModelParams& params, Scalar rho) {
  double sq = 0;
  params.for_each([&](const std::string&, Tensor& t, ParamKind) {
    for (Scalar g : t.grad) sq += static_cast<double>(g) * g;
  });
  Scalar norm = static_cast<Scalar>(std::sqrt(sq));
  if (norm > rho) {
    Scalar scale = rho / norm;
    params.for_each([&](const std::string&, Tensor& t, ParamKind) {
      for (Scalar& g : t.grad) g *= scale;
    });
  }
  return norm;
}

void adagrad_step(ModelParams& params, OptimizerState& state, Scalar lr,
                  bool freeze_embeddings) {
  params.for_each([&](const std::string& name, Tensor& t, ParamKind kind) {
    if (t.grad.empty()) return;
    if (freeze_embeddings && kind == ParamKind::kEmbedding) {
      t.zero_grad();
      return;
    }
    std::vector<Scalar>& acc = state.accum[name];
    if (acc.size() != t.size()) acc.assign(t.size(), 0);
    for (std::size_t i = 0; i < t.size(); ++i) {
      Scalar g = t.grad[i];
      acc[i] += g * g;
      t.data[i] -= lr * g / (std::sqrt(acc[i]) + state.epsilon);
    }
    t.zero_grad();
  });
}

EvalResult evaluate(ModelParams& params, const Vocabulary& vocab,
                    const std::vector<Example>& examples) {
  EvalResult res;
  res.total = examples.size();
  res.predicted.assign(examples.size(), -1);
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < static_cast<long long>(examples.size()); ++i) {
    Graph g;
    ForwardResult fwd = build_forward(g, params, vocab, examples[i]);
    res.predicted[i] = fwd.pred.label;
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    int gold = examples[i].gold;
    int pred = res.predicted[i];
    if (gold >= 0 && pred >= 0) res.confusion[gold][pred] += 1;
    if (gold == pred) ++correct;
  }
  res.accuracy = examples.empty() ? 0.0
                                  : static_cast<double>(correct) /
                                        static_cast<double>(examples.size());
  return res;
}

namespace {

double l2_penalty(ModelParams& params, double lambda) {
  if (lambda <= 0) return 0;
  double sq = 0;
  params.for_each([&](const std::string&, Tensor& t, ParamKind) {
    for (Scalar v : t.data) sq += static_cast<double>(v) * v;
  });
  return lambda * sq;
}

void add_l2_grads(ModelParams& params, double lambda) {
  if (lambda <= 0) return;
  params.for_each([&](const std::string&, Tensor& t, ParamKind) {
    t.ensure_grad();
    for (std::size_t i = 0; i < t.size(); ++i) {
      t.grad[i] += static_cast<Scalar>(2 * lambda) * t.data[i];
    }
  });
}

}  // namespace

TrainResult train_loop(ModelVariant variant, const TrainConfig& config,
                       const Vocabulary& vocab, const EmbeddingTable& table,
                       const std::vector<Example>& train_set,
                       const std::vector<Example>& dev_set) {
  if (train_set.empty()) throw DataError("train_loop: empty train set");
  std::mt19937_64 rng(config.seed);
  ModelParams params = init_params(variant, config, vocab, table, rng);
  OptimizerState opt;

  const std::vector<Example>& dev = dev_set.empty() ? train_set : dev_set;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.best_params = params;
  result.best_dev_acc = -1;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      std::size_t end = std::min(start + config.batch_size, order.size());
      Scalar inv = Scalar(1) / static_cast<Scalar>(end - start);
      params.zero_grads();
      for (std::size_t b = start; b < end; ++b) {
        const Example& ex = train_set[order[b]];
        Graph g;
        ForwardResult fwd = build_forward(g, params, vocab, ex);
        Graph::NodeId loss = nll_loss(g, fwd.probs_id, ex.gold);
        double value = g.value(loss).data[0];
        if (!std::isfinite(value)) {
          throw NumericError("train_loop: non-finite loss at epoch " +
                             std::to_string(epoch) + ", batch " +
                             std::to_string(start / config.batch_size) +
                             ", example " + ex.pair_id);
        }
        loss_sum += value;
        g.backward(loss, inv);
      }
      add_l2_grads(params, config.l2);
      clip_gradients(params, static_cast<Scalar>(config.clip_threshold));
      adagrad_step(params, opt, static_cast<Scalar>(config.learning_rate),
                   config.freeze_embeddings);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss =
        loss_sum / static_cast<double>(train_set.size()) + l2_penalty(params, config.l2);
    rec.dev_acc = evaluate(params, vocab, dev).accuracy;
    result.history.push_back(rec);

    if (rec.dev_acc > result.best_dev_acc) {
      result.best_dev_acc = rec.dev_acc;
      result.best_params = params;
      since_best = 0;
    } else if (++since_best >= config.early_stop_patience) {
      break;
    }
  }
  return result;
}

TrainConfig grid_search(ModelVariant variant, const TrainConfig& base,
                        const GridSpec& grid, const Vocabulary& vocab,
                        const EmbeddingTable& table,
                        const std::vector<Example>& train_set,
                        const std::vector<Example>& dev_set) {
  if (grid.learning_rates.empty() || grid.l2s.empty() || grid.rhos.empty()) {
    throw ConfigError("grid_search: empty grid");
  }
  auto lrs = grid.learning_rates;
  auto l2s = grid.l2s;
  auto rhos = grid.rhos;
  std::sort(lrs.begin(), lrs.end());
  std::sort(l2s.begin(), l2s.end());
  std::sort(rhos.begin(), rhos.end());

  TrainConfig best = base;
  double best_acc = -1;
  // Ascending iteration plus strict improvement implements the tie-break
  // (lower lr, then lower l2, then lower rho).
  for (double lr : lrs) {
    for (double l2 : l2s) {
      for (double rho : rhos) {
        TrainConfig c = base;
        c.learning_rate = lr;
        c.l2 = l2;
        c.clip_threshold = rho;
        c.epochs = grid.budget_epochs;
        TrainResult r = train_loop(variant, c, vocab, table, train_set, dev_set);
        if (r.best_dev_acc > best_acc) {
          best_acc = r.best_dev_acc;
          best = c;
          best.epochs = base.epochs;
        }
      }
    }
  }
  return best;
}

}  // namespace treeattn
