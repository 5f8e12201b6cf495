#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "treeattn/errors.hpp"
#include "treeattn/gradcheck.hpp"
#include "treeattn/train.hpp"

using namespace treeattn;

namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.hidden_size = 4;
  cfg.embedding_size = 3;
  cfg.epochs = 3;
  cfg.batch_size = 2;
  cfg.seed = 7;
  return cfg;
}

std::vector<Example> synthetic_set(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_example(rng, 3));
  return out;
}

std::vector<Scalar> flatten(ModelParams& p, bool grads = false) {
  std::vector<Scalar> all;
  p.for_each([&](const std::string&, Tensor& t, ParamKind) {
    const auto& src = grads ? t.grad : t.data;
    all.insert(all.end(), src.begin(), src.end());
  });
  return all;
}

}  // namespace

TEST_CASE("orthogonal_init produces orthonormal tiles") {
  std::mt19937_64 rng(3);
  SUBCASE("square matrix: W^T W = I") {
    Tensor w = Tensor::mat(6, 6);
    orthogonal_init(w, 6, rng);
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = 0; j < 6; ++j) {
        double dot = 0;
        for (std::size_t r = 0; r < 6; ++r) dot += w.at(r, i) * w.at(r, j);
        CHECK(std::fabs(dot - (i == j ? 1.0 : 0.0)) < 1e-5);
      }
    }
  }

  SUBCASE("stacked LSTM matrix: every full d x d tile is orthogonal") {
    std::size_t d = 4, e = 3;
    Tensor A = Tensor::mat(4 * d, e + d);
    orthogonal_init(A, d, rng);
    // Tiling starts at column 0, so the first d columns of every row block
    // form a full tile; the trailing e columns are cropped from a square Q
    // and only column-orthonormal within themselves.
    for (std::size_t br = 0; br < 4 * d; br += d) {
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          double dot = 0;
          for (std::size_t r = 0; r < d; ++r) {
            dot += A.at(br + r, i) * A.at(br + r, j);
          }
          CHECK(std::fabs(dot - (i == j ? 1.0 : 0.0)) < 1e-5);
        }
      }
    }
  }

  SUBCASE("same seed reproduces bitwise; vectors rejected") {
    Tensor a = Tensor::mat(5, 5), b = Tensor::mat(5, 5);
    std::mt19937_64 r1(9), r2(9);
    orthogonal_init(a, 5, r1);
    orthogonal_init(b, 5, r2);
    CHECK(a.data == b.data);
    Tensor v = Tensor::vec(5);
    CHECK_THROWS_AS(orthogonal_init(v, 5, r1), ShapeError);
  }
}

TEST_CASE("init_params layout and determinism") {
  TrainConfig cfg = small_config();
  EmbeddingTable table;
  table["a"] = {0.25, -0.5, 0.125};

  std::mt19937_64 r1(cfg.seed), r2(cfg.seed);
  ModelParams p1 = init_params(ModelVariant::kSatCLstm, cfg, gradcheck_vocab(), table, r1);
  ModelParams p2 = init_params(ModelVariant::kSatCLstm, cfg, gradcheck_vocab(), table, r2);
  CHECK(flatten(p1) == flatten(p2));

  SUBCASE("pretrained rows copied exactly; the rest stays in [-0.1, 0.1]") {
    std::size_t row = gradcheck_vocab().lookup("a");
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(p1.embeddings.at(row, c) == Scalar(table["a"][c]));
    }
    std::size_t unk = gradcheck_vocab().lookup("b");
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(std::fabs(double(p1.embeddings.at(unk, c))) <= 0.1);
    }
  }

  SUBCASE("biases start at zero; other weights bounded") {
    p1.for_each([&](const std::string& name, Tensor& t, ParamKind kind) {
      CAPTURE(name);
      if (kind == ParamKind::kBias) {
        for (Scalar v : t.data) CHECK(v == 0.0);
      } else if (kind == ParamKind::kOther) {
        for (Scalar v : t.data) CHECK(std::fabs(double(v)) <= 0.1);
      }
    });
  }

  SUBCASE("dimension mismatch against the table rejected") {
    EmbeddingTable bad;
    bad["a"] = {1.0, 2.0};  // dim 2, config says 3
    std::mt19937_64 r(1);
    CHECK_THROWS_AS(init_params(ModelVariant::kNbow, cfg, gradcheck_vocab(), bad, r),
                    ConfigError);
  }
}

TEST_CASE("gradient clipping") {
  TrainConfig cfg = small_config();
  std::mt19937_64 rng(cfg.seed);
  ModelParams p = init_params(ModelVariant::kNbow, cfg, gradcheck_vocab(), {}, rng);

  auto set_norm = [&](double target) {
    std::vector<Scalar*> cells;
    p.for_each([&](const std::string&, Tensor& t, ParamKind) {
      t.ensure_grad();
      for (Scalar& g : t.grad) cells.push_back(&g);
    });
    std::mt19937_64 r(1);
    std::uniform_real_distribution<double> u(-1, 1);
    double sq = 0;
    for (Scalar* c : cells) {
      *c = u(r);
      sq += double(*c) * *c;
    }
    double scale = target / std::sqrt(sq);
    for (Scalar* c : cells) *c *= scale;
  };

  SUBCASE("norm below rho is untouched") {
    set_norm(10);
    auto before = flatten(p, true);
    Scalar norm = clip_gradients(p, 50);
    CHECK(std::fabs(double(norm) - 10) < 1e-9);
    CHECK(flatten(p, true) == before);
  }

  SUBCASE("norm above rho is rescaled onto the sphere, direction kept") {
    set_norm(100);
    auto before = flatten(p, true);
    Scalar norm = clip_gradients(p, 50);
    CHECK(std::fabs(double(norm) - 100) < 1e-9);
    auto after = flatten(p, true);
    double sq = 0, dot = 0, bsq = 0;
    for (std::size_t i = 0; i < after.size(); ++i) {
      sq += double(after[i]) * after[i];
      dot += double(after[i]) * before[i];
      bsq += double(before[i]) * before[i];
    }
    CHECK(std::fabs(std::sqrt(sq) - 50) < 1e-9);
    CHECK(std::fabs(dot / (std::sqrt(sq) * std::sqrt(bsq)) - 1) < 1e-12);
  }
}

TEST_CASE("adagrad") {
  TrainConfig cfg = small_config();
  std::mt19937_64 rng(cfg.seed);
  ModelParams p = init_params(ModelVariant::kNbow, cfg, gradcheck_vocab(), {}, rng);
  OptimizerState opt;

  SUBCASE("first step moves by about lr in the gradient's sign") {
    p.Wo.ensure_grad();
    double before = p.Wo.data[0];
    p.Wo.grad[0] = Scalar(0.3);
    adagrad_step(p, opt, Scalar(0.01));
    // theta -= lr * g / (|g| + eps) ~= lr * sign(g)
    CHECK(p.Wo.data[0] == doctest::Approx(before - 0.01).epsilon(1e-6));
    CHECK(p.Wo.grad[0] == 0.0);  // gradients consumed
  }

  SUBCASE("zero gradient is a no-op") {
    p.for_each([](const std::string&, Tensor& t, ParamKind) { t.ensure_grad(); });
    auto before = flatten(p);
    adagrad_step(p, opt, Scalar(0.01));
    CHECK(flatten(p) == before);
  }

  SUBCASE("matches an independent scalar recurrence and shrinks theta^2") {
    // Minimize theta^2/2: grad = theta each step.
    double theta = p.bo.data[0] = 1.0;
    double acc = 0;
    p.bo.ensure_grad();
    for (int step = 0; step < 1000; ++step) {
      p.bo.grad[0] = p.bo.data[0];
      adagrad_step(p, opt, Scalar(0.05));
      acc += theta * theta;
      theta -= 0.05 * theta / (std::sqrt(acc) + 1e-8);
      CHECK(p.bo.data[0] == doctest::Approx(theta).epsilon(1e-9));
    }
    CHECK(std::fabs(double(p.bo.data[0])) < 0.05);
  }

  SUBCASE("freeze_embeddings leaves the table untouched") {
    p.embeddings.ensure_grad();
    auto before = p.embeddings.data;
    for (Scalar& g : p.embeddings.grad) g = Scalar(0.5);
    adagrad_step(p, opt, Scalar(0.01), true);
    CHECK(p.embeddings.data == before);
  }
}

TEST_CASE("evaluate") {
  // Zero parameters predict uniformly, so argmax is always class 0.
  ModelParams p = ModelParams::sized(ModelVariant::kNbow, gradcheck_vocab().size(), 4, 3);
  auto set = synthetic_set(12, 5);
  std::size_t zeros = 0;
  for (const Example& ex : set) zeros += ex.gold == 0;
  EvalResult res = evaluate(p, gradcheck_vocab(), set);
  CHECK(res.total == 12);
  CHECK(res.accuracy == doctest::Approx(double(zeros) / 12).epsilon(1e-12));
  for (int g = 0; g < kNumClasses; ++g) {
    CHECK(res.confusion[g][1] == 0);
    CHECK(res.confusion[g][2] == 0);
  }
  for (int pred : res.predicted) CHECK(pred == 0);
  CHECK(evaluate(p, gradcheck_vocab(), {}).accuracy == 0.0);
}

TEST_CASE("train_loop") {
  TrainConfig cfg = small_config();
  auto train = synthetic_set(6, 11);
  auto dev = synthetic_set(4, 13);

  SUBCASE("fixed seed reproduces history and parameters bitwise") {
    TrainResult a = train_loop(ModelVariant::kNbow, cfg, gradcheck_vocab(), {}, train, dev);
    TrainResult b = train_loop(ModelVariant::kNbow, cfg, gradcheck_vocab(), {}, train, dev);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
      CHECK(a.history[i].train_loss == b.history[i].train_loss);
      CHECK(a.history[i].dev_acc == b.history[i].dev_acc);
    }
    CHECK(flatten(a.best_params) == flatten(b.best_params));
  }

  SUBCASE("zero learning rate changes nothing and early-stops on patience") {
    TrainConfig frozen = cfg;
    frozen.learning_rate = 0;
    frozen.epochs = 50;
    frozen.early_stop_patience = 2;
    TrainResult r = train_loop(ModelVariant::kNbow, frozen, gradcheck_vocab(), {}, train, dev);
    std::mt19937_64 rng(frozen.seed);
    ModelParams fresh = init_params(ModelVariant::kNbow, frozen, gradcheck_vocab(), {}, rng);
    CHECK(flatten(r.best_params) == flatten(fresh));
    // Constant dev accuracy: epoch 1 is best, then patience epochs, stop.
    CHECK(r.history.size() == 1 + frozen.early_stop_patience);
  }

  SUBCASE("loss falls on an overfittable set") {
    TrainConfig longer = cfg;
    longer.epochs = 20;
    longer.learning_rate = 0.05;
    longer.early_stop_patience = 20;
    TrainResult r = train_loop(ModelVariant::kNbow, longer, gradcheck_vocab(), {}, train, train);
    CHECK(r.history.back().train_loss < r.history.front().train_loss);
    CHECK(r.best_dev_acc >= r.history.front().dev_acc);
  }

  SUBCASE("empty train set rejected") {
    CHECK_THROWS_AS(train_loop(ModelVariant::kNbow, cfg, gradcheck_vocab(), {}, {}, dev),
                    DataError);
  }
}

TEST_CASE("grid_search") {
  TrainConfig base = small_config();
  base.epochs = 7;
  auto train = synthetic_set(4, 17);
  auto dev = synthetic_set(3, 19);

  SUBCASE("singleton grid returns that point with the base epoch budget") {
    GridSpec grid;
    grid.learning_rates = {0.01};
    grid.l2s = {1e-5};
    grid.rhos = {10};
    grid.budget_epochs = 1;
    TrainConfig best = grid_search(ModelVariant::kNbow, base, grid, gradcheck_vocab(),
                                   {}, train, dev);
    CHECK(best.learning_rate == 0.01);
    CHECK(best.l2 == 1e-5);
    CHECK(best.clip_threshold == 10);
    CHECK(best.epochs == base.epochs);
  }

  SUBCASE("ties break toward the smaller hyperparameters") {
    // lr = 0 makes every cell identical, so the tie-break decides alone.
    GridSpec grid;
    grid.learning_rates = {0.0};
    grid.l2s = {5e-5, 0.0, 1e-6};
    grid.rhos = {50, 5};
    grid.budget_epochs = 1;
    TrainConfig best = grid_search(ModelVariant::kNbow, base, grid, gradcheck_vocab(),
                                   {}, train, dev);
    CHECK(best.l2 == 0.0);
    CHECK(best.clip_threshold == 5);
  }

  SUBCASE("empty grid rejected") {
    GridSpec grid;
    grid.learning_rates.clear();
    CHECK_THROWS_AS(grid_search(ModelVariant::kNbow, base, grid, gradcheck_vocab(),
                                {}, train, dev),
                    ConfigError);
  }
}
