#include "treeattn/gradcheck.hpp"

#include <cmath>

#include "treeattn/train.hpp"

namespace treeattn {

double max_rel_err_fd(const std::function<double()>& loss_fn, Tensor& t,
                      double step) {
  t.ensure_grad();
  double worst = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    Scalar saved = t.data[i];
    t.data[i] = saved + static_cast<Scalar>(step);
    double plus = loss_fn();
    t.data[i] = saved - static_cast<Scalar>(step);
    double minus = loss_fn();
    t.data[i] = saved;
    double numeric = (plus - minus) / (2 * step);
    double analytic = static_cast<double>(t.grad[i]);
    double diff = std::fabs(analytic - numeric);
    // Central differences on an O(1) loss cannot resolve below roughly
    // eps*|f|/(2*step) ~ 5e-12; treat sub-noise disagreement as agreement so
    // near-zero gradients don't trip the relative test on roundoff alone.
    if (diff < 5e-11) continue;
    double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    worst = std::max(worst, diff / denom);
  }
  return worst;
}

namespace {

const std::vector<std::string> kTokens = {"a", "b", "c", "d", "e"};

std::string random_bracketing(std::mt19937_64& rng,
                              const std::vector<std::string>& tokens,
                              std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return tokens[lo];
  std::uniform_int_distribution<std::size_t> split(lo + 1, hi - 1);
  std::size_t mid = split(rng);
  return "( " + random_bracketing(rng, tokens, lo, mid) + " " +
         random_bracketing(rng, tokens, mid, hi) + " )";
}

ParseTree random_dep_tree(std::mt19937_64& rng,
                          const std::vector<std::string>& tokens) {
  std::vector<ConllRow> rows;
  for (std::size_t i = 1; i <= tokens.size(); ++i) {
    std::size_t head = 0;
    if (i > 1) {
      std::uniform_int_distribution<std::size_t> pick(1, i - 1);
      head = pick(rng);
    }
    rows.push_back({i, tokens[i - 1], head});
  }
  return parse_conll(rows);
}

}  // namespace

const Vocabulary& gradcheck_vocab() {
  static const Vocabulary vocab = [] {
    Vocabulary v;
    v.tokens.push_back("<unk>");
    for (const std::string& t : kTokens) v.tokens.push_back(t);
    for (std::size_t i = 0; i < v.tokens.size(); ++i) v.index[v.tokens[i]] = i;
    return v;
  }();
  return vocab;
}

Example random_example(std::mt19937_64& rng, std::size_t max_tokens) {
  std::uniform_int_distribution<std::size_t> len(2, std::max<std::size_t>(2, max_tokens));
  std::uniform_int_distribution<std::size_t> tok(0, kTokens.size() - 1);
  std::uniform_int_distribution<int> label(0, kNumClasses - 1);

  Example ex;
  ex.pair_id = "random";
  ex.gold = label(rng);
  auto sentence = [&] {
    std::vector<std::string> tokens(len(rng));
    for (std::string& t : tokens) t = kTokens[tok(rng)];
    return tokens;
  };
  ex.premise_tokens = sentence();
  ex.hypothesis_tokens = sentence();
  ex.premise_const =
      parse_sexpr(random_bracketing(rng, ex.premise_tokens, 0, ex.premise_tokens.size()));
  ex.hypothesis_const = parse_sexpr(
      random_bracketing(rng, ex.hypothesis_tokens, 0, ex.hypothesis_tokens.size()));
  ex.premise_dep = random_dep_tree(rng, ex.premise_tokens);
  ex.hypothesis_dep = random_dep_tree(rng, ex.hypothesis_tokens);
  return ex;
}

std::vector<BlockError> check_model_gradients(ModelVariant variant,
                                              std::uint64_t seed,
                                              std::size_t hidden,
                                              std::size_t embed,
                                              std::size_t max_nodes,
                                              double step) {
  std::mt19937_64 rng(seed);
  // A tree over t tokens has 2t-1 nodes; cap tokens so trees stay small.
  std::size_t max_tokens = std::max<std::size_t>(2, (max_nodes + 1) / 2);
  Example ex = random_example(rng, max_tokens);
  const Vocabulary& vocab = gradcheck_vocab();

  TrainConfig cfg;
  cfg.embedding_size = embed;
  cfg.hidden_size = hidden;
  ModelParams params = init_params(variant, cfg, vocab, {}, rng);

  auto loss_fn = [&]() {
    Graph g;
    ForwardResult fwd = build_forward(g, params, vocab, ex);
    return static_cast<double>(g.value(nll_loss(g, fwd.probs_id, ex.gold)).data[0]);
  };

  params.zero_grads();
  {
    Graph g;
    ForwardResult fwd = build_forward(g, params, vocab, ex);
    g.backward(nll_loss(g, fwd.probs_id, ex.gold));
  }

  std::vector<BlockError> out;
  params.for_each([&](const std::string& name, Tensor& t, ParamKind) {
    out.push_back({name, max_rel_err_fd(loss_fn, t, step)});
  });
  return out;
}

}  // namespace treeattn
