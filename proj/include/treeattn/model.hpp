#pragma once

#include <functional>
#include <optional>
#include <string>

#include "treeattn/attention.hpp"

namespace treeattn {

enum class ModelVariant {
  kNbow,
  kLstmEnc,
  kAtLstm,
  kTreeDLstmEnc,
  kTreeCLstmEnc,
  kSatDLstm,
  kSatCLstm,
};

inline constexpr const char* kVariantNames[] = {
    "nbow",      "lstm-enc",  "at-lstm",  "tree-dlstm-enc",
    "tree-clstm-enc", "sat-dlstm", "sat-clstm"};

const char* variant_name(ModelVariant v);
ModelVariant variant_from_name(const std::string& name);  // throws ConfigError

bool variant_needs_const(ModelVariant v);
bool variant_needs_dep(ModelVariant v);
bool variant_has_attention(ModelVariant v);

enum class ParamKind {
  kEmbedding,
  kRecurrent,  // LSTM / Tree-LSTM weight matrices; orthogonally initialized
  kBias,
  kOther,  // attention, combiner, classifier, NBOW MLP; uniform init
};

/// The complete named weight set for one model variant.
struct ModelParams {
  ModelVariant variant = ModelVariant::kNbow;
  std::size_t d = 0, e = 0;
  bool share_encoders = false;

  Tensor embeddings;  // V x e
  std::optional<LstmParams> lstm_x, lstm_y;
  std::optional<ConstTreeLstmParams> ctree_x, ctree_y;
  std::optional<DepTreeLstmParams> dtree_x, dtree_y;
  std::optional<AttentionParams> attn;
  Tensor Wx_final, Wy_final;  // pair combiner for encoder-only variants
  Tensor Wh, bh;              // NBOW hidden layer
  Tensor Wo, bo;              // classifier

  static ModelParams sized(ModelVariant variant, std::size_t vocab_size,
                           std::size_t d, std::size_t e,
                           bool share_encoders = false);

  using Visitor = std::function<void(const std::string&, Tensor&, ParamKind)>;
  /// Visits every parameter in a fixed deterministic order.
  void for_each(const Visitor& fn);

  void zero_grads();
};

struct Prediction {
  Tensor probs;  // length 3, sums to 1
  int label = -1;
  std::optional<AttentionTrace> trace;
};

struct ForwardResult {
  Graph::NodeId probs_id = 0;
  Prediction pred;
};

/// Builds the per-example graph for the variant and returns the class
/// probability node plus the extracted prediction.
ForwardResult build_forward(Graph& g, ModelParams& params, const Vocabulary& vocab,
                            const Example& ex, bool want_trace = false);

/// -log(probs[gold]); the log is floored at 1e-30.
Graph::NodeId nll_loss(Graph& g, Graph::NodeId probs, int gold);

}  // namespace treeattn
