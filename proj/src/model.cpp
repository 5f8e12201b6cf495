#include "treeattn/model.hpp"

#include <algorithm>

#include "treeattn/errors.hpp"

namespace treeattn {

const char* variant_name(ModelVariant v) {
  return kVariantNames[static_cast<int>(v)];
}

ModelVariant variant_from_name(const std::string& name) {
  for (int i = 0; i < 7; ++i) {
    if (name == kVariantNames[i]) return static_cast<ModelVariant>(i);
  }
  std::string all;
  for (int i = 0; i < 7; ++i) {
    if (i) all += ", ";
    all += kVariantNames[i];
  }
  throw ConfigError("unknown variant '" + name + "' (expected one of: " + all + ")");
}

bool variant_needs_const(ModelVariant v) {
  return v == ModelVariant::kTreeCLstmEnc || v == ModelVariant::kSatCLstm;
}

bool variant_needs_dep(ModelVariant v) {
  return v == ModelVariant::kTreeDLstmEnc || v == ModelVariant::kSatDLstm;
}

bool variant_has_attention(ModelVariant v) {
  return v == ModelVariant::kAtLstm || v == ModelVariant::kSatDLstm ||
         v == ModelVariant::kSatCLstm;
}

ModelParams ModelParams::sized(ModelVariant variant, std::size_t vocab_size,
                               std::size_t d, std::size_t e, bool share_encoders) {
  ModelParams p;
  p.variant = variant;
  p.d = d;
  p.e = e;
  p.share_encoders = share_encoders;
  p.embeddings = Tensor::mat(vocab_size, e);
  switch (variant) {
    case ModelVariant::kNbow:
      p.Wh = Tensor::mat(d, 2 * e);
      p.bh = Tensor::vec(d);
      break;
    case ModelVariant::kLstmEnc:
    case ModelVariant::kAtLstm:
      p.lstm_x = LstmParams::sized(d, e);
      if (!share_encoders) p.lstm_y = LstmParams::sized(d, e);
      break;
    case ModelVariant::kTreeCLstmEnc:
    case ModelVariant::kSatCLstm:
      p.ctree_x = ConstTreeLstmParams::sized(d, e);
      if (!share_encoders) p.ctree_y = ConstTreeLstmParams::sized(d, e);
      break;
    case ModelVariant::kTreeDLstmEnc:
    case ModelVariant::kSatDLstm:
      p.dtree_x = DepTreeLstmParams::sized(d, e);
      if (!share_encoders) p.dtree_y = DepTreeLstmParams::sized(d, e);
      break;
  }
  if (variant_has_attention(variant)) {
    p.attn = AttentionParams::sized(d);
  } else if (variant != ModelVariant::kNbow) {
    p.Wx_final = Tensor::mat(d, d);
    p.Wy_final = Tensor::mat(d, d);
  }
  p.Wo = Tensor::mat(kNumClasses, d);
  p.bo = Tensor::vec(kNumClasses);
  return p;
}

void ModelParams::for_each(const Visitor& fn) {
  fn("embeddings", embeddings, ParamKind::kEmbedding);
  auto lstm = [&](const std::string& tag, std::optional<LstmParams>& lp) {
    if (!lp) return;
    fn(tag + ".A", lp->A, ParamKind::kRecurrent);
    fn(tag + ".b", lp->b, ParamKind::kBias);
  };
  auto ctree = [&](const std::string& tag, std::optional<ConstTreeLstmParams>& cp) {
    if (!cp) return;
    fn(tag + ".Wp", cp->Wp, ParamKind::kRecurrent);
    fn(tag + ".bp", cp->bp, ParamKind::kBias);
    fn(tag + ".Wf", cp->Wf, ParamKind::kRecurrent);
    for (std::size_t k = 0; k < cp->Uf.size(); ++k) {
      fn(tag + ".Uf" + std::to_string(k), cp->Uf[k], ParamKind::kRecurrent);
    }
  };
  auto dtree = [&](const std::string& tag, std::optional<DepTreeLstmParams>& dp) {
    if (!dp) return;
    fn(tag + ".Wp", dp->Wp, ParamKind::kRecurrent);
    fn(tag + ".bp", dp->bp, ParamKind::kBias);
    fn(tag + ".Wf", dp->Wf, ParamKind::kRecurrent);
    fn(tag + ".Uf", dp->Uf, ParamKind::kRecurrent);
  };
  lstm("lstm_x", lstm_x);
  lstm("lstm_y", lstm_y);
  ctree("ctree_x", ctree_x);
  ctree("ctree_y", ctree_y);
  dtree("dtree_x", dtree_x);
  dtree("dtree_y", dtree_y);
  if (attn) {
    fn("attn.Wy", attn->Wy, ParamKind::kOther);
    fn("attn.Wx", attn->Wx, ParamKind::kOther);
    fn("attn.Wr_score", attn->Wr_score, ParamKind::kOther);
    fn("attn.Wr_seq", attn->Wr_seq, ParamKind::kOther);
    fn("attn.Wr_carry", attn->Wr_carry, ParamKind::kOther);
    fn("attn.Wr_dep", attn->Wr_dep, ParamKind::kOther);
    fn("attn.we", attn->we, ParamKind::kOther);
    fn("attn.Wx_final", attn->Wx_final, ParamKind::kOther);
    fn("attn.Wy_final", attn->Wy_final, ParamKind::kOther);
  }
  if (Wx_final.size() > 0) {
    fn("Wx_final", Wx_final, ParamKind::kOther);
    fn("Wy_final", Wy_final, ParamKind::kOther);
  }
  if (Wh.size() > 0) {
    fn("Wh", Wh, ParamKind::kOther);
    fn("bh", bh, ParamKind::kBias);
  }
  fn("Wo", Wo, ParamKind::kOther);
  fn("bo", bo, ParamKind::kBias);
}

void ModelParams::zero_grads() {
  for_each([](const std::string&, Tensor& t, ParamKind) { t.zero_grad(); });
}

namespace {

EmbedFn make_embed(Graph& g, ModelParams& p, const Vocabulary& vocab) {
  return [&g, &p, &vocab](const std::string& token) {
    return g.embed(p.embeddings, vocab.lookup(token));
  };
}

std::vector<Graph::NodeId> embed_tokens(Graph& g, const EmbedFn& embed,
                                        const std::vector<std::string>& tokens,
                                        const char* which) {
  if (tokens.empty()) {
    throw DataError(std::string("forward: empty ") + which + " sentence");
  }
  std::vector<Graph::NodeId> out;
  out.reserve(tokens.size());
  for (const std::string& t : tokens) out.push_back(embed(t));
  return out;
}

const ParseTree& require_tree(const std::optional<ParseTree>& t, ModelVariant v,
                              const char* which, const char* form) {
  if (!t) {
    throw DataError(std::string("forward(") + variant_name(v) + "): missing " +
                    form + " parse for " + which);
  }
  return *t;
}

Graph::NodeId combine_roots(Graph& g, Tensor& Wx, Tensor& Wy, Graph::NodeId hx,
                            Graph::NodeId hy) {
  return g.tanh(g.add(g.matmul(g.param(Wx), hx), g.matmul(g.param(Wy), hy)));
}

}  // namespace

ForwardResult build_forward(Graph& g, ModelParams& p, const Vocabulary& vocab,
                            const Example& ex, bool want_trace) {
  EmbedFn embed = make_embed(g, p, vocab);
  ModelVariant v = p.variant;
  Graph::NodeId h_star = 0;
  std::optional<AttentionTrace> trace;

  switch (v) {
    case ModelVariant::kNbow: {
      Graph::NodeId sx =
          encode_nbow(g, embed_tokens(g, embed, ex.premise_tokens, "premise"));
      Graph::NodeId sy = encode_nbow(
          g, embed_tokens(g, embed, ex.hypothesis_tokens, "hypothesis"));
      h_star = g.tanh(g.add(g.matmul(g.param(p.Wh), g.concat({sx, sy})),
                            g.param(p.bh)));
      break;
    }
    case ModelVariant::kLstmEnc:
    case ModelVariant::kAtLstm: {
      LstmParams& lx = *p.lstm_x;
      LstmParams& ly = p.lstm_y ? *p.lstm_y : *p.lstm_x;
      auto sx = encode_sequence(
          g, lx, embed_tokens(g, embed, ex.premise_tokens, "premise"));
      auto sy = encode_sequence(
          g, ly, embed_tokens(g, embed, ex.hypothesis_tokens, "hypothesis"));
      if (v == ModelVariant::kAtLstm) {
        AttentionResult att = attend_sequence(g, *p.attn, sx, sy);
        h_star = att.h_star;
        if (want_trace) trace = std::move(att.trace);
      } else {
        h_star = combine_roots(g, p.Wx_final, p.Wy_final, sx.back().h, sy.back().h);
      }
      break;
    }
    case ModelVariant::kTreeCLstmEnc:
    case ModelVariant::kSatCLstm: {
      const ParseTree& tx = require_tree(ex.premise_const, v, "premise", "constituency");
      const ParseTree& ty =
          require_tree(ex.hypothesis_const, v, "hypothesis", "constituency");
      ConstTreeLstmParams& cx = *p.ctree_x;
      ConstTreeLstmParams& cy = p.ctree_y ? *p.ctree_y : *p.ctree_x;
      EncodedTree ex_t = encode_const_tree(g, cx, tx, embed);
      EncodedTree ey_t = encode_const_tree(g, cy, ty, embed);
      if (v == ModelVariant::kSatCLstm) {
        AttentionResult att = attend_tree(g, *p.attn, tx, ex_t, ty, ey_t,
                                          TreeMode::kConstituency);
        h_star = att.h_star;
        if (want_trace) trace = std::move(att.trace);
      } else {
        h_star = combine_roots(g, p.Wx_final, p.Wy_final, ex_t.root_state().h,
                               ey_t.root_state().h);
      }
      break;
    }
    case ModelVariant::kTreeDLstmEnc:
    case ModelVariant::kSatDLstm: {
      const ParseTree& tx = require_tree(ex.premise_dep, v, "premise", "dependency");
      const ParseTree& ty =
          require_tree(ex.hypothesis_dep, v, "hypothesis", "dependency");
      DepTreeLstmParams& dx = *p.dtree_x;
      DepTreeLstmParams& dy = p.dtree_y ? *p.dtree_y : *p.dtree_x;
      EncodedTree ex_t = encode_dep_tree(g, dx, tx, embed);
      EncodedTree ey_t = encode_dep_tree(g, dy, ty, embed);
      if (v == ModelVariant::kSatDLstm) {
        AttentionResult att =
            attend_tree(g, *p.attn, tx, ex_t, ty, ey_t, TreeMode::kDependency);
        h_star = att.h_star;
        if (want_trace) trace = std::move(att.trace);
      } else {
        h_star = combine_roots(g, p.Wx_final, p.Wy_final, ex_t.root_state().h,
                               ey_t.root_state().h);
      }
      break;
    }
  }

  Graph::NodeId probs =
      g.softmax(g.add(g.matmul(g.param(p.Wo), h_star), g.param(p.bo)));

  ForwardResult res;
  res.probs_id = probs;
  res.pred.probs = g.value(probs);
  const auto& pd = res.pred.probs.data;
  res.pred.label = static_cast<int>(
      std::max_element(pd.begin(), pd.end()) - pd.begin());
  res.pred.trace = std::move(trace);
  return res;
}

Graph::NodeId nll_loss(Graph& g, Graph::NodeId probs, int gold) {
  if (gold < 0 || gold >= kNumClasses) {
    throw ConfigError("nll_loss: gold label " + std::to_string(gold) +
                      " out of range");
  }
  return g.scale(g.log(g.pick(probs, static_cast<std::size_t>(gold))), -1);
}

}  // namespace treeattn
