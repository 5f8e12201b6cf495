#include "treeattn/attention.hpp"

#include "treeattn/errors.hpp"

namespace treeattn {

AttentionParams AttentionParams::sized(std::size_t d, std::size_t arity) {
  AttentionParams p;
  p.d = d;
  p.arity = arity;
  p.Wy = Tensor::mat(d, d);
  p.Wx = Tensor::mat(d, d);
  p.Wr_score = Tensor::mat(d, d);
  p.Wr_seq = Tensor::mat(d, d);
  p.Wr_carry = Tensor::mat(d, arity * d);
  p.Wr_dep = Tensor::mat(d, d);
  p.we = Tensor::vec(d);
  p.Wx_final = Tensor::mat(d, d);
  p.Wy_final = Tensor::mat(d, d);
  return p;
}

namespace {

struct ScoreContext {
  Graph::NodeId Wy, Wx, we;
  std::vector<Graph::NodeId> premise_proj;  // Wx * h_i^x, cached per i
  std::vector<Graph::NodeId> premise_h;
};

// alpha_j = softmax over i of we . tanh(Wy h_j^y + Wx h_i^x + extra_j)
Graph::NodeId attention_row(Graph& g, const ScoreContext& ctx,
                            Graph::NodeId hyp_h, Graph::NodeId extra) {
  Graph::NodeId base = g.add(g.matmul(ctx.Wy, hyp_h), extra);
  std::vector<Graph::NodeId> scores;
  scores.reserve(ctx.premise_proj.size());
  for (Graph::NodeId proj : ctx.premise_proj) {
    scores.push_back(g.dot(ctx.we, g.tanh(g.add(base, proj))));
  }
  return g.softmax(g.concat(scores));
}

Graph::NodeId weighted_premise_sum(Graph& g, const ScoreContext& ctx,
                                   Graph::NodeId alpha) {
  Graph::NodeId acc = g.smul(g.pick(alpha, 0), ctx.premise_h[0]);
  for (std::size_t i = 1; i < ctx.premise_h.size(); ++i) {
    acc = g.add(acc, g.smul(g.pick(alpha, i), ctx.premise_h[i]));
  }
  return acc;
}

}  // namespace

AttentionResult attend_sequence(Graph& g, AttentionParams& p,
                                const std::vector<NodeStateIds>& premise,
                                const std::vector<NodeStateIds>& hypothesis) {
  if (premise.empty() || hypothesis.empty()) {
    throw DataError("attend_sequence: empty state list");
  }
  ScoreContext ctx{g.param(p.Wy), g.param(p.Wx), g.param(p.we), {}, {}};
  for (const NodeStateIds& s : premise) {
    ctx.premise_h.push_back(s.h);
    ctx.premise_proj.push_back(g.matmul(ctx.Wx, s.h));
  }
  Graph::NodeId Wr_score = g.param(p.Wr_score);
  Graph::NodeId Wr_seq = p.tied ? Wr_score : g.param(p.Wr_seq);

  AttentionResult res;
  std::size_t n = premise.size(), m = hypothesis.size();
  res.trace.premise_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    res.trace.premise_ids[i] = i;
    res.trace.premise_spans.emplace_back(i, i + 1);
  }

  Graph::NodeId r = g.input(Tensor::vec(p.d));  // r_0 = 0
  for (std::size_t j = 0; j < m; ++j) {
    Graph::NodeId alpha =
        attention_row(g, ctx, hypothesis[j].h, g.matmul(Wr_score, r));
    r = g.add(weighted_premise_sum(g, ctx, alpha),
              g.tanh(g.matmul(Wr_seq, r)));
    res.trace.rows.push_back(g.value(alpha).data);
    res.trace.hyp_ids.push_back(j);
    res.trace.hyp_spans.emplace_back(j, j + 1);
  }
  Graph::NodeId Wxf = p.tied ? ctx.Wx : g.param(p.Wx_final);
  Graph::NodeId Wyf = p.tied ? ctx.Wy : g.param(p.Wy_final);
  res.h_star = g.tanh(g.add(g.matmul(Wxf, r), g.matmul(Wyf, hypothesis.back().h)));
  return res;
}

AttentionResult attend_tree(Graph& g, AttentionParams& p,
                            const ParseTree& premise_tree, const EncodedTree& premise,
                            const ParseTree& hypothesis_tree, const EncodedTree& hypothesis,
                            TreeMode mode) {
  if (premise.size() == 0 || hypothesis.size() == 0) {
    throw DataError("attend_tree: empty tree");
  }
  if (mode == TreeMode::kDependency) {
    for (const ParseNode& n : hypothesis_tree.nodes) {
      if (!n.token) {
        throw DataError("attend_tree: tokenless node in dependency mode");
      }
    }
  } else if (hypothesis_tree.max_arity() > p.arity) {
    throw DataError("attend_tree: hypothesis arity " +
                    std::to_string(hypothesis_tree.max_arity()) + " exceeds " +
                    std::to_string(p.arity));
  }

  ScoreContext ctx{g.param(p.Wy), g.param(p.Wx), g.param(p.we), {}, {}};
  for (const NodeStateIds& s : premise.states) {
    ctx.premise_h.push_back(s.h);
    ctx.premise_proj.push_back(g.matmul(ctx.Wx, s.h));
  }
  Graph::NodeId Wr_carry = g.param(p.Wr_carry);
  Graph::NodeId Wr_dep = g.param(p.Wr_dep);

  AttentionResult res;
  for (std::size_t i = 0; i < premise.size(); ++i) {
    std::size_t id = premise.order[i];
    res.trace.premise_ids.push_back(id);
    res.trace.premise_spans.emplace_back(premise_tree.nodes[id].span_begin,
                                         premise_tree.nodes[id].span_end);
  }

  std::vector<Graph::NodeId> r_by_node(hypothesis_tree.size());
  Graph::NodeId r_root = 0;
  for (std::size_t pos = 0; pos < hypothesis.size(); ++pos) {
    std::size_t id = hypothesis.order[pos];
    const ParseNode& node = hypothesis_tree.nodes[id];

    // g(R_j): zero at leaves, otherwise mode-specific accumulation of the
    // children's carried representations.
    Graph::NodeId g_acc;
    if (node.children.empty()) {
      g_acc = g.input(Tensor::vec(p.d));
    } else if (mode == TreeMode::kConstituency) {
      std::vector<Graph::NodeId> slots;
      for (std::size_t k = 0; k < p.arity; ++k) {
        slots.push_back(k < node.children.size() ? r_by_node[node.children[k]]
                                                 : g.input(Tensor::vec(p.d)));
      }
      g_acc = g.matmul(Wr_carry, g.concat(slots));
    } else {
      Graph::NodeId sum = r_by_node[node.children[0]];
      for (std::size_t k = 1; k < node.children.size(); ++k) {
        sum = g.add(sum, r_by_node[node.children[k]]);
      }
      g_acc = g.matmul(Wr_dep, sum);
    }

    // g(R_j) enters both the score and the carried representation.
    Graph::NodeId alpha = attention_row(g, ctx, hypothesis.states[pos].h, g_acc);
    Graph::NodeId r = g.add(weighted_premise_sum(g, ctx, alpha), g.tanh(g_acc));
    r_by_node[id] = r;
    r_root = r;

    res.trace.rows.push_back(g.value(alpha).data);
    res.trace.hyp_ids.push_back(id);
    res.trace.hyp_spans.emplace_back(node.span_begin, node.span_end);
  }

  Graph::NodeId Wxf = p.tied ? ctx.Wx : g.param(p.Wx_final);
  Graph::NodeId Wyf = p.tied ? ctx.Wy : g.param(p.Wy_final);
  res.h_star = g.tanh(g.add(g.matmul(Wxf, r_root),
                            g.matmul(Wyf, hypothesis.root_state().h)));
  return res;
}

}  // namespace treeattn
