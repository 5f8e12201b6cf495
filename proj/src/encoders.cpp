#include "treeattn/encoders.hpp"

#include "treeattn/errors.hpp"

namespace treeattn {

LstmParams LstmParams::sized(std::size_t d, std::size_t e) {
  LstmParams p;
  p.d = d;
  p.e = e;
  p.A = Tensor::mat(4 * d, e + d);
  p.b = Tensor::vec(4 * d);
  return p;
}

ConstTreeLstmParams ConstTreeLstmParams::sized(std::size_t d, std::size_t e,
                                               std::size_t arity) {
  ConstTreeLstmParams p;
  p.d = d;
  p.e = e;
  p.arity = arity;
  p.Wp = Tensor::mat(3 * d, e + arity * d);
  p.bp = Tensor::vec(3 * d);
  p.Wf = Tensor::mat(d, e);
  p.Uf.reserve(arity);
  for (std::size_t k = 0; k < arity; ++k) p.Uf.push_back(Tensor::mat(d, arity * d));
  return p;
}

DepTreeLstmParams DepTreeLstmParams::sized(std::size_t d, std::size_t e) {
  DepTreeLstmParams p;
  p.d = d;
  p.e = e;
  p.Wp = Tensor::mat(3 * d, e + d);
  p.bp = Tensor::vec(3 * d);
  p.Wf = Tensor::mat(d, e);
  p.Uf = Tensor::mat(d, d);
  return p;
}

NodeStateIds lstm_step(Graph& g, LstmParams& p, const NodeStateIds& prev,
                       Graph::NodeId x) {
  if (g.value(x).size() != p.e || g.value(prev.h).size() != p.d) {
    throw ShapeError("lstm_step: input " + g.value(x).shape_str() + " / state " +
                     g.value(prev.h).shape_str() + " vs d=" + std::to_string(p.d) +
                     " e=" + std::to_string(p.e));
  }
  Graph::NodeId A = g.param(p.A);
  Graph::NodeId b = g.param(p.b);
  Graph::NodeId pre = g.add(g.matmul(A, g.concat({x, prev.h})), b);
  std::size_t d = p.d;
  Graph::NodeId c_tilde = g.tanh(g.slice(pre, 0, d));
  Graph::NodeId o = g.sigmoid(g.slice(pre, d, d));
  Graph::NodeId i = g.sigmoid(g.slice(pre, 2 * d, d));
  Graph::NodeId f = g.sigmoid(g.slice(pre, 3 * d, d));
  Graph::NodeId c = g.add(g.hadamard(c_tilde, i), g.hadamard(prev.c, f));
  Graph::NodeId h = g.hadamard(o, g.tanh(c));
  return {h, c};
}

std::vector<NodeStateIds> encode_sequence(Graph& g, LstmParams& p,
                                          const std::vector<Graph::NodeId>& xs) {
  if (xs.empty()) throw DataError("encode_sequence: empty token list");
  NodeStateIds state{g.input(Tensor::vec(p.d)), g.input(Tensor::vec(p.d))};
  std::vector<NodeStateIds> out;
  out.reserve(xs.size());
  for (Graph::NodeId x : xs) {
    state = lstm_step(g, p, state, x);
    out.push_back(state);
  }
  return out;
}

namespace {

// Shared gate computation for both tree cells: pre = Wp*[x; H] + bp,
// split into [c-tilde; o; i].
struct TreeGates {
  Graph::NodeId c_tilde, o, i;
};

TreeGates tree_gates(Graph& g, Tensor& Wp, Tensor& bp, std::size_t d,
                     Graph::NodeId x, Graph::NodeId H) {
  Graph::NodeId pre = g.add(g.matmul(g.param(Wp),
                                     g.concat({x, H})),
                            g.param(bp));
  return {g.tanh(g.slice(pre, 0, d)), g.sigmoid(g.slice(pre, d, d)),
          g.sigmoid(g.slice(pre, 2 * d, d))};
}

}  // namespace

EncodedTree encode_const_tree(Graph& g, ConstTreeLstmParams& p,
                              const ParseTree& tree, const EmbedFn& embed) {
  std::size_t d = p.d, N = p.arity;
  EncodedTree out;
  out.order = tree.post_order();
  out.states.resize(out.order.size());
  std::vector<NodeStateIds> by_node(tree.size());

  Graph::NodeId Wf = g.param(p.Wf);
  std::vector<Graph::NodeId> Uf;
  for (std::size_t k = 0; k < N; ++k) Uf.push_back(g.param(p.Uf[k]));

  for (std::size_t pos = 0; pos < out.order.size(); ++pos) {
    std::size_t id = out.order[pos];
    const ParseNode& node = tree.nodes[id];
    if (node.children.size() > N) {
      throw DataError("encode_const_tree: node arity " +
                      std::to_string(node.children.size()) + " exceeds " +
                      std::to_string(N));
    }
    bool leaf = node.children.empty();
    if (leaf && !node.token) {
      throw DataError("encode_const_tree: leaf without token");
    }
    if (!leaf && node.token) {
      throw DataError("encode_const_tree: internal node carries token '" +
                      *node.token + "'");
    }
    // x is the embedding at leaves and the zero vector elsewhere.
    Graph::NodeId x = leaf ? embed(*node.token) : g.input(Tensor::vec(p.e));

    // H = h_1 (+) ... (+) h_N, missing slots zero-filled.
    std::vector<Graph::NodeId> slots;
    slots.reserve(N);
    for (std::size_t k = 0; k < N; ++k) {
      if (k < node.children.size()) {
        slots.push_back(by_node[node.children[k]].h);
      } else {
        slots.push_back(g.input(Tensor::vec(d)));
      }
    }
    Graph::NodeId H = g.concat(slots);

    TreeGates gates = tree_gates(g, p.Wp, p.bp, d, x, H);
    Graph::NodeId c = g.hadamard(gates.c_tilde, gates.i);
    Graph::NodeId fx = g.matmul(Wf, x);
    for (std::size_t k = 0; k < node.children.size(); ++k) {
      Graph::NodeId f_k = g.sigmoid(g.add(fx, g.matmul(Uf[k], H)));
      c = g.add(c, g.hadamard(by_node[node.children[k]].c, f_k));
    }
    Graph::NodeId h = g.hadamard(gates.o, g.tanh(c));
    by_node[id] = {h, c};
    out.states[pos] = by_node[id];
  }
  return out;
}

EncodedTree encode_dep_tree(Graph& g, DepTreeLstmParams& p,
                            const ParseTree& tree, const EmbedFn& embed) {
  std::size_t d = p.d;
  EncodedTree out;
  out.order = tree.post_order();
  out.states.resize(out.order.size());
  std::vector<NodeStateIds> by_node(tree.size());

  Graph::NodeId Wf = g.param(p.Wf);
  Graph::NodeId Uf = g.param(p.Uf);

  for (std::size_t pos = 0; pos < out.order.size(); ++pos) {
    std::size_t id = out.order[pos];
    const ParseNode& node = tree.nodes[id];
    if (!node.token) {
      throw DataError("encode_dep_tree: tokenless node (dependency trees label "
                      "every node with a word)");
    }
    Graph::NodeId x = embed(*node.token);

    Graph::NodeId H = g.input(Tensor::vec(d));
    for (std::size_t c_id : node.children) H = g.add(H, by_node[c_id].h);

    TreeGates gates = tree_gates(g, p.Wp, p.bp, d, x, H);
    Graph::NodeId c = g.hadamard(gates.c_tilde, gates.i);
    Graph::NodeId fx = g.matmul(Wf, x);
    for (std::size_t c_id : node.children) {
      Graph::NodeId f_k = g.sigmoid(g.add(fx, g.matmul(Uf, by_node[c_id].h)));
      c = g.add(c, g.hadamard(by_node[c_id].c, f_k));
    }
    Graph::NodeId h = g.hadamard(gates.o, g.tanh(c));
    by_node[id] = {h, c};
    out.states[pos] = by_node[id];
  }
  return out;
}

Graph::NodeId encode_nbow(Graph& g, const std::vector<Graph::NodeId>& xs) {
  if (xs.empty()) throw DataError("encode_nbow: empty token list");
  Graph::NodeId acc = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) acc = g.add(acc, xs[i]);
  return acc;
}

}  // namespace treeattn
