#pragma once

#include <functional>
#include <vector>

#include "treeattn/data.hpp"
#include "treeattn/tensor.hpp"

namespace treeattn {

/// Maps a token to its embedding node in the current graph.
using EmbedFn = std::function<Graph::NodeId(const std::string&)>;

/// Sequence LSTM: one stacked affine map producing all four gates.
/// Row blocks of A are ordered [c-tilde; o; i; f]; input is [x; h_prev].
struct LstmParams {
  Tensor A;  // 4d x (e + d)
  Tensor b;  // 4d
  std::size_t d = 0, e = 0;

  static LstmParams sized(std::size_t d, std::size_t e);
};

/// N-ary constituency Tree-LSTM. Gate blocks of Wp are [c-tilde; o; i];
/// each child slot k has its own forget matrix Uf[k] acting on the full
/// concatenated child vector H (N*d wide).
struct ConstTreeLstmParams {
  Tensor Wp;               // 3d x (e + N*d)
  Tensor bp;               // 3d
  Tensor Wf;               // d x e
  std::vector<Tensor> Uf;  // N matrices, each d x N*d
  std::size_t d = 0, e = 0, arity = 2;

  static ConstTreeLstmParams sized(std::size_t d, std::size_t e, std::size_t arity = 2);
};

/// Child-sum dependency Tree-LSTM: a single Uf shared across children.
struct DepTreeLstmParams {
  Tensor Wp;  // 3d x (e + d)
  Tensor bp;  // 3d
  Tensor Wf;  // d x e
  Tensor Uf;  // d x d
  std::size_t d = 0, e = 0;

  static DepTreeLstmParams sized(std::size_t d, std::size_t e);
};

struct NodeStateIds {
  Graph::NodeId h = 0;
  Graph::NodeId c = 0;
};

/// Encoded tree: parse node ids in post-order with their states. Children
/// always precede their parent; the root is last.
struct EncodedTree {
  std::vector<std::size_t> order;
  std::vector<NodeStateIds> states;

  std::size_t size() const { return order.size(); }
  const NodeStateIds& root_state() const { return states.back(); }
};

NodeStateIds lstm_step(Graph& g, LstmParams& p, const NodeStateIds& prev,
                       Graph::NodeId x);

/// h_0 = c_0 = 0; one state per position.
std::vector<NodeStateIds> encode_sequence(Graph& g, LstmParams& p,
                                          const std::vector<Graph::NodeId>& xs);

EncodedTree encode_const_tree(Graph& g, ConstTreeLstmParams& p,
                              const ParseTree& tree, const EmbedFn& embed);

EncodedTree encode_dep_tree(Graph& g, DepTreeLstmParams& p,
                            const ParseTree& tree, const EmbedFn& embed);

/// Sum of token embeddings.
Graph::NodeId encode_nbow(Graph& g, const std::vector<Graph::NodeId>& xs);

}  // namespace treeattn
