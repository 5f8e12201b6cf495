#pragma once

#include <vector>

#include "treeattn/encoders.hpp"

namespace treeattn {

enum class TreeMode { kConstituency, kDependency };

/// Weights for both the sequence and tree attention variants. The score
/// and carry matrices are separate parameters even where the shared
/// notation suggests tying; set tie_weights in the model config to reuse
/// the score-side tensors for the carried representation and the final
/// combiner.
struct AttentionParams {
  Tensor Wy;        // d x d, score term on the hypothesis state
  Tensor Wx;        // d x d, score term on the premise state
  Tensor Wr_score;  // d x d, score term on the carried r (sequence only)
  Tensor Wr_seq;    // d x d sequence carry
  Tensor Wr_carry;  // d x N*d constituency carry
  Tensor Wr_dep;    // d x d dependency carry (applied to the child sum)
  Tensor we;        // d
  Tensor Wx_final;  // d x d
  Tensor Wy_final;  // d x d
  std::size_t d = 0, arity = 2;
  // When set, the score-side tensors are reused for the sequence carry and
  // the final combiner (the tied reading of the shared symbols).
  bool tied = false;

  static AttentionParams sized(std::size_t d, std::size_t arity = 2);
};

/// Per-hypothesis-row distribution over premise positions/nodes, with the
/// token span each premise/hypothesis entry covers.
struct AttentionTrace {
  std::vector<std::vector<Scalar>> rows;  // one row per hypothesis entry
  std::vector<std::size_t> hyp_ids;       // parse node id (or position) per row
  std::vector<std::size_t> premise_ids;   // parse node id (or position) per column
  std::vector<std::pair<std::size_t, std::size_t>> hyp_spans;
  std::vector<std::pair<std::size_t, std::size_t>> premise_spans;
};

struct AttentionResult {
  Graph::NodeId h_star = 0;
  AttentionTrace trace;
};

/// Word-by-word attention over sequence states; r_0 = 0.
AttentionResult attend_sequence(Graph& g, AttentionParams& p,
                                const std::vector<NodeStateIds>& premise,
                                const std::vector<NodeStateIds>& hypothesis);

/// Tree-over-tree attention: hypothesis nodes visited in post-order, each
/// attending over every premise node (leaves and internal phrases alike).
AttentionResult attend_tree(Graph& g, AttentionParams& p,
                            const ParseTree& premise_tree, const EncodedTree& premise,
                            const ParseTree& hypothesis_tree, const EncodedTree& hypothesis,
                            TreeMode mode);

}  // namespace treeattn
