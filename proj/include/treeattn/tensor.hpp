#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "treeattn/kernels.hpp"

namespace treeattn {

/// Dense numeric array with an optional gradient buffer of the same length.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<Scalar> data;
  std::vector<Scalar> grad;  // empty until ensure_grad()

  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor vec(std::size_t n) { return zeros({n}); }
  static Tensor mat(std::size_t r, std::size_t c) { return zeros({r, c}); }
  static Tensor from(std::vector<Scalar> values);            // vector literal
  static Tensor from(std::vector<std::size_t> shape, std::vector<Scalar> values);

  std::size_t size() const { return data.size(); }
  bool is_vector() const { return shape.size() == 1; }
  bool is_matrix() const { return shape.size() == 2; }
  bool is_scalar() const { return size() == 1; }
  std::size_t rows() const;
  std::size_t cols() const;

  Scalar& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  Scalar at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  void ensure_grad();
  void zero_grad();

  std::string shape_str() const;
};

enum class Op {
  kInput,
  kParam,
  kEmbed,    // row of a parameter matrix
  kMatmul,
  kAdd,
  kSub,
  kHadamard,
  kTanh,
  kSigmoid,
  kScale,
  kSMul,  // scalar node times tensor node
  kConcat,
  kSlice,
  kSoftmax,
  kSum,
  kPick,
  kLog,
};

/// Append-only tape of operation records. Values are computed eagerly as
/// nodes are appended; backward() walks the tape in reverse. Inputs of a
/// record always precede it, so the tape is topologically ordered by
/// construction.
class Graph {
 public:
  using NodeId = std::size_t;

  NodeId input(Tensor value);
  NodeId param(Tensor& t);                       // grads flow into t.grad
  NodeId embed(Tensor& table, std::size_t row);  // grads flow into one row

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId hadamard(NodeId a, NodeId b);
  NodeId tanh(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId scale(NodeId a, Scalar c);
  NodeId smul(NodeId s, NodeId a);  // s scalar, a any shape
  NodeId concat(const std::vector<NodeId>& parts);
  NodeId slice(NodeId a, std::size_t offset, std::size_t len);
  NodeId softmax(NodeId a);
  NodeId sum(NodeId a);
  NodeId dot(NodeId a, NodeId b);
  NodeId pick(NodeId a, std::size_t index);
  NodeId log(NodeId a);  // log(max(x, 1e-30))

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Accumulates d(loss)/d(param) into every referenced parameter's grad
  /// buffer, scaled by seed (used for minibatch mean reduction).
  void backward(NodeId loss, Scalar seed = 1);

  // Test hook: perturbs the tanh backward rule so negative-control
  // gradient checks can verify the checker itself catches bad rules.
  static bool corrupt_tanh_backward;

 private:
  struct Node {
    Op op;
    std::vector<NodeId> inputs;
    Tensor value;
    Tensor* external = nullptr;  // kParam / kEmbed target
    std::size_t index = 0;       // kEmbed row / kSlice offset / kPick index
    Scalar factor = 1;           // kScale
  };

  NodeId push(Node node);
  const Tensor& val(NodeId id) const { return nodes_[id].value; }

  std::vector<Node> nodes_;
};

}  // namespace treeattn
