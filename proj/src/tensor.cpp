#include "treeattn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "treeattn/errors.hpp"

namespace treeattn {

bool Graph::corrupt_tanh_backward = false;

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  Tensor t;
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  t.shape = std::move(shape);
  t.data.assign(n, 0);
  return t;
}

Tensor Tensor::from(std::vector<Scalar> values) {
  Tensor t;
  t.shape = {values.size()};
  t.data = std::move(values);
  return t;
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<Scalar> values) {
  Tensor t = zeros(std::move(shape));
  if (t.data.size() != values.size()) {
    throw ShapeError("Tensor::from: " + std::to_string(values.size()) +
                     " values for shape " + t.shape_str());
  }
  t.data = std::move(values);
  return t;
}

std::size_t Tensor::rows() const { return shape.empty() ? 1 : shape[0]; }

std::size_t Tensor::cols() const {
  if (shape.size() >= 2) return shape[1];
  return 1;
}

void Tensor::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0);
}

void Tensor::zero_grad() {
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0);
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() +
                     " vs " + b.shape_str());
  }
}

constexpr Scalar kLogFloor = Scalar(1e-30);

}  // namespace

Graph::NodeId Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

Graph::NodeId Graph::input(Tensor value) {
  return push({Op::kInput, {}, std::move(value)});
}

Graph::NodeId Graph::param(Tensor& t) {
  Node n{Op::kParam, {}, t};
  n.external = &t;
  return push(std::move(n));
}

Graph::NodeId Graph::embed(Tensor& table, std::size_t row) {
  if (!table.is_matrix() || row >= table.rows()) {
    throw ShapeError("embed: row " + std::to_string(row) + " out of table " +
                     table.shape_str());
  }
  std::size_t e = table.cols();
  Tensor v = Tensor::vec(e);
  std::copy_n(table.data.begin() + row * e, e, v.data.begin());
  Node n{Op::kEmbed, {}, std::move(v)};
  n.external = &table;
  n.index = row;
  return push(std::move(n));
}

Graph::NodeId Graph::matmul(NodeId a, NodeId b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  if (!A.is_matrix()) {
    throw ShapeError("matmul: left operand must be a matrix, got " + A.shape_str());
  }
  std::size_t m = A.rows(), k = A.cols();
  std::size_t bk = B.rows(), n = B.cols();
  if (k != bk) {
    throw ShapeError("matmul: inner dimensions disagree " + A.shape_str() +
                     " vs " + B.shape_str());
  }
  Tensor C = B.is_vector() ? Tensor::vec(m) : Tensor::mat(m, n);
  kernels::matmul(m, n, k, A.data.data(), false, B.data.data(), false,
                  C.data.data(), false);
  return push({Op::kMatmul, {a, b}, std::move(C)});
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require_same_shape("add", A, B);
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.data[i] += B.data[i];
  return push({Op::kAdd, {a, b}, std::move(C)});
}

Graph::NodeId Graph::sub(NodeId a, NodeId b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require_same_shape("sub", A, B);
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.data[i] -= B.data[i];
  return push({Op::kSub, {a, b}, std::move(C)});
}

Graph::NodeId Graph::hadamard(NodeId a, NodeId b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require_same_shape("hadamard", A, B);
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.data[i] *= B.data[i];
  return push({Op::kHadamard, {a, b}, std::move(C)});
}

Graph::NodeId Graph::tanh(NodeId a) {
  const Tensor& A = val(a);
  Tensor C = A;
  kernels::tanh_serial(C.size(), A.data.data(), C.data.data());
  return push({Op::kTanh, {a}, std::move(C)});
}

Graph::NodeId Graph::sigmoid(NodeId a) {
  const Tensor& A = val(a);
  Tensor C = A;
  kernels::sigmoid_serial(C.size(), A.data.data(), C.data.data());
  return push({Op::kSigmoid, {a}, std::move(C)});
}

Graph::NodeId Graph::scale(NodeId a, Scalar c) {
  Tensor C = val(a);
  for (Scalar& v : C.data) v *= c;
  Node n{Op::kScale, {a}, std::move(C)};
  n.factor = c;
  return push(std::move(n));
}

Graph::NodeId Graph::smul(NodeId s, NodeId a) {
  const Tensor& S = val(s);
  if (!S.is_scalar()) {
    throw ShapeError("smul: left operand must be scalar, got " + S.shape_str());
  }
  Tensor C = val(a);
  for (Scalar& v : C.data) v *= S.data[0];
  return push({Op::kSMul, {s, a}, std::move(C)});
}

Graph::NodeId Graph::concat(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw ShapeError("concat: empty part list");
  std::size_t total = 0;
  for (NodeId p : parts) {
    if (!val(p).is_vector()) {
      throw ShapeError("concat: all parts must be vectors, got " +
                       val(p).shape_str());
    }
    total += val(p).size();
  }
  Tensor C = Tensor::vec(total);
  std::size_t off = 0;
  for (NodeId p : parts) {
    const Tensor& v = val(p);
    std::copy(v.data.begin(), v.data.end(), C.data.begin() + off);
    off += v.size();
  }
  return push({Op::kConcat, parts, std::move(C)});
}

Graph::NodeId Graph::slice(NodeId a, std::size_t offset, std::size_t len) {
  const Tensor& A = val(a);
  if (!A.is_vector() || offset + len > A.size()) {
    throw ShapeError("slice: [" + std::to_string(offset) + ", " +
                     std::to_string(offset + len) + ") out of " + A.shape_str());
  }
  Tensor C = Tensor::vec(len);
  std::copy_n(A.data.begin() + offset, len, C.data.begin());
  Node n{Op::kSlice, {a}, std::move(C)};
  n.index = offset;
  return push(std::move(n));
}

Graph::NodeId Graph::softmax(NodeId a) {
  const Tensor& A = val(a);
  if (A.size() == 0) throw ShapeError("softmax: empty input");
  Tensor C = A;
  Scalar mx = *std::max_element(A.data.begin(), A.data.end());
  Scalar z = 0;
  for (std::size_t i = 0; i < C.size(); ++i) {
    C.data[i] = std::exp(A.data[i] - mx);
    z += C.data[i];
  }
  for (Scalar& v : C.data) v /= z;
  return push({Op::kSoftmax, {a}, std::move(C)});
}

Graph::NodeId Graph::sum(NodeId a) {
  const Tensor& A = val(a);
  Tensor C = Tensor::vec(1);
  C.data[0] = std::accumulate(A.data.begin(), A.data.end(), Scalar(0));
  return push({Op::kSum, {a}, std::move(C)});
}

Graph::NodeId Graph::dot(NodeId a, NodeId b) { return sum(hadamard(a, b)); }

Graph::NodeId Graph::pick(NodeId a, std::size_t index) {
  const Tensor& A = val(a);
  if (index >= A.size()) {
    throw ShapeError("pick: index " + std::to_string(index) + " out of " +
                     A.shape_str());
  }
  Tensor C = Tensor::vec(1);
  C.data[0] = A.data[index];
  Node n{Op::kPick, {a}, std::move(C)};
  n.index = index;
  return push(std::move(n));
}

Graph::NodeId Graph::log(NodeId a) {
  const Tensor& A = val(a);
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) {
    C.data[i] = std::log(std::max(A.data[i], kLogFloor));
  }
  return push({Op::kLog, {a}, std::move(C)});
}

void Graph::backward(NodeId loss, Scalar seed) {
  if (!val(loss).is_scalar()) {
    throw ShapeError("backward: loss must be scalar, got " +
                     val(loss).shape_str());
  }
  std::vector<std::vector<Scalar>> grads(nodes_.size());
  auto g = [&](NodeId id) -> std::vector<Scalar>& {
    if (grads[id].empty()) grads[id].assign(nodes_[id].value.size(), 0);
    return grads[id];
  };
  g(loss)[0] = seed;

  for (std::size_t idx = nodes_.size(); idx-- > 0;) {
    if (grads[idx].empty()) continue;  // node does not influence the loss
    const Node& n = nodes_[idx];
    const std::vector<Scalar>& gy = grads[idx];
    switch (n.op) {
      case Op::kInput:
        break;
      case Op::kParam: {
        n.external->ensure_grad();
        for (std::size_t i = 0; i < gy.size(); ++i) n.external->grad[i] += gy[i];
        break;
      }
      case Op::kEmbed: {
        n.external->ensure_grad();
        std::size_t e = n.external->cols();
        for (std::size_t i = 0; i < e; ++i) {
          n.external->grad[n.index * e + i] += gy[i];
        }
        break;
      }
      case Op::kMatmul: {
        const Tensor& A = val(n.inputs[0]);
        const Tensor& B = val(n.inputs[1]);
        std::size_t m = A.rows(), k = A.cols(), nc = B.cols();
        // dA += dC * B^T ; dB += A^T * dC
        kernels::matmul(m, k, nc, gy.data(), false, B.data.data(), true,
                        g(n.inputs[0]).data(), true);
        kernels::matmul(k, nc, m, A.data.data(), true, gy.data(), false,
                        g(n.inputs[1]).data(), true);
        break;
      }
      case Op::kAdd: {
        auto& ga = g(n.inputs[0]);
        auto& gb = g(n.inputs[1]);
        for (std::size_t i = 0; i < gy.size(); ++i) {
          ga[i] += gy[i];
          gb[i] += gy[i];
        }
        break;
      }
      case Op::kSub: {
        auto& ga = g(n.inputs[0]);
        auto& gb = g(n.inputs[1]);
        for (std::size_t i = 0; i < gy.size(); ++i) {
          ga[i] += gy[i];
          gb[i] -= gy[i];
        }
        break;
      }
      case Op::kHadamard: {
        const Tensor& A = val(n.inputs[0]);
        const Tensor& B = val(n.inputs[1]);
        auto& ga = g(n.inputs[0]);
        auto& gb = g(n.inputs[1]);
        for (std::size_t i = 0; i < gy.size(); ++i) {
          ga[i] += gy[i] * B.data[i];
          gb[i] += gy[i] * A.data[i];
        }
        break;
      }
      case Op::kTanh: {
        auto& ga = g(n.inputs[0]);
        Scalar tilt = corrupt_tanh_backward ? Scalar(0.01) : Scalar(0);
        for (std::size_t i = 0; i < gy.size(); ++i) {
          Scalar y = n.value.data[i];
          ga[i] += gy[i] * (1 - y * y + tilt);
        }
        break;
      }
      case Op::kSigmoid: {
        auto& ga = g(n.inputs[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) {
          Scalar y = n.value.data[i];
          ga[i] += gy[i] * y * (1 - y);
        }
        break;
      }
      case Op::kScale: {
        auto& ga = g(n.inputs[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * n.factor;
        break;
      }
      case Op::kSMul: {
        const Tensor& S = val(n.inputs[0]);
        const Tensor& A = val(n.inputs[1]);
        auto& gs = g(n.inputs[0]);
        auto& ga = g(n.inputs[1]);
        for (std::size_t i = 0; i < gy.size(); ++i) {
          gs[0] += gy[i] * A.data[i];
          ga[i] += gy[i] * S.data[0];
        }
        break;
      }
      case Op::kConcat: {
        std::size_t off = 0;
        for (NodeId p : n.inputs) {
          auto& gp = g(p);
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += gy[off + i];
          off += gp.size();
        }
        break;
      }
      case Op::kSlice: {
        auto& ga = g(n.inputs[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) ga[n.index + i] += gy[i];
        break;
      }
      case Op::kSoftmax: {
        auto& ga = g(n.inputs[0]);
        Scalar inner = 0;
        for (std::size_t i = 0; i < gy.size(); ++i) inner += gy[i] * n.value.data[i];
        for (std::size_t i = 0; i < gy.size(); ++i) {
          ga[i] += n.value.data[i] * (gy[i] - inner);
        }
        break;
      }
      case Op::kSum: {
        auto& ga = g(n.inputs[0]);
        for (Scalar& v : ga) v += gy[0];
        break;
      }
      case Op::kPick: {
        g(n.inputs[0])[n.index] += gy[0];
        break;
      }
      case Op::kLog: {
        const Tensor& A = val(n.inputs[0]);
        auto& ga = g(n.inputs[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) {
          ga[i] += gy[i] / std::max(A.data[i], kLogFloor);
        }
        break;
      }
    }
  }
}

}  // namespace treeattn
