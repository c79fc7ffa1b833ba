#pragma once
// Tape-based reverse-mode differentiation over dense tensors.
//
// A Tape records primitive ops as they execute (eager forward), forming a
// DAG in topological order. backward() walks the recorded nodes in reverse
// and accumulates parameter gradients into a GradMap. Parameter leaves
// reference tensors owned by a ParameterStore; everything else is owned by
// the tape node that produced it.
//
// Gradient flow is skipped over subgraphs that cannot reach a parameter
// (requires_grad propagation), which keeps detached targets cheap.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "fms/kernels.hpp"
#include "fms/tensor.hpp"

namespace fms {

// Ordered name -> gradient tensor map. Iteration follows first-insertion
// order so reductions are deterministic.
template <typename T>
class GradMap {
 public:
  Tensor<T>& get_or_create(const std::string& name, const Shape& shape) {
    auto it = index_.find(name);
    if (it != index_.end()) return entries_[it->second].second;
    index_.emplace(name, entries_.size());
    entries_.emplace_back(name, Tensor<T>::zeros(shape));
    return entries_.back().second;
  }

  Tensor<T>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &entries_[it->second].second;
  }
  const Tensor<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &entries_[it->second].second;
  }

  void zero() {
    for (auto& [name, t] : entries_) t.fill(T(0));
  }

  size_t size() const { return entries_.size(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
  std::unordered_map<std::string, size_t> index_;
};

template <typename T>
class Tape {
 public:
  using Id = int32_t;

  enum class Op : uint8_t {
    kConstant,
    kParam,
    kMatMul,
    kAdd,
    kAddRowVec,
    kMul,
    kScale,
    kRowScale,
    kConcatCols,
    kRelu,
    kSigmoid,
    kExp,
    kSoftmaxRows,
    kMeanRows,
    kSquaredError,
    kCrossEntropyLogits,
    kL2Penalty,
    kGatherRows,
    kSegmentMean,
    kHeadwiseGate,
    kReshape,
  };

  // ---- leaves ----

  Id constant(Tensor<T> v) {
    Node n;
    n.op = Op::kConstant;
    n.own = std::move(v);
    n.requires_grad = false;
    return push(std::move(n));
  }

  // Named parameter leaf; `t` must outlive the tape (it lives in a
  // ParameterStore). Gradients for it accumulate under `name`.
  Id param(const std::string& name, const Tensor<T>& t) {
    Node n;
    n.op = Op::kParam;
    n.ref = &t;
    n.pname = name;
    n.requires_grad = true;
    return push(std::move(n));
  }

  // ---- primitives ----

  Id matmul(Id a, Id b) {
    const Tensor<T>& A = value(a);
    const Tensor<T>& B = value(b);
    if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0))
      fail("matmul", A, B);
    Tensor<T> out({A.dim(0), B.dim(1)});
    kernels::matmul(A.data(), B.data(), out.data(), A.dim(0), A.dim(1), B.dim(1));
    return record(Op::kMatMul, a, b, std::move(out));
  }

  Id add(Id a, Id b) {
    const Tensor<T>& A = value(a);
    const Tensor<T>& B = value(b);
    if (A.shape() == B.shape()) {
      Tensor<T> out(A.shape());
      const int64_t n = A.numel();
      for (int64_t i = 0; i < n; ++i) out[i] = A[i] + B[i];
      return record(Op::kAdd, a, b, std::move(out));
    }
    // row-vector bias broadcast: [n,m] + [m]
    if (A.rank() == 2 && B.rank() == 1 && A.dim(1) == B.dim(0)) {
      Tensor<T> out(A.shape());
      const int64_t n = A.dim(0), m = A.dim(1);
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j) out[i * m + j] = A[i * m + j] + B[j];
      return record(Op::kAddRowVec, a, b, std::move(out));
    }
    fail("add", A, B);
  }

  Id mul(Id a, Id b) {
    const Tensor<T>& A = value(a);
    const Tensor<T>& B = value(b);
    if (A.shape() != B.shape()) fail("mul", A, B);
    Tensor<T> out(A.shape());
    const int64_t n = A.numel();
    for (int64_t i = 0; i < n; ++i) out[i] = A[i] * B[i];
    return record(Op::kMul, a, b, std::move(out));
  }

  Id scale(Id a, T k) {
    const Tensor<T>& A = value(a);
    Tensor<T> out(A.shape());
    const int64_t n = A.numel();
    for (int64_t i = 0; i < n; ++i) out[i] = A[i] * k;
    Id id = record(Op::kScale, a, -1, std::move(out));
    nodes_[static_cast<size_t>(id)].aux_scalar = k;
    return id;
  }

  // y[i,:] = w[i] * a[i,:] with constant (non-differentiated) weights.
  Id row_scale(Id a, std::vector<T> w) {
    const Tensor<T>& A = as_rows("row_scale", a);
    const int64_t n = A.dim(0), m = A.dim(1);
    if (static_cast<int64_t>(w.size()) != n)
      throw ShapeError("row_scale: " + std::to_string(w.size()) + " weights for " +
                       std::to_string(n) + " rows");
    Tensor<T> out(A.shape());
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < m; ++j) out[i * m + j] = A[i * m + j] * w[static_cast<size_t>(i)];
    Id id = record(Op::kRowScale, a, -1, std::move(out));
    Tensor<T> wt({n});
    for (int64_t i = 0; i < n; ++i) wt[i] = w[static_cast<size_t>(i)];
    nodes_[static_cast<size_t>(id)].aux_tensor = std::move(wt);
    return id;
  }

  Id concat_cols(Id a, Id b) {
    const Tensor<T>& A = value(a);
    const Tensor<T>& B = value(b);
    if (A.rank() != 2 || B.rank() != 2 || A.dim(0) != B.dim(0)) fail("concat", A, B);
    const int64_t n = A.dim(0), p = A.dim(1), q = B.dim(1);
    Tensor<T> out({n, p + q});
    for (int64_t i = 0; i < n; ++i) {
      T* o = out.data() + i * (p + q);
      const T* ai = A.data() + i * p;
      const T* bi = B.data() + i * q;
      for (int64_t j = 0; j < p; ++j) o[j] = ai[j];
      for (int64_t j = 0; j < q; ++j) o[p + j] = bi[j];
    }
    return record(Op::kConcatCols, a, b, std::move(out));
  }

  Id relu(Id a) {
    const Tensor<T>& A = value(a);
    Tensor<T> out(A.shape());
    kernels::relu(A.data(), out.data(), A.numel());
    return record(Op::kRelu, a, -1, std::move(out));
  }

  Id sigmoid(Id a) {
    const Tensor<T>& A = value(a);
    Tensor<T> out(A.shape());
    kernels::sigmoid(A.data(), out.data(), A.numel());
    return record(Op::kSigmoid, a, -1, std::move(out));
  }

  Id exp(Id a) {
    const Tensor<T>& A = value(a);
    Tensor<T> out(A.shape());
    const int64_t n = A.numel();
    for (int64_t i = 0; i < n; ++i) out[i] = std::exp(A[i]);
    return record(Op::kExp, a, -1, std::move(out));
  }

  Id softmax_rows(Id a) {
    const Tensor<T>& A = as_rows("softmax_rows", a);
    Tensor<T> out(A.shape());
    kernels::softmax_rows(A.data(), out.data(), A.rows(), A.cols());
    return record(Op::kSoftmaxRows, a, -1, std::move(out));
  }

  // [n,m] -> [m], arithmetic mean over rows.
  Id mean_rows(Id a) {
    const Tensor<T>& A = as_rows("mean_rows", a);
    const int64_t n = A.rows(), m = A.cols();
    Tensor<T> out({m});
    if (n > 0) {
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j) out[j] += A[i * m + j];
      const T inv = T(1) / static_cast<T>(n);
      for (int64_t j = 0; j < m; ++j) out[j] *= inv;
    }
    return record(Op::kMeanRows, a, -1, std::move(out));
  }

  // Scalar: mean over rows of the squared L2 row distance between a and b.
  Id squared_error(Id a, Id b) {
    const Tensor<T>& A = value(a);
    const Tensor<T>& B = value(b);
    if (A.shape() != B.shape()) fail("squared_error", A, B);
    const int64_t rows = A.rank() == 2 ? A.dim(0) : 1;
    if (rows == 0) throw ShapeError("squared_error: empty batch");
    T acc = T(0);
    const int64_t n = A.numel();
    for (int64_t i = 0; i < n; ++i) {
      const T d = A[i] - B[i];
      acc += d * d;
    }
    return record(Op::kSquaredError, a, b, Tensor<T>::scalar(acc / static_cast<T>(rows)));
  }

  // Scalar: mean over rows of (logsumexp(row) - row[target]).
  Id cross_entropy_with_logits(Id logits, std::vector<int64_t> targets) {
    const Tensor<T>& L = as_rows("cross_entropy_with_logits", logits);
    const int64_t n = L.rows(), m = L.cols();
    if (static_cast<int64_t>(targets.size()) != n)
      throw ShapeError("cross_entropy_with_logits: " + std::to_string(targets.size()) +
                       " targets for " + std::to_string(n) + " rows");
    if (n == 0) throw ShapeError("cross_entropy_with_logits: empty batch");
    Tensor<T> sm(L.shape());
    kernels::softmax_rows(L.data(), sm.data(), n, m);
    T acc = T(0);
    for (int64_t i = 0; i < n; ++i) {
      const int64_t t = targets[static_cast<size_t>(i)];
      if (t < 0 || t >= m)
        throw ShapeError("cross_entropy_with_logits: target out of range");
      // -log softmax[t], recomputed stably from logits
      const T* li = L.data() + i * m;
      T mx = li[0];
      for (int64_t j = 1; j < m; ++j) mx = li[j] > mx ? li[j] : mx;
      T sum = T(0);
      for (int64_t j = 0; j < m; ++j) sum += std::exp(li[j] - mx);
      acc += std::log(sum) + mx - li[t];
    }
    Id id = record(Op::kCrossEntropyLogits, logits, -1,
                   Tensor<T>::scalar(acc / static_cast<T>(n)));
    Node& nd = nodes_[static_cast<size_t>(id)];
    nd.aux_tensor = std::move(sm);
    nd.aux_idx = std::move(targets);
    return id;
  }

  // Scalar: sum of squared L2 norms of the given tensors.
  Id l2_penalty(const std::vector<Id>& ids) {
    T acc = T(0);
    for (Id a : ids) {
      const Tensor<T>& A = value(a);
      const int64_t n = A.numel();
      for (int64_t i = 0; i < n; ++i) acc += A[i] * A[i];
    }
    Node n;
    n.op = Op::kL2Penalty;
    n.own = Tensor<T>::scalar(acc);
    n.aux_ids = ids;
    for (Id a : ids) n.requires_grad = n.requires_grad || nodes_[static_cast<size_t>(a)].requires_grad;
    return push(std::move(n));
  }

  Id gather_rows(Id src, std::vector<int64_t> idx) {
    const Tensor<T>& S = as_rows("gather_rows", src);
    const int64_t m = S.cols();
    const int64_t k = static_cast<int64_t>(idx.size());
    for (int64_t i : idx)
      if (i < 0 || i >= S.rows()) throw ShapeError("gather_rows: index out of range");
    Tensor<T> out({k, m});
    kernels::gather_rows(S.data(), idx.data(), out.data(), k, m);
    Id id = record(Op::kGatherRows, src, -1, std::move(out));
    nodes_[static_cast<size_t>(id)].aux_idx = std::move(idx);
    return id;
  }

  // offsets has n_seg+1 entries; rows [offsets[s], offsets[s+1]) form segment s.
  Id segment_mean(Id src, std::vector<int64_t> offsets) {
    const Tensor<T>& S = as_rows("segment_mean", src);
    if (offsets.empty() || offsets.front() != 0 || offsets.back() != S.rows())
      throw ShapeError("segment_mean: offsets must span all " + std::to_string(S.rows()) +
                       " rows");
    const int64_t n_seg = static_cast<int64_t>(offsets.size()) - 1;
    Tensor<T> out({n_seg, S.cols()});
    kernels::segment_mean(S.data(), offsets.data(), out.data(), n_seg, S.cols());
    Id id = record(Op::kSegmentMean, src, -1, std::move(out));
    nodes_[static_cast<size_t>(id)].aux_idx = std::move(offsets);
    return id;
  }

  // Per row and head h (d split into H contiguous blocks of d_h = d/H):
  //   gate_h = sigmoid(<a_h, c_h> / sqrt(d_h));  out_h = a_h + gate_h * c_h
  Id headwise_gate(Id a, Id c, int64_t heads) {
    const Tensor<T>& A = value(a);
    const Tensor<T>& C = value(c);
    if (A.rank() != 2 || A.shape() != C.shape()) fail("headwise_gate", A, C);
    const int64_t n = A.dim(0), d = A.dim(1);
    if (heads < 1 || d % heads != 0)
      throw ShapeError("headwise_gate: dim " + std::to_string(d) +
                       " not divisible by heads " + std::to_string(heads));
    const int64_t dh = d / heads;
    const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
    Tensor<T> out({n, d});
    Tensor<T> gates({n, heads});
    for (int64_t i = 0; i < n; ++i) {
      const T* ai = A.data() + i * d;
      const T* ci = C.data() + i * d;
      T* oi = out.data() + i * d;
      for (int64_t h = 0; h < heads; ++h) {
        const int64_t off = h * dh;
        T dot = T(0);
        for (int64_t j = 0; j < dh; ++j) dot += ai[off + j] * ci[off + j];
        const T g = T(1) / (T(1) + std::exp(-dot * inv_sqrt));
        gates[i * heads + h] = g;
        for (int64_t j = 0; j < dh; ++j) oi[off + j] = ai[off + j] + g * ci[off + j];
      }
    }
    Id id = record(Op::kHeadwiseGate, a, c, std::move(out));
    Node& nd = nodes_[static_cast<size_t>(id)];
    nd.aux_tensor = std::move(gates);
    nd.aux_scalar = static_cast<T>(heads);
    return id;
  }

  Id reshape(Id a, Shape shape) {
    const Tensor<T>& A = value(a);
    if (shape_numel(shape) != A.numel())
      throw ShapeError("reshape: numel mismatch " + shape_str(A.shape()) + " -> " +
                       shape_str(shape));
    Tensor<T> out(std::move(shape), A.vec());
    return record(Op::kReshape, a, -1, std::move(out));
  }

  // ---- access ----

  const Tensor<T>& value(Id id) const {
    const Node& n = nodes_.at(static_cast<size_t>(id));
    return n.ref ? *n.ref : n.own;
  }

  bool requires_grad(Id id) const { return nodes_.at(static_cast<size_t>(id)).requires_grad; }

  size_t size() const { return nodes_.size(); }

  void reset() { nodes_.clear(); }

  // ---- reverse pass ----

  // Accumulates d(loss)/d(param) into `grads` for every parameter leaf the
  // loss can reach. Unreached parameters keep their existing entries.
  void backward(Id loss, GradMap<T>& grads) const {
    const Node& ln = nodes_.at(static_cast<size_t>(loss));
    if ((ln.ref ? ln.ref->numel() : ln.own.numel()) != 1)
      throw ShapeError("backward: loss must be scalar");

    const size_t n_nodes = nodes_.size();
    std::vector<char> reach(n_nodes, 0);
    std::vector<Id> stack{loss};
    while (!stack.empty()) {
      const Id id = stack.back();
      stack.pop_back();
      if (reach[static_cast<size_t>(id)]) continue;
      const Node& nd = nodes_[static_cast<size_t>(id)];
      if (!nd.requires_grad) continue;
      reach[static_cast<size_t>(id)] = 1;
      if (nd.a >= 0) stack.push_back(nd.a);
      if (nd.b >= 0) stack.push_back(nd.b);
      for (Id x : nd.aux_ids) stack.push_back(x);
    }

    std::vector<Tensor<T>> grad(n_nodes);
    auto g = [&](Id id) -> Tensor<T>& {
      Tensor<T>& t = grad[static_cast<size_t>(id)];
      if (t.numel() == 0 && value(id).numel() != 0) t = Tensor<T>::zeros(value(id).shape());
      return t;
    };
    if (!reach[static_cast<size_t>(loss)]) return;  // loss depends on no parameter
    g(loss).fill(T(1));

    for (Id id = loss; id >= 0; --id) {
      if (!reach[static_cast<size_t>(id)]) continue;
      const Node& nd = nodes_[static_cast<size_t>(id)];
      Tensor<T>& go = g(id);
      backward_op(id, nd, go, g, grads);
    }
  }

 private:
  struct Node {
    Op op = Op::kConstant;
    Id a = -1, b = -1;
    Tensor<T> own;
    const Tensor<T>* ref = nullptr;
    Tensor<T> aux_tensor;          // cached softmax / gates
    std::vector<int64_t> aux_idx;  // gather indices / offsets / targets
    std::vector<Id> aux_ids;       // l2 penalty inputs
    T aux_scalar = T(0);
    std::string pname;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;

  Id push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  Id record(Op op, Id a, Id b, Tensor<T> out) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.own = std::move(out);
    n.requires_grad = (a >= 0 && nodes_[static_cast<size_t>(a)].requires_grad) ||
                      (b >= 0 && nodes_[static_cast<size_t>(b)].requires_grad);
    return push(std::move(n));
  }

  const Tensor<T>& as_rows(const char* op, Id a) const {
    const Tensor<T>& A = value(a);
    if (A.rank() != 2) throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " +
                                        shape_str(A.shape()));
    return A;
  }

  [[noreturn]] void fail(const char* op, const Tensor<T>& A, const Tensor<T>& B) const {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(A.shape()) +
                     " and " + shape_str(B.shape()));
  }

  template <typename GetGrad>
  void backward_op(Id id, const Node& nd, Tensor<T>& go, GetGrad& g, GradMap<T>& grads) const {
    auto in_rg = [&](Id x) {
      return x >= 0 && nodes_[static_cast<size_t>(x)].requires_grad;
    };
    switch (nd.op) {
      case Op::kConstant:
        break;
      case Op::kParam: {
        Tensor<T>& acc = grads.get_or_create(nd.pname, value(id).shape());
        const int64_t n = go.numel();
        for (int64_t i = 0; i < n; ++i) acc[i] += go[i];
        break;
      }
      case Op::kMatMul: {
        const Tensor<T>& A = value(nd.a);
        const Tensor<T>& B = value(nd.b);
        const int64_t n = A.dim(0), k = A.dim(1), m = B.dim(1);
        if (in_rg(nd.a)) {
          Tensor<T> da({n, k});
          kernels::matmul_nt(go.data(), B.data(), da.data(), n, m, k);
          axpy(g(nd.a), da);
        }
        if (in_rg(nd.b)) {
          Tensor<T> db({k, m});
          kernels::matmul_tn(A.data(), go.data(), db.data(), n, k, m);
          axpy(g(nd.b), db);
        }
        break;
      }
      case Op::kAdd: {
        if (in_rg(nd.a)) axpy(g(nd.a), go);
        if (in_rg(nd.b)) axpy(g(nd.b), go);
        break;
      }
      case Op::kAddRowVec: {
        if (in_rg(nd.a)) axpy(g(nd.a), go);
        if (in_rg(nd.b)) {
          Tensor<T>& gb = g(nd.b);
          const int64_t n = go.dim(0), m = go.dim(1);
          for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < m; ++j) gb[j] += go[i * m + j];
        }
        break;
      }
      case Op::kMul: {
        const Tensor<T>& A = value(nd.a);
        const Tensor<T>& B = value(nd.b);
        const int64_t n = go.numel();
        if (in_rg(nd.a)) {
          Tensor<T>& ga = g(nd.a);
          for (int64_t i = 0; i < n; ++i) ga[i] += go[i] * B[i];
        }
        if (in_rg(nd.b)) {
          Tensor<T>& gb = g(nd.b);
          for (int64_t i = 0; i < n; ++i) gb[i] += go[i] * A[i];
        }
        break;
      }
      case Op::kScale: {
        if (in_rg(nd.a)) {
          Tensor<T>& ga = g(nd.a);
          const int64_t n = go.numel();
          for (int64_t i = 0; i < n; ++i) ga[i] += go[i] * nd.aux_scalar;
        }
        break;
      }
      case Op::kRowScale: {
        if (in_rg(nd.a)) {
          Tensor<T>& ga = g(nd.a);
          const Tensor<T>& W = nd.aux_tensor;
          const int64_t n = go.dim(0), m = go.dim(1);
          for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < m; ++j) ga[i * m + j] += go[i * m + j] * W[i];
        }
        break;
      }
      case Op::kConcatCols: {
        const int64_t n = go.dim(0);
        const int64_t p = value(nd.a).dim(1), q = value(nd.b).dim(1);
        if (in_rg(nd.a)) {
          Tensor<T>& ga = g(nd.a);
          for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < p; ++j) ga[i * p + j] += go[i * (p + q) + j];
        }
        if (in_rg(nd.b)) {
          Tensor<T>& gb = g(nd.b);
          for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < q; ++j) gb[i * q + j] += go[i * (p + q) + p + j];
        }
        break;
      }
      case Op::kRelu: {
        if (in_rg(nd.a)) {
          const Tensor<T>& X = value(nd.a);
          Tensor<T>& ga = g(nd.a);
          const int64_t n = go.numel();
          for (int64_t i = 0; i < n; ++i)
            if (X[i] > T(0)) ga[i] += go[i];
        }
        break;
      }
      case Op::kSigmoid: {
        if (in_rg(nd.a)) {
          const Tensor<T>& Y = value(id);
          Tensor<T>& ga = g(nd.a);
          const int64_t n = go.numel();
          for (int64_t i = 0; i < n; ++i) ga[i] += go[i] * Y[i] * (T(1) - Y[i]);
        }
        break;
      }
      case Op::kExp: {
        if (in_rg(nd.a)) {
          const Tensor<T>& Y = value(id);
          Tensor<T>& ga = g(nd.a);
          const int64_t n = go.numel();
          for (int64_t i = 0; i < n; ++i) ga[i] += go[i] * Y[i];
        }
        break;
      }
      case Op::kSoftmaxRows: {
        if (in_rg(nd.a)) {
          const Tensor<T>& Y = value(id);
          Tensor<T>& ga = g(nd.a);
          const int64_t n = Y.dim(0), m = Y.dim(1);
          for (int64_t i = 0; i < n; ++i) {
            const T* yi = Y.data() + i * m;
            const T* gi = go.data() + i * m;
            T dot = T(0);
            for (int64_t j = 0; j < m; ++j) dot += gi[j] * yi[j];
            for (int64_t j = 0; j < m; ++j) ga[i * m + j] += (gi[j] - dot) * yi[j];
          }
        }
        break;
      }
      case Op::kMeanRows: {
        if (in_rg(nd.a)) {
          const Tensor<T>& X = value(nd.a);
          const int64_t n = X.dim(0), m = X.dim(1);
          if (n > 0) {
            Tensor<T>& ga = g(nd.a);
            const T inv = T(1) / static_cast<T>(n);
            for (int64_t i = 0; i < n; ++i)
              for (int64_t j = 0; j < m; ++j) ga[i * m + j] += go[j] * inv;
          }
        }
        break;
      }
      case Op::kSquaredError: {
        const Tensor<T>& A = value(nd.a);
        const Tensor<T>& B = value(nd.b);
        const int64_t rows = A.rank() == 2 ? A.dim(0) : 1;
        const T scale = go[0] * T(2) / static_cast<T>(rows);
        const int64_t n = A.numel();
        if (in_rg(nd.a)) {
          Tensor<T>& ga = g(nd.a);
          for (int64_t i = 0; i < n; ++i) ga[i] += scale * (A[i] - B[i]);
        }
        if (in_rg(nd.b)) {
          Tensor<T>& gb = g(nd.b);
          for (int64_t i = 0; i < n; ++i) gb[i] -= scale * (A[i] - B[i]);
        }
        break;
      }
      case Op::kCrossEntropyLogits: {
        if (in_rg(nd.a)) {
          const Tensor<T>& SM = nd.aux_tensor;
          const int64_t n = SM.dim(0), m = SM.dim(1);
          const T scale = go[0] / static_cast<T>(n);
          Tensor<T>& ga = g(nd.a);
          for (int64_t i = 0; i < n; ++i) {
            const int64_t t = nd.aux_idx[static_cast<size_t>(i)];
            for (int64_t j = 0; j < m; ++j) {
              T v = SM[i * m + j];
              if (j == t) v -= T(1);
              ga[i * m + j] += scale * v;
            }
          }
        }
        break;
      }
      case Op::kL2Penalty: {
        const T scale = go[0] * T(2);
        for (Id x : nd.aux_ids) {
          if (!in_rg(x)) continue;
          const Tensor<T>& P = value(x);
          Tensor<T>& gx = g(x);
          const int64_t n = P.numel();
          for (int64_t i = 0; i < n; ++i) gx[i] += scale * P[i];
        }
        break;
      }
      case Op::kGatherRows: {
        if (in_rg(nd.a)) {
          const int64_t m = value(id).dim(1);
          kernels::scatter_add_rows(go.data(), nd.aux_idx.data(), g(nd.a).data(),
                                    static_cast<int64_t>(nd.aux_idx.size()), m);
        }
        break;
      }
      case Op::kSegmentMean: {
        if (in_rg(nd.a)) {
          Tensor<T>& ga = g(nd.a);
          const int64_t m = value(id).dim(1);
          const auto& off = nd.aux_idx;
          const int64_t n_seg = static_cast<int64_t>(off.size()) - 1;
          for (int64_t s = 0; s < n_seg; ++s) {
            const int64_t lo = off[static_cast<size_t>(s)];
            const int64_t hi = off[static_cast<size_t>(s) + 1];
            if (hi == lo) continue;
            const T inv = T(1) / static_cast<T>(hi - lo);
            const T* gs = go.data() + s * m;
            for (int64_t r = lo; r < hi; ++r)
              for (int64_t j = 0; j < m; ++j) ga[r * m + j] += gs[j] * inv;
          }
        }
        break;
      }
      case Op::kHeadwiseGate: {
        const Tensor<T>& A = value(nd.a);
        const Tensor<T>& C = value(nd.b);
        const Tensor<T>& G = nd.aux_tensor;
        const int64_t heads = static_cast<int64_t>(nd.aux_scalar);
        const int64_t n = A.dim(0), d = A.dim(1), dh = d / heads;
        const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
        const bool wa = in_rg(nd.a), wc = in_rg(nd.b);
        Tensor<T>* ga = wa ? &g(nd.a) : nullptr;
        Tensor<T>* gc = wc ? &g(nd.b) : nullptr;
        for (int64_t i = 0; i < n; ++i) {
          const T* ai = A.data() + i * d;
          const T* ci = C.data() + i * d;
          const T* gi = go.data() + i * d;
          for (int64_t h = 0; h < heads; ++h) {
            const int64_t off = h * dh;
            const T gt = G[i * heads + h];
            T doc = T(0);  // <go, c> over this head
            for (int64_t j = 0; j < dh; ++j) doc += gi[off + j] * ci[off + j];
            const T gp = gt * (T(1) - gt) * inv_sqrt * doc;  // d gate premultiplied
            if (wa)
              for (int64_t j = 0; j < dh; ++j)
                (*ga)[i * d + off + j] += gi[off + j] + gp * ci[off + j];
            if (wc)
              for (int64_t j = 0; j < dh; ++j)
                (*gc)[i * d + off + j] += gt * gi[off + j] + gp * ai[off + j];
          }
        }
        break;
      }
      case Op::kReshape: {
        if (in_rg(nd.a)) {
          Tensor<T>& ga = g(nd.a);
          const int64_t n = go.numel();
          for (int64_t i = 0; i < n; ++i) ga[i] += go[i];
        }
        break;
      }
    }
  }

  static void axpy(Tensor<T>& dst, const Tensor<T>& src) {
    const int64_t n = src.numel();
    for (int64_t i = 0; i < n; ++i) dst[i] += src[i];
  }
};

using Tapef = Tape<float>;
using Taped = Tape<double>;

}  // namespace fms
