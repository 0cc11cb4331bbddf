#include "smdm/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace smdm {

// ---- Shape -------------------------------------------------------------

Shape::Shape(std::initializer_list<int> dims) {
  if (dims.size() > 3) throw contract_error("tensor rank > 3 not supported");
  rank = static_cast<int>(dims.size());
  int i = 0;
  for (int v : dims) {
    if (v < 1) throw contract_error("tensor dims must be >= 1, got " + std::to_string(v));
    d[i++] = v;
  }
}

std::string Shape::str() const {
  std::string s = "[";
  for (int i = 0; i < rank; ++i) {
    if (i) s += "x";
    s += std::to_string(d[i]);
  }
  return s + "]";
}

static void require(bool cond, const std::string& msg) {
  if (!cond) throw contract_error(msg);
}

static void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw contract_error(std::string(op) + ": shape mismatch " + a.shape().str() +
                         " vs " + b.shape().str());
}

// ---- Tensor --------------------------------------------------------------

Tensor Tensor::scalar(double v) { return from(Shape{}, {v}); }

Tensor Tensor::zeros(Shape s) {
  return from(s, std::vector<double>(s.numel(), 0.0));
}

Tensor Tensor::full(Shape s, double v) {
  return from(s, std::vector<double>(s.numel(), v));
}

Tensor Tensor::from(Shape s, std::vector<double> data) {
  if (static_cast<int>(data.size()) != s.numel())
    throw contract_error("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + s.str());
  Tensor t;
  t.shape_ = s;
  t.data_ = std::make_shared<const std::vector<double>>(std::move(data));
  return t;
}

Tensor Tensor::with_node(Shape s, std::shared_ptr<const std::vector<double>> data,
                         Tape* tape, int node) {
  if (static_cast<int>(data->size()) != s.numel())
    throw contract_error("tensor data length does not match shape " + s.str());
  Tensor t;
  t.shape_ = s;
  t.data_ = std::move(data);
  t.tape_ = tape;
  t.node_ = node;
  return t;
}

double Tensor::value() const {
  require(numel() == 1, "value() requires a single-element tensor");
  return (*data_)[0];
}

double Tensor::at(int i) const {
  require(shape_.rank == 1 && i >= 0 && i < shape_.d[0], "at(i): bad index");
  return (*data_)[i];
}

double Tensor::at(int i, int j) const {
  require(shape_.rank == 2 && i >= 0 && i < shape_.d[0] && j >= 0 && j < shape_.d[1],
          "at(i,j): bad index");
  return (*data_)[static_cast<size_t>(i) * shape_.d[1] + j];
}

Tensor Tensor::detached() const {
  Tensor t = *this;
  t.tape_ = nullptr;
  t.node_ = -1;
  return t;
}

// ---- Tape ----------------------------------------------------------------

Tensor Tape::watch(const Tensor& t) {
  require(!t.on_tape(), "watch: tensor is already bound to a tape");
  int node = alloc_node(t.numel());
  return Tensor::with_node(t.shape(), t.data_ptr(), this, node);
}

int Tape::alloc_node(size_t numel) {
  node_numel_.push_back(numel);
  return static_cast<int>(node_numel_.size()) - 1;
}

void Tape::push_pullback(Pullback pb) { ops_.push_back(std::move(pb)); }

std::vector<double>& Tape::grad_buf(int node) { return grads_.at(node); }

const std::vector<double>& Tape::grad_view(int node) const { return grads_.at(node); }

void Tape::backward(const Tensor& out) {
  require(!backward_done_, "backward: tape already replayed");
  require(out.tape() == this, "backward: output is not on this tape");
  if (out.numel() != 1)
    throw contract_error("backward: output must be scalar, got shape " + out.shape().str());
  grads_.resize(node_numel_.size());
  for (size_t i = 0; i < grads_.size(); ++i) grads_[i].assign(node_numel_[i], 0.0);
  grads_[out.node()][0] = 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)(*this);
  backward_done_ = true;
}

Tensor Tape::grad(const Tensor& t) const {
  require(backward_done_, "grad: call backward first");
  require(t.tape() == this && t.node() >= 0, "grad: tensor is not on this tape");
  return Tensor::from(t.shape(), grads_.at(t.node()));
}

// ---- MAC counting ----------------------------------------------------------

namespace {
bool g_mac_enabled = false;
MacTag g_mac_tag = MacTag::kOther;
MacCounters g_mac;
}  // namespace

void mac_counting_enable(bool on) { g_mac_enabled = on; }
void mac_set_tag(MacTag tag) { g_mac_tag = tag; }
void mac_reset() { g_mac = MacCounters{}; }
MacCounters mac_counters() { return g_mac; }

void mac_add(uint64_t count) {
  if (!g_mac_enabled) return;
  switch (g_mac_tag) {
    case MacTag::kAttnScore: g_mac.attn_score += count; break;
    case MacTag::kAttnMix: g_mac.attn_mix += count; break;
    case MacTag::kFfn: g_mac.ffn += count; break;
    case MacTag::kInterp: g_mac.interp += count; break;
    default: g_mac.other += count; break;
  }
}

// ---- op helpers ------------------------------------------------------------

namespace {

Tape* result_tape(const Tensor& a) { return a.tape(); }

Tape* result_tape(const Tensor& a, const Tensor& b) {
  if (a.on_tape() && b.on_tape() && a.tape() != b.tape())
    throw contract_error("op inputs live on different tapes");
  return a.on_tape() ? a.tape() : b.tape();
}

using Vec = std::vector<double>;
using VecPtr = std::shared_ptr<const Vec>;

Tensor finish(Tape* tp, Shape s, Vec out, Tape::Pullback pb) {
  auto data = std::make_shared<const Vec>(std::move(out));
  if (!tp) return Tensor::with_node(s, data, nullptr, -1);
  int node = tp->alloc_node(data->size());
  tp->push_pullback(std::move(pb));
  return Tensor::with_node(s, data, tp, node);
}

void axpy(Vec& dst, const Vec& src, double s = 1.0) {
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
}

// Row-vector broadcast checks: rank-2 [r x c] with rank-1 [c].
bool is_row_broadcast(const Shape& m, const Shape& v) {
  return m.rank == 2 && v.rank == 1 && m.d[1] == v.d[0];
}

}  // namespace

// ---- elementwise binary -----------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  Tape* tp = result_tape(a, b);
  const Vec& av = a.data();
  const Vec& bv = b.data();
  if (is_row_broadcast(a.shape(), b.shape())) {
    int r = a.shape().d[0], c = a.shape().d[1];
    Vec out(av.size());
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) out[i * c + j] = av[i * c + j] + bv[j];
    int na = a.node(), nb = b.node(), no = tp ? tp->num_nodes() : -1;
    return finish(tp, a.shape(), std::move(out), [na, nb, no, r, c](Tape& t) {
      const Vec& g = t.grad_view(no);
      if (na >= 0) axpy(t.grad_buf(na), g);
      if (nb >= 0) {
        Vec& gb = t.grad_buf(nb);
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) gb[j] += g[i * c + j];
      }
    });
  }
  require_same_shape(a, b, "add");
  Vec out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  int na = a.node(), nb = b.node(), no = tp ? tp->num_nodes() : -1;
  return finish(tp, a.shape(), std::move(out), [na, nb, no](Tape& t) {
    const Vec& g = t.grad_view(no);
    if (na >= 0) axpy(t.grad_buf(na), g);
    if (nb >= 0) axpy(t.grad_buf(nb), g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Tape* tp = result_tape(a, b);
  const Vec& av = a.data();
  const Vec& bv = b.data();
  if (is_row_broadcast(a.shape(), b.shape())) {
    int r = a.shape().d[0], c = a.shape().d[1];
    Vec out(av.size());
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) out[i * c + j] = av[i * c + j] - bv[j];
    int na = a.node(), nb = b.node(), no = tp ? tp->num_nodes() : -1;
    return finish(tp, a.shape(), std::move(out), [na, nb, no, r, c](Tape& t) {
      const Vec& g = t.grad_view(no);
      if (na >= 0) axpy(t.grad_buf(na), g);
      if (nb >= 0) {
        Vec& gb = t.grad_buf(nb);
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) gb[j] -= g[i * c + j];
      }
    });
  }
  require_same_shape(a, b, "sub");
  Vec out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  int na = a.node(), nb = b.node(), no = tp ? tp->num_nodes() : -1;
  return finish(tp, a.shape(), std::move(out), [na, nb, no](Tape& t) {
    const Vec& g = t.grad_view(no);
    if (na >= 0) axpy(t.grad_buf(na), g);
    if (nb >= 0) axpy(t.grad_buf(nb), g, -1.0);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tape* tp = result_tape(a, b);
  VecPtr ap = a.data_ptr(), bp = b.data_ptr();
  if (is_row_broadcast(a.shape(), b.shape())) {
    int r = a.shape().d[0], c = a.shape().d[1];
    Vec out(ap->size());
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) out[i * c + j] = (*ap)[i * c + j] * (*bp)[j];
    int na = a.node(), nb = b.node(), no = tp ? tp->num_nodes() : -1;
    return finish(tp, a.shape(), std::move(out), [na, nb, no, r, c, ap, bp](Tape& t) {
      const Vec& g = t.grad_view(no);
      if (na >= 0) {
        Vec& ga = t.grad_buf(na);
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) ga[i * c + j] += g[i * c + j] * (*bp)[j];
      }
      if (nb >= 0) {
        Vec& gb = t.grad_buf(nb);
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) gb[j] += g[i * c + j] * (*ap)[i * c + j];
      }
    });
  }
  require_same_shape(a, b, "mul");
  Vec out(ap->size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = (*ap)[i] * (*bp)[i];
  int na = a.node(), nb = b.node(), no = tp ? tp->num_nodes() : -1;
  return finish(tp, a.shape(), std::move(out), [na, nb, no, ap, bp](Tape& t) {
    const Vec& g = t.grad_view(no);
    if (na >= 0) {
      Vec& ga = t.grad_buf(na);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (*bp)[i];
    }
    if (nb >= 0) {
      Vec& gb = t.grad_buf(nb);
      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * (*ap)[i];
    }
  });
}

Tensor scalar_mul(const Tensor& a, double s) {
  Tape* tp = result_tape(a);
  const Vec& av = a.data();
  Vec out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * s;
  int na = a.node(), no = tp ? tp->num_nodes() : -1;
  return finish(tp, a.shape(), std::move(out), [na, no, s](Tape& t) {
    if (na >= 0) axpy(t.grad_buf(na), t.grad_view(no), s);
  });
}

// ---- matmul / transpose ------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.shape().rank == 2 && b.shape().rank == 2,
          "matmul: rank-2 operands required, got " + a.shape().str() + " and " +
              b.shape().str());
  int m = a.shape().d[0], k = a.shape().d[1];
  int k2 = b.shape().d[0], n = b.shape().d[1];
  if (k != k2)
    throw contract_error("matmul: inner dims differ, " + a.shape().str() + " vs " +
                         b.shape().str());
  mac_add(static_cast<uint64_t>(m) * n * k);
  Tape* tp = result_tape(a, b);
  VecPtr ap = a.data_ptr(), bp = b.data_ptr();
  Vec out(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    const double* arow = ap->data() + static_cast<size_t>(i) * k;
    double* orow = out.data() + static_cast<size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const double* brow = bp->data() + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  int na = a.node(), nb = b.node(), no = tp ? tp->num_nodes() : -1;
  return finish(tp, Shape{m, n}, std::move(out), [na, nb, no, m, n, k, ap, bp](Tape& t) {
    const Vec& g = t.grad_view(no);
    if (na >= 0) {
      // dA = g * B^T
      Vec& ga = t.grad_buf(na);
      for (int i = 0; i < m; ++i)
        for (int kk = 0; kk < k; ++kk) {
          double acc = 0.0;
          const double* grow = g.data() + static_cast<size_t>(i) * n;
          const double* brow = bp->data() + static_cast<size_t>(kk) * n;
          for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[static_cast<size_t>(i) * k + kk] += acc;
        }
    }
    if (nb >= 0) {
      // dB = A^T * g
      Vec& gb = t.grad_buf(nb);
      for (int i = 0; i < m; ++i) {
        const double* arow = ap->data() + static_cast<size_t>(i) * k;
        const double* grow = g.data() + static_cast<size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
          const double av = arow[kk];
          double* brow = gb.data() + static_cast<size_t>(kk) * n;
          for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require(a.shape().rank == 2, "transpose: rank-2 required, got " + a.shape().str());
  int r = a.shape().d[0], c = a.shape().d[1];
  const Vec& av = a.data();
  Vec out(av.size());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[static_cast<size_t>(j) * r + i] = av[static_cast<size_t>(i) * c + j];
  Tape* tp = result_tape(a);
  int na = a.node(), no = tp ? tp->num_nodes() : -1;
  return finish(tp, Shape{c, r}, std::move(out), [na, no, r, c](Tape& t) {
    if (na < 0) return;
    const Vec& g = t.grad_view(no);
    Vec& ga = t.grad_buf(na);
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < r; ++i) ga[static_cast<size_t>(i) * c + j] += g[static_cast<size_t>(j) * r + i];
  });
}

// ---- structural ops -----------------------------------------------------------

Tensor concat(const Tensor& a, const Tensor& b, int axis) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  require(sa.rank == sb.rank && (sa.rank == 1 || sa.rank == 2),
          "concat: rank-1/2 tensors of equal rank required");
  require(axis >= 0 && axis < sa.rank, "concat: bad axis");
  const Vec& av = a.data();
  const Vec& bv = b.data();
  Tape* tp = result_tape(a, b);
  int na = a.node(), nb = b.node();
  if (sa.rank == 1 || axis == 0) {
    if (sa.rank == 2) require(sa.d[1] == sb.d[1], "concat axis 0: column counts differ");
    Vec out(av.size() + bv.size());
    std::copy(av.begin(), av.end(), out.begin());
    std::copy(bv.begin(), bv.end(), out.begin() + av.size());
    Shape os = sa.rank == 1 ? Shape{sa.d[0] + sb.d[0]} : Shape{sa.d[0] + sb.d[0], sa.d[1]};
    size_t asz = av.size(), bsz = bv.size();
    int no = tp ? tp->num_nodes() : -1;
    return finish(tp, os, std::move(out), [na, nb, no, asz, bsz](Tape& t) {
      const Vec& g = t.grad_view(no);
      if (na >= 0) {
        Vec& ga = t.grad_buf(na);
        for (size_t i = 0; i < asz; ++i) ga[i] += g[i];
      }
      if (nb >= 0) {
        Vec& gb = t.grad_buf(nb);
        for (size_t i = 0; i < bsz; ++i) gb[i] += g[asz + i];
      }
    });
  }
  // axis == 1, rank-2
  require(sa.d[0] == sb.d[0], "concat axis 1: row counts differ");
  int r = sa.d[0], ca = sa.d[1], cb = sb.d[1];
  Vec out(static_cast<size_t>(r) * (ca + cb));
  for (int i = 0; i < r; ++i) {
    std::copy(av.begin() + static_cast<size_t>(i) * ca, av.begin() + static_cast<size_t>(i + 1) * ca,
              out.begin() + static_cast<size_t>(i) * (ca + cb));
    std::copy(bv.begin() + static_cast<size_t>(i) * cb, bv.begin() + static_cast<size_t>(i + 1) * cb,
              out.begin() + static_cast<size_t>(i) * (ca + cb) + ca);
  }
  int no = tp ? tp->num_nodes() : -1;
  return finish(tp, Shape{r, ca + cb}, std::move(out), [na, nb, no, r, ca, cb](Tape& t) {
    const Vec& g = t.grad_view(no);
    if (na >= 0) {
      Vec& ga = t.grad_buf(na);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < ca; ++j)
          ga[static_cast<size_t>(i) * ca + j] += g[static_cast<size_t>(i) * (ca + cb) + j];
    }
    if (nb >= 0) {
      Vec& gb = t.grad_buf(nb);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < cb; ++j)
          gb[static_cast<size_t>(i) * cb + j] += g[static_cast<size_t>(i) * (ca + cb) + ca + j];
    }
  });
}

Tensor slice(const Tensor& a, int axis, int start, int len) {
  const Shape& s = a.shape();
  require(s.rank == 1 || s.rank == 2, "slice: rank-1/2 required");
  require(axis >= 0 && axis < s.rank, "slice: bad axis");
  require(start >= 0 && len >= 1 && start + len <= s.d[axis], "slice: bad range");
  const Vec& av = a.data();
  Tape* tp = result_tape(a);
  int na = a.node();
  if (s.rank == 1) {
    Vec out(av.begin() + start, av.begin() + start + len);
    int no = tp ? tp->num_nodes() : -1;
    return finish(tp, Shape{len}, std::move(out), [na, no, start, len](Tape& t) {
      if (na < 0) return;
      const Vec& g = t.grad_view(no);
      Vec& ga = t.grad_buf(na);
      for (int i = 0; i < len; ++i) ga[start + i] += g[i];
    });
  }
  int r = s.d[0], c = s.d[1];
  if (axis == 0) {
    Vec out(av.begin() + static_cast<size_t>(start) * c,
            av.begin() + static_cast<size_t>(start + len) * c);
    int no = tp ? tp->num_nodes() : -1;
    return finish(tp, Shape{len, c}, std::move(out), [na, no, start, len, c](Tape& t) {
      if (na < 0) return;
      const Vec& g = t.grad_view(no);
      Vec& ga = t.grad_buf(na);
      for (size_t i = 0; i < static_cast<size_t>(len) * c; ++i)
        ga[static_cast<size_t>(start) * c + i] += g[i];
    });
  }
  Vec out(static_cast<size_t>(r) * len);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < len; ++j)
      out[static_cast<size_t>(i) * len + j] = av[static_cast<size_t>(i) * c + start + j];
  int no = tp ? tp->num_nodes() : -1;
  return finish(tp, Shape{r, len}, std::move(out), [na, no, r, c, start, len](Tape& t) {
    if (na < 0) return;
    const Vec& g = t.grad_view(no);
    Vec& ga = t.grad_buf(na);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < len; ++j)
        ga[static_cast<size_t>(i) * c + start + j] += g[static_cast<size_t>(i) * len + j];
  });
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& idx) {
  require(a.shape().rank == 2, "gather_rows: rank-2 required");
  require(!idx.empty(), "gather_rows: empty index list");
  int r = a.shape().d[0], c = a.shape().d[1];
  for (int i : idx) require(i >= 0 && i < r, "gather_rows: row index out of range");
  const Vec& av = a.data();
  Vec out(idx.size() * c);
  for (size_t k = 0; k < idx.size(); ++k)
    std::copy(av.begin() + static_cast<size_t>(idx[k]) * c,
              av.begin() + static_cast<size_t>(idx[k] + 1) * c,
              out.begin() + k * c);
  Tape* tp = result_tape(a);
  int na = a.node(), no = tp ? tp->num_nodes() : -1;
  auto ids = std::make_shared<const std::vector<int>>(idx);
  return finish(tp, Shape{static_cast<int>(idx.size()), c}, std::move(out),
                [na, no, c, ids](Tape& t) {
                  if (na < 0) return;
                  const Vec& g = t.grad_view(no);
                  Vec& ga = t.grad_buf(na);
                  for (size_t k = 0; k < ids->size(); ++k)
                    for (int j = 0; j < c; ++j)
                      ga[static_cast<size_t>((*ids)[k]) * c + j] += g[k * c + j];
                });
}

Tensor scatter_rows(const Tensor& a, const std::vector<int>& idx, int n_rows) {
  require(a.shape().rank == 2, "scatter_rows: rank-2 required");
  require(static_cast<int>(idx.size()) == a.shape().d[0],
          "scatter_rows: index count must match source rows");
  int c = a.shape().d[1];
  std::vector<char> seen(n_rows, 0);
  for (int i : idx) {
    require(i >= 0 && i < n_rows, "scatter_rows: row index out of range");
    require(!seen[i], "scatter_rows: duplicate target row");
    seen[i] = 1;
  }
  const Vec& av = a.data();
  Vec out(static_cast<size_t>(n_rows) * c, 0.0);
  for (size_t k = 0; k < idx.size(); ++k)
    std::copy(av.begin() + k * c, av.begin() + (k + 1) * c,
              out.begin() + static_cast<size_t>(idx[k]) * c);
  Tape* tp = result_tape(a);
  int na = a.node(), no = tp ? tp->num_nodes() : -1;
  auto ids = std::make_shared<const std::vector<int>>(idx);
  return finish(tp, Shape{n_rows, c}, std::move(out), [na, no, c, ids](Tape& t) {
    if (na < 0) return;
    const Vec& g = t.grad_view(no);
    Vec& ga = t.grad_buf(na);
    for (size_t k = 0; k < ids->size(); ++k)
      for (int j = 0; j < c; ++j)
        ga[k * c + j] += g[static_cast<size_t>((*ids)[k]) * c + j];
  });
}

// ---- reductions -----------------------------------------------------------

Tensor sum(const Tensor& a) {
  const Vec& av = a.data();
  double acc = 0.0;
  for (double v : av) acc += v;
  Tape* tp = result_tape(a);
  int na = a.node(), no = tp ? tp->num_nodes() : -1;
  return finish(tp, Shape{}, {acc}, [na, no](Tape& t) {
    if (na < 0) return;
    double g = t.grad_view(no)[0];
    for (double& v : t.grad_buf(na)) v += g;
  });
}

Tensor mean(const Tensor& a) {
  const Vec& av = a.data();
  double acc = 0.0;
  for (double v : av) acc += v;
  double inv = 1.0 / static_cast<double>(av.size());
  Tape* tp = result_tape(a);
  int na = a.node(), no = tp ? tp->num_nodes() : -1;
  return finish(tp, Shape{}, {acc * inv}, [na, no, inv](Tape& t) {
    if (na < 0) return;
    double g = t.grad_view(no)[0] * inv;
    for (double& v : t.grad_buf(na)) v += g;
  });
}

// ---- last-axis normalizations ----------------------------------------------

Tensor softmax(const Tensor& a) {
  require(a.shape().rank >= 1, "softmax: rank >= 1 required");
  int c = a.shape().last_dim();
  int rows = a.numel() / c;
  const Vec& av = a.data();
  Vec out(av.size());
  for (int i = 0; i < rows; ++i) {
    const double* x = av.data() + static_cast<size_t>(i) * c;
    double* y = out.data() + static_cast<size_t>(i) * c;
    double mx = x[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, x[j]);
    double z = 0.0;
    for (int j = 0; j < c; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    double inv = 1.0 / z;
    for (int j = 0; j < c; ++j) y[j] *= inv;
  }
  Tape* tp = result_tape(a);
  int na = a.node(), no = tp ? tp->num_nodes() : -1;
  auto yp = std::make_shared<const Vec>(out);
  return finish(tp, a.shape(), std::move(out), [na, no, rows, c, yp](Tape& t) {
    if (na < 0) return;
    const Vec& g = t.grad_view(no);
    Vec& ga = t.grad_buf(na);
    for (int i = 0; i < rows; ++i) {
      const double* y = yp->data() + static_cast<size_t>(i) * c;
      const double* gr = g.data() + static_cast<size_t>(i) * c;
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += gr[j] * y[j];
      for (int j = 0; j < c; ++j) ga[static_cast<size_t>(i) * c + j] += y[j] * (gr[j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& a, double eps) {
  require(a.shape().rank >= 1, "layer_norm: rank >= 1 required");
  int c = a.shape().last_dim();
  int rows = a.numel() / c;
  const Vec& av = a.data();
  Vec out(av.size());
  Vec inv_std(rows);
  for (int i = 0; i < rows; ++i) {
    const double* x = av.data() + static_cast<size_t>(i) * c;
    double* y = out.data() + static_cast<size_t>(i) * c;
    double mu = 0.0;
    for (int j = 0; j < c; ++j) mu += x[j];
    mu /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= c;
    double q = 1.0 / std::sqrt(var + eps);
    inv_std[i] = q;
    for (int j = 0; j < c; ++j) y[j] = (x[j] - mu) * q;
  }
  Tape* tp = result_tape(a);
  int na = a.node(), no = tp ? tp->num_nodes() : -1;
  auto yp = std::make_shared<const Vec>(out);
  auto qp = std::make_shared<const Vec>(std::move(inv_std));
  return finish(tp, a.shape(), std::move(out), [na, no, rows, c, yp, qp](Tape& t) {
    if (na < 0) return;
    const Vec& g = t.grad_view(no);
    Vec& ga = t.grad_buf(na);
    for (int i = 0; i < rows; ++i) {
      const double* y = yp->data() + static_cast<size_t>(i) * c;
      const double* gr = g.data() + static_cast<size_t>(i) * c;
      double gmean = 0.0, gymean = 0.0;
      for (int j = 0; j < c; ++j) {
        gmean += gr[j];
        gymean += gr[j] * y[j];
      }
      gmean /= c;
      gymean /= c;
      double q = (*qp)[i];
      for (int j = 0; j < c; ++j)
        ga[static_cast<size_t>(i) * c + j] += q * (gr[j] - gmean - y[j] * gymean);
    }
  });
}

// ---- elementwise unary -------------------------------------------------------

namespace {

// fwd(x) -> y; dfdx receives (x, y).
template <class F, class DF>
Tensor unary_op(const Tensor& a, const char* /*name*/, F fwd, DF dfdx) {
  const Vec& av = a.data();
  Vec out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  Tape* tp = result_tape(a);
  int na = a.node(), no = tp ? tp->num_nodes() : -1;
  VecPtr xp = a.data_ptr();
  auto yp = std::make_shared<const Vec>(out);
  return finish(tp, a.shape(), std::move(out), [na, no, xp, yp, dfdx](Tape& t) {
    if (na < 0) return;
    const Vec& g = t.grad_view(no);
    Vec& ga = t.grad_buf(na);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx((*xp)[i], (*yp)[i]);
  });
}

}  // namespace

double softplus_scalar(double x) {
  // log(1 + e^x), overflow-safe on both tails.
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

Tensor sin(const Tensor& a) {
  return unary_op(a, "sin", [](double x) { return std::sin(x); },
                  [](double x, double) { return std::cos(x); });
}

Tensor tanh(const Tensor& a) {
  return unary_op(a, "tanh", [](double x) { return std::tanh(x); },
                  [](double, double y) { return 1.0 - y * y; });
}

Tensor softplus(const Tensor& a) {
  return unary_op(a, "softplus", [](double x) { return softplus_scalar(x); },
                  [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor square(const Tensor& a) {
  return unary_op(a, "square", [](double x) { return x * x; },
                  [](double x, double) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a) {
  for (double v : a.data())
    if (v < 0.0) throw numeric_error("sqrt: negative input");
  return unary_op(a, "sqrt", [](double x) { return std::sqrt(x); },
                  [](double, double y) { return 0.5 / y; });
}

Tensor round_ste(const Tensor& a) {
  return unary_op(a, "round_ste", [](double x) { return std::round(x); },
                  [](double, double) { return 1.0; });
}

bool all_finite(const Tensor& a) {
  for (double v : a.data())
    if (!std::isfinite(v)) return false;
  return true;
}

// ---- gradient check ------------------------------------------------------------

GradCheckReport grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f,
                           const Tensor& point, double h, double tol) {
  require(h > 0, "grad_check: h must be positive");
  Tape tape;
  Tensor x = tape.watch(point);
  Tensor out = f(tape, x);
  if (out.numel() != 1)
    throw contract_error("grad_check: function output must be scalar");
  if (!all_finite(out)) throw numeric_error("grad_check: non-finite output");
  tape.backward(out);
  Tensor g = tape.grad(x);

  auto eval_at = [&](const Vec& v) {
    Tape t2;
    Tensor p = Tensor::from(point.shape(), v);
    Tensor px = t2.watch(p);
    Tensor o = f(t2, px);
    double val = o.value();
    if (!std::isfinite(val)) throw numeric_error("grad_check: non-finite intermediate");
    return val;
  };

  GradCheckReport rep;
  rep.tol = tol;
  Vec base = point.data();
  for (int i = 0; i < point.numel(); ++i) {
    Vec vp = base, vm = base;
    vp[i] += h;
    vm[i] -= h;
    double fd = (eval_at(vp) - eval_at(vm)) / (2.0 * h);
    double ad = g.data()[i];
    double denom = std::max({std::fabs(fd), std::fabs(ad), 1e-6});
    rep.max_rel_err = std::max(rep.max_rel_err, std::fabs(fd - ad) / denom);
    ++rep.checked;
  }
  rep.pass = rep.max_rel_err < tol;
  return rep;
}

}  // namespace smdm
