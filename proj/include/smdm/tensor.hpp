#pragma once

// Dense rank<=3 tensors of 64-bit floats with reverse-mode automatic
// differentiation on an explicit tape.  The op set is exactly what the
// denoiser and its loss need; everything is single-threaded per tape and
// deterministic (fixed summation order, no hidden global RNG).

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "smdm/errors.hpp"

namespace smdm {

struct Shape {
  int rank = 0;
  std::array<int, 3> d{1, 1, 1};

  Shape() = default;
  Shape(std::initializer_list<int> dims);

  int numel() const { return d[0] * d[1] * d[2]; }
  int rows() const { return rank >= 1 ? d[0] : 1; }
  int cols() const { return rank >= 2 ? d[1] : 1; }
  // Size of the trailing axis (the one softmax/layer_norm reduce over).
  int last_dim() const { return rank == 0 ? 1 : d[rank - 1]; }

  bool operator==(const Shape& o) const { return rank == o.rank && d == o.d; }
  bool operator!=(const Shape& o) const { return !(*this == o); }
  std::string str() const;
};

class Tape;

class Tensor {
 public:
  Tensor() = default;

  static Tensor scalar(double v);
  static Tensor zeros(Shape s);
  static Tensor full(Shape s, double v);
  static Tensor from(Shape s, std::vector<double> data);
  // Binds an existing value to a tape node; only op implementations and
  // Tape::watch should need this.
  static Tensor with_node(Shape s, std::shared_ptr<const std::vector<double>> data,
                          Tape* tape, int node);

  const Shape& shape() const { return shape_; }
  int numel() const { return shape_.numel(); }
  const std::vector<double>& data() const { return *data_; }
  std::shared_ptr<const std::vector<double>> data_ptr() const { return data_; }

  double value() const;             // rank-0 / single-element access
  double at(int i) const;           // rank-1
  double at(int i, int j) const;    // rank-2

  Tape* tape() const { return tape_; }
  int node() const { return node_; }
  bool on_tape() const { return tape_ != nullptr; }
  // Same values, no tape binding.
  Tensor detached() const;

 private:
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

// Records one pullback per op, in creation order.  backward() replays them
// in reverse, which visits every recorded op exactly once in reverse
// topological order (outputs are always created after their inputs).
class Tape {
 public:
  using Pullback = std::function<void(Tape&)>;

  // Registers a leaf; its gradient is readable after backward().
  Tensor watch(const Tensor& t);

  void backward(const Tensor& scalar_output);
  bool backward_done() const { return backward_done_; }

  // Gradient of the scalar output w.r.t. any tensor bound to this tape.
  Tensor grad(const Tensor& t) const;

  size_t num_ops() const { return ops_.size(); }
  int num_nodes() const { return static_cast<int>(node_numel_.size()); }

  // Low-level interface for implementing differentiable ops.
  int alloc_node(size_t numel);
  void push_pullback(Pullback pb);
  std::vector<double>& grad_buf(int node);
  const std::vector<double>& grad_view(int node) const;

 private:
  std::vector<size_t> node_numel_;
  std::vector<Pullback> ops_;
  std::vector<std::vector<double>> grads_;
  bool backward_done_ = false;
};

// ---- op set ----------------------------------------------------------
// add/sub/mul accept equal shapes, or a rank-2 matrix with a rank-1 row
// vector broadcast across rows (what bias adds and per-column scales need).

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double s);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor concat(const Tensor& a, const Tensor& b, int axis);
Tensor slice(const Tensor& a, int axis, int start, int len);
Tensor gather_rows(const Tensor& a, const std::vector<int>& idx);
// Places the rows of `a` at `idx` inside an n_rows-tall zero buffer.
Tensor scatter_rows(const Tensor& a, const std::vector<int>& idx, int n_rows);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor softmax(const Tensor& a);                       // over last axis
Tensor layer_norm(const Tensor& a, double eps = 1e-5); // over last axis
Tensor sin(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
// round() forward, identity backward (straight-through estimator).
Tensor round_ste(const Tensor& a);

bool all_finite(const Tensor& a);
double softplus_scalar(double x);

// ---- gradient checking -----------------------------------------------

struct GradCheckReport {
  double max_rel_err = 0.0;
  double tol = 0.0;
  int checked = 0;
  bool pass = false;
};

// Central finite differences against the tape gradient, checking every
// coordinate of `point`.  f must build a scalar output on the given tape
// from the watched tensor it receives.
GradCheckReport grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f,
                           const Tensor& point, double h, double tol);

// ---- multiply-accumulate counting --------------------------------------
// When enabled, matmul (and the feature interpolation op) report their MAC
// counts into a per-tag counter.  Profiling only; not thread-safe.

enum class MacTag { kOther = 0, kAttnScore, kAttnMix, kFfn, kInterp };

struct MacCounters {
  uint64_t attn_score = 0;
  uint64_t attn_mix = 0;
  uint64_t ffn = 0;
  uint64_t interp = 0;
  uint64_t other = 0;
};

void mac_counting_enable(bool on);
void mac_set_tag(MacTag tag);
void mac_reset();
MacCounters mac_counters();
void mac_add(uint64_t count);  // charged to the current tag

}  // namespace smdm
