#include <cmath>
#include <vector>

#include "doctest.h"
#include "smdm/rng.hpp"
#include "smdm/tensor.hpp"

using namespace smdm;

namespace {

Tensor random_tensor(Shape s, Rng& rng, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(s.numel());
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(s, std::move(v));
}

// Reduces op(x) to a scalar with fixed non-uniform weights so the pullback
// sees a non-trivial upstream gradient.
Tensor weighted_sum(const Tensor& t) {
  std::vector<double> w(t.numel());
  for (size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.11 * static_cast<double>(i % 7);
  return sum(mul(t, Tensor::from(t.shape(), std::move(w))));
}

void check_op_grads(const char* name,
                    const std::function<Tensor(Tape&, const Tensor&)>& f, Shape s,
                    int points, double tol, Rng& rng, double lo = -2.0, double hi = 2.0) {
  double worst = 0.0;
  for (int p = 0; p < points; ++p) {
    auto rep = grad_check(f, random_tensor(s, rng, lo, hi), 1e-5, tol);
    worst = std::max(worst, rep.max_rel_err);
  }
  INFO(name << " worst rel err " << worst);
  CHECK(worst < tol);
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("matmul identity") {
  Tensor eye = Tensor::from(Shape{2, 2}, {1, 0, 0, 1});
  Tensor v = Tensor::from(Shape{2, 1}, {3, 4});
  Tensor r = matmul(eye, v);
  CHECK(r.at(0, 0) == 3.0);
  CHECK(r.at(1, 0) == 4.0);
}

TEST_CASE("softmax symmetry and normalization") {
  Tensor r = softmax(Tensor::from(Shape{2}, {0.0, 0.0}));
  CHECK(r.at(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r.at(1) == doctest::Approx(0.5).epsilon(1e-15));

  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor(Shape{3, 5}, rng, -30.0, 30.0);
    Tensor s = softmax(x);
    for (int i = 0; i < 3; ++i) {
      double row = 0.0;
      for (int j = 0; j < 5; ++j) row += s.at(i, j);
      CHECK(std::fabs(row - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("softplus analytic value") {
  CHECK(softplus(Tensor::scalar(0.0)).value() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("shape mismatch names both shapes") {
  Tensor a = Tensor::zeros(Shape{2, 3});
  Tensor b = Tensor::zeros(Shape{3, 2});
  try {
    add(a, b);
    FAIL("expected contract_error");
  } catch (const contract_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[3x2]") != std::string::npos);
  }
}

TEST_CASE("backward: d/dx x^2 at 3") {
  Tape tape;
  Tensor x = tape.watch(Tensor::scalar(3.0));
  Tensor y = square(x);
  tape.backward(y);
  CHECK(tape.grad(x).value() == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("backward: d/dW sum(W v)") {
  Tape tape;
  Tensor w = tape.watch(Tensor::from(Shape{3, 2}, {1, 2, 3, 4, 5, 6}));
  Tensor v = Tensor::from(Shape{2, 1}, {1, 2});
  Tensor out = sum(matmul(w, v));
  tape.backward(out);
  Tensor g = tape.grad(w);
  for (int i = 0; i < 3; ++i) {
    CHECK(g.at(i, 0) == 1.0);
    CHECK(g.at(i, 1) == 2.0);
  }
}

TEST_CASE("backward: leaves not reached get zero gradient") {
  Tape tape;
  Tensor used = tape.watch(Tensor::scalar(2.0));
  Tensor unused = tape.watch(Tensor::from(Shape{3}, {1, 2, 3}));
  tape.backward(square(used));
  Tensor g = tape.grad(unused);
  for (int i = 0; i < 3; ++i) CHECK(g.at(i) == 0.0);
}

TEST_CASE("backward rejects non-scalar output") {
  Tape tape;
  Tensor x = tape.watch(Tensor::from(Shape{2}, {1, 2}));
  Tensor y = square(x);
  CHECK_THROWS_AS(tape.backward(y), contract_error);
}

TEST_CASE("pullbacks replay in reverse creation order exactly once") {
  Tape tape;
  std::vector<int> visits;
  Tensor x = tape.watch(Tensor::scalar(1.0));
  int last_node = x.node();
  for (int i = 0; i < 5; ++i) {
    int node = tape.alloc_node(1);
    tape.push_pullback([&visits, i, node, last_node](Tape& t) {
      visits.push_back(i);
      t.grad_buf(last_node)[0] += t.grad_view(node)[0];
    });
    last_node = node;
  }
  Tensor out = Tensor::with_node(Shape{}, std::make_shared<const std::vector<double>>(
                                              std::vector<double>{1.0}),
                                 &tape, last_node);
  tape.backward(out);
  CHECK(visits == std::vector<int>{4, 3, 2, 1, 0});
  CHECK(tape.grad(x).value() == 1.0);
}

TEST_CASE("3-layer MLP matches finite differences at 1e-6") {
  Rng rng(11);
  const int d0 = 3, d1 = 4, d2 = 3;
  const Tensor x_in = random_tensor(Shape{2, d0}, rng);
  const Tensor b1 = random_tensor(Shape{d1}, rng, -0.3, 0.3);
  const Tensor w2 = random_tensor(Shape{d1, d2}, rng, -0.7, 0.7);
  const Tensor b2 = random_tensor(Shape{d2}, rng, -0.3, 0.3);
  const Tensor w3 = random_tensor(Shape{d2, 1}, rng, -0.7, 0.7);
  // Gradient w.r.t. the first weight matrix flows through every layer.
  auto mlp_loss = [&](Tape&, const Tensor& w1) {
    Tensor h1 = tanh(add(matmul(x_in, w1), b1));
    Tensor h2 = tanh(add(matmul(h1, w2), b2));
    return mean(square(matmul(h2, w3)));
  };
  for (int trial = 0; trial < 5; ++trial) {
    auto rep = grad_check(mlp_loss, random_tensor(Shape{d0, d1}, rng, -0.7, 0.7), 1e-5, 1e-6);
    INFO("rel err " << rep.max_rel_err);
    CHECK(rep.pass);
  }
}

TEST_CASE("grad_check: layer-norm composed with sum passes at 1e-4") {
  Rng rng(13);
  auto f = [](Tape&, const Tensor& x) { return weighted_sum(layer_norm(x)); };
  auto rep = grad_check(f, random_tensor(Shape{3, 6}, rng), 1e-5, 1e-4);
  CHECK(rep.pass);
}

TEST_CASE("grad_check: sum of squares at 1e-6") {
  Rng rng(17);
  auto f = [](Tape&, const Tensor& x) { return sum(square(x)); };
  auto rep = grad_check(f, random_tensor(Shape{2, 4}, rng), 1e-5, 1e-6);
  CHECK(rep.pass);
}

TEST_CASE("every op matches central finite differences at 100 random points") {
  Rng rng(23);
  const int pts = 100;
  const double tol = 1e-4;
  Tensor other = random_tensor(Shape{3, 4}, rng);
  Tensor vec = random_tensor(Shape{4}, rng);
  Tensor mat_r = random_tensor(Shape{4, 3}, rng);

  check_op_grads("add", [&](Tape&, const Tensor& x) { return weighted_sum(add(x, other)); },
                 Shape{3, 4}, pts, tol, rng);
  check_op_grads("add_rowvec_lhs",
                 [&](Tape&, const Tensor& x) { return weighted_sum(add(x, vec)); },
                 Shape{3, 4}, pts, tol, rng);
  check_op_grads("add_rowvec_rhs",
                 [&](Tape&, const Tensor& x) { return weighted_sum(add(other, x)); },
                 Shape{4}, pts, tol, rng);
  check_op_grads("sub", [&](Tape&, const Tensor& x) { return weighted_sum(sub(other, x)); },
                 Shape{3, 4}, pts, tol, rng);
  check_op_grads("mul", [&](Tape&, const Tensor& x) { return weighted_sum(mul(x, other)); },
                 Shape{3, 4}, pts, tol, rng);
  check_op_grads("mul_rowvec",
                 [&](Tape&, const Tensor& x) { return weighted_sum(mul(other, x)); },
                 Shape{4}, pts, tol, rng);
  check_op_grads("scalar_mul",
                 [&](Tape&, const Tensor& x) { return weighted_sum(scalar_mul(x, -1.7)); },
                 Shape{3, 4}, pts, tol, rng);
  check_op_grads("matmul_lhs",
                 [&](Tape&, const Tensor& x) { return weighted_sum(matmul(x, mat_r)); },
                 Shape{3, 4}, pts, tol, rng);
  check_op_grads("matmul_rhs",
                 [&](Tape&, const Tensor& x) { return weighted_sum(matmul(other, x)); },
                 Shape{4, 3}, pts, tol, rng);
  check_op_grads("transpose",
                 [&](Tape&, const Tensor& x) { return weighted_sum(transpose(x)); },
                 Shape{3, 4}, pts, tol, rng);
  check_op_grads("concat0",
                 [&](Tape&, const Tensor& x) { return weighted_sum(concat(x, other, 0)); },
                 Shape{2, 4}, pts, tol, rng);
  check_op_grads("concat1",
                 [&](Tape&, const Tensor& x) { return weighted_sum(concat(other, x, 1)); },
                 Shape{3, 2}, pts, tol, rng);
  check_op_grads("slice0",
                 [&](Tape&, const Tensor& x) { return weighted_sum(slice(x, 0, 1, 2)); },
                 Shape{4, 3}, pts, tol, rng);
  check_op_grads("slice1",
                 [&](Tape&, const Tensor& x) { return weighted_sum(slice(x, 1, 1, 2)); },
                 Shape{3, 4}, pts, tol, rng);
  check_op_grads("gather_rows",
                 [&](Tape&, const Tensor& x) {
                   return weighted_sum(gather_rows(x, {2, 0, 2}));
                 },
                 Shape{3, 4}, pts, tol, rng);
  check_op_grads("scatter_rows",
                 [&](Tape&, const Tensor& x) {
                   return weighted_sum(scatter_rows(x, {3, 0}, 5));
                 },
                 Shape{2, 4}, pts, tol, rng);
  check_op_grads("sum", [](Tape&, const Tensor& x) { return sum(x); }, Shape{3, 4}, pts,
                 tol, rng);
  check_op_grads("mean", [](Tape&, const Tensor& x) { return mean(x); }, Shape{3, 4}, pts,
                 tol, rng);
  check_op_grads("softmax",
                 [&](Tape&, const Tensor& x) { return weighted_sum(softmax(x)); },
                 Shape{3, 4}, pts, tol, rng);
  check_op_grads("layer_norm",
                 [&](Tape&, const Tensor& x) { return weighted_sum(layer_norm(x)); },
                 Shape{3, 4}, pts, tol, rng);
  check_op_grads("sin", [&](Tape&, const Tensor& x) { return weighted_sum(sin(x)); },
                 Shape{3, 4}, pts, tol, rng);
  check_op_grads("tanh", [&](Tape&, const Tensor& x) { return weighted_sum(tanh(x)); },
                 Shape{3, 4}, pts, tol, rng);
  check_op_grads("softplus",
                 [&](Tape&, const Tensor& x) { return weighted_sum(softplus(x)); },
                 Shape{3, 4}, pts, tol, rng);
  check_op_grads("square", [&](Tape&, const Tensor& x) { return weighted_sum(square(x)); },
                 Shape{3, 4}, pts, tol, rng);
  check_op_grads("sqrt", [&](Tape&, const Tensor& x) { return weighted_sum(sqrt(x)); },
                 Shape{3, 4}, pts, tol, rng, 0.1, 4.0);
}

TEST_CASE("straight-through round: gradient is the upstream gradient") {
  Rng rng(29);
  Tensor point = random_tensor(Shape{2, 3}, rng);
  Tape t1, t2;
  Tensor x1 = t1.watch(point);
  Tensor x2 = t2.watch(point);
  Tensor with_round = weighted_sum(round_ste(scalar_mul(tanh(x1), 4.0)));
  Tensor without = weighted_sum(scalar_mul(tanh(x2), 4.0));
  t1.backward(with_round);
  t2.backward(without);
  Tensor g1 = t1.grad(x1);
  Tensor g2 = t2.grad(x2);
  for (int i = 0; i < point.numel(); ++i)
    CHECK(g1.data()[i] == doctest::Approx(g2.data()[i]).epsilon(1e-15));
}

TEST_CASE("forward evaluation is bit-deterministic") {
  Rng rng(31);
  Tensor a = random_tensor(Shape{5, 7}, rng);
  Tensor b = random_tensor(Shape{7, 5}, rng);
  Tensor r1 = softmax(matmul(a, b));
  Tensor r2 = softmax(matmul(a, b));
  CHECK(r1.data() == r2.data());
}

TEST_CASE("grad_check flags non-finite intermediates") {
  auto f = [](Tape&, const Tensor& x) { return sqrt(sub(x, Tensor::scalar(10.0))); };
  CHECK_THROWS_AS(grad_check(f, Tensor::scalar(1.0), 1e-5, 1e-4), numeric_error);
}

TEST_CASE("scatter_rows places rows into a zero buffer") {
  Tensor src = Tensor::from(Shape{2, 2}, {1, 2, 3, 4});
  Tensor out = scatter_rows(src, {2, 0}, 4);
  CHECK(out.at(2, 0) == 1.0);
  CHECK(out.at(2, 1) == 2.0);
  CHECK(out.at(0, 0) == 3.0);
  CHECK(out.at(1, 0) == 0.0);
  CHECK(out.at(3, 1) == 0.0);
  CHECK_THROWS_AS(scatter_rows(src, {1, 1}, 4), contract_error);
}

}  // TEST_SUITE
