#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pinet/nn.hpp"
#include "test_helpers.hpp"

using namespace pinet;
using namespace pinet::nn;

namespace {

GruDirParams add_dir(ParameterStore& store, const std::string& prefix, int hidden,
                     int in_dim) {
  GruDirParams p;
  p.Wz = &store.add(prefix + ".Wz", hidden, in_dim, in_dim);
  p.Wr = &store.add(prefix + ".Wr", hidden, in_dim, in_dim);
  p.Wh = &store.add(prefix + ".Wh", hidden, in_dim, in_dim);
  p.Uz = &store.add(prefix + ".Uz", hidden, hidden, hidden);
  p.Ur = &store.add(prefix + ".Ur", hidden, hidden, hidden);
  p.Uh = &store.add(prefix + ".Uh", hidden, hidden, hidden);
  p.bz = &store.add(prefix + ".bz", hidden, 1, 0);
  p.br = &store.add(prefix + ".br", hidden, 1, 0);
  p.bh = &store.add(prefix + ".bh", hidden, 1, 0);
  return p;
}

void randomize(Rng& rng, ParameterStore& store, double scale = 0.5) {
  for (auto& p : store.params())
    for (int r = 0; r < p->value.rows(); ++r)
      for (int c = 0; c < p->value.cols(); ++c) p->value(r, c) = rng.normal(0, scale);
}

}  // namespace

TEST_CASE("linear: identity, zero input, random oracle") {
  Rng rng(1);
  const Mat identity = Mat::Identity(4, 4);
  const Mat zero_bias = Mat::Zero(1, 4);
  const Mat x = testutil::random_mat(rng, 3, 4);
  CHECK((linear(x, identity, zero_bias) - x).cwiseAbs().maxCoeff() == 0.0);

  Mat b = testutil::random_mat(rng, 1, 4);
  const Mat from_zero = linear(Mat::Zero(3, 4), identity, b);
  for (int r = 0; r < 3; ++r)
    CHECK((from_zero.row(r) - b.row(0)).cwiseAbs().maxCoeff() == 0.0);

  const Mat W = testutil::random_mat(rng, 4, 6);
  const Mat b2 = testutil::random_mat(rng, 1, 6);
  const Mat got = linear(x, W, b2);
  const Mat want = oracles::linear_ref(x, W, b2);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(linear(x, testutil::random_mat(rng, 5, 2), b2), ShapeError);
}

TEST_CASE("gru_cell analytic zero cases") {
  ParameterStore store;
  const GruDirParams p = add_dir(store, "g", 4, 3);

  const Vec h0 = gru_cell(Vec::Zero(3), Vec::Zero(4), p);
  CHECK(h0.cwiseAbs().maxCoeff() == 0.0);

  Vec v(4);
  v << 1.0, -2.0, 0.5, 3.0;
  const Vec h1 = gru_cell(Vec::Zero(3), v, p);
  CHECK((h1 - 0.5 * v).cwiseAbs().maxCoeff() < 1e-15);

  CHECK_THROWS_AS(gru_cell(Vec::Zero(5), v, p), ShapeError);
}

TEST_CASE("gru_cell matches the scalar gate-equation oracle") {
  Rng rng(2);
  ParameterStore store;
  const GruDirParams p = add_dir(store, "g", 6, 5);
  for (int trial = 0; trial < 20; ++trial) {
    randomize(rng, store, 0.8);
    const Vec x = testutil::random_mat(rng, 5, 1).col(0);
    const Vec h = testutil::random_mat(rng, 6, 1).col(0);
    const Vec got = gru_cell(x, h, p);
    const Vec want = oracles::gru_cell_ref(x, h, p);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("gru_stack: single step, zero params, unrolled oracle") {
  Rng rng(3);
  ParameterStore store;
  std::vector<GruLayerParams> layers(1);
  layers[0].fwd = add_dir(store, "l1f", 4, 3);
  layers[0].bwd = add_dir(store, "l1b", 4, 3);
  randomize(rng, store);

  // N=1: row is the concatenation of one forward and one backward step.
  const Mat seq1 = testutil::random_mat(rng, 1, 3);
  const Mat out1 = gru_stack(seq1, layers, true);
  const Vec fwd = gru_cell(seq1.row(0).transpose(), Vec::Zero(4), layers[0].fwd);
  const Vec bwd = gru_cell(seq1.row(0).transpose(), Vec::Zero(4), layers[0].bwd);
  CHECK((out1.row(0).head(4).transpose() - fwd).cwiseAbs().maxCoeff() == 0.0);
  CHECK((out1.row(0).tail(4).transpose() - bwd).cwiseAbs().maxCoeff() == 0.0);

  // Zero parameters annihilate any input.
  ParameterStore zero_store;
  std::vector<GruLayerParams> zero_layers(2);
  zero_layers[0].fwd = add_dir(zero_store, "z1f", 4, 3);
  zero_layers[0].bwd = add_dir(zero_store, "z1b", 4, 3);
  zero_layers[1].fwd = add_dir(zero_store, "z2f", 4, 8);
  zero_layers[1].bwd = add_dir(zero_store, "z2b", 4, 8);
  const Mat out0 = gru_stack(testutil::random_mat(rng, 5, 3), zero_layers, true);
  CHECK(out0.cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(gru_stack(Mat(0, 3), layers, true), ShapeError);
}

TEST_CASE("gru_stack matches the step-by-step oracle on a 3-layer stack") {
  Rng rng(4);
  ParameterStore store;
  std::vector<GruLayerParams> layers(3);
  layers[0].fwd = add_dir(store, "l1f", 5, 4);
  layers[0].bwd = add_dir(store, "l1b", 5, 4);
  layers[1].fwd = add_dir(store, "l2f", 5, 10);
  layers[1].bwd = add_dir(store, "l2b", 5, 10);
  layers[2].fwd = add_dir(store, "l3f", 5, 10);
  layers[2].bwd = add_dir(store, "l3b", 5, 10);
  randomize(rng, store);

  const Mat seq = testutil::random_mat(rng, 3, 4);
  const Mat got = gru_stack(seq, layers, true);
  const Mat want = oracles::gru_stack_ref(seq, layers, true);
  REQUIRE(got.rows() == 3);
  REQUIRE(got.cols() == 10);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);

  // Unidirectional variant: E = H, forward half only (layer widths H).
  ParameterStore uni_store;
  std::vector<GruLayerParams> uni_layers(2);
  uni_layers[0].fwd = add_dir(uni_store, "u1f", 5, 4);
  uni_layers[1].fwd = add_dir(uni_store, "u2f", 5, 5);
  randomize(rng, uni_store);
  const Mat uni = gru_stack(seq, uni_layers, false);
  const Mat uni_ref = oracles::gru_stack_ref(seq, uni_layers, false);
  REQUIRE(uni.cols() == 5);
  CHECK((uni - uni_ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("softmax_rows: uniform, analytic, oracle, row sums") {
  const Mat equal = Mat::Constant(3, 5, 2.5);
  const Mat uniform = softmax_rows(equal);
  CHECK((uniform.array() - 0.2).abs().maxCoeff() < 1e-15);

  Mat pair(1, 2);
  pair << 0.0, std::log(3.0);
  const Mat soft = softmax_rows(pair);
  CHECK(soft(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(soft(0, 1) == doctest::Approx(0.75).epsilon(1e-12));

  Rng rng(5);
  const Mat scores = testutil::random_mat(rng, 4, 4, 2.0);
  const Mat got = softmax_rows(scores);
  const Mat want = oracles::softmax_rows_ref(scores);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
  for (int r = 0; r < got.rows(); ++r) {
    CHECK(std::abs(got.row(r).sum() - 1.0) < 1e-12);
    for (int c = 0; c < got.cols(); ++c) {
      CHECK(got(r, c) > 0.0);
      CHECK(got(r, c) < 1.0);
    }
  }

  // Max subtraction keeps huge scores finite.
  Mat big(1, 3);
  big << 1e6, 1e6 + 1, 1e6 - 2;
  CHECK(softmax_rows(big).allFinite());
}

TEST_CASE("l1_loss: identity, unit offset, loop oracle, subgradient") {
  Rng rng(6);
  const Mat a = testutil::random_mat(rng, 4, 5);
  CHECK(l1_loss(a, a) == 0.0);
  CHECK(l1_loss(a.array() + 1.0, a) == doctest::Approx(1.0).epsilon(1e-15));

  const Mat b = testutil::random_mat(rng, 4, 5);
  CHECK(l1_loss(a, b) == doctest::Approx(oracles::l1_ref(a, b)).epsilon(1e-12));
  CHECK_THROWS_AS(l1_loss(a, testutil::random_mat(rng, 5, 4)), ShapeError);

  const Mat g = l1_loss_backward(a, a);
  CHECK(g.cwiseAbs().maxCoeff() == 0.0);  // defined 0 at the kink
}

TEST_CASE("poly_lr endpoints and midpoint") {
  TrainConfig cfg;
  CHECK(poly_lr(0, 1000, cfg) == 1e-5);
  CHECK(poly_lr(1000, 1000, cfg) == 1e-8);
  // Independent evaluation of the decay at the midpoint.
  const double expected = 1e-5 * std::pow(0.5, 0.9);
  CHECK(poly_lr(500, 1000, cfg) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(poly_lr(500, 1000, cfg) == doctest::Approx(5.3589e-6).epsilon(1e-4));

  // Non-increasing and bounded.
  double prev = cfg.lr_init;
  for (long s = 0; s <= 100; ++s) {
    const double lr = poly_lr(s, 100, cfg);
    CHECK(lr <= prev + 1e-20);
    CHECK(lr >= cfg.lr_final);
    CHECK(lr <= cfg.lr_init);
    prev = lr;
  }
  CHECK_THROWS_AS(poly_lr(-1, 100, cfg), std::invalid_argument);
  CHECK_THROWS_AS(poly_lr(101, 100, cfg), std::invalid_argument);
}

TEST_CASE("adam_step: zero grads, first step, 5-step reference trajectory") {
  TrainConfig cfg;
  const double lr = 1e-3;

  ParameterStore store;
  Param& w = store.add("w", 1, 1, 1);
  w.value(0, 0) = 0.7;

  // Zero gradient leaves value and moments untouched.
  adam_step(store, lr, 1, cfg);
  CHECK(w.value(0, 0) == 0.7);
  CHECK(w.adam_m(0, 0) == 0.0);
  CHECK(w.adam_v(0, 0) == 0.0);

  // First step with grad 1 moves by ~ -lr.
  w.grad(0, 0) = 1.0;
  adam_step(store, lr, 1, cfg);
  CHECK(w.value(0, 0) == doctest::Approx(0.7 - lr).epsilon(1e-6));
  CHECK(w.grad(0, 0) == 0.0);  // grads zeroed afterwards

  // Five-step trajectory against the scalar reference loop.
  ParameterStore fresh;
  Param& p = fresh.add("p", 1, 1, 1);
  p.value(0, 0) = -0.3;
  const std::vector<double> grads = {0.5, -1.25, 0.75, 2.0, -0.1};
  const std::vector<double> want = oracles::adam_scalar_ref(
      -0.3, grads, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    p.grad(0, 0) = grads[t - 1];
    adam_step(fresh, lr, static_cast<long>(t), cfg);
    CHECK(p.value(0, 0) == doctest::Approx(want[t - 1]).epsilon(1e-12));
  }

  // Non-finite gradients abort with a diagnostic.
  p.grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam_step(fresh, lr, 6, cfg), NonFiniteError);
}

TEST_CASE("adam_step is deterministic for identical inputs") {
  TrainConfig cfg;
  auto run = [&]() {
    ParameterStore store;
    Param& w = store.add("w", 3, 3, 3);
    init_params(store, 7);
    for (int t = 1; t <= 10; ++t) {
      w.grad = w.value * 0.1;
      adam_step(store, 1e-3, t, cfg);
    }
    return w.value;
  };
  const Mat a = run();
  const Mat b = run();
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);  // bitwise identical
}

TEST_CASE("init_params: determinism, seed sensitivity, sample statistics") {
  auto build = [](std::uint64_t seed) {
    auto store = std::make_unique<ParameterStore>();
    store->add("W", 256, 256, 256);
    store->add("b", 256, 1, 0);
    init_params(*store, seed);
    return store;
  };
  auto s1 = build(42);
  auto s2 = build(42);
  auto s3 = build(43);

  CHECK((s1->at("W").value - s2->at("W").value).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s1->at("W").value - s3->at("W").value).cwiseAbs().maxCoeff() > 0.0);
  CHECK(s1->at("b").value.cwiseAbs().maxCoeff() == 0.0);  // biases zero

  // Empirical std of a 256x256 block: uniform(-a, a) has std a/sqrt(3).
  const Mat& w = s1->at("W").value;
  const double mean = w.mean();
  const double var = (w.array() - mean).square().mean();
  const double expected = (1.0 / 16.0) / std::sqrt(3.0);  // a = 1/sqrt(256)
  CHECK(std::sqrt(var) == doctest::Approx(expected).epsilon(0.10));
  CHECK(w.cwiseAbs().maxCoeff() <= 1.0 / 16.0);
}

TEST_CASE("grad_check validates correct gradients and flags wrong ones") {
  Rng rng(8);
  ParameterStore store;
  Param& W = store.add("W", 4, 3, 4);
  Param& b = store.add("b", 1, 3, 0);
  init_params(store, 5);
  const Mat x = testutil::random_mat(rng, 5, 4);
  const Mat target = testutil::random_mat(rng, 5, 3);

  const LossFn good = [&](bool want_grad, KinkTrace* trace) {
    const Mat out = linear(x, W.value, b.value);
    const double loss = l1_loss(out, target, trace);
    if (want_grad) {
      store.zero_grads();
      linear_backward(x, W, b, l1_loss_backward(out, target));
    }
    return loss;
  };
  const GradCheckResult ok = grad_check(store, good, 1e-5, 200, 99);
  CHECK(ok.max_rel_err < 1e-6);
  CHECK(ok.coords_checked > 0);

  // A constant objective has zero analytic and numeric gradients everywhere.
  const LossFn constant = [&](bool want_grad, KinkTrace*) {
    if (want_grad) store.zero_grads();
    return 3.5;
  };
  const GradCheckResult flat = grad_check(store, constant, 1e-5, 200, 99);
  CHECK(flat.max_rel_err == 0.0);

  // Deliberately corrupted backward rule must be caught.
  const LossFn bad = [&](bool want_grad, KinkTrace* trace) {
    const Mat out = linear(x, W.value, b.value);
    const double loss = l1_loss(out, target, trace);
    if (want_grad) {
      store.zero_grads();
      linear_backward(x, W, b, l1_loss_backward(out, target));
      W.grad *= 1.02;  // 2% error
    }
    return loss;
  };
  const GradCheckResult caught = grad_check(store, bad, 1e-5, 200, 99);
  CHECK(caught.max_rel_err > 1e-3);

  CHECK_THROWS_AS(grad_check(store, good, 1e-2, 200, 99), std::invalid_argument);
}

TEST_CASE("gru stack gradients pass finite differences") {
  Rng rng(9);
  ParameterStore store;
  std::vector<GruLayerParams> layers(2);
  layers[0].fwd = add_dir(store, "l1f", 4, 3);
  layers[0].bwd = add_dir(store, "l1b", 4, 3);
  layers[1].fwd = add_dir(store, "l2f", 4, 8);
  layers[1].bwd = add_dir(store, "l2b", 4, 8);
  randomize(rng, store, 0.6);
  const Mat seq = testutil::random_mat(rng, 3, 3);
  const Mat weights = testutil::random_mat(rng, 3, 8);

  const LossFn f = [&](bool want_grad, KinkTrace*) {
    GruStackCache cache;
    const Mat out = gru_stack(seq, layers, true, &cache);
    if (want_grad) {
      store.zero_grads();
      gru_stack_backward(cache, layers, true, weights);
    }
    return weights.cwiseProduct(out).sum();
  };
  // Spec tolerance at eps = 1e-5; the residual here is finite-difference
  // cancellation noise on near-zero gradient coordinates, not bias (it
  // shrinks with larger eps).
  const GradCheckResult result = grad_check(store, f, 1e-5, 400, 123);
  CHECK(result.max_rel_err < 1e-5);
  const GradCheckResult coarse = grad_check(store, f, 1e-4, 400, 123);
  CHECK(coarse.max_rel_err < 1e-6);
}

TEST_CASE("gru stack input gradients pass finite differences") {
  // dL/dseq from gru_stack_backward, probed by perturbing the sequence.
  Rng rng(10);
  ParameterStore store;
  std::vector<GruLayerParams> layers(1);
  layers[0].fwd = add_dir(store, "f", 3, 2);
  layers[0].bwd = add_dir(store, "b", 3, 2);
  randomize(rng, store, 0.7);
  Mat seq = testutil::random_mat(rng, 4, 2);
  const Mat weights = testutil::random_mat(rng, 4, 6);

  GruStackCache cache;
  gru_stack(seq, layers, true, &cache);
  const Mat d_seq = gru_stack_backward(cache, layers, true, weights);

  const double eps = 1e-6;
  for (int r = 0; r < seq.rows(); ++r)
    for (int c = 0; c < seq.cols(); ++c) {
      const double orig = seq(r, c);
      seq(r, c) = orig + eps;
      const double fp = weights.cwiseProduct(gru_stack(seq, layers, true)).sum();
      seq(r, c) = orig - eps;
      const double fm = weights.cwiseProduct(gru_stack(seq, layers, true)).sum();
      seq(r, c) = orig;
      const double numeric = (fp - fm) / (2 * eps);
      CHECK(d_seq(r, c) == doctest::Approx(numeric).epsilon(1e-6));
    }
}
