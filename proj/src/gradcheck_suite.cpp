#include "pinet/gradcheck_suite.hpp"

#include <chrono>

#include "pinet/model.hpp"

namespace pinet {

namespace {

using nn::GradCheckResult;
using nn::KinkTrace;
using nn::Param;
using nn::ParameterStore;

Mat random_mat(Rng& rng, int rows, int cols, double scale = 1.0) {
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, scale);
  return m;
}

void fill_random(Rng& rng, ParameterStore& store, double scale) {
  for (auto& p : store.params())
    for (int r = 0; r < p->value.rows(); ++r)
      for (int c = 0; c < p->value.cols(); ++c) p->value(r, c) = rng.normal(0.0, scale);
}

GradCheckResult check_linear_l1(std::uint64_t seed) {
  Rng rng(seed);
  ParameterStore store;
  Param& W = store.add("W", 4, 5, 4);
  Param& b = store.add("b", 1, 5, 0);
  fill_random(rng, store, 0.5);
  const Mat x = random_mat(rng, 3, 4);
  const Mat target = random_mat(rng, 3, 5);

  const nn::LossFn f = [&](bool want_grad, KinkTrace* trace) {
    const Mat out = nn::linear(x, W.value, b.value);
    const double loss = nn::l1_loss(out, target, trace);
    if (want_grad) {
      store.zero_grads();
      nn::linear_backward(x, W, b, nn::l1_loss_backward(out, target));
    }
    return loss;
  };
  return nn::grad_check(store, f, kGradCheckEps, 200, mix_seed(seed, 1));
}

GradCheckResult check_gru_cell(std::uint64_t seed) {
  Rng rng(seed);
  ParameterStore store;
  nn::GruDirParams p;
  p.Wz = &store.add("Wz", 5, 4, 4);
  p.Wr = &store.add("Wr", 5, 4, 4);
  p.Wh = &store.add("Wh", 5, 4, 4);
  p.Uz = &store.add("Uz", 5, 5, 5);
  p.Ur = &store.add("Ur", 5, 5, 5);
  p.Uh = &store.add("Uh", 5, 5, 5);
  p.bz = &store.add("bz", 5, 1, 0);
  p.br = &store.add("br", 5, 1, 0);
  p.bh = &store.add("bh", 5, 1, 0);
  fill_random(rng, store, 0.6);
  const Vec x = random_mat(rng, 4, 1).col(0);
  const Vec h_prev = random_mat(rng, 5, 1).col(0);
  const Vec weights = random_mat(rng, 5, 1).col(0);

  const nn::LossFn f = [&](bool want_grad, KinkTrace*) {
    nn::GruStepCache cache;
    const Vec h = nn::gru_cell(x, h_prev, p, &cache);
    if (want_grad) {
      store.zero_grads();
      Vec dx = Vec::Zero(x.size());
      Vec dh_prev(h_prev.size());
      nn::gru_cell_backward(cache, p, weights, dx, dh_prev);
    }
    return weights.dot(h);
  };
  return nn::grad_check(store, f, kGradCheckEps, 200, mix_seed(seed, 2));
}

GradCheckResult check_gru_stack(std::uint64_t seed) {
  Rng rng(seed);
  ParameterStore store;
  auto make_dir = [&](const std::string& prefix, int hidden, int in_dim) {
    nn::GruDirParams p;
    p.Wz = &store.add(prefix + "Wz", hidden, in_dim, in_dim);
    p.Wr = &store.add(prefix + "Wr", hidden, in_dim, in_dim);
    p.Wh = &store.add(prefix + "Wh", hidden, in_dim, in_dim);
    p.Uz = &store.add(prefix + "Uz", hidden, hidden, hidden);
    p.Ur = &store.add(prefix + "Ur", hidden, hidden, hidden);
    p.Uh = &store.add(prefix + "Uh", hidden, hidden, hidden);
    p.bz = &store.add(prefix + "bz", hidden, 1, 0);
    p.br = &store.add(prefix + "br", hidden, 1, 0);
    p.bh = &store.add(prefix + "bh", hidden, 1, 0);
    return p;
  };
  std::vector<nn::GruLayerParams> layers(2);
  layers[0].fwd = make_dir("l1f.", 4, 3);
  layers[0].bwd = make_dir("l1b.", 4, 3);
  layers[1].fwd = make_dir("l2f.", 4, 8);
  layers[1].bwd = make_dir("l2b.", 4, 8);
  fill_random(rng, store, 0.5);
  const Mat seq = random_mat(rng, 3, 3);
  const Mat weights = random_mat(rng, 3, 8);

  const nn::LossFn f = [&](bool want_grad, KinkTrace*) {
    nn::GruStackCache cache;
    const Mat out = nn::gru_stack(seq, layers, true, &cache);
    if (want_grad) {
      store.zero_grads();
      nn::gru_stack_backward(cache, layers, true, weights);
    }
    return weights.cwiseProduct(out).sum();
  };
  return nn::grad_check(store, f, kGradCheckEps, 200, mix_seed(seed, 3));
}

GradCheckResult check_softmax_rows(std::uint64_t seed) {
  Rng rng(seed);
  ParameterStore store;
  Param& raw = store.add("raw", 4, 4, 4);
  fill_random(rng, store, 1.0);
  const Mat weights = random_mat(rng, 4, 4);

  const nn::LossFn f = [&](bool want_grad, KinkTrace*) {
    const Mat s = nn::softmax_rows(raw.value);
    if (want_grad) {
      store.zero_grads();
      raw.grad += nn::softmax_rows_backward(s, weights);
    }
    return weights.cwiseProduct(s).sum();
  };
  return nn::grad_check(store, f, kGradCheckEps, 200, mix_seed(seed, 4));
}

GradCheckResult check_attention(std::uint64_t seed) {
  Rng rng(seed);
  const int dim = 6;
  ParameterStore store;
  Param& A = store.add("A", dim, dim, dim);
  Param& b = store.add("b", dim, 1, 0);
  fill_random(rng, store, 0.4);
  const Mat E = random_mat(rng, 3, dim, 0.7);
  const Mat weights = random_mat(rng, 3, dim);

  const nn::LossFn f = [&](bool want_grad, KinkTrace*) {
    const Mat raw = E * A.value * E.transpose() +
                    (E * b.value) * Eigen::RowVectorXd::Ones(E.rows());
    const Mat S = nn::softmax_rows(raw);
    const Mat U = S * E;
    if (want_grad) {
      store.zero_grads();
      const Mat dS = weights * E.transpose();
      const Mat draw = nn::softmax_rows_backward(S, dS);
      A.grad.noalias() += E.transpose() * draw * E;
      b.grad.col(0).noalias() += E.transpose() * draw.rowwise().sum();
    }
    return weights.cwiseProduct(U).sum();
  };
  return nn::grad_check(store, f, kGradCheckEps, 200, mix_seed(seed, 5));
}

GradCheckResult check_head_l1(std::uint64_t seed) {
  Rng rng(seed);
  ParameterStore store;
  Param& W1 = store.add("W1", 6, 5, 6);
  Param& b1 = store.add("b1", 1, 5, 0);
  Param& W2 = store.add("W2", 5, 4, 5);
  Param& b2 = store.add("b2", 1, 4, 0);
  Param& W3 = store.add("W3", 4, 3, 4);
  Param& b3 = store.add("b3", 1, 3, 0);
  fill_random(rng, store, 0.5);
  const Mat x = random_mat(rng, 3, 6);
  const Mat target = random_mat(rng, 3, 3);

  const nn::LossFn f = [&](bool want_grad, KinkTrace* trace) {
    const Mat pre1 = nn::linear(x, W1.value, b1.value);
    const Mat a1 = nn::rectify(pre1, trace);
    const Mat pre2 = nn::linear(a1, W2.value, b2.value);
    const Mat a2 = nn::rectify(pre2, trace);
    const Mat out = nn::linear(a2, W3.value, b3.value);
    const double loss = nn::l1_loss(out, target, trace);
    if (want_grad) {
      store.zero_grads();
      Mat g = nn::l1_loss_backward(out, target);
      g = nn::linear_backward(a2, W3, b3, g);
      g = nn::rectify_backward(pre2, g);
      g = nn::linear_backward(a1, W2, b2, g);
      g = nn::rectify_backward(pre1, g);
      nn::linear_backward(x, W1, b1, g);
    }
    return loss;
  };
  return nn::grad_check(store, f, kGradCheckEps, 200, mix_seed(seed, 6));
}

GradCheckResult check_pinet_loss(std::uint64_t seed) {
  Rng rng(seed);
  const int joints = 17;

  // Random three-person scene in a realistic coordinate range.
  Scene scene;
  for (int n = 0; n < 3; ++n) {
    Mat j = random_mat(rng, joints, 3, 400.0);
    j.col(2).array() += 4000.0;
    scene.persons.push_back({n, Pose(j)});
    scene.gt.emplace_back(Pose(j));  // placeholder, replaced below
  }

  NormStats stats;
  stats.mean = Vec::Zero(3 * joints);
  stats.stddev = Vec::Constant(3 * joints, 400.0);
  for (int j = 0; j < joints; ++j) stats.mean(3 * j + 2) = 4000.0;

  ModelConfig cfg;  // reference architecture
  PiNet net(cfg, stats);
  net.init(mix_seed(seed, 7));
  const Ordering order = order_for(scene, 0);

  // Place the targets a few millimeters from the model's own output. The L1
  // gradient is a pure sign pattern, so this leaves every parameter gradient
  // magnitude unchanged while keeping the loss value (and with it the
  // finite-difference cancellation noise) small.
  {
    const auto base = net.forward_train(scene, 0, order);
    for (int n = 0; n < 3; ++n)
      scene.gt[static_cast<std::size_t>(n)] =
          Pose(base.refined[static_cast<std::size_t>(n)].joints +
               random_mat(rng, joints, 3, 2.0));
  }

  const nn::LossFn f = [&](bool want_grad, KinkTrace* trace) {
    if (!want_grad) {
      ForwardCache cache;
      return net.forward_train(scene, 0, order, &cache, trace).loss;
    }
    net.store().zero_grads();
    ForwardCache cache;
    const double loss = net.forward_train(scene, 0, order, &cache, trace).loss;
    net.backward(cache);
    return loss;
  };
  return nn::grad_check(net.store(), f, kGradCheckEps, 200, mix_seed(seed, 8));
}

void merge(GradCheckReport& report, const std::string& name,
           const GradCheckResult& result) {
  ComponentCheck check{name, result, result.max_rel_err < kGradCheckTolerance};
  if (result.max_rel_err > report.worst) {
    report.worst = result.max_rel_err;
    report.worst_component = name;
    report.worst_coord = result.worst_coord;
  }
  report.checks.push_back(std::move(check));
}

}  // namespace

GradCheckReport run_gradcheck_suite(std::uint64_t base_seed) {
  const auto t0 = std::chrono::steady_clock::now();
  GradCheckReport report;
  for (int trial = 0; trial < 3; ++trial) {
    const std::uint64_t seed = mix_seed(base_seed, static_cast<std::uint64_t>(trial));
    const std::string tag = "/seed" + std::to_string(trial);
    merge(report, "linear_l1" + tag, check_linear_l1(seed));
    merge(report, "gru_cell" + tag, check_gru_cell(seed));
    merge(report, "gru_stack" + tag, check_gru_stack(seed));
    merge(report, "softmax_rows" + tag, check_softmax_rows(seed));
    merge(report, "attention" + tag, check_attention(seed));
    merge(report, "head_l1" + tag, check_head_l1(seed));
    merge(report, "pinet_loss" + tag, check_pinet_loss(seed));
  }
  report.all_passed = true;
  for (const ComponentCheck& check : report.checks)
    if (!check.passed) report.all_passed = false;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace pinet
