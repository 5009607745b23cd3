#include "pinet/model.hpp"

#include <cmath>
#include <string>

namespace pinet {

void ModelConfig::validate() const {
  if (joints < 1) throw ConfigError("model: joints must be >= 1");
  if (hidden < 1) throw ConfigError("model: hidden must be >= 1");
  if (gru_layers < 1) throw ConfigError("model: gru_layers must be >= 1");
  if (root_index < 0 || root_index >= joints)
    throw ConfigError("model: root_index out of joint range");
  for (int d : mlp_hidden)
    if (d < 1) throw ConfigError("model: mlp hidden dims must be >= 1");
}

long param_count(const ModelConfig& cfg) {
  cfg.validate();
  const long H = cfg.hidden;
  const long E = cfg.embed_dim();
  const int dirs = cfg.bidirectional ? 2 : 1;

  long total = 0;
  long in_dim = cfg.input_dim();
  for (int l = 0; l < cfg.gru_layers; ++l) {
    total += dirs * (3 * H * in_dim + 3 * H * H + 3 * H);
    in_dim = E;
  }
  if (cfg.use_attention) total += E * E + E;

  long d = E;
  for (int hid : cfg.mlp_hidden) {
    total += d * hid + hid;
    d = hid;
  }
  total += d * cfg.input_dim() + cfg.input_dim();
  return total;
}

namespace {

nn::GruDirParams make_dir(nn::ParameterStore& store, const std::string& prefix,
                          int hidden, int in_dim) {
  nn::GruDirParams p;
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

}  // namespace

PiNet::PiNet(ModelConfig cfg, NormStats stats)
    : cfg_(std::move(cfg)), stats_(std::move(stats)) {
  cfg_.validate();
  if (stats_.mean.size() != cfg_.input_dim() ||
      stats_.stddev.size() != cfg_.input_dim())
    throw ShapeError("PiNet: normalization stats do not match 3*joints");
  if ((stats_.stddev.array() <= 0.0).any())
    throw DataError("PiNet: normalization std must be strictly positive");

  const int H = cfg_.hidden;
  const int E = cfg_.embed_dim();
  int in_dim = cfg_.input_dim();
  for (int l = 0; l < cfg_.gru_layers; ++l) {
    const std::string base = "gru" + std::to_string(l + 1);
    nn::GruLayerParams layer;
    layer.fwd = make_dir(store_, base + ".f", H, in_dim);
    if (cfg_.bidirectional) layer.bwd = make_dir(store_, base + ".b", H, in_dim);
    gru_.push_back(layer);
    in_dim = E;
  }

  if (cfg_.use_attention) {
    att_.A = &store_.add("att.A", E, E, E);
    att_.b = &store_.add("att.b", E, 1, 0);
  }

  int d = E;
  int idx = 1;
  for (int hid : cfg_.mlp_hidden) {
    head_.push_back({&store_.add("mlp" + std::to_string(idx) + ".W", d, hid, d),
                     &store_.add("mlp" + std::to_string(idx) + ".b", 1, hid, 0)});
    d = hid;
    ++idx;
  }
  head_.push_back(
      {&store_.add("mlp" + std::to_string(idx) + ".W", d, cfg_.input_dim(), d),
       &store_.add("mlp" + std::to_string(idx) + ".b", 1, cfg_.input_dim(), 0)});
}

Mat PiNet::embed(const Mat& ordered_inputs, nn::GruStackCache* cache) const {
  return nn::gru_stack(ordered_inputs, gru_, cfg_.bidirectional, cache);
}

Mat PiNet::attention_weights(const Mat& embeddings) const {
  if (!cfg_.use_attention)
    throw std::logic_error("attention_weights: attention disabled by config");
  if (embeddings.rows() < 1)
    throw ShapeError("attention_weights: empty embedding matrix");
  const Mat raw = embeddings * att_.A->value * embeddings.transpose() +
                  (embeddings * att_.b->value) * Eigen::RowVectorXd::Ones(embeddings.rows());
  return nn::softmax_rows(raw);
}

Mat apply_attention(const Mat& weights, const Mat& embeddings) {
  if (weights.cols() != embeddings.rows())
    throw ShapeError("apply_attention: weights cols != embedding rows");
  return weights * embeddings;
}

Mat PiNet::head(const Mat& mixed, const Mat& residual_base, HeadCache* cache,
                nn::KinkTrace* trace) const {
  const int last = static_cast<int>(head_.size()) - 1;
  Mat x = mixed;
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  for (int i = 0; i <= last; ++i) {
    if (cache != nullptr) cache->inputs.push_back(x);
    Mat out = nn::linear(x, head_[static_cast<std::size_t>(i)].W->value,
                         head_[static_cast<std::size_t>(i)].b->value);
    if (i < last) {
      if (cache != nullptr) cache->pre.push_back(out);
      x = nn::rectify(out, trace);
    } else {
      x = std::move(out);
    }
  }
  if (cfg_.predict_residual) {
    if (residual_base.rows() != x.rows() || residual_base.cols() != x.cols())
      throw ShapeError("head: residual base shape mismatch");
    x += residual_base;
  }
  return x;
}

Mat PiNet::ordered_normalized_inputs(const Scene& scene, const Ordering& order) const {
  const int count = scene.size();
  Mat inputs(count, cfg_.input_dim());
  for (int k = 0; k < count; ++k) {
    const Pose& pose = scene.persons[static_cast<std::size_t>(order.perm[static_cast<std::size_t>(k)])].pose;
    if (pose.joint_count() != cfg_.joints)
      throw ShapeError("scene pose has " + std::to_string(pose.joint_count()) +
                       " joints, model expects " + std::to_string(cfg_.joints));
    inputs.row(k) = normalize(pose, stats_).transpose();
  }
  return inputs;
}

Ordering PiNet::default_ordering(const Scene& scene, int n) const {
  if (cfg_.order_mode == OrderMode::Random) {
    Rng rng(mix_seed(0x5eedf00dULL, static_cast<std::uint64_t>(n)));
    return make_ordering(scene, n, cfg_.order_mode, &rng, cfg_.root_index);
  }
  return make_ordering(scene, n, cfg_.order_mode, nullptr, cfg_.root_index);
}

PiNet::ForwardResult PiNet::forward_train(const Scene& scene, int n,
                                          const Ordering& order,
                                          ForwardCache* cache,
                                          nn::KinkTrace* trace) const {
  if (!scene.has_gt())
    throw DataError("forward_train: scene has no ground truth");
  if (n < 0 || n >= scene.size())
    throw std::out_of_range("forward_train: person index out of range");

  const int count = scene.size();
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.order = order;
  c.inputs = ordered_normalized_inputs(scene, order);

  c.embeddings = embed(c.inputs, &c.gru);
  if (cfg_.use_attention) {
    c.attention = attention_weights(c.embeddings);
    c.mixed = apply_attention(c.attention, c.embeddings);
  } else {
    c.attention.resize(0, 0);
    c.mixed = c.embeddings;
  }
  c.outputs = head(c.mixed, c.inputs, &c.head, trace);

  // L1 in millimeters, factored as std * |y - normalize(gt)| so the
  // subtraction happens at unit scale instead of between coordinates that are
  // thousands of millimeters tall.
  c.gt_norm.resize(count, cfg_.input_dim());
  ForwardResult result;
  result.refined.resize(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const int person = order.perm[static_cast<std::size_t>(k)];
    c.gt_norm.row(k) =
        normalize(scene.gt[static_cast<std::size_t>(person)], stats_).transpose();
    result.refined[static_cast<std::size_t>(person)] =
        denormalize(c.outputs.row(k).transpose(), stats_);
  }
  const Mat diff = c.outputs - c.gt_norm;
  if (trace != nullptr)
    for (int r = 0; r < diff.rows(); ++r)
      for (int col = 0; col < diff.cols(); ++col) trace->push(diff(r, col) > 0.0);
  result.loss = (diff.cwiseAbs().array().rowwise() *
                 stats_.stddev.transpose().array())
                    .mean();
  return result;
}

PiNet::ForwardResult PiNet::forward_train(const Scene& scene, int n) const {
  return forward_train(scene, n, default_ordering(scene, n));
}

void PiNet::backward(const ForwardCache& c) {
  // d loss / d outputs = sign(y - gt_norm) * std / numel (sign(x - g) in
  // normalized and millimeter coordinates agree since std > 0).
  Mat g = nn::l1_loss_backward(c.outputs, c.gt_norm);
  g.array().rowwise() *= stats_.stddev.transpose().array();

  // Head. The residual shortcut feeds gradient back to the (data) inputs
  // only, so it contributes nothing to any parameter.
  const int last = static_cast<int>(head_.size()) - 1;
  for (int i = last; i >= 0; --i) {
    if (i != last) g = nn::rectify_backward(c.head.pre[static_cast<std::size_t>(i)], g);
    g = nn::linear_backward(c.head.inputs[static_cast<std::size_t>(i)],
                            *head_[static_cast<std::size_t>(i)].W,
                            *head_[static_cast<std::size_t>(i)].b, g);
  }

  // Attention: U = S.E, S = rowsoftmax(raw), raw = E.A.E^T + (E.b).1^T
  Mat d_embed;
  if (cfg_.use_attention) {
    const Mat& E = c.embeddings;
    const Mat& S = c.attention;
    Mat dS = g * E.transpose();
    d_embed = S.transpose() * g;
    const Mat draw = nn::softmax_rows_backward(S, dS);
    att_.A->grad.noalias() += E.transpose() * draw * E;
    const Vec row_sums = draw.rowwise().sum();
    att_.b->grad.col(0).noalias() += E.transpose() * row_sums;
    d_embed.noalias() += draw * (E * att_.A->value.transpose());
    d_embed.noalias() += draw.transpose() * (E * att_.A->value);
    d_embed.noalias() += row_sums * att_.b->value.col(0).transpose();
  } else {
    d_embed = std::move(g);
  }

  nn::gru_stack_backward(c.gru, gru_, cfg_.bidirectional, d_embed);
}

double PiNet::forward_backward(const Scene& scene, int n, const Ordering& order) {
  ForwardCache cache;
  const ForwardResult result = forward_train(scene, n, order, &cache);
  backward(cache);
  return result.loss;
}

Pose PiNet::refine_person(const Scene& scene, int n, const Ordering& order) const {
  if (n < 0 || n >= scene.size())
    throw std::out_of_range("refine_person: person index out of range");

  const Mat inputs = ordered_normalized_inputs(scene, order);
  const Mat embeddings = embed(inputs);

  Mat mixed_row;
  if (cfg_.use_attention) {
    // Only the person-of-interest row of the attention map is formed:
    // raw_m = e_0.(A.e_m + b) = (A^T.e_0).e_m + e_0.b
    const Vec keyed = att_.A->value.transpose() * embeddings.row(0).transpose();
    Mat raw = (embeddings * keyed).transpose();
    raw.array() += embeddings.row(0).dot(att_.b->value.col(0));
    const Mat weights = nn::softmax_rows(raw);
    mixed_row = weights * embeddings;
  } else {
    mixed_row = embeddings.row(0);
  }

  const Mat out = head(mixed_row, inputs.row(0));
  return denormalize(out.row(0).transpose(), stats_);
}

Pose PiNet::refine_person(const Scene& scene, int n) const {
  return refine_person(scene, n, default_ordering(scene, n));
}

std::vector<Pose> PiNet::refine_scene(const Scene& scene,
                                      std::uint64_t order_seed) const {
  std::vector<Pose> refined;
  refined.reserve(static_cast<std::size_t>(scene.size()));
  for (int n = 0; n < scene.size(); ++n) {
    Ordering order;
    if (cfg_.order_mode == OrderMode::Random) {
      Rng rng(mix_seed(order_seed, static_cast<std::uint64_t>(n)));
      order = make_ordering(scene, n, cfg_.order_mode, &rng, cfg_.root_index);
    } else {
      order = make_ordering(scene, n, cfg_.order_mode, nullptr, cfg_.root_index);
    }
    refined.push_back(refine_person(scene, n, order));
  }
  return refined;
}

}  // namespace pinet
