#include "pinet/nn.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace pinet::nn {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

}  // namespace

// ---------------------------------------------------------------------------
// ParameterStore

Param& ParameterStore::add(const std::string& name, int rows, int cols, int fan_in) {
  if (contains(name))
    throw std::invalid_argument("duplicate parameter name: " + name);
  params_.push_back(std::make_unique<Param>(name, rows, cols, fan_in));
  return *params_.back();
}

Param& ParameterStore::at(std::string_view name) {
  for (auto& p : params_)
    if (p->name == name) return *p;
  throw std::out_of_range("no parameter named " + std::string(name));
}

const Param& ParameterStore::at(std::string_view name) const {
  for (const auto& p : params_)
    if (p->name == name) return *p;
  throw std::out_of_range("no parameter named " + std::string(name));
}

bool ParameterStore::contains(std::string_view name) const {
  for (const auto& p : params_)
    if (p->name == name) return true;
  return false;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += static_cast<std::size_t>(p->value.size());
  return total;
}

void ParameterStore::zero_grads() {
  for (auto& p : params_) p->grad.setZero();
}

void ParameterStore::scale_grads(double factor) {
  for (auto& p : params_) p->grad *= factor;
}

const Param* ParameterStore::locate(std::size_t flat, int& row, int& col) const {
  for (const auto& p : params_) {
    const auto size = static_cast<std::size_t>(p->value.size());
    if (flat < size) {
      const int cols = static_cast<int>(p->value.cols());
      row = static_cast<int>(flat) / cols;
      col = static_cast<int>(flat) % cols;
      return p.get();
    }
    flat -= size;
  }
  throw std::out_of_range("flat coordinate out of range");
}

double ParameterStore::coord(std::size_t flat) const {
  int r, c;
  const Param* p = locate(flat, r, c);
  return p->value(r, c);
}

void ParameterStore::set_coord(std::size_t flat, double value) {
  int r, c;
  const Param* p = locate(flat, r, c);
  const_cast<Param*>(p)->value(r, c) = value;
}

double ParameterStore::grad_coord(std::size_t flat) const {
  int r, c;
  const Param* p = locate(flat, r, c);
  return p->grad(r, c);
}

std::string ParameterStore::coord_name(std::size_t flat) const {
  int r, c;
  const Param* p = locate(flat, r, c);
  return p->name + "[" + std::to_string(r) + "," + std::to_string(c) + "]";
}

// ---------------------------------------------------------------------------
// Dense layer

Mat linear(const Mat& x, const Mat& W, const Mat& b) {
  require(x.cols() == W.rows(), "linear: x cols != W rows");
  require(b.rows() == 1 && b.cols() == W.cols(), "linear: bias must be 1 x K");
  return (x * W).rowwise() + b.row(0);
}

Mat linear_backward(const Mat& x, Param& W, Param& b, const Mat& g) {
  require(g.rows() == x.rows() && g.cols() == W.value.cols(),
          "linear_backward: gradient shape mismatch");
  W.grad.noalias() += x.transpose() * g;
  b.grad.row(0) += g.colwise().sum();
  return g * W.value.transpose();
}

Mat rectify(const Mat& x, KinkTrace* trace) {
  if (trace != nullptr)
    for (int r = 0; r < x.rows(); ++r)
      for (int c = 0; c < x.cols(); ++c) trace->push(x(r, c) > 0.0);
  return x.cwiseMax(0.0);
}

Mat rectify_backward(const Mat& pre, const Mat& g) {
  return ((pre.array() > 0.0).cast<double>() * g.array()).matrix();
}

// ---------------------------------------------------------------------------
// GRU

Vec gru_cell(const Vec& x, const Vec& h_prev, const GruDirParams& p,
             GruStepCache* cache) {
  require(x.size() == p.input_dim(), "gru_cell: input size mismatch");
  require(h_prev.size() == p.hidden(), "gru_cell: hidden size mismatch");

  Vec z = p.Wz->value * x + p.Uz->value * h_prev + p.bz->value.col(0);
  Vec r = p.Wr->value * x + p.Ur->value * h_prev + p.br->value.col(0);
  z = z.unaryExpr([](double a) { return sigmoid(a); });
  r = r.unaryExpr([](double a) { return sigmoid(a); });

  Vec hbar = p.Wh->value * x + p.Uh->value * r.cwiseProduct(h_prev) + p.bh->value.col(0);
  hbar = hbar.array().tanh();

  Vec h = (1.0 - z.array()) * h_prev.array() + z.array() * hbar.array();
  if (cache != nullptr) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->hbar = std::move(hbar);
  }
  return h;
}

void gru_cell_backward(const GruStepCache& c, const GruDirParams& p,
                       const Vec& dh, Vec& dx, Vec& dh_prev) {
  // h = (1-z).h_prev + z.hbar
  const Vec dz = dh.cwiseProduct(c.hbar - c.h_prev);
  const Vec dhbar = dh.cwiseProduct(c.z);
  dh_prev = dh.cwiseProduct(Vec::Ones(dh.size()) - c.z);

  // hbar = tanh(ah), ah = Wh.x + Uh.(r.h_prev) + bh
  const Vec dah = dhbar.array() * (1.0 - c.hbar.array().square());
  const Vec rh = c.r.cwiseProduct(c.h_prev);
  p.Wh->grad.noalias() += dah * c.x.transpose();
  p.Uh->grad.noalias() += dah * rh.transpose();
  p.bh->grad.col(0) += dah;
  const Vec drh = p.Uh->value.transpose() * dah;
  const Vec dr = drh.cwiseProduct(c.h_prev);
  dh_prev += drh.cwiseProduct(c.r);
  dx.noalias() += p.Wh->value.transpose() * dah;

  // z = sig(az), az = Wz.x + Uz.h_prev + bz
  const Vec daz = dz.array() * c.z.array() * (1.0 - c.z.array());
  p.Wz->grad.noalias() += daz * c.x.transpose();
  p.Uz->grad.noalias() += daz * c.h_prev.transpose();
  p.bz->grad.col(0) += daz;
  dh_prev.noalias() += p.Uz->value.transpose() * daz;
  dx.noalias() += p.Wz->value.transpose() * daz;

  // r = sig(ar), ar = Wr.x + Ur.h_prev + br
  const Vec dar = dr.array() * c.r.array() * (1.0 - c.r.array());
  p.Wr->grad.noalias() += dar * c.x.transpose();
  p.Ur->grad.noalias() += dar * c.h_prev.transpose();
  p.br->grad.col(0) += dar;
  dh_prev.noalias() += p.Ur->value.transpose() * dar;
  dx.noalias() += p.Wr->value.transpose() * dar;
}

Mat gru_stack(const Mat& seq, const std::vector<GruLayerParams>& layers,
              bool bidirectional, GruStackCache* cache) {
  require(seq.rows() >= 1, "gru_stack: empty sequence");
  if (layers.empty()) throw std::invalid_argument("gru_stack: no layers");

  const long steps = seq.rows();
  if (cache != nullptr) cache->layers.assign(layers.size(), GruLayerCache{});

  Mat input = seq;
  Mat output;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const GruLayerParams& layer = layers[l];
    const int hidden = layer.fwd.hidden();
    require(input.cols() == layer.fwd.input_dim(),
            "gru_stack: layer input width mismatch");
    GruLayerCache* lc = cache ? &cache->layers[l] : nullptr;
    if (lc != nullptr) {
      lc->input = input;
      lc->fwd.resize(static_cast<std::size_t>(steps));
      if (bidirectional) lc->bwd.resize(static_cast<std::size_t>(steps));
    }

    output.resize(steps, bidirectional ? 2 * hidden : hidden);
    Vec h = Vec::Zero(hidden);
    for (long k = 0; k < steps; ++k) {
      h = gru_cell(input.row(k).transpose(), h, layer.fwd,
                   lc ? &lc->fwd[static_cast<std::size_t>(k)] : nullptr);
      output.row(k).head(hidden) = h.transpose();
    }
    if (bidirectional) {
      h.setZero();
      for (long k = steps - 1; k >= 0; --k) {
        h = gru_cell(input.row(k).transpose(), h, layer.bwd,
                     lc ? &lc->bwd[static_cast<std::size_t>(k)] : nullptr);
        output.row(k).tail(hidden) = h.transpose();
      }
    }
    input = output;
  }
  return output;
}

Mat gru_stack_backward(const GruStackCache& cache,
                       const std::vector<GruLayerParams>& layers,
                       bool bidirectional, const Mat& d_out) {
  if (cache.layers.size() != layers.size())
    throw std::invalid_argument("gru_stack_backward: cache/layer count mismatch");

  Mat d_above = d_out;
  for (std::size_t li = layers.size(); li-- > 0;) {
    const GruLayerParams& layer = layers[li];
    const GruLayerCache& lc = cache.layers[li];
    const int hidden = layer.fwd.hidden();
    const long steps = lc.input.rows();
    require(d_above.rows() == steps &&
                d_above.cols() == (bidirectional ? 2 * hidden : hidden),
            "gru_stack_backward: upstream gradient shape mismatch");

    Mat d_input = Mat::Zero(steps, lc.input.cols());

    // Forward direction ran k = 0..N-1, so BPTT runs k = N-1..0.
    Vec dh = Vec::Zero(hidden);
    Vec dh_prev(hidden);
    for (long k = steps - 1; k >= 0; --k) {
      dh += d_above.row(k).head(hidden).transpose();
      Vec dx = Vec::Zero(lc.input.cols());
      gru_cell_backward(lc.fwd[static_cast<std::size_t>(k)], layer.fwd, dh, dx,
                        dh_prev);
      d_input.row(k) += dx.transpose();
      dh = dh_prev;
    }

    if (bidirectional) {
      // Backward direction ran k = N-1..0, so BPTT runs k = 0..N-1.
      dh.setZero();
      for (long k = 0; k < steps; ++k) {
        dh += d_above.row(k).tail(hidden).transpose();
        Vec dx = Vec::Zero(lc.input.cols());
        gru_cell_backward(lc.bwd[static_cast<std::size_t>(k)], layer.bwd, dh, dx,
                          dh_prev);
        d_input.row(k) += dx.transpose();
        dh = dh_prev;
      }
    }
    d_above = std::move(d_input);
  }
  return d_above;
}

// ---------------------------------------------------------------------------
// Softmax / loss

Mat softmax_rows(const Mat& scores) {
  Mat out(scores.rows(), scores.cols());
  for (int r = 0; r < scores.rows(); ++r) {
    const double m = scores.row(r).maxCoeff();
    Eigen::RowVectorXd e = (scores.row(r).array() - m).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

Mat softmax_rows_backward(const Mat& softmaxed, const Mat& ds) {
  require(softmaxed.rows() == ds.rows() && softmaxed.cols() == ds.cols(),
          "softmax_rows_backward: shape mismatch");
  Mat draw(ds.rows(), ds.cols());
  for (int r = 0; r < ds.rows(); ++r) {
    const double dot = softmaxed.row(r).dot(ds.row(r));
    draw.row(r) = softmaxed.row(r).array() * (ds.row(r).array() - dot);
  }
  return draw;
}

double l1_loss(const Mat& pred, const Mat& target, KinkTrace* trace) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(),
          "l1_loss: shape mismatch");
  if (trace != nullptr)
    for (int r = 0; r < pred.rows(); ++r)
      for (int c = 0; c < pred.cols(); ++c)
        trace->push(pred(r, c) - target(r, c) > 0.0);
  return (pred - target).cwiseAbs().mean();
}

Mat l1_loss_backward(const Mat& pred, const Mat& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(),
          "l1_loss_backward: shape mismatch");
  const double scale = 1.0 / static_cast<double>(pred.size());
  return (pred - target).unaryExpr([scale](double d) {
    if (d > 0.0) return scale;
    if (d < 0.0) return -scale;
    return 0.0;  // subgradient at the kink
  });
}

// ---------------------------------------------------------------------------
// Optimization

void TrainConfig::validate() const {
  if (lr_final > lr_init) throw ConfigError("train: lr_final must be <= lr_init");
  if (power <= 0.0) throw ConfigError("train: power must be > 0");
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
}

double poly_lr(long step, long total_steps, const TrainConfig& cfg) {
  if (total_steps < 1 || step < 0 || step > total_steps)
    throw std::invalid_argument("poly_lr: need 0 <= step <= total_steps, total >= 1");
  const double frac = 1.0 - static_cast<double>(step) / static_cast<double>(total_steps);
  return std::max(cfg.lr_final, cfg.lr_init * std::pow(frac, cfg.power));
}

void adam_step(ParameterStore& store, double lr, long t, const TrainConfig& cfg) {
  if (t < 1) throw std::invalid_argument("adam_step: t must be >= 1");
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
  for (auto& p : store.params()) {
    if (!p->grad.allFinite())
      throw NonFiniteError("adam_step: non-finite gradient in " + p->name);
    p->adam_m = cfg.adam_beta1 * p->adam_m + (1.0 - cfg.adam_beta1) * p->grad;
    p->adam_v = cfg.adam_beta2 * p->adam_v.array() +
                (1.0 - cfg.adam_beta2) * p->grad.array().square();
    p->value.array() -= lr * (p->adam_m.array() / bc1) /
                        ((p->adam_v.array() / bc2).sqrt() + cfg.adam_eps);
    p->grad.setZero();
  }
}

void init_params(ParameterStore& store, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& p : store.params()) {
    if (p->fan_in <= 0) {
      p->value.setZero();
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(p->fan_in));
    for (int r = 0; r < p->value.rows(); ++r)
      for (int c = 0; c < p->value.cols(); ++c)
        p->value(r, c) = rng.uniform(-bound, bound);
  }
}

// ---------------------------------------------------------------------------
// Gradient verification

GradCheckResult grad_check(ParameterStore& store, const LossFn& f, double eps,
                           std::size_t min_coords, std::uint64_t seed) {
  if (eps < 1e-7 || eps > 1e-3)
    throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-3]");

  KinkTrace base_trace;
  const double base = f(true, &base_trace);
  if (!std::isfinite(base)) throw NonFiniteError("grad_check: non-finite loss");

  // Snapshot analytic gradients before probing mutates anything.
  const std::size_t total = store.scalar_count();
  std::vector<double> analytic(total);
  for (std::size_t i = 0; i < total; ++i) analytic[i] = store.grad_coord(i);

  // Sample w/o replacement via partial Fisher-Yates over coordinate indices.
  const std::size_t want = std::min(total, std::max<std::size_t>(min_coords, 1));
  std::vector<std::size_t> pool(total);
  for (std::size_t i = 0; i < total; ++i) pool[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < want; ++i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(static_cast<long>(i), static_cast<long>(total) - 1));
    std::swap(pool[i], pool[j]);
  }

  GradCheckResult result;
  KinkTrace plus_trace, minus_trace;
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t idx = pool[i];
    const double original = store.coord(idx);

    store.set_coord(idx, original + eps);
    plus_trace.clear();
    const double fp = f(false, &plus_trace);
    store.set_coord(idx, original - eps);
    minus_trace.clear();
    const double fm = f(false, &minus_trace);
    store.set_coord(idx, original);

    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NonFiniteError("grad_check: non-finite loss while probing " +
                           store.coord_name(idx));
    if (!(plus_trace == minus_trace) || !(plus_trace == base_trace)) {
      ++result.coords_skipped;
      continue;
    }

    const double numeric = (fp - fm) / (2.0 * eps);
    const double a = analytic[idx];

    // Central differences resolve gradients only down to ~ulp(f)/(2 eps);
    // below that the quotient is rounding noise, so the comparison carries no
    // signal. Exact zeros on both sides still count as checked.
    const double resolution = std::numeric_limits<double>::epsilon() *
                              std::max(std::abs(fp), std::abs(fm)) / (2.0 * eps);
    const double measurable = 8.0 * resolution / 1e-5;
    if ((a != 0.0 || numeric != 0.0) &&
        std::max(std::abs(a), std::abs(numeric)) < measurable) {
      ++result.coords_skipped;
      continue;
    }
    const double rel =
        std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    if (rel > result.max_rel_err) {
      result.max_rel_err = rel;
      result.worst_coord = store.coord_name(idx);
      result.worst_analytic = a;
      result.worst_numeric = numeric;
    }
    ++result.coords_checked;
  }
  return result;
}

}  // namespace pinet::nn
