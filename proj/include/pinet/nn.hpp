#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "pinet/common.hpp"
#include "pinet/rng.hpp"

namespace pinet::nn {

/// One trainable tensor with its gradient and Adam moment buffers, all
/// shape-locked together.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;
  int fan_in = 0;  // 0 marks a bias: initialized to zero

  Param(std::string n, int rows, int cols, int fan)
      : name(std::move(n)),
        value(Mat::Zero(rows, cols)),
        grad(Mat::Zero(rows, cols)),
        adam_m(Mat::Zero(rows, cols)),
        adam_v(Mat::Zero(rows, cols)),
        fan_in(fan) {}
};

/// Ordered, name-addressable collection of Params. Order is creation order
/// and defines both the checkpoint layout and the flat coordinate indexing
/// used by grad_check.
class ParameterStore {
 public:
  Param& add(const std::string& name, int rows, int cols, int fan_in);
  Param& at(std::string_view name);
  const Param& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::vector<std::unique_ptr<Param>>& params() { return params_; }
  const std::vector<std::unique_ptr<Param>>& params() const { return params_; }

  std::size_t tensor_count() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grads();
  void scale_grads(double factor);

  // Flat coordinate view (tensors in creation order, row-major inside each).
  double coord(std::size_t flat) const;
  void set_coord(std::size_t flat, double value);
  double grad_coord(std::size_t flat) const;
  /// "name[r,c]" for diagnostics.
  std::string coord_name(std::size_t flat) const;

 private:
  const Param* locate(std::size_t flat, int& row, int& col) const;
  std::vector<std::unique_ptr<Param>> params_;
};

/// Sign bits of every non-smooth site (L1 residuals, rectifier masks) seen
/// during a forward pass. grad_check skips finite-difference probes whose
/// two evaluations disagree here, i.e. probes that straddle a kink.
struct KinkTrace {
  std::vector<std::uint8_t> bits;
  void push(bool b) { bits.push_back(b ? 1 : 0); }
  void clear() { bits.clear(); }
  friend bool operator==(const KinkTrace& a, const KinkTrace& b) {
    return a.bits == b.bits;
  }
};

// ---------------------------------------------------------------------------
// Dense layer

/// Row-wise x.W + b for x: NxD, W: DxK, b: 1xK.
Mat linear(const Mat& x, const Mat& W, const Mat& b);

/// Accumulates dL/dW = x^T.g and dL/db = column sums of g into the Params,
/// returns dL/dx = g.W^T.
Mat linear_backward(const Mat& x, Param& W, Param& b, const Mat& g);

/// max(x, 0) elementwise; mask bits recorded when trace is given.
Mat rectify(const Mat& x, KinkTrace* trace = nullptr);
Mat rectify_backward(const Mat& pre, const Mat& g);

// ---------------------------------------------------------------------------
// Gated recurrent unit

/// One direction of one GRU layer (non-owning views into a ParameterStore).
struct GruDirParams {
  Param* Wz;  // update gate, input->hidden, HxD
  Param* Wr;  // reset gate
  Param* Wh;  // candidate
  Param* Uz;  // hidden->hidden, HxH
  Param* Ur;
  Param* Uh;
  Param* bz;  // Hx1
  Param* br;
  Param* bh;

  int hidden() const { return static_cast<int>(Wz->value.rows()); }
  int input_dim() const { return static_cast<int>(Wz->value.cols()); }
};

struct GruStepCache {
  Vec x, h_prev, z, r, hbar;
};

/// z = sig(Wz.x + Uz.h + bz); r = sig(Wr.x + Ur.h + br);
/// hbar = tanh(Wh.x + Uh.(r.h) + bh); h = (1-z).h + z.hbar
Vec gru_cell(const Vec& x, const Vec& h_prev, const GruDirParams& p,
             GruStepCache* cache = nullptr);

/// Accumulates parameter gradients, adds dL/dx into dx, writes dL/dh_prev.
void gru_cell_backward(const GruStepCache& cache, const GruDirParams& p,
                       const Vec& dh, Vec& dx, Vec& dh_prev);

struct GruLayerParams {
  GruDirParams fwd;
  GruDirParams bwd;  // unused when a stack runs unidirectionally
};

struct GruLayerCache {
  Mat input;  // N x D_layer
  std::vector<GruStepCache> fwd;
  std::vector<GruStepCache> bwd;
};

struct GruStackCache {
  std::vector<GruLayerCache> layers;
};

/// Stacked (optionally bidirectional) GRU over an exact-length sequence.
/// seq: N x D_in rows; output: N x E with E = 2H (bidirectional, rows are
/// [forward;backward] concatenations) or H. Layer l>1 consumes layer l-1's
/// per-step output. Initial states are zero.
Mat gru_stack(const Mat& seq, const std::vector<GruLayerParams>& layers,
              bool bidirectional, GruStackCache* cache = nullptr);

/// Backpropagation through time across the whole stack; accumulates into the
/// layer Params and returns dL/dseq.
Mat gru_stack_backward(const GruStackCache& cache,
                       const std::vector<GruLayerParams>& layers,
                       bool bidirectional, const Mat& d_out);

// ---------------------------------------------------------------------------
// Softmax / loss

/// Row-wise softmax with max subtraction.
Mat softmax_rows(const Mat& scores);

/// Given s = softmax_rows(raw) and dL/ds, returns dL/draw.
Mat softmax_rows_backward(const Mat& softmaxed, const Mat& ds);

/// Mean absolute elementwise difference. Subgradient at zero is zero.
double l1_loss(const Mat& pred, const Mat& target, KinkTrace* trace = nullptr);
Mat l1_loss_backward(const Mat& pred, const Mat& target);

// ---------------------------------------------------------------------------
// Optimization

struct TrainConfig {
  double lr_init = 1e-5;
  double lr_final = 1e-8;
  double power = 0.9;
  int epochs = 25;
  int batch_size = 4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// max(lr_final, lr_init * (1 - step/total_steps)^power)
double poly_lr(long step, long total_steps, const TrainConfig& cfg);

/// Bias-corrected Adam over every tensor; moments updated in place, grads
/// zeroed afterwards. t is the 1-based step index. Non-finite gradients
/// abort with a NonFiniteError naming the tensor.
void adam_step(ParameterStore& store, double lr, long t, const TrainConfig& cfg);

/// Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per tensor, biases
/// (fan_in == 0) zero. Deterministic in seed; draw order is tensor creation
/// order, row-major within a tensor.
void init_params(ParameterStore& store, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Gradient verification

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t coords_checked = 0;
  std::size_t coords_skipped = 0;  // kink-adjacent probes
  std::string worst_coord;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Scalar objective over the store's current values. With want_grad the call
/// must zero the store's grads and accumulate fresh ones; the trace, when
/// non-null, must be filled either way.
using LossFn = std::function<double(bool want_grad, KinkTrace* trace)>;

/// Central finite differences against analytic gradients on a random
/// subsample of at least min_coords coordinates (all of them when the store
/// is smaller). Returns the max of |a-n| / max(|a|,|n|,1e-8).
GradCheckResult grad_check(ParameterStore& store, const LossFn& f, double eps,
                           std::size_t min_coords, std::uint64_t seed);

}  // namespace pinet::nn
