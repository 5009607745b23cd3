#pragma once

#include <vector>

#include "pinet/nn.hpp"
#include "pinet/pose.hpp"

namespace pinet {

/// Architecture hyperparameters. Defaults follow the reference setting:
/// 17 joints, hidden 256, three bidirectional GRU layers (embedding 512),
/// head 512 -> 512 -> 256 -> 51.
struct ModelConfig {
  int joints = 17;
  int hidden = 256;
  int gru_layers = 3;
  std::vector<int> mlp_hidden = {512, 256};
  bool use_attention = true;
  bool bidirectional = true;
  bool predict_residual = false;
  int root_index = 0;
  OrderMode order_mode = OrderMode::Intuitive;

  int input_dim() const { return 3 * joints; }
  int embed_dim() const { return bidirectional ? 2 * hidden : hidden; }
  void validate() const;
};

/// Exact number of trainable scalars the config produces.
long param_count(const ModelConfig& cfg);

struct AttentionParams {
  nn::Param* A;  // E x E
  nn::Param* b;  // E x 1
};

struct HeadLayer {
  nn::Param* W;
  nn::Param* b;
};

struct HeadCache {
  std::vector<Mat> inputs;  // input to each dense layer
  std::vector<Mat> pre;     // pre-rectification values, hidden layers only
};

struct ForwardCache {
  Ordering order;
  Mat inputs;        // N x 3J, normalized, ordered
  nn::GruStackCache gru;
  Mat embeddings;    // N x E
  Mat attention;     // N x N, softmaxed (empty when attention disabled)
  Mat mixed;         // N x E
  HeadCache head;
  Mat outputs;       // N x 3J, normalized
  Mat gt_norm;       // N x 3J, normalized gt permuted to match output rows
};

/// The pose-interaction network: proximity-ordered inputs -> bidirectional
/// GRU embedding -> self-attention mixing -> shared dense head, with the
/// hand-derived backward pass to match.
class PiNet {
 public:
  PiNet(ModelConfig cfg, NormStats stats);

  const ModelConfig& config() const { return cfg_; }
  const NormStats& stats() const { return stats_; }
  nn::ParameterStore& store() { return store_; }
  const nn::ParameterStore& store() const { return store_; }

  void init(std::uint64_t seed) { nn::init_params(store_, seed); }

  /// Bi-RNN over already-ordered normalized rows; row k is the embedding at
  /// sequence position k.
  Mat embed(const Mat& ordered_inputs, nn::GruStackCache* cache = nullptr) const;

  /// Row-softmaxed pairwise scores e_n.(A.e_m + b).
  Mat attention_weights(const Mat& embeddings) const;

  /// Shared dense head applied row-wise; residual_base added to the output
  /// when the residual flag is set.
  Mat head(const Mat& mixed, const Mat& residual_base, HeadCache* cache = nullptr,
           nn::KinkTrace* trace = nullptr) const;

  struct ForwardResult {
    std::vector<Pose> refined;  // indexed by scene person position
    double loss = 0.0;
  };

  /// Full training-time pass: every row goes through attention and the head,
  /// loss is the mean absolute error against ground truth in millimeters.
  ForwardResult forward_train(const Scene& scene, int n, const Ordering& order,
                              ForwardCache* cache = nullptr,
                              nn::KinkTrace* trace = nullptr) const;
  ForwardResult forward_train(const Scene& scene, int n) const;

  /// Accumulates parameter gradients for a cached forward pass.
  void backward(const ForwardCache& cache);

  /// forward_train + backward; returns the loss.
  double forward_backward(const Scene& scene, int n, const Ordering& order);

  /// Test-time pass: attention row and head for the person-of-interest only.
  Pose refine_person(const Scene& scene, int n, const Ordering& order) const;
  Pose refine_person(const Scene& scene, int n) const;

  /// One independent refinement per person, each with its own ordering.
  /// order_seed feeds random-mode orderings (unused otherwise).
  std::vector<Pose> refine_scene(const Scene& scene,
                                 std::uint64_t order_seed = 0) const;

 private:
  Mat ordered_normalized_inputs(const Scene& scene, const Ordering& order) const;
  Ordering default_ordering(const Scene& scene, int n) const;

  ModelConfig cfg_;
  NormStats stats_;
  nn::ParameterStore store_;
  std::vector<nn::GruLayerParams> gru_;
  AttentionParams att_{nullptr, nullptr};
  std::vector<HeadLayer> head_;
};

/// W.E: row n is the attention-weighted mixture of embeddings.
Mat apply_attention(const Mat& weights, const Mat& embeddings);

}  // namespace pinet
