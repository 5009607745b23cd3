#pragma once

#include <functional>
#include <vector>

#include "pinet/model.hpp"

namespace pinet {

struct EpochStats {
  int epoch = 0;          // 1-based
  double mean_loss = 0.0; // mm, averaged over scene visits
  double lr = 0.0;        // learning rate of the epoch's last step
  double wall_seconds = 0.0;
  long adam_steps = 0;    // cumulative
};

using EpochCallback = std::function<void(const EpochStats&)>;

struct TrainResult {
  long adam_steps = 0;
  std::vector<EpochStats> history;
};

/// Seeded training loop: scenes shuffled per epoch, one person-of-interest
/// per scene visit (round-robin across visits), gradients averaged over
/// batch_size scenes per Adam step, poly learning-rate schedule advanced per
/// step. Deterministic given (net init, tcfg.seed) on one platform.
/// Throws NonFiniteError carrying the offending scene index.
TrainResult train(PiNet& net, const std::vector<Scene>& dataset,
                  const nn::TrainConfig& tcfg, const EpochCallback& on_epoch = {});

}  // namespace pinet
