#include "pinet/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace pinet {

TrainResult train(PiNet& net, const std::vector<Scene>& dataset,
                  const nn::TrainConfig& tcfg, const EpochCallback& on_epoch) {
  tcfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (!dataset[i].has_gt())
      throw DataError("train: scene " + std::to_string(i) + " has no ground truth");

  const long scenes = static_cast<long>(dataset.size());
  const long steps_per_epoch = (scenes + tcfg.batch_size - 1) / tcfg.batch_size;
  const long total_steps = static_cast<long>(tcfg.epochs) * steps_per_epoch;

  Rng rng(tcfg.seed);
  std::vector<int> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<long> visits(dataset.size(), 0);

  TrainResult result;
  net.store().zero_grads();
  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(order);

    double loss_sum = 0.0;
    double last_lr = poly_lr(std::min(result.adam_steps, total_steps), total_steps, tcfg);
    int in_batch = 0;
    for (long v = 0; v < scenes; ++v) {
      const int scene_idx = order[static_cast<std::size_t>(v)];
      const Scene& scene = dataset[static_cast<std::size_t>(scene_idx)];
      const int poi = static_cast<int>(visits[static_cast<std::size_t>(scene_idx)] %
                                       static_cast<long>(scene.size()));
      ++visits[static_cast<std::size_t>(scene_idx)];

      Ordering ordering;
      if (net.config().order_mode == OrderMode::Random) {
        ordering = make_ordering(scene, poi, OrderMode::Random, &rng,
                                 net.config().root_index);
      } else {
        ordering = make_ordering(scene, poi, net.config().order_mode, nullptr,
                                 net.config().root_index);
      }

      const double loss = net.forward_backward(scene, poi, ordering);
      if (!std::isfinite(loss))
        throw NonFiniteError("train: non-finite loss at scene " +
                             std::to_string(scene_idx), scene_idx);
      loss_sum += loss;
      ++in_batch;

      if (in_batch == tcfg.batch_size || v == scenes - 1) {
        net.store().scale_grads(1.0 / in_batch);
        const long t = result.adam_steps + 1;  // 1-based Adam step
        last_lr = poly_lr(t - 1, total_steps, tcfg);
        nn::adam_step(net.store(), last_lr, t, tcfg);
        result.adam_steps = t;
        in_batch = 0;
      }
    }

    const auto t1 = std::chrono::steady_clock::now();
    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(scenes);
    stats.lr = last_lr;
    stats.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    stats.adam_steps = result.adam_steps;
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

}  // namespace pinet
