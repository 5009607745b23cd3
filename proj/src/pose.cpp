#include "pinet/pose.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pinet {

const char* to_string(OrderMode mode) {
  switch (mode) {
    case OrderMode::Intuitive: return "intuitive";
    case OrderMode::Reverse: return "reverse";
    case OrderMode::Random: return "random";
  }
  return "intuitive";
}

OrderMode order_mode_from_string(const std::string& name) {
  if (name == "intuitive") return OrderMode::Intuitive;
  if (name == "reverse") return OrderMode::Reverse;
  if (name == "random") return OrderMode::Random;
  throw ConfigError("unknown order mode '" + name +
                    "' (expected intuitive|reverse|random)");
}

Vec3 root_of(const Pose& pose, int root_index) {
  if (root_index < 0 || root_index >= pose.joint_count())
    throw std::out_of_range("root_of: root index " + std::to_string(root_index) +
                            " out of range for " +
                            std::to_string(pose.joint_count()) + " joints");
  return pose.joints.row(root_index).transpose();
}

Ordering order_for(const Scene& scene, int n, int root_index) {
  const int count = scene.size();
  if (n < 0 || n >= count)
    throw std::out_of_range("order_for: person index " + std::to_string(n) +
                            " out of range for scene of " +
                            std::to_string(count) + " persons");

  const Vec3 origin = root_of(scene.persons[static_cast<std::size_t>(n)].pose, root_index);
  std::vector<std::pair<double, int>> ranked;
  ranked.reserve(static_cast<std::size_t>(count) - 1);
  for (int m = 0; m < count; ++m) {
    if (m == n) continue;
    const double d =
        (root_of(scene.persons[static_cast<std::size_t>(m)].pose, root_index) - origin).norm();
    ranked.emplace_back(d, m);
  }
  std::sort(ranked.begin(), ranked.end());  // ties fall back to ascending index

  Ordering order;
  order.perm.reserve(static_cast<std::size_t>(count));
  order.perm.push_back(n);
  for (const auto& [d, m] : ranked) order.perm.push_back(m);
  return order;
}

Ordering make_ordering(const Scene& scene, int n, OrderMode mode, Rng* rng,
                       int root_index) {
  Ordering order = order_for(scene, n, root_index);
  switch (mode) {
    case OrderMode::Intuitive:
      break;
    case OrderMode::Reverse:
      std::reverse(order.perm.begin() + 1, order.perm.end());
      break;
    case OrderMode::Random: {
      if (rng == nullptr)
        throw std::invalid_argument("make_ordering: random mode needs an Rng");
      std::vector<int> rest(order.perm.begin() + 1, order.perm.end());
      rng->shuffle(rest);
      std::copy(rest.begin(), rest.end(), order.perm.begin() + 1);
      break;
    }
  }
  return order;
}

NormStats compute_stats(const std::vector<Pose>& poses) {
  if (poses.empty())
    throw std::invalid_argument("compute_stats: empty pose list");

  const int dim = 3 * poses.front().joint_count();
  Vec mean = Vec::Zero(dim);
  for (const Pose& p : poses) mean += flatten(p);
  mean /= static_cast<double>(poses.size());

  Vec var = Vec::Zero(dim);
  for (const Pose& p : poses) {
    const Vec centered = flatten(p) - mean;
    var += centered.cwiseProduct(centered);
  }
  var /= static_cast<double>(poses.size());  // population variance

  NormStats stats;
  stats.mean = std::move(mean);
  stats.stddev = var.cwiseSqrt().cwiseMax(kStdClamp);
  return stats;
}

Vec flatten(const Pose& pose) {
  const int joints = pose.joint_count();
  Vec out(3 * joints);
  for (int j = 0; j < joints; ++j)
    out.segment<3>(3 * j) = pose.joints.row(j).transpose();
  return out;
}

Pose unflatten(const Vec& coords) {
  const int joints = static_cast<int>(coords.size()) / 3;
  Mat j(joints, 3);
  for (int r = 0; r < joints; ++r) j.row(r) = coords.segment<3>(3 * r).transpose();
  return Pose(std::move(j));
}

Vec normalize(const Pose& pose, const NormStats& stats) {
  return (flatten(pose) - stats.mean).cwiseQuotient(stats.stddev);
}

Pose denormalize(const Vec& coords, const NormStats& stats) {
  return unflatten(coords.cwiseProduct(stats.stddev) + stats.mean);
}

}  // namespace pinet
