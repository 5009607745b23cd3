#pragma once

#include <optional>
#include <vector>

#include "pinet/common.hpp"
#include "pinet/rng.hpp"

namespace pinet {

/// One person's joints, rows = joints, columns = x/y/z in millimeters
/// (camera frame).
struct Pose {
  Mat joints;  // J x 3

  Pose() = default;
  explicit Pose(Mat j) : joints(std::move(j)) {}

  int joint_count() const { return static_cast<int>(joints.rows()); }
  bool finite() const { return joints.allFinite(); }
};

struct Person {
  int id = 0;
  Pose pose;
};

/// Ordered collection of detected persons, optionally paired with ground
/// truth aligned by index.
struct Scene {
  std::vector<Person> persons;
  std::vector<Pose> gt;  // empty, or one pose per person

  int size() const { return static_cast<int>(persons.size()); }
  bool has_gt() const { return !gt.empty(); }
};

/// Per-coordinate normalization statistics over flattened 3J-vectors.
struct NormStats {
  Vec mean;    // 3J, millimeters
  Vec stddev;  // 3J, millimeters, strictly positive
};

/// Clamp applied to degenerate standard deviations (millimeters).
inline constexpr double kStdClamp = 1e-6;

/// Interaction ordering: perm[0] is the person-of-interest index, the rest
/// visit every other person exactly once.
struct Ordering {
  std::vector<int> perm;
};

enum class OrderMode { Intuitive, Reverse, Random };

const char* to_string(OrderMode mode);
OrderMode order_mode_from_string(const std::string& name);

/// Reference joint used for ordering distances and root alignment.
Vec3 root_of(const Pose& pose, int root_index = 0);

/// Person-of-interest first, then the others nearest-to-farthest by root
/// distance; ties broken by ascending person index.
Ordering order_for(const Scene& scene, int n, int root_index = 0);

/// order_for with the proximity ranking reversed or shuffled. Random mode
/// draws from `rng` (required in that case).
Ordering make_ordering(const Scene& scene, int n, OrderMode mode,
                       Rng* rng = nullptr, int root_index = 0);

/// Per-coordinate mean and population standard deviation over the flattened
/// poses; components below kStdClamp are clamped to it.
NormStats compute_stats(const std::vector<Pose>& poses);

Vec flatten(const Pose& pose);
Pose unflatten(const Vec& coords);

/// (flatten(pose) - mean) / std, elementwise.
Vec normalize(const Pose& pose, const NormStats& stats);

/// Inverse of normalize: vec * std + mean, reshaped to J x 3.
Pose denormalize(const Vec& coords, const NormStats& stats);

}  // namespace pinet
