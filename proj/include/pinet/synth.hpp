#pragma once

#include <filesystem>
#include <vector>

#include "pinet/pose.hpp"
#include "pinet/scene_io.hpp"

namespace pinet::synth {

/// Scene generator settings. Poses are the fixed template skeleton plus
/// per-joint limb offsets; with interaction strength kappa > 0 each person's
/// offsets blend a mirror response to its nearest neighbor with an
/// independent draw, so interactee poses carry real signal about each other.
struct GenConfig {
  int n_scenes = 10;
  int persons_min = 2;
  int persons_max = 3;
  std::uint64_t seed = 1234;
  Mat base_skeleton;                  // J x 3 template, defaults to skeleton17
  double interaction_strength = 0.8;  // kappa in [0, 1]
  double placement_radius = 1200.0;   // mm

  void validate() const;
};

/// Detector-style corruption: i.i.d. per-joint noise, one shared root offset
/// per person, sparse heavy outliers.
struct NoiseConfig {
  double joint_sigma = 40.0;    // mm
  double root_sigma = 60.0;     // mm
  double outlier_prob = 0.02;
  double outlier_sigma = 300.0; // mm

  void validate() const;
};

/// 17-joint template skeleton (mm): pelvis root, spine/neck/head chain,
/// arms and legs with fixed anthropometric segment lengths.
Mat skeleton17();

/// Per-joint limb-offset scale used by the pose distribution (mm).
inline constexpr double kLimbSigma = 100.0;

/// Clean scene (persons and gt both noise-free), deterministic in
/// (cfg.seed, index).
Scene gen_scene(const GenConfig& cfg, long index);

/// Noisy copy: persons perturbed, gt untouched. Deterministic in seed.
Scene corrupt(const Scene& scene, const NoiseConfig& ncfg, std::uint64_t seed);

struct Dataset {
  std::vector<Scene> train;
  std::vector<Scene> test;
};

/// Generates n_scenes scenes, corrupts them with split-disjoint noise seeds,
/// and splits 80/20 by scene index.
Dataset make_dataset(const GenConfig& cfg, const NoiseConfig& ncfg);

/// make_dataset + writes <out>/train/scene_*.json, <out>/test/scene_*.json
/// and <out>/manifest.json for exact regeneration.
Dataset make_dataset(const GenConfig& cfg, const NoiseConfig& ncfg,
                     const std::filesystem::path& out_dir);

/// One single-person scene per person: identical pose marginals with the
/// interactees removed (context-free ablation data).
std::vector<Scene> explode_to_single(const std::vector<Scene>& scenes);

}  // namespace pinet::synth
