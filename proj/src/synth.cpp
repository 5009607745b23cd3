#include "pinet/synth.hpp"

#include <cmath>

#include <json.hpp>

#include "pinet/config_json.hpp"

namespace pinet::synth {

void GenConfig::validate() const {
  if (n_scenes < 1) throw ConfigError("gen: n_scenes must be >= 1");
  if (persons_min < 1) throw ConfigError("gen: persons_min must be >= 1");
  if (persons_max < persons_min)
    throw ConfigError("gen: persons_max must be >= persons_min");
  if (interaction_strength < 0.0 || interaction_strength > 1.0)
    throw ConfigError("gen: interaction_strength must lie in [0, 1]");
  if (placement_radius <= 0.0)
    throw ConfigError("gen: placement_radius must be > 0");
  if (base_skeleton.size() != 0 && base_skeleton.cols() != 3)
    throw ConfigError("gen: base_skeleton must be J x 3");
}

void NoiseConfig::validate() const {
  if (joint_sigma < 0 || root_sigma < 0 || outlier_sigma < 0)
    throw ConfigError("noise: sigmas must be >= 0");
  if (outlier_prob < 0.0 || outlier_prob > 1.0)
    throw ConfigError("noise: outlier_prob must lie in [0, 1]");
}

Mat skeleton17() {
  // Camera-style frame, y grows downward, z is depth. Root (pelvis) at the
  // origin; segment lengths in millimeters.
  Mat s(17, 3);
  s.row(0) << 0, 0, 0;        // pelvis
  s.row(1) << 0, -250, 0;     // spine
  s.row(2) << 0, -500, 0;     // neck
  s.row(3) << 0, -590, 0;     // head
  s.row(4) << 0, -680, 0;     // head top
  s.row(5) << 190, -460, 0;   // left shoulder
  s.row(6) << 250, -190, 0;   // left elbow
  s.row(7) << 280, 60, 0;     // left wrist
  s.row(8) << -190, -460, 0;  // right shoulder
  s.row(9) << -250, -190, 0;  // right elbow
  s.row(10) << -280, 60, 0;   // right wrist
  s.row(11) << 110, 30, 0;    // left hip
  s.row(12) << 130, 460, 0;   // left knee
  s.row(13) << 140, 880, 0;   // left ankle
  s.row(14) << -110, 30, 0;   // right hip
  s.row(15) << -130, 460, 0;  // right knee
  s.row(16) << -140, 880, 0;  // right ankle
  return s;
}

namespace {

constexpr double kSceneDepth = 4000.0;  // mm, nominal distance to camera
constexpr double kTwoPi = 6.283185307179586476925286766559;

Mat draw_limb_offsets(Rng& rng, int joints) {
  Mat offsets = Mat::Zero(joints, 3);
  for (int j = 1; j < joints; ++j)  // root stays put
    for (int c = 0; c < 3; ++c) offsets(j, c) = rng.normal(0.0, kLimbSigma);
  return offsets;
}

/// Mirror response: reflect limb offsets across the YZ plane.
Mat mirror_offsets(const Mat& offsets) {
  Mat m = offsets;
  m.col(0) *= -1.0;
  return m;
}

}  // namespace

Scene gen_scene(const GenConfig& cfg, long index) {
  cfg.validate();
  const Mat skeleton = cfg.base_skeleton.size() ? cfg.base_skeleton : skeleton17();
  const int joints = static_cast<int>(skeleton.rows());
  Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(index)));

  const int count = static_cast<int>(rng.uniform_int(cfg.persons_min, cfg.persons_max));
  std::vector<Vec3> roots;
  std::vector<Mat> offsets;
  roots.reserve(static_cast<std::size_t>(count));
  offsets.reserve(static_cast<std::size_t>(count));

  for (int m = 0; m < count; ++m) {
    // Root uniform in an xz disc at the nominal scene depth.
    const double angle = rng.uniform(0.0, kTwoPi);
    const double radius = cfg.placement_radius * std::sqrt(rng.uniform());
    roots.emplace_back(radius * std::cos(angle), 0.0,
                       kSceneDepth + radius * std::sin(angle));

    Mat own = draw_limb_offsets(rng, joints);
    if (m == 0 || cfg.interaction_strength == 0.0) {
      offsets.push_back(std::move(own));
      continue;
    }
    // Respond to the nearest already-placed neighbor.
    int nearest = 0;
    double best = (roots[static_cast<std::size_t>(m)] - roots[0]).norm();
    for (int p = 1; p < m; ++p) {
      const double d = (roots[static_cast<std::size_t>(m)] -
                        roots[static_cast<std::size_t>(p)]).norm();
      if (d < best) {
        best = d;
        nearest = p;
      }
    }
    const double kappa = cfg.interaction_strength;
    offsets.push_back(kappa * mirror_offsets(offsets[static_cast<std::size_t>(nearest)]) +
                      (1.0 - kappa) * own);
  }

  Scene scene;
  for (int m = 0; m < count; ++m) {
    Pose pose;
    pose.joints = skeleton + offsets[static_cast<std::size_t>(m)];
    pose.joints.rowwise() += roots[static_cast<std::size_t>(m)].transpose();
    scene.persons.push_back({m, pose});
    scene.gt.push_back(scene.persons.back().pose);
  }
  return scene;
}

Scene corrupt(const Scene& scene, const NoiseConfig& ncfg, std::uint64_t seed) {
  ncfg.validate();
  if (!scene.has_gt())
    throw DataError("corrupt: scene must carry clean ground truth");

  Rng rng(seed);
  Scene out = scene;
  for (Person& person : out.persons) {
    Mat& joints = person.pose.joints;
    Vec3 root_shift;
    for (int c = 0; c < 3; ++c) root_shift(c) = rng.normal(0.0, ncfg.root_sigma);
    for (int j = 0; j < joints.rows(); ++j) {
      for (int c = 0; c < 3; ++c)
        joints(j, c) += root_shift(c) + rng.normal(0.0, ncfg.joint_sigma);
      if (rng.uniform() < ncfg.outlier_prob)
        for (int c = 0; c < 3; ++c) joints(j, c) += rng.normal(0.0, ncfg.outlier_sigma);
    }
  }
  return out;
}

Dataset make_dataset(const GenConfig& cfg, const NoiseConfig& ncfg) {
  cfg.validate();
  ncfg.validate();
  if (cfg.n_scenes < 2)
    throw ConfigError("make_dataset: needs n_scenes >= 2 for a split");

  const int n_train = (cfg.n_scenes * 8) / 10;
  Dataset data;
  for (long i = 0; i < cfg.n_scenes; ++i) {
    const Scene clean = gen_scene(cfg, i);
    const bool is_train = i < n_train;
    // Disjoint noise streams per split.
    const std::uint64_t noise_seed =
        mix_seed(mix_seed(cfg.seed, is_train ? 0xa11ce5ULL : 0xbea7e5ULL),
                 static_cast<std::uint64_t>(i));
    Scene noisy = corrupt(clean, ncfg, noise_seed);
    (is_train ? data.train : data.test).push_back(std::move(noisy));
  }
  return data;
}

Dataset make_dataset(const GenConfig& cfg, const NoiseConfig& ncfg,
                     const std::filesystem::path& out_dir) {
  Dataset data = make_dataset(cfg, ncfg);
  const Mat skeleton = cfg.base_skeleton.size() ? cfg.base_skeleton : skeleton17();

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  SceneFile train_file{static_cast<int>(skeleton.rows()), data.train};
  SceneFile test_file{static_cast<int>(skeleton.rows()), data.test};
  save_scenes_per_file(out_dir / "train", train_file);
  save_scenes_per_file(out_dir / "test", test_file);

  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["gen"] = to_json(cfg);
  manifest["noise"] = to_json(ncfg);
  manifest["train_scenes"] = data.train.size();
  manifest["test_scenes"] = data.test.size();
  write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return data;
}

std::vector<Scene> explode_to_single(const std::vector<Scene>& scenes) {
  std::vector<Scene> singles;
  for (const Scene& scene : scenes) {
    for (int n = 0; n < scene.size(); ++n) {
      Scene s;
      s.persons.push_back(scene.persons[static_cast<std::size_t>(n)]);
      if (scene.has_gt()) s.gt.push_back(scene.gt[static_cast<std::size_t>(n)]);
      singles.push_back(std::move(s));
    }
  }
  return singles;
}

}  // namespace pinet::synth
