// Command-line front end: gen, train, refine, eval, gradcheck, ablate.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "pinet/checkpoint.hpp"
#include "pinet/config_json.hpp"
#include "pinet/gradcheck_suite.hpp"
#include "pinet/metrics.hpp"
#include "pinet/scene_io.hpp"
#include "pinet/synth.hpp"
#include "pinet/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pinet;

namespace {

// Stable exit codes (documented in the README).
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNonFinite = 4;
constexpr int kExitJointMismatch = 5;
constexpr int kExitCountMismatch = 6;
constexpr int kExitGradCheck = 7;

struct CommonOpts {
  std::string config_path;
  std::string out;
  std::int64_t seed = -1;  // <0: keep the config file's seed
  int threads = 1;
};

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig cfg;
  if (!opts.config_path.empty()) cfg = load_run_config(opts.config_path);
  if (opts.seed >= 0) {
    cfg.train.seed = static_cast<std::uint64_t>(opts.seed);
    cfg.gen.seed = static_cast<std::uint64_t>(opts.seed);
  }
  return cfg;
}

void write_resolved_config(const fs::path& where, const RunConfig& cfg) {
  write_text_file(where, to_json(cfg).dump(2) + "\n");
}

NormStats stats_from_scenes(const std::vector<Scene>& scenes) {
  std::vector<Pose> poses;
  for (const Scene& s : scenes)
    for (const Person& p : s.persons) poses.push_back(p.pose);
  return compute_stats(poses);
}

void parallel_scene_refine(const PiNet& net, const std::vector<Scene>& scenes,
                           std::vector<std::vector<Pose>>& refined, int threads) {
  refined.assign(scenes.size(), {});
  const int workers = std::max(1, threads);
  if (workers == 1 || scenes.size() < 2) {
    for (std::size_t i = 0; i < scenes.size(); ++i)
      refined[i] = net.refine_scene(scenes[i], i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&]() {
      for (std::size_t i = next.fetch_add(1); i < scenes.size();
           i = next.fetch_add(1))
        refined[i] = net.refine_scene(scenes[i], i);
    });
  for (auto& t : pool) t.join();
}

int cmd_gen(const CommonOpts& opts) {
  const RunConfig cfg = resolve_config(opts);
  const fs::path out_dir(opts.out);
  const synth::Dataset data = synth::make_dataset(cfg.gen, cfg.noise, out_dir);
  write_resolved_config(out_dir / "resolved_config.json", cfg);
  std::printf("wrote %zu train + %zu test scenes to %s\n", data.train.size(),
              data.test.size(), out_dir.string().c_str());
  return kExitOk;
}

int cmd_train(const CommonOpts& opts, const std::string& data_path,
              int epochs_override, const std::string& log_path) {
  RunConfig cfg = resolve_config(opts);
  if (epochs_override >= 0) cfg.train.epochs = epochs_override;

  const SceneFile scene_file = load_scenes(data_path);
  if (scene_file.num_joints != cfg.model.joints)
    throw DataError("training data has " + std::to_string(scene_file.num_joints) +
                    " joints, model config expects " +
                    std::to_string(cfg.model.joints));

  PiNet net(cfg.model, stats_from_scenes(scene_file.scenes));
  net.init(cfg.train.seed);

  std::ofstream log_file;
  std::ostream* log = &std::cout;
  if (!log_path.empty()) {
    log_file.open(log_path, std::ios::trunc);
    if (!log_file) throw IoError("cannot open log file " + log_path);
    log = &log_file;
  }

  json start;
  start["event"] = "start";
  start["scenes"] = scene_file.scenes.size();
  start["epochs"] = cfg.train.epochs;
  start["seed"] = cfg.train.seed;
  (*log) << start.dump() << "\n" << std::flush;

  const TrainResult result =
      train(net, scene_file.scenes, cfg.train, [&](const EpochStats& s) {
        json line;
        line["event"] = "epoch";
        line["epoch"] = s.epoch;
        line["loss"] = s.mean_loss;
        line["lr"] = s.lr;
        line["wall_s"] = s.wall_seconds;
        line["adam_steps"] = s.adam_steps;
        (*log) << line.dump() << "\n" << std::flush;
      });

  CheckpointMeta meta;
  meta.seed = cfg.train.seed;
  meta.step_counter = result.adam_steps;
  const fs::path ckpt_path(opts.out);
  if (ckpt_path.has_parent_path()) fs::create_directories(ckpt_path.parent_path());
  save_checkpoint(ckpt_path, net, meta);
  write_resolved_config(ckpt_path.string() + ".config.json", cfg);

  json done;
  done["event"] = "done";
  done["checkpoint"] = ckpt_path.string();
  done["final_loss"] =
      result.history.empty() ? 0.0 : result.history.back().mean_loss;
  (*log) << done.dump() << "\n";
  return kExitOk;
}

int cmd_refine(const CommonOpts& opts, const std::string& ckpt_path,
               const std::string& scenes_path) {
  const LoadedCheckpoint loaded = load_checkpoint(ckpt_path);
  const SceneFile input = load_scenes(scenes_path);
  if (input.num_joints != loaded.net.config().joints) {
    std::fprintf(stderr,
                 "error: scene file has %d joints, checkpoint expects %d\n",
                 input.num_joints, loaded.net.config().joints);
    return kExitJointMismatch;
  }

  std::vector<std::vector<Pose>> refined;
  parallel_scene_refine(loaded.net, input.scenes, refined, opts.threads);

  SceneFile output;
  output.num_joints = input.num_joints;
  for (std::size_t i = 0; i < input.scenes.size(); ++i) {
    Scene scene = input.scenes[i];  // keeps ids and gt
    for (int n = 0; n < scene.size(); ++n)
      scene.persons[static_cast<std::size_t>(n)].pose =
          refined[i][static_cast<std::size_t>(n)];
    output.scenes.push_back(std::move(scene));
  }

  const fs::path out_path(opts.out);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  save_scene_file(out_path, output);
  std::printf("refined %zu scenes -> %s\n", output.scenes.size(),
              out_path.string().c_str());
  return kExitOk;
}

json delta_json(const metrics::MetricReport& from, const metrics::MetricReport& to) {
  json d;
  d["mpjpe_mm"] = to.mpjpe_mm - from.mpjpe_mm;
  d["pa_mpjpe_mm"] = to.pa_mpjpe_mm - from.pa_mpjpe_mm;
  d["pck_150"] = to.pck_150 - from.pck_150;
  return d;
}

int cmd_eval(const CommonOpts& opts, const std::string& pred_path,
             const std::string& scenes_path) {
  const SceneFile preds = load_scenes(pred_path);
  const SceneFile scenes = load_scenes(scenes_path);

  if (preds.scenes.size() != scenes.scenes.size()) {
    std::fprintf(stderr, "error: %zu predicted scenes vs %zu reference scenes\n",
                 preds.scenes.size(), scenes.scenes.size());
    return kExitCountMismatch;
  }

  std::vector<Pose> pred_poses, input_poses, gt_poses;
  for (std::size_t i = 0; i < preds.scenes.size(); ++i) {
    const Scene& p = preds.scenes[i];
    const Scene& s = scenes.scenes[i];
    if (p.persons.size() != s.persons.size()) {
      std::fprintf(stderr, "error: scene %zu has %zu vs %zu persons\n", i,
                   p.persons.size(), s.persons.size());
      return kExitCountMismatch;
    }
    if (!s.has_gt()) {
      std::fprintf(stderr, "error: scene %zu carries no ground truth\n", i);
      return kExitCountMismatch;
    }
    for (int n = 0; n < p.size(); ++n) {
      pred_poses.push_back(p.persons[static_cast<std::size_t>(n)].pose);
      input_poses.push_back(s.persons[static_cast<std::size_t>(n)].pose);
      gt_poses.push_back(s.gt[static_cast<std::size_t>(n)]);
    }
  }
  if (pred_poses.empty()) {
    std::printf("no poses to evaluate\n");
    if (!opts.out.empty()) write_text_file(opts.out, "{}\n");
    return kExitOk;
  }

  const metrics::MetricReport refined = metrics::evaluate(pred_poses, gt_poses);
  std::cout << metrics::report_table(refined, "refined");

  json out;
  out["refined"] = json::parse(metrics::report_to_json(refined));

  // When the reference file carries its own (noisy) poses distinct from the
  // predictions, report their metrics and the improvement.
  bool have_input = false;
  for (std::size_t i = 0; i < pred_poses.size() && !have_input; ++i)
    if ((pred_poses[i].joints - input_poses[i].joints).cwiseAbs().maxCoeff() > 0.0)
      have_input = true;
  if (have_input) {
    const metrics::MetricReport input = metrics::evaluate(input_poses, gt_poses);
    std::cout << "\n" << metrics::report_table(input, "input");
    out["input"] = json::parse(metrics::report_to_json(input));
    out["delta"] = delta_json(input, refined);
    std::printf("\nMPJPE delta: %+.3f mm (%.2f%%)\n",
                refined.mpjpe_mm - input.mpjpe_mm,
                100.0 * (refined.mpjpe_mm - input.mpjpe_mm) / input.mpjpe_mm);
  } else {
    out["input"] = nullptr;
    out["delta"] = nullptr;
  }

  if (!opts.out.empty()) {
    write_text_file(opts.out, out.dump(2) + "\n");
    std::printf("report written to %s\n", opts.out.c_str());
  }
  return kExitOk;
}

int cmd_gradcheck(const CommonOpts& opts) {
  const std::uint64_t seed =
      opts.seed >= 0 ? static_cast<std::uint64_t>(opts.seed) : 42;
  const GradCheckReport report = run_gradcheck_suite(seed);
  for (const ComponentCheck& check : report.checks)
    std::printf("%-22s max_rel_err=%.3e  checked=%zu skipped=%zu  %s\n",
                check.component.c_str(), check.result.max_rel_err,
                check.result.coords_checked, check.result.coords_skipped,
                check.passed ? "ok" : "FAIL");
  std::printf("worst: %.3e (%s)  wall=%.1fs\n", report.worst,
              report.worst_component.c_str(), report.wall_seconds);
  if (!report.all_passed) {
    std::fprintf(stderr, "error: gradient check failed in %s at %s\n",
                 report.worst_component.c_str(), report.worst_coord.c_str());
    return kExitGradCheck;
  }
  return kExitOk;
}

struct AblateCell {
  std::string name;
  ModelConfig model;
};

int cmd_ablate(const CommonOpts& opts, const std::string& data_dir,
               int epochs_override) {
  RunConfig base = resolve_config(opts);
  if (epochs_override >= 0) base.train.epochs = epochs_override;

  const SceneFile train_scenes = load_scenes(fs::path(data_dir) / "train");
  const SceneFile test_scenes = load_scenes(fs::path(data_dir) / "test");
  const NormStats stats = stats_from_scenes(train_scenes.scenes);

  std::vector<Pose> input_poses, gt_poses;
  for (const Scene& s : test_scenes.scenes)
    for (int n = 0; n < s.size(); ++n) {
      input_poses.push_back(s.persons[static_cast<std::size_t>(n)].pose);
      gt_poses.push_back(s.gt[static_cast<std::size_t>(n)]);
    }

  // Full factor matrix; the shared seed makes cells differ only in the
  // ablated factor.
  std::vector<AblateCell> cells;
  for (const OrderMode mode :
       {OrderMode::Intuitive, OrderMode::Reverse, OrderMode::Random})
    for (const bool attention : {true, false})
      for (const bool bidirectional : {true, false})
        for (const int layers : {2, 3, 4}) {
          ModelConfig m = base.model;
          m.order_mode = mode;
          m.use_attention = attention;
          m.bidirectional = bidirectional;
          m.gru_layers = layers;
          std::string name = std::string(to_string(mode)) +
                             (attention ? "_att" : "_noatt") +
                             (bidirectional ? "_bi" : "_uni") + "_gru" +
                             std::to_string(layers);
          cells.push_back({std::move(name), std::move(m)});
        }

  const fs::path out_dir(opts.out);
  fs::create_directories(out_dir / "cells");
  write_resolved_config(out_dir / "resolved_config.json", base);

  json summary = json::array();
  std::printf("%-28s %10s %12s %10s\n", "cell", "MPJPE", "PA-MPJPE", "loss");
  for (const AblateCell& cell : cells) {
    PiNet net(cell.model, stats);
    net.init(base.train.seed);
    const TrainResult tr = train(net, train_scenes.scenes, base.train);

    std::vector<std::vector<Pose>> refined;
    parallel_scene_refine(net, test_scenes.scenes, refined, opts.threads);
    std::vector<Pose> flat;
    for (const auto& r : refined)
      for (const Pose& p : r) flat.push_back(p);
    const metrics::MetricReport report = metrics::evaluate(flat, gt_poses);

    const fs::path cell_dir = out_dir / "cells" / cell.name;
    fs::create_directories(cell_dir);
    RunConfig cell_cfg = base;
    cell_cfg.model = cell.model;
    write_resolved_config(cell_dir / "config.json", cell_cfg);
    write_text_file(cell_dir / "metrics.json",
                    metrics::report_to_json(report) + "\n");

    json row;
    row["cell"] = cell.name;
    row["mpjpe_mm"] = report.mpjpe_mm;
    row["pa_mpjpe_mm"] = report.pa_mpjpe_mm;
    row["final_loss"] = tr.history.empty() ? 0.0 : tr.history.back().mean_loss;
    summary.push_back(row);
    std::printf("%-28s %10.2f %12.2f %10.2f\n", cell.name.c_str(),
                report.mpjpe_mm, report.pa_mpjpe_mm,
                tr.history.empty() ? 0.0 : tr.history.back().mean_loss);
    std::fflush(stdout);
  }

  const metrics::MetricReport input_report =
      metrics::evaluate(input_poses, gt_poses);
  json out;
  out["input"] = json::parse(metrics::report_to_json(input_report));
  out["cells"] = std::move(summary);
  write_text_file(out_dir / "summary.json", out.dump(2) + "\n");
  std::printf("input MPJPE: %.2f mm; summary at %s\n", input_report.mpjpe_mm,
              (out_dir / "summary.json").string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "pose interaction network: synthetic data, training, refinement, "
      "evaluation"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string data_path, ckpt_path, scenes_path, pred_path, log_path;
  int epochs_override = -1;

  auto add_common = [&](CLI::App* cmd, bool needs_out) {
    cmd->add_option("--config", opts.config_path, "JSON run configuration")
        ->envname("PINET_CONFIG");
    cmd->add_option("--seed", opts.seed, "override the configured seed")
        ->envname("PINET_SEED");
    cmd->add_option("--threads", opts.threads, "worker threads for refinement")
        ->envname("PINET_THREADS");
    auto* out = cmd->add_option("--out", opts.out, "output path");
    if (needs_out) out->required();
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  add_common(gen, true);

  CLI::App* train_cmd = app.add_subcommand("train", "train on generated scenes");
  add_common(train_cmd, true);
  train_cmd->add_option("--data", data_path, "train scene file or directory")
      ->required();
  train_cmd->add_option("--epochs", epochs_override, "override epoch count");
  train_cmd->add_option("--log", log_path, "line-delimited JSON training log");

  CLI::App* refine =
      app.add_subcommand("refine", "refine scenes with a checkpoint");
  add_common(refine, true);
  refine->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  refine->add_option("--scenes", scenes_path, "scene file or directory")
      ->required();

  CLI::App* eval_cmd = app.add_subcommand("eval", "score predictions against gt");
  add_common(eval_cmd, false);
  eval_cmd->add_option("--pred", pred_path, "refined scene file")->required();
  eval_cmd->add_option("--scenes", scenes_path, "reference scenes with gt")
      ->required();

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference audit");
  add_common(gradcheck, false);

  CLI::App* ablate = app.add_subcommand("ablate", "factor-matrix ablation runs");
  add_common(ablate, true);
  ablate->add_option("--data", data_path, "dataset directory from gen")->required();
  ablate->add_option("--epochs", epochs_override, "override epoch count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen(opts);
    if (train_cmd->parsed())
      return cmd_train(opts, data_path, epochs_override, log_path);
    if (refine->parsed()) return cmd_refine(opts, ckpt_path, scenes_path);
    if (eval_cmd->parsed()) return cmd_eval(opts, pred_path, scenes_path);
    if (gradcheck->parsed()) return cmd_gradcheck(opts);
    if (ablate->parsed()) return cmd_ablate(opts, data_path, epochs_override);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const NonFiniteError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNonFinite;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  }
  return kExitOk;
}
