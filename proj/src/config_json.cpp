#include "pinet/config_json.hpp"

#include <set>

#include "pinet/scene_io.hpp"

namespace pinet {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (known.find(key) == known.end())
      throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
T field(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

json skeleton_to_json(const Mat& skeleton) {
  json rows = json::array();
  for (int r = 0; r < skeleton.rows(); ++r)
    rows.push_back({skeleton(r, 0), skeleton(r, 1), skeleton(r, 2)});
  return rows;
}

Mat skeleton_from_json(const json& rows) {
  if (!rows.is_array() || rows.empty())
    throw ConfigError("base_skeleton: expected a nonempty array of [x,y,z] rows");
  Mat skeleton(static_cast<long>(rows.size()), 3);
  long r = 0;
  for (const json& row : rows) {
    if (!row.is_array() || row.size() != 3)
      throw ConfigError("base_skeleton: row " + std::to_string(r) +
                        " is not [x,y,z]");
    for (int c = 0; c < 3; ++c)
      skeleton(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    ++r;
  }
  return skeleton;
}

}  // namespace

json to_json(const ModelConfig& cfg) {
  json j;
  j["joints"] = cfg.joints;
  j["hidden"] = cfg.hidden;
  j["gru_layers"] = cfg.gru_layers;
  j["mlp_hidden"] = cfg.mlp_hidden;
  j["use_attention"] = cfg.use_attention;
  j["bidirectional"] = cfg.bidirectional;
  j["predict_residual"] = cfg.predict_residual;
  j["root_index"] = cfg.root_index;
  j["order_mode"] = to_string(cfg.order_mode);
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  reject_unknown(j,
                 {"joints", "hidden", "gru_layers", "mlp_hidden", "use_attention",
                  "bidirectional", "predict_residual", "root_index", "order_mode"},
                 "model");
  ModelConfig cfg;
  cfg.joints = field(j, "joints", cfg.joints);
  cfg.hidden = field(j, "hidden", cfg.hidden);
  cfg.gru_layers = field(j, "gru_layers", cfg.gru_layers);
  cfg.mlp_hidden = field(j, "mlp_hidden", cfg.mlp_hidden);
  cfg.use_attention = field(j, "use_attention", cfg.use_attention);
  cfg.bidirectional = field(j, "bidirectional", cfg.bidirectional);
  cfg.predict_residual = field(j, "predict_residual", cfg.predict_residual);
  cfg.root_index = field(j, "root_index", cfg.root_index);
  cfg.order_mode =
      order_mode_from_string(field<std::string>(j, "order_mode", "intuitive"));
  cfg.validate();
  return cfg;
}

json to_json(const nn::TrainConfig& cfg) {
  json j;
  j["lr_init"] = cfg.lr_init;
  j["lr_final"] = cfg.lr_final;
  j["power"] = cfg.power;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["adam_beta1"] = cfg.adam_beta1;
  j["adam_beta2"] = cfg.adam_beta2;
  j["adam_eps"] = cfg.adam_eps;
  j["seed"] = cfg.seed;
  return j;
}

nn::TrainConfig train_config_from_json(const json& j) {
  reject_unknown(j,
                 {"lr_init", "lr_final", "power", "epochs", "batch_size",
                  "adam_beta1", "adam_beta2", "adam_eps", "seed"},
                 "train");
  nn::TrainConfig cfg;
  cfg.lr_init = field(j, "lr_init", cfg.lr_init);
  cfg.lr_final = field(j, "lr_final", cfg.lr_final);
  cfg.power = field(j, "power", cfg.power);
  cfg.epochs = field(j, "epochs", cfg.epochs);
  cfg.batch_size = field(j, "batch_size", cfg.batch_size);
  cfg.adam_beta1 = field(j, "adam_beta1", cfg.adam_beta1);
  cfg.adam_beta2 = field(j, "adam_beta2", cfg.adam_beta2);
  cfg.adam_eps = field(j, "adam_eps", cfg.adam_eps);
  cfg.seed = field(j, "seed", cfg.seed);
  cfg.validate();
  return cfg;
}

json to_json(const synth::GenConfig& cfg) {
  json j;
  j["n_scenes"] = cfg.n_scenes;
  j["persons_min"] = cfg.persons_min;
  j["persons_max"] = cfg.persons_max;
  j["seed"] = cfg.seed;
  j["interaction_strength"] = cfg.interaction_strength;
  j["placement_radius"] = cfg.placement_radius;
  j["base_skeleton"] =
      skeleton_to_json(cfg.base_skeleton.size() ? cfg.base_skeleton
                                                : synth::skeleton17());
  return j;
}

synth::GenConfig gen_config_from_json(const json& j) {
  reject_unknown(j,
                 {"n_scenes", "persons_min", "persons_max", "seed",
                  "interaction_strength", "placement_radius", "base_skeleton"},
                 "gen");
  synth::GenConfig cfg;
  cfg.n_scenes = field(j, "n_scenes", cfg.n_scenes);
  cfg.persons_min = field(j, "persons_min", cfg.persons_min);
  cfg.persons_max = field(j, "persons_max", cfg.persons_max);
  cfg.seed = field(j, "seed", cfg.seed);
  cfg.interaction_strength =
      field(j, "interaction_strength", cfg.interaction_strength);
  cfg.placement_radius = field(j, "placement_radius", cfg.placement_radius);
  if (j.contains("base_skeleton")) cfg.base_skeleton = skeleton_from_json(j["base_skeleton"]);
  cfg.validate();
  return cfg;
}

json to_json(const synth::NoiseConfig& cfg) {
  json j;
  j["joint_sigma"] = cfg.joint_sigma;
  j["root_sigma"] = cfg.root_sigma;
  j["outlier_prob"] = cfg.outlier_prob;
  j["outlier_sigma"] = cfg.outlier_sigma;
  return j;
}

synth::NoiseConfig noise_config_from_json(const json& j) {
  reject_unknown(j, {"joint_sigma", "root_sigma", "outlier_prob", "outlier_sigma"},
                 "noise");
  synth::NoiseConfig cfg;
  cfg.joint_sigma = field(j, "joint_sigma", cfg.joint_sigma);
  cfg.root_sigma = field(j, "root_sigma", cfg.root_sigma);
  cfg.outlier_prob = field(j, "outlier_prob", cfg.outlier_prob);
  cfg.outlier_sigma = field(j, "outlier_sigma", cfg.outlier_sigma);
  cfg.validate();
  return cfg;
}

json to_json(const RunConfig& cfg) {
  json j;
  j["model"] = to_json(cfg.model);
  j["train"] = to_json(cfg.train);
  j["gen"] = to_json(cfg.gen);
  j["noise"] = to_json(cfg.noise);
  return j;
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown(j, {"model", "train", "gen", "noise"}, "config");
  RunConfig cfg;
  if (j.contains("model")) cfg.model = model_config_from_json(j["model"]);
  if (j.contains("train")) cfg.train = train_config_from_json(j["train"]);
  if (j.contains("gen")) cfg.gen = gen_config_from_json(j["gen"]);
  if (j.contains("noise")) cfg.noise = noise_config_from_json(j["noise"]);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') { ++line; col = 1; } else { ++col; }
    }
    throw ConfigError(path.string() + ":" + std::to_string(line) + ":" +
                      std::to_string(col) + ": " + e.what());
  }
  try {
    return run_config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace pinet
