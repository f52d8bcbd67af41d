#include "dasp/config.hpp"

#include <fstream>

namespace dasp::config {

using nlohmann::json;
using trainer::TrainConfig;

json to_json(const TrainConfig& c) {
  return json{{"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"lr_init", c.lr_init},
              {"lr_peak", c.lr_peak},
              {"warmup_iters", c.warmup_iters},
              {"halve_at_epoch", c.halve_at_epoch},
              {"time_steps", c.time_steps},
              {"alpha", c.weights.alpha},
              {"lambda1", c.weights.lambda1},
              {"lambda2", c.weights.lambda2},
              {"lambda3", c.weights.lambda3},
              {"lambda4", c.weights.lambda4},
              {"use_proj_loss", c.use_proj_loss},
              {"use_stlm", c.use_stlm},
              {"use_aslm", c.use_aslm},
              {"min_depth", c.min_depth},
              {"max_depth", c.max_depth},
              {"height", c.height},
              {"width", c.width},
              {"steps_per_epoch", c.steps_per_epoch},
              {"total_steps", c.total_steps},
              {"pretrain_steps", c.pretrain_steps},
              {"train_scenes", c.train_scenes},
              {"eval_scenes", c.eval_scenes},
              {"seed", c.seed},
              {"eval_cap", c.eval_cap},
              {"median_scale_eval", c.median_scale_eval},
              {"eval_every", c.eval_every},
              {"out_dir", c.out_dir}};
}

TrainConfig from_json(const json& j) {
  const json defaults = to_json(TrainConfig{});
  for (auto it = j.begin(); it != j.end(); ++it) {
    DASP_CHECK(defaults.contains(it.key()), "unknown config key: " + it.key());
  }
  json merged = defaults;
  merged.update(j);
  TrainConfig c;
  c.batch_size = merged.at("batch_size");
  c.epochs = merged.at("epochs");
  c.lr_init = merged.at("lr_init");
  c.lr_peak = merged.at("lr_peak");
  c.warmup_iters = merged.at("warmup_iters");
  c.halve_at_epoch = merged.at("halve_at_epoch");
  c.time_steps = merged.at("time_steps");
  c.weights.alpha = merged.at("alpha");
  c.weights.lambda1 = merged.at("lambda1");
  c.weights.lambda2 = merged.at("lambda2");
  c.weights.lambda3 = merged.at("lambda3");
  c.weights.lambda4 = merged.at("lambda4");
  c.use_proj_loss = merged.at("use_proj_loss");
  c.use_stlm = merged.at("use_stlm");
  c.use_aslm = merged.at("use_aslm");
  c.min_depth = merged.at("min_depth");
  c.max_depth = merged.at("max_depth");
  c.height = merged.at("height");
  c.width = merged.at("width");
  c.steps_per_epoch = merged.at("steps_per_epoch");
  c.total_steps = merged.at("total_steps");
  c.pretrain_steps = merged.at("pretrain_steps");
  c.train_scenes = merged.at("train_scenes");
  c.eval_scenes = merged.at("eval_scenes");
  c.seed = merged.at("seed");
  c.eval_cap = merged.at("eval_cap");
  c.median_scale_eval = merged.at("median_scale_eval");
  c.eval_every = merged.at("eval_every");
  c.out_dir = merged.at("out_dir");
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  DASP_CHECK(eq != std::string::npos, "override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  const json defaults = to_json(TrainConfig{});
  DASP_CHECK(defaults.contains(key), "unknown config key in override: " + key);
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (...) {
    parsed = value;  // plain string
  }
  j[key] = parsed;
}

TrainConfig load_config_file(const std::string& path, const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream is(path);
    DASP_CHECK(is.good(), "cannot open config file: " + path);
    j = json::parse(is);
  }
  for (const auto& o : overrides) apply_override(j, o);
  return from_json(j);
}

}  // namespace dasp::config
