#include "phyrm/config.hpp"

#include <fstream>
#include <set>

namespace phyrm {

using nlohmann::json;

namespace {

// Applies known keys from j onto the target, erroring on unknown ones.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {}

  template <typename T>
  void field(const char* key, T& target) {
    known_.insert(key);
    if (j_.contains(key)) target = j_.at(key).get<T>();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!known_.count(key))
        throw std::invalid_argument("unknown config key: " + name_ + "." + key);
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> known_;
};

}  // namespace

json train_config_to_json(const TrainConfig& c) {
  return json{
      {"train",
       {{"steps", c.steps},
        {"batch_size", c.batch_size},
        {"learning_rate", c.learning_rate},
        {"optimizer", c.optimizer},
        {"seed", c.seed},
        {"eval_interval", c.eval_interval},
        {"disable_pinn", c.disable_pinn},
        {"disable_mse", c.disable_mse},
        {"disable_reg", c.disable_reg},
        {"disable_rfsa", c.disable_rfsa},
        {"disable_anchor", c.disable_anchor},
        {"couple_stages", c.couple_stages},
        {"obs_rate_min", c.obs_rate_min},
        {"obs_rate_max", c.obs_rate_max},
        {"eval_rate", c.eval_rate},
        {"eval_mask_draws", c.eval_mask_draws}}},
      {"model", {{"depth", c.net.depth}, {"channels", c.net.channels}, {"temb_dim", c.net.temb_dim}}},
      {"diffusion", {{"steps", c.diffusion_steps}, {"beta_min", c.beta_min}, {"beta_max", c.beta_max}}},
      {"physics",
       {{"k_free", c.physics.k_free},
        {"k_obstacle", c.physics.k_obstacle},
        {"source_amplitude", c.physics.source_amplitude}}},
      {"weights",
       {{"mse", c.weights.mse},
        {"reg", c.weights.reg},
        {"pde", c.weights.pde},
        {"bc", c.weights.bc},
        {"source", c.weights.source},
        {"cond", c.weights.cond},
        {"diff", c.weights.diff}}}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  static const std::set<std::string> kSections{"train", "model", "diffusion", "physics", "weights"};
  for (const auto& [key, value] : j.items())
    if (!kSections.count(key)) throw std::invalid_argument("unknown config section: " + key);

  if (j.contains("train")) {
    Section s(j.at("train"), "train");
    s.field("steps", c.steps);
    s.field("batch_size", c.batch_size);
    s.field("learning_rate", c.learning_rate);
    s.field("optimizer", c.optimizer);
    s.field("seed", c.seed);
    s.field("eval_interval", c.eval_interval);
    s.field("disable_pinn", c.disable_pinn);
    s.field("disable_mse", c.disable_mse);
    s.field("disable_reg", c.disable_reg);
    s.field("disable_rfsa", c.disable_rfsa);
    s.field("disable_anchor", c.disable_anchor);
    s.field("couple_stages", c.couple_stages);
    s.field("obs_rate_min", c.obs_rate_min);
    s.field("obs_rate_max", c.obs_rate_max);
    s.field("eval_rate", c.eval_rate);
    s.field("eval_mask_draws", c.eval_mask_draws);
    s.finish();
  }
  if (j.contains("model")) {
    Section s(j.at("model"), "model");
    s.field("depth", c.net.depth);
    s.field("channels", c.net.channels);
    s.field("temb_dim", c.net.temb_dim);
    s.finish();
  }
  if (j.contains("diffusion")) {
    Section s(j.at("diffusion"), "diffusion");
    s.field("steps", c.diffusion_steps);
    s.field("beta_min", c.beta_min);
    s.field("beta_max", c.beta_max);
    s.finish();
  }
  if (j.contains("physics")) {
    Section s(j.at("physics"), "physics");
    s.field("k_free", c.physics.k_free);
    s.field("k_obstacle", c.physics.k_obstacle);
    s.field("source_amplitude", c.physics.source_amplitude);
    s.finish();
  }
  if (j.contains("weights")) {
    Section s(j.at("weights"), "weights");
    s.field("mse", c.weights.mse);
    s.field("reg", c.weights.reg);
    s.field("pde", c.weights.pde);
    s.field("bc", c.weights.bc);
    s.field("source", c.weights.source);
    s.field("cond", c.weights.cond);
    s.field("diff", c.weights.diff);
    s.finish();
  }
  return c;
}

json gen_config_to_json(const GenConfig& c) {
  return json{{"map_size", c.map_size},
              {"n_maps", c.n_maps},
              {"buildings_min", c.buildings_min},
              {"buildings_max", c.buildings_max},
              {"n_tx_per_map", c.n_tx_per_map},
              {"drm", c.drm},
              {"seed", c.seed},
              {"db_floor", c.db_range.floor_db},
              {"db_ceiling", c.db_range.ceiling_db},
              {"attn_per_pixel", c.pathloss.attn_per_pixel},
              {"zero_inside_obstacles", c.pathloss.zero_inside_obstacles},
              {"spacing", c.spacing}};
}

GenConfig gen_config_from_json(const json& j, GenConfig c) {
  Section s(j, "gen");
  s.field("map_size", c.map_size);
  s.field("n_maps", c.n_maps);
  s.field("buildings_min", c.buildings_min);
  s.field("buildings_max", c.buildings_max);
  s.field("n_tx_per_map", c.n_tx_per_map);
  s.field("drm", c.drm);
  s.field("seed", c.seed);
  s.field("db_floor", c.db_range.floor_db);
  s.field("db_ceiling", c.db_range.ceiling_db);
  s.field("attn_per_pixel", c.pathloss.attn_per_pixel);
  s.field("zero_inside_obstacles", c.pathloss.zero_inside_obstacles);
  s.field("spacing", c.spacing);
  s.finish();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  return train_config_from_json(json::parse(is), std::move(base));
}

}  // namespace phyrm
