// Joint two-stage optimization of both networks under the combined loss,
// with seeded batching, evaluation over the test split, checkpointing and
// CSV logging; plus the loss-ablation sweep used by the experiment harness.
#pragma once

#include "phyrm/condmodel.hpp"
#include "phyrm/diffmodel.hpp"
#include "phyrm/metrics.hpp"
#include "phyrm/synthgen.hpp"
#include "phyrm/weights.hpp"

#include <map>

namespace phyrm {

struct TrainConfig {
  int steps = 5000;
  int batch_size = 4;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";  // or "sgd"
  uint64_t seed = 1;
  int eval_interval = 1000;

  // ablation switches: zero the matching loss weight / bypass the junction,
  // never change parameter shapes
  bool disable_pinn = false;
  bool disable_mse = false;
  bool disable_reg = false;
  bool disable_rfsa = false;
  bool disable_anchor = false;

  // let the diffusion loss back-propagate into the conditional network
  bool couple_stages = false;

  // observation-rate band for input masks; zero band = full-conditioning
  double obs_rate_min = 0.01;
  double obs_rate_max = 0.10;
  double eval_rate = 0.01;
  int eval_mask_draws = 1;  // metrics averaged over several mask draws

  int diffusion_steps = 100;
  double beta_min = 1e-4;
  double beta_max = 0.02;

  NetConfig net{};
  PhysicsConfig physics{};
  LossWeights weights{};

  void validate() const;
  LossWeights effective_weights() const;
  DiffNet::Flags diff_flags() const { return {disable_rfsa, disable_anchor}; }
};

struct StepReport {
  int64_t step = 0;
  double l_total = 0.0;
  double l_cond = 0.0;
  double l_diff = 0.0;
  double l_mse = 0.0;
  double l_pinn = 0.0;
  double l_pde = 0.0;
  double l_bc = 0.0;
  double l_source = 0.0;
  double l_reg = 0.0;
};

struct EvalReport {
  double nmse = 0.0;
  double rmse = 0.0;
  double ssim = 0.0;
  double nmse_init = 0.0;  // first-stage estimate, before refinement
};

class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<DatasetRecord> dataset);

  StepReport train_step();

  // Full two-stage pipeline on every test scene (masks, both stages,
  // ancestral sampling); per-scene metrics averaged.
  EvalReport evaluate();

  // Runs cfg.steps steps, evaluating every eval_interval and once at the
  // end; writes metrics.csv and checkpoints under out_dir. A checkpoint is
  // saved even when a step throws.
  void train(const std::filesystem::path& out_dir);

  ModelParams& params() { return params_; }
  const NoiseSchedule& schedule() const { return sched_; }
  int64_t step() const { return step_; }
  const TrainConfig& config() const { return cfg_; }
  const CondNet& cond_net() const { return cond_; }
  const DiffNet& diff_net() const { return diff_; }
  const std::vector<DatasetRecord>& dataset() const { return data_; }
  const std::vector<int>& train_indices() const { return train_idx_; }
  const std::vector<int>& test_indices() const { return test_idx_; }
  bool vehicle_channel() const { return vehicle_channel_; }

  nlohmann::json checkpoint_extra() const;

  static constexpr const char* kMetricsHeader =
      "step,l_total,l_cond,l_diff,l_mse,l_pinn,l_pde,l_bc,l_source,l_reg,"
      "nmse,rmse,ssim,nmse_init";

 private:
  void materialize_params();
  void optimizer_update();

  TrainConfig cfg_;
  std::vector<DatasetRecord> data_;
  std::vector<HelmholtzField> fields_;
  std::vector<int> train_idx_, test_idx_;
  bool vehicle_channel_ = false;
  CondNet cond_;
  DiffNet diff_;
  NoiseSchedule sched_;
  ModelParams params_;

  struct Moments {
    std::vector<double> m, v;
  };
  std::map<std::string, Moments> adam_;
  int64_t adam_t_ = 0;
  int64_t step_ = 0;
};

// --- loss ablation sweep --------------------------------------------------

struct AblationRun {
  std::string variant;
  int seed_index = 0;
  uint64_t seed = 0;
  EvalReport eval;
};

const std::vector<std::string>& ablation_variants();  // full, no_pinn, no_reg, no_mse
TrainConfig apply_variant(TrainConfig cfg, const std::string& variant);

// Trains every (variant, seed) pair to completion and evaluates once at the
// end. Seeds are shared across variants so comparisons are paired. Runs are
// independent and execute in parallel.
std::vector<AblationRun> run_ablation(const TrainConfig& base,
                                      const std::vector<DatasetRecord>& data, int n_seeds,
                                      const std::vector<std::string>& variants = ablation_variants());

void write_ablation_csv(const std::vector<AblationRun>& runs, const std::filesystem::path& path);

}  // namespace phyrm
