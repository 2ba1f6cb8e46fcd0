// Command-line front end: dataset generation, training, reconstruction,
// evaluation, gradient checks, and the loss-ablation sweep.
#include "phyrm/config.hpp"
#include "phyrm/gradsuite.hpp"
#include "phyrm/metrics.hpp"
#include "phyrm/pngio.hpp"
#include "phyrm/rng.hpp"
#include "phyrm/synthgen.hpp"
#include "phyrm/trainer.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void print_resolved(const std::string& cmd, const json& cfg, uint64_t seed) {
  std::cout << "[" << cmd << "] resolved config: " << cfg.dump() << "\n";
  std::cout << "[" << cmd << "] master seed: " << seed << "\n";
}

int cmd_gen(const phyrm::GenConfig& cfg, const std::string& out_dir) {
  print_resolved("gen", phyrm::gen_config_to_json(cfg), cfg.seed);
  const auto records = phyrm::generate_dataset(cfg);
  const auto summary = phyrm::write_dataset(records, out_dir, &cfg);
  std::cout << "wrote " << summary.n_records << " records (" << summary.n_train << " train, "
            << summary.n_test << " test) to " << out_dir << "\n";
  return 0;
}

int cmd_train(const phyrm::TrainConfig& cfg, const std::string& data_dir,
              const std::string& out_dir) {
  print_resolved("train", phyrm::train_config_to_json(cfg), cfg.seed);
  auto records = phyrm::read_dataset(data_dir);
  phyrm::Trainer trainer(cfg, std::move(records));
  trainer.train(out_dir);
  std::cout << "finished " << cfg.steps << " steps; metrics at "
            << (fs::path(out_dir) / "metrics.csv").string() << "\n";
  return 0;
}

int cmd_reconstruct(const std::string& ckpt_dir, const std::string& data_dir, int scene_idx,
                    double rate, uint64_t seed, const std::string& out_png) {
  int64_t step = 0;
  json extra;
  phyrm::ModelParams params = phyrm::ModelParams::load_checkpoint(ckpt_dir, &step, &extra);

  phyrm::NetConfig net;
  net.depth = extra.at("net").at("depth").get<int>();
  net.channels = extra.at("net").at("channels").get<std::vector<int>>();
  net.temb_dim = extra.at("net").at("temb_dim").get<int>();
  const int in_channels = extra.at("in_channels").get<int>();
  const bool vehicle_channel = extra.at("vehicle_channel").get<bool>();
  const auto sched = phyrm::make_schedule(extra.at("schedule").at("steps").get<int>(),
                                          extra.at("schedule").at("beta_min").get<double>(),
                                          extra.at("schedule").at("beta_max").get<double>());
  phyrm::DiffNet::Flags flags{extra.value("disable_rfsa", false),
                              extra.value("disable_anchor", false)};

  json resolved{{"ckpt", ckpt_dir}, {"data", data_dir},   {"scene", scene_idx},
                {"rate", rate},     {"seed", seed},        {"out", out_png},
                {"ckpt_step", step}};
  print_resolved("reconstruct", resolved, seed);

  const auto records = phyrm::read_dataset(data_dir);
  if (scene_idx < 0 || scene_idx >= static_cast<int>(records.size()))
    throw std::runtime_error("scene index out of range");
  const auto& rec = records[scene_idx];

  std::optional<phyrm::BinaryMask> mask;
  if (rate > 0.0) mask = phyrm::sample_observation_mask(rec.scene, rate, seed);

  phyrm::CondNet cond(net, in_channels);
  phyrm::DiffNet diff(net);
  phyrm::Tape tape(&params);
  phyrm::Tape::Id x = tape.input(phyrm::cond_input_item(rec.scene, rec.truth,
                                                        mask ? &*mask : nullptr, vehicle_channel));
  phyrm::CondForward cf = cond.forward(tape, x);
  std::vector<phyrm::Tensor4> anchors;
  for (auto z : cf.features) anchors.push_back(tape.val(z));

  phyrm::SampleOpts opts;
  opts.flags = flags;
  const phyrm::Tensor4 sample = phyrm::ancestral_sample(
      diff, params, anchors, tape.val(cf.y0), sched,
      phyrm::derive_seed(seed, {phyrm::seedtag::kEval}), opts);
  const phyrm::Grid2D pred = phyrm::tensor_plane_to_grid(sample, 0, 0, rec.scene.spacing);

  phyrm::write_png_gray8(pred, out_png);
  fs::path raw = out_png;
  raw.replace_extension(".f32g");
  phyrm::Grid2D quantized = pred;
  phyrm::quantize_f32(quantized);
  phyrm::write_grid_f32(quantized, raw);

  const auto m = phyrm::evaluate_metrics(pred, rec.truth);
  std::printf("scene %d: nmse=%.6g rmse=%.6g ssim=%.6g -> %s\n", scene_idx, m.nmse, m.rmse,
              m.ssim, out_png.c_str());
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& truth_path,
             const std::string& csv_path) {
  const phyrm::Grid2D pred = phyrm::read_grid_f32(pred_path);
  const phyrm::Grid2D truth = phyrm::read_grid_f32(truth_path);
  const auto m = phyrm::evaluate_metrics(pred, truth);
  std::printf("nmse=%.12g rmse=%.12g ssim=%.12g\n", m.nmse, m.rmse, m.ssim);
  if (!csv_path.empty()) {
    const bool fresh = !fs::exists(csv_path);
    std::ofstream os(csv_path, std::ios::app);
    if (!os) throw std::runtime_error("cannot open for writing: " + csv_path);
    if (fresh) os << "pred,truth,nmse,rmse,ssim\n";
    os.precision(12);
    os << pred_path << "," << truth_path << "," << m.nmse << "," << m.rmse << "," << m.ssim
       << "\n";
  }
  return 0;
}

int cmd_gradcheck(double tol) {
  print_resolved("gradcheck", json{{"tol", tol}}, 0);
  const auto result = phyrm::run_grad_suite(tol, 1e-6);
  std::printf("network blocks: %d, max rel err %.3g (worst %s[%d]) -> %s\n",
              result.n_network_blocks, result.network.max_rel_err,
              result.network.worst_param.c_str(), result.network.worst_index,
              result.network.pass ? "pass" : "FAIL");
  std::printf("physics losses: max rel err %.3g -> %s\n", result.physics.max_rel_err,
              result.physics.pass ? "pass" : "FAIL");
  return result.pass ? 0 : 1;
}

int cmd_ablation(const phyrm::TrainConfig& base, const std::string& data_dir, int seeds,
                 const std::string& out_csv) {
  print_resolved("ablation", phyrm::train_config_to_json(base), base.seed);
  const auto records = phyrm::read_dataset(data_dir);
  const auto runs = phyrm::run_ablation(base, records, seeds);
  phyrm::write_ablation_csv(runs, out_csv);

  std::map<std::string, std::pair<int, double>> mean_nmse;
  for (const auto& r : runs) {
    auto& [n, s] = mean_nmse[r.variant];
    ++n;
    s += r.eval.nmse;
  }
  for (const auto& [variant, ns] : mean_nmse)
    std::printf("%-8s mean test nmse %.6g over %d seeds\n", variant.c_str(),
                ns.second / ns.first, ns.first);
  std::cout << "wrote " << out_csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"physics-aligned radio-map reconstruction"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  phyrm::GenConfig gen_cfg;
  std::string gen_out;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--maps", gen_cfg.n_maps, "number of maps");
  gen->add_option("--size", gen_cfg.map_size, "map side length in pixels");
  gen->add_option("--seed", gen_cfg.seed, "master seed");
  gen->add_flag("--drm", gen_cfg.drm, "dynamic maps (vehicles)");
  gen->add_option("--tx", gen_cfg.n_tx_per_map, "transmitters per map");
  gen->add_option("--min-buildings", gen_cfg.buildings_min, "");
  gen->add_option("--max-buildings", gen_cfg.buildings_max, "");
  gen->add_option("--attn", gen_cfg.pathloss.attn_per_pixel, "occlusion dB per pixel");

  // train
  auto* train = app.add_subcommand("train", "train both stages");
  std::string train_data, train_out, train_cfg_file, ablate;
  int train_steps = -1;
  int64_t train_seed = -1;
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "output directory")->required();
  train->add_option("--config", train_cfg_file, "JSON config file");
  train->add_option("--ablate", ablate, "pinn|mse|reg|rfsa|anchor");
  train->add_option("--steps", train_steps, "override step count");
  train->add_option("--seed", train_seed, "override seed");

  // reconstruct
  auto* rec = app.add_subcommand("reconstruct", "run the two-stage pipeline on one scene");
  std::string rec_ckpt, rec_data, rec_out;
  int rec_scene = 0;
  double rec_rate = 0.01;
  uint64_t rec_seed = 1;
  rec->add_option("--ckpt", rec_ckpt, "checkpoint directory")->required();
  rec->add_option("--data", rec_data, "dataset directory")->required();
  rec->add_option("--scene", rec_scene, "record index")->required();
  rec->add_option("--rate", rec_rate, "observation rate (0 = none)");
  rec->add_option("--seed", rec_seed, "mask + sampling seed");
  rec->add_option("--out", rec_out, "output PNG path")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "metrics between two grid files");
  std::string ev_pred, ev_truth, ev_csv;
  ev->add_option("--pred", ev_pred, "prediction .f32g")->required();
  ev->add_option("--truth", ev_truth, "ground truth .f32g")->required();
  ev->add_option("--csv", ev_csv, "append a CSV row here");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  double gc_tol = 1e-4;
  gc->add_option("--tol", gc_tol, "network tolerance");

  // ablation
  auto* ab = app.add_subcommand("ablation", "loss-combination sweep");
  std::string ab_data, ab_out, ab_cfg_file;
  int ab_seeds = 5;
  ab->add_option("--data", ab_data, "dataset directory")->required();
  ab->add_option("--seeds", ab_seeds, "seeds per variant");
  ab->add_option("--out", ab_out, "output CSV")->required();
  ab->add_option("--config", ab_cfg_file, "JSON config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_cfg, gen_out);
    if (train->parsed()) {
      phyrm::TrainConfig cfg;
      if (!train_cfg_file.empty()) cfg = phyrm::load_train_config(train_cfg_file, cfg);
      if (train_steps > 0) cfg.steps = train_steps;
      if (train_seed >= 0) cfg.seed = static_cast<uint64_t>(train_seed);
      if (!ablate.empty()) cfg = phyrm::apply_variant(cfg, "no_" + ablate);
      return cmd_train(cfg, train_data, train_out);
    }
    if (rec->parsed())
      return cmd_reconstruct(rec_ckpt, rec_data, rec_scene, rec_rate, rec_seed, rec_out);
    if (ev->parsed()) return cmd_eval(ev_pred, ev_truth, ev_csv);
    if (gc->parsed()) return cmd_gradcheck(gc_tol);
    if (ab->parsed()) {
      phyrm::TrainConfig cfg;
      if (!ab_cfg_file.empty()) cfg = phyrm::load_train_config(ab_cfg_file, cfg);
      return cmd_ablation(cfg, ab_data, ab_seeds, ab_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
