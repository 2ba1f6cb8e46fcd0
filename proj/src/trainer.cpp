#include "phyrm/trainer.hpp"

#include "phyrm/rng.hpp"
#include "phyrm/threads.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace phyrm {

using nlohmann::json;

void TrainConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("steps must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (optimizer != "adam" && optimizer != "sgd")
    throw std::invalid_argument("optimizer must be adam or sgd");
  if (eval_interval < 1) throw std::invalid_argument("eval interval must be positive");
  if (obs_rate_min < 0.0 || obs_rate_max > 1.0 || obs_rate_min > obs_rate_max)
    throw std::invalid_argument("bad observation-rate band");
  if (eval_rate < 0.0 || eval_rate > 1.0) throw std::invalid_argument("bad eval rate");
  if (eval_mask_draws < 1) throw std::invalid_argument("eval_mask_draws must be positive");
  net.validate();
  weights.validate();
}

LossWeights TrainConfig::effective_weights() const {
  LossWeights w = weights;
  if (disable_mse) w.mse = 0.0;
  if (disable_reg) w.reg = 0.0;
  if (disable_pinn) w.pde = w.bc = w.source = 0.0;
  return w;
}

namespace {

Tensor4 stack_items(const std::vector<Tensor4>& items) {
  const Tensor4& first = items.front();
  Tensor4 out(static_cast<int>(items.size()), first.c, first.h, first.w);
  for (size_t i = 0; i < items.size(); ++i) {
    if (items[i].n != 1 || items[i].c != first.c || items[i].h != first.h ||
        items[i].w != first.w)
      throw std::invalid_argument("batch items must share shapes");
    std::copy(items[i].v.begin(), items[i].v.end(),
              out.v.begin() + static_cast<int64_t>(i) * first.size());
  }
  return out;
}

Tensor4 truth_item(const Grid2D& truth) {
  Tensor4 t(1, 1, truth.height(), truth.width());
  std::copy(truth.values().begin(), truth.values().end(), t.v.begin());
  return t;
}

}  // namespace

Trainer::Trainer(TrainConfig cfg, std::vector<DatasetRecord> dataset)
    : cfg_(std::move(cfg)),
      data_(std::move(dataset)),
      cond_(cfg_.net, 4),
      diff_(cfg_.net),
      params_(cfg_.seed) {
  cfg_.validate();
  if (data_.empty()) throw std::invalid_argument("empty dataset");

  const int h = data_.front().scene.height(), w = data_.front().scene.width();
  vehicle_channel_ = data_.front().scene.vehicles.has_value();
  for (size_t i = 0; i < data_.size(); ++i) {
    const auto& rec = data_[i];
    if (rec.scene.height() != h || rec.scene.width() != w)
      throw std::invalid_argument("dataset geometries must match");
    if (rec.scene.vehicles.has_value() != vehicle_channel_)
      throw std::invalid_argument("dataset mixes static and dynamic maps");
    if (rec.split == "train") train_idx_.push_back(static_cast<int>(i));
    else test_idx_.push_back(static_cast<int>(i));
  }
  if (train_idx_.empty()) throw std::invalid_argument("no training records");

  cond_ = CondNet(cfg_.net, 4 + (vehicle_channel_ ? 1 : 0));
  sched_ = make_schedule(cfg_.diffusion_steps, cfg_.beta_min, cfg_.beta_max);

  fields_.reserve(data_.size());
  for (const auto& rec : data_) fields_.push_back(build_field(rec.scene, cfg_.physics));

  materialize_params();
}

void Trainer::materialize_params() {
  // One throwaway forward through both networks so every block exists before
  // the first update or checkpoint, regardless of batch composition.
  const auto& rec = data_.front();
  Tape tape(&params_);
  Tape::Id x = tape.input(cond_input_item(rec.scene, rec.truth, nullptr, vehicle_channel_));
  CondForward cf = cond_.forward(tape, x);
  Tape::Id y0d = tape.detach(cf.y0);
  std::vector<Tape::Id> anchors;
  for (Tape::Id z : cf.features) anchors.push_back(tape.detach(z));
  Tape::Id eps = tape.input(Tensor4(1, 1, tape.val(cf.y0).h, tape.val(cf.y0).w));
  Tape::Id y_t = tape.blend(y0d, eps, {1.0}, {0.0});
  diff_.predict_noise(tape, y_t, y0d, {1}, anchors, cfg_.diff_flags());
  params_.zero_grads();
}

StepReport Trainer::train_step() {
  ++step_;
  params_.zero_grads();
  const LossWeights ew = cfg_.effective_weights();

  Rng batch_rng(derive_seed(cfg_.seed, {seedtag::kBatch, static_cast<uint64_t>(step_)}));
  std::vector<int> batch(cfg_.batch_size);
  for (int& idx : batch)
    idx = train_idx_[batch_rng.uniform_int(0, static_cast<int64_t>(train_idx_.size()) - 1)];

  std::vector<Tensor4> xs, ys;
  std::vector<const HelmholtzField*> geoms;
  for (size_t item = 0; item < batch.size(); ++item) {
    const auto& rec = data_[batch[item]];
    std::optional<BinaryMask> mask;
    if (cfg_.obs_rate_max > 0.0) {
      const double rate = batch_rng.uniform(cfg_.obs_rate_min, cfg_.obs_rate_max);
      mask = sample_observation_mask(
          rec.scene, rate,
          derive_seed(cfg_.seed, {seedtag::kObsMask, static_cast<uint64_t>(step_), item}));
    }
    xs.push_back(cond_input_item(rec.scene, rec.truth, mask ? &*mask : nullptr, vehicle_channel_));
    ys.push_back(truth_item(rec.truth));
    geoms.push_back(&fields_[batch[item]]);
  }

  Tape tape(&params_);
  Tape::Id x_id = tape.input(stack_items(xs));
  Tape::Id truth_id = tape.input(stack_items(ys));

  // stage 1: conditional estimate + physics-aligned losses
  CondForward cf = cond_.forward(tape, x_id);
  Tape::Id mse_id = tape.mse(cf.y0, truth_id);
  Tape::Id tv_id = tape.tv(cf.y0);
  PinnLossTerms pinn_terms;
  std::vector<std::pair<Tape::Id, double>> cond_terms{{mse_id, ew.mse}, {tv_id, ew.reg}};
  if (ew.pinn_enabled())
    cond_terms.push_back({tape.pinn(cf.y0, geoms, ew.pinn(), &pinn_terms), 1.0});
  Tape::Id l_cond_id = tape.weighted_sum(cond_terms);

  // stage 2: corrupt the (detached) estimate, predict the injected noise
  Tape::Id y0s = cfg_.couple_stages ? cf.y0 : tape.detach(cf.y0);
  std::vector<Tape::Id> anchors;
  for (Tape::Id z : cf.features)
    anchors.push_back(cfg_.couple_stages ? z : tape.detach(z));

  Rng diff_rng(derive_seed(cfg_.seed, {seedtag::kDiffusion, static_cast<uint64_t>(step_)}));
  std::vector<int> tsteps(batch.size());
  std::vector<double> ka(batch.size()), kb(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    tsteps[i] = static_cast<int>(diff_rng.uniform_int(1, sched_.steps));
    const double ab = sched_.alpha_bar_at(tsteps[i]);
    ka[i] = std::sqrt(ab);
    kb[i] = std::sqrt(1.0 - ab);
  }
  const Tensor4& y0v = tape.val(cf.y0);
  Tape::Id eps_id = tape.input(Tensor4::randn(y0v.n, y0v.c, y0v.h, y0v.w, diff_rng));
  Tape::Id y_t = tape.blend(y0s, eps_id, ka, kb);
  Tape::Id eps_pred = diff_.predict_noise(tape, y_t, y0s, tsteps, anchors, cfg_.diff_flags());
  Tape::Id l_diff_id = tape.mse(eps_pred, eps_id);

  Tape::Id l_total_id =
      tape.weighted_sum({{l_cond_id, ew.cond}, {l_diff_id, ew.diff}});

  StepReport rep;
  rep.step = step_;
  rep.l_total = tape.scalar(l_total_id);
  rep.l_cond = tape.scalar(l_cond_id);
  rep.l_diff = tape.scalar(l_diff_id);
  rep.l_mse = tape.scalar(mse_id);
  rep.l_reg = tape.scalar(tv_id);
  rep.l_pinn = pinn_terms.total;
  rep.l_pde = pinn_terms.pde;
  rep.l_bc = pinn_terms.bc;
  rep.l_source = pinn_terms.source;

  if (!std::isfinite(rep.l_total)) {
    std::ostringstream ss;
    ss << "divergence at step " << step_ << " (l_cond=" << rep.l_cond
       << ", l_diff=" << rep.l_diff << ", l_mse=" << rep.l_mse << ", l_pinn=" << rep.l_pinn
       << ", l_reg=" << rep.l_reg << ")";
    throw std::runtime_error(ss.str());
  }

  tape.backward(l_total_id);
  optimizer_update();
  return rep;
}

void Trainer::optimizer_update() {
  const double lr = cfg_.learning_rate;
  if (cfg_.optimizer == "sgd") {
    for (auto& [name, blk] : params_.blocks())
      for (size_t i = 0; i < blk.value.size(); ++i) blk.value[i] -= lr * blk.grad[i];
    return;
  }
  constexpr double kB1 = 0.9, kB2 = 0.999, kEps = 1e-8;
  ++adam_t_;
  const double c1 = 1.0 - std::pow(kB1, static_cast<double>(adam_t_));
  const double c2 = 1.0 - std::pow(kB2, static_cast<double>(adam_t_));
  for (auto& [name, blk] : params_.blocks()) {
    Moments& mo = adam_[name];
    if (mo.m.empty()) {
      mo.m.assign(blk.value.size(), 0.0);
      mo.v.assign(blk.value.size(), 0.0);
    }
    for (size_t i = 0; i < blk.value.size(); ++i) {
      const double g = blk.grad[i];
      mo.m[i] = kB1 * mo.m[i] + (1.0 - kB1) * g;
      mo.v[i] = kB2 * mo.v[i] + (1.0 - kB2) * g * g;
      blk.value[i] -= lr * (mo.m[i] / c1) / (std::sqrt(mo.v[i] / c2) + kEps);
    }
  }
}

EvalReport Trainer::evaluate() {
  if (test_idx_.empty()) throw std::runtime_error("no test records to evaluate");
  const int draws = cfg_.eval_mask_draws;
  const int jobs = static_cast<int>(test_idx_.size()) * draws;
  std::vector<MetricReport> reports(jobs);
  std::vector<double> init_nmse(jobs);

  parallel_for(jobs, [&](int slot) {
    const int idx = test_idx_[slot / draws];
    const uint64_t draw = static_cast<uint64_t>(slot % draws);
    const auto& rec = data_[idx];
    std::optional<BinaryMask> mask;
    if (cfg_.eval_rate > 0.0)
      mask = sample_observation_mask(
          rec.scene, cfg_.eval_rate,
          derive_seed(cfg_.seed, {seedtag::kEval, static_cast<uint64_t>(step_),
                                  static_cast<uint64_t>(idx), draw}));

    Tape tape(&params_);
    Tape::Id x = tape.input(cond_input_item(rec.scene, rec.truth, mask ? &*mask : nullptr,
                                            vehicle_channel_));
    CondForward cf = cond_.forward(tape, x);
    Tensor4 y0 = tape.val(cf.y0);
    std::vector<Tensor4> anchors;
    for (Tape::Id z : cf.features) anchors.push_back(tape.val(z));

    SampleOpts opts;
    opts.flags = cfg_.diff_flags();
    const Tensor4 sample = ancestral_sample(
        diff_, params_, anchors, y0, sched_,
        derive_seed(cfg_.seed, {seedtag::kEval, static_cast<uint64_t>(step_),
                                static_cast<uint64_t>(idx), 0xD1FFu + draw}),
        opts);

    const Grid2D pred = tensor_plane_to_grid(sample, 0, 0, rec.scene.spacing);
    const Grid2D init = tensor_plane_to_grid(y0, 0, 0, rec.scene.spacing);
    reports[slot] = evaluate_metrics(pred, rec.truth);
    init_nmse[slot] = nmse(init, rec.truth);
  });

  EvalReport out;
  for (size_t i = 0; i < reports.size(); ++i) {
    out.nmse += reports[i].nmse;
    out.rmse += reports[i].rmse;
    out.ssim += reports[i].ssim;
    out.nmse_init += init_nmse[i];
  }
  const double n = static_cast<double>(reports.size());
  out.nmse /= n;
  out.rmse /= n;
  out.ssim /= n;
  out.nmse_init /= n;
  return out;
}

json Trainer::checkpoint_extra() const {
  return json{{"net",
               {{"depth", cfg_.net.depth},
                {"channels", cfg_.net.channels},
                {"temb_dim", cfg_.net.temb_dim}}},
              {"in_channels", cond_.in_channels()},
              {"vehicle_channel", vehicle_channel_},
              {"schedule",
               {{"steps", cfg_.diffusion_steps},
                {"beta_min", cfg_.beta_min},
                {"beta_max", cfg_.beta_max}}},
              {"disable_rfsa", cfg_.disable_rfsa},
              {"disable_anchor", cfg_.disable_anchor}};
}

void Trainer::train(const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::ofstream csv(out_dir / "metrics.csv");
  if (!csv) throw std::runtime_error("cannot open for writing: " + (out_dir / "metrics.csv").string());
  csv << kMetricsHeader << "\n";

  auto write_row = [&](const StepReport& r, const EvalReport& e) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%.17g,%.17g,%.17g,%.17g",
                  static_cast<long long>(r.step), r.l_total, r.l_cond, r.l_diff, r.l_mse,
                  r.l_pinn, r.l_pde, r.l_bc, r.l_source, r.l_reg, e.nmse, e.rmse, e.ssim,
                  e.nmse_init);
    csv << buf << "\n";
    csv.flush();
  };

  StepReport last;
  try {
    for (int s = 1; s <= cfg_.steps; ++s) {
      last = train_step();
      if (s % cfg_.eval_interval == 0 && s < cfg_.steps) {
        write_row(last, evaluate());
        params_.save_checkpoint(out_dir / "checkpoint", step_, checkpoint_extra());
      }
    }
  } catch (...) {
    params_.save_checkpoint(out_dir / "ckpt_halt", step_, checkpoint_extra());
    throw;
  }
  write_row(last, evaluate());
  params_.save_checkpoint(out_dir / "checkpoint", step_, checkpoint_extra());
}

const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> kVariants{"full", "no_pinn", "no_reg", "no_mse"};
  return kVariants;
}

TrainConfig apply_variant(TrainConfig cfg, const std::string& variant) {
  if (variant == "full") return cfg;
  if (variant == "no_pinn") cfg.disable_pinn = true;
  else if (variant == "no_reg") cfg.disable_reg = true;
  else if (variant == "no_mse") cfg.disable_mse = true;
  else if (variant == "no_rfsa") cfg.disable_rfsa = true;
  else if (variant == "no_anchor") cfg.disable_anchor = true;
  else throw std::invalid_argument("unknown ablation variant: " + variant);
  return cfg;
}

std::vector<AblationRun> run_ablation(const TrainConfig& base,
                                      const std::vector<DatasetRecord>& data, int n_seeds,
                                      const std::vector<std::string>& variants) {
  if (n_seeds < 1) throw std::invalid_argument("need at least one seed");
  std::vector<AblationRun> runs(variants.size() * n_seeds);
  parallel_for(static_cast<int>(runs.size()), [&](int job) {
    const int vi = job / n_seeds;
    const int si = job % n_seeds;
    TrainConfig cfg = apply_variant(base, variants[vi]);
    cfg.seed = base.seed + static_cast<uint64_t>(si);  // paired across variants
    Trainer trainer(cfg, data);
    for (int s = 0; s < cfg.steps; ++s) trainer.train_step();
    runs[job] = AblationRun{variants[vi], si, cfg.seed, trainer.evaluate()};
  });
  return runs;
}

void write_ablation_csv(const std::vector<AblationRun>& runs, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << "variant,seed_index,seed,nmse,rmse,ssim,nmse_init\n";
  os.precision(12);
  for (const auto& r : runs)
    os << r.variant << "," << r.seed_index << "," << r.seed << "," << r.eval.nmse << ","
       << r.eval.rmse << "," << r.eval.ssim << "," << r.eval.nmse_init << "\n";
  // per-variant means
  std::map<std::string, std::pair<int, EvalReport>> agg;
  for (const auto& r : runs) {
    auto& [n, sum] = agg[r.variant];
    ++n;
    sum.nmse += r.eval.nmse;
    sum.rmse += r.eval.rmse;
    sum.ssim += r.eval.ssim;
    sum.nmse_init += r.eval.nmse_init;
  }
  for (const auto& [variant, ns] : agg)
    os << variant << ",mean,," << ns.second.nmse / ns.first << "," << ns.second.rmse / ns.first
       << "," << ns.second.ssim / ns.first << "," << ns.second.nmse_init / ns.first << "\n";
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace phyrm
