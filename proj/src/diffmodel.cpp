#include "phyrm/diffmodel.hpp"

#include "phyrm/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace phyrm {

NoiseSchedule make_schedule(int T, double beta_min, double beta_max) {
  if (T < 1) throw std::invalid_argument("schedule needs at least one step");
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0))
    throw std::invalid_argument("schedule bounds violation");
  NoiseSchedule s;
  s.steps = T;
  s.beta.resize(T);
  s.alpha.resize(T);
  s.alpha_bar.resize(T);
  double prod = 1.0;
  for (int t = 0; t < T; ++t) {
    s.beta[t] = T == 1 ? beta_min : beta_min + (beta_max - beta_min) * t / (T - 1);
    s.alpha[t] = 1.0 - s.beta[t];
    prod *= s.alpha[t];
    s.alpha_bar[t] = prod;
  }
  return s;
}

Tensor4 corrupt(const Tensor4& y0, const std::vector<int>& t, const Tensor4& eps,
                const NoiseSchedule& sched) {
  if (!y0.same_shape(eps)) throw std::invalid_argument("noise shape mismatch");
  if (static_cast<int>(t.size()) != y0.n)
    throw std::invalid_argument("one timestep per batch item required");
  Tensor4 out = Tensor4::zeros_like(y0);
  const size_t per = static_cast<size_t>(y0.c) * y0.h * y0.w;
  for (int in = 0; in < y0.n; ++in) {
    if (t[in] < 1 || t[in] > sched.steps) throw std::out_of_range("timestep out of range");
    const double ab = sched.alpha_bar_at(t[in]);
    const double ka = std::sqrt(ab), kb = std::sqrt(1.0 - ab);
    for (size_t i = 0; i < per; ++i)
      out.v[in * per + i] = ka * y0.v[in * per + i] + kb * eps.v[in * per + i];
  }
  return out;
}

Tape::Id anchor_fuse(Tape& tape, const std::string& prefix, Tape::Id f_d, Tape::Id f_c) {
  const Tensor4& dv = tape.val(f_d);
  const Tensor4& cv = tape.val(f_c);
  if (!dv.same_shape(cv)) throw std::invalid_argument("anchor fusion shape mismatch");
  const int c = dv.c;
  Tape::Id wd = tape.param(prefix + ".gd.w", c, c, 1, 1, c);
  Tape::Id bd = tape.param(prefix + ".gd.b", 1, c, 1, 1, 0);
  Tape::Id wc = tape.param(prefix + ".gc.w", c, c, 1, 1, c);
  Tape::Id bc = tape.param(prefix + ".gc.b", 1, c, 1, 1, 0);
  Tape::Id gate = tape.sigmoid(tape.conv2d(f_d, wd, bd));
  Tape::Id content = tape.tanh_act(tape.conv2d(f_c, wc, bc));
  return tape.mul(gate, content);
}

Tape::Id rf_sa(Tape& tape, const std::string& prefix, Tape::Id f_input, Tape::Id f_spatial) {
  const int c = tape.val(f_input).c;
  Tape::Id scale = tape.param(prefix + ".scale", 1, c, 1, 1, 0);  // zero-init
  Tape::Id bias = tape.param(prefix + ".bias", 1, c, 1, 1, 0);
  return tape.fft_gate(f_input, f_spatial, scale, bias);
}

Tensor4 timestep_embedding(const std::vector<int>& t, int dim) {
  if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("embedding width must be even");
  const int half = dim / 2;
  Tensor4 out(static_cast<int>(t.size()), dim, 1, 1);
  for (size_t in = 0; in < t.size(); ++in)
    for (int i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * i / half);
      out.at(static_cast<int>(in), 2 * i, 0, 0) = std::sin(t[in] * freq);
      out.at(static_cast<int>(in), 2 * i + 1, 0, 0) = std::cos(t[in] * freq);
    }
  return out;
}

double loss_diff(const Tensor4& eps, const Tensor4& eps_pred) {
  if (!eps.same_shape(eps_pred)) throw std::invalid_argument("noise shape mismatch");
  double s = 0.0;
  for (int64_t i = 0; i < eps.size(); ++i) {
    const double d = eps.v[i] - eps_pred.v[i];
    s += d * d;
  }
  return s / eps.size();
}

DiffNet::DiffNet(NetConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

Tape::Id DiffNet::predict_noise(Tape& tape, Tape::Id y_t, Tape::Id y0_condition,
                                const std::vector<int>& tsteps,
                                const std::vector<Tape::Id>& anchors, Flags flags) const {
  const int L = cfg_.depth;
  const Tensor4& ytv = tape.val(y_t);
  if (!ytv.same_shape(tape.val(y0_condition)))
    throw std::invalid_argument("condition shape mismatch");
  if (static_cast<int>(tsteps.size()) != ytv.n)
    throw std::invalid_argument("one timestep per batch item required");
  if (static_cast<int>(anchors.size()) != L)
    throw std::invalid_argument("level-count mismatch");
  if (ytv.h % (1 << L) != 0 || ytv.w % (1 << L) != 0)
    throw std::invalid_argument("depth/size mismatch");

  auto name = [](const std::string& s) { return "unet2." + s; };
  auto conv = [&](Tape::Id in, const std::string& tag, int cin, int cout, int k) {
    Tape::Id w = tape.param(name(tag + ".w"), cout, cin, k, k, cin * k * k);
    Tape::Id b = tape.param(name(tag + ".b"), 1, cout, 1, 1, 0);
    return tape.conv2d(in, w, b);
  };
  // learned per-level projection of the sinusoidal embedding to a channel bias
  Tape::Id emb = tape.input(timestep_embedding(tsteps, cfg_.temb_dim));
  auto temb_bias = [&](Tape::Id x, const std::string& tag, int cout) {
    Tape::Id proj = conv(emb, tag, cfg_.temb_dim, cout, 1);
    return tape.add_bias_hw(x, proj);
  };

  Tape::Id cur = tape.concat_c(y_t, y0_condition);
  int cin = 2;

  std::vector<Tape::Id> skips;
  for (int l = 1; l <= L; ++l) {
    const int cout = cfg_.channels[l - 1];
    cur = tape.relu(conv(cur, "enc" + std::to_string(l), cin, cout, 3));
    cur = temb_bias(cur, "temb" + std::to_string(l), cout);
    skips.push_back(cur);
    cur = tape.avgpool2(cur);
    cin = cout;
  }
  cur = tape.relu(conv(cur, "bott", cfg_.channels[L - 1], cfg_.channels[L - 1], 3));
  cur = temb_bias(cur, "tembB", cfg_.channels[L - 1]);

  // spectral gate at the bottleneck, driven by the deepest condition features
  {
    Tape::Id gated = rf_sa(tape, name("rfsa"), anchors[L - 1], cur);
    if (!flags.disable_rfsa) cur = gated;
  }

  // gated fusion junction at every decoder level, deepest first
  {
    Tape::Id fused = anchor_fuse(tape, name("anchor" + std::to_string(L)), cur, anchors[L - 1]);
    if (!flags.disable_anchor) cur = tape.add(cur, fused);
  }
  for (int l = L - 1; l >= 1; --l) {
    Tape::Id up = tape.upsample2(cur);
    Tape::Id cat = tape.concat_c(up, skips[l]);
    cur = tape.relu(conv(cat, "dec" + std::to_string(l), 2 * cfg_.channels[l], cfg_.channels[l - 1], 3));
    Tape::Id fused = anchor_fuse(tape, name("anchor" + std::to_string(l)), cur, anchors[l - 1]);
    if (!flags.disable_anchor) cur = tape.add(cur, fused);
  }
  Tape::Id up = tape.upsample2(cur);
  Tape::Id cat = tape.concat_c(up, skips[0]);
  cur = tape.relu(conv(cat, "dec0", 2 * cfg_.channels[0], cfg_.channels[0], 3));
  return conv(cur, "head", cfg_.channels[0], 1, 1);
}

Tensor4 ancestral_sample(const DiffNet& net, ModelParams& params,
                         const std::vector<Tensor4>& anchors, const Tensor4& y0_condition,
                         const NoiseSchedule& sched, uint64_t seed, SampleOpts opts) {
  Rng rng(derive_seed(seed, {seedtag::kDiffusion}));
  Tensor4 x = Tensor4::randn(y0_condition.n, y0_condition.c, y0_condition.h,
                             y0_condition.w, rng);
  for (int t = sched.steps; t >= 1; --t) {
    Tape tape(&params);
    Tape::Id xid = tape.input(x);
    Tape::Id y0id = tape.input(y0_condition);
    std::vector<Tape::Id> aids;
    aids.reserve(anchors.size());
    for (const auto& a : anchors) aids.push_back(tape.input(a));
    const std::vector<int> ts(static_cast<size_t>(x.n), t);
    Tape::Id eps = net.predict_noise(tape, xid, y0id, ts, aids, opts.flags);
    const Tensor4& ev = tape.val(eps);

    const double a = sched.alpha_at(t);
    const double ab = sched.alpha_bar_at(t);
    const double k1 = 1.0 / std::sqrt(a);
    const double k2 = sched.beta_at(t) / std::sqrt(1.0 - ab);
    const double sigma = std::sqrt(sched.beta_at(t));
    for (int64_t i = 0; i < x.size(); ++i) {
      double v = k1 * (x.v[i] - k2 * ev.v[i]);
      if (t > 1 && opts.inject_noise) v += sigma * rng.normal();
      x.v[i] = v;
    }
  }
  for (double& v : x.v) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return x;
}

Grid2D tensor_plane_to_grid(const Tensor4& t, int item, int channel, double spacing) {
  Grid2D g(t.h, t.w, spacing);
  const double* src = t.v.data() + t.plane_offset(item, channel);
  std::copy_n(src, static_cast<size_t>(t.h) * t.w, g.values().begin());
  return g;
}

}  // namespace phyrm
