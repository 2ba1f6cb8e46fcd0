#include "phyrm/condmodel.hpp"

#include <cmath>
#include <stdexcept>

namespace phyrm {

void NetConfig::validate() const {
  if (depth < 1) throw std::invalid_argument("net depth must be positive");
  if (static_cast<int>(channels.size()) != depth)
    throw std::invalid_argument("one channel count per level required");
  for (int c : channels)
    if (c < 1) throw std::invalid_argument("channel counts must be positive");
  if (temb_dim < 2 || temb_dim % 2 != 0)
    throw std::invalid_argument("embedding width must be even and at least 2");
}

void LossWeights::validate() const {
  if (mse < 0 || reg < 0 || pde < 0 || bc < 0 || source < 0 || cond < 0 || diff < 0)
    throw std::invalid_argument("loss weights must be non-negative");
}

Tensor4 cond_input_item(const Scene& scene, const Grid2D& truth, const BinaryMask* obs,
                        bool vehicle_channel) {
  const int h = scene.height(), w = scene.width();
  if (truth.height() != h || truth.width() != w)
    throw std::invalid_argument("truth dimensions mismatch");
  const int channels = 4 + (vehicle_channel ? 1 : 0);
  Tensor4 x(1, channels, h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const bool m = obs && obs->get(i, j);
      x.at(0, 0, i, j) = m ? truth.at(i, j) : 0.0;
      x.at(0, 1, i, j) = m ? 1.0 : 0.0;
      x.at(0, 2, i, j) = scene.buildings.get(i, j) ? 1.0 : 0.0;
      if (vehicle_channel && scene.vehicles)
        x.at(0, 4, i, j) = scene.vehicles->get(i, j) ? 1.0 : 0.0;
    }
  for (const auto& tx : scene.transmitters) {
    auto [i, j] = transmitter_pixel(tx, h, w);
    x.at(0, 3, i, j) = 1.0;
  }
  return x;
}

CondNet::CondNet(NetConfig cfg, int in_channels) : cfg_(std::move(cfg)), in_c_(in_channels) {
  cfg_.validate();
  if (in_c_ < 1) throw std::invalid_argument("input channels must be positive");
}

CondForward CondNet::forward(Tape& tape, Tape::Id input) const {
  const Tensor4& x = tape.val(input);
  const int L = cfg_.depth;
  if (x.c != in_c_) throw std::invalid_argument("conditional input channel mismatch");
  if (x.h % (1 << L) != 0 || x.w % (1 << L) != 0)
    throw std::invalid_argument("depth/size mismatch");

  auto name = [](const std::string& s) { return "unet1." + s; };
  auto conv = [&](Tape::Id in, const std::string& tag, int cin, int cout, int k) {
    Tape::Id w = tape.param(name(tag + ".w"), cout, cin, k, k, cin * k * k);
    Tape::Id b = tape.param(name(tag + ".b"), 1, cout, 1, 1, 0);
    return tape.conv2d(in, w, b);
  };

  // encoder
  std::vector<Tape::Id> skips;  // skip_l at resolution R_{l-1}, channels C_l
  Tape::Id cur = input;
  int cin = in_c_;
  for (int l = 1; l <= L; ++l) {
    cur = tape.relu(conv(cur, "enc" + std::to_string(l), cin, cfg_.channels[l - 1], 3));
    skips.push_back(cur);
    cur = tape.avgpool2(cur);
    cin = cfg_.channels[l - 1];
  }
  cur = tape.relu(conv(cur, "bott", cfg_.channels[L - 1], cfg_.channels[L - 1], 3));

  // decoder; z_l recorded at resolution R_l
  std::vector<Tape::Id> features(L, -1);
  features[L - 1] = cur;
  for (int l = L - 1; l >= 1; --l) {
    Tape::Id up = tape.upsample2(cur);
    Tape::Id cat = tape.concat_c(up, skips[l]);
    cur = tape.relu(conv(cat, "dec" + std::to_string(l), 2 * cfg_.channels[l], cfg_.channels[l - 1], 3));
    features[l - 1] = cur;
  }
  Tape::Id up = tape.upsample2(cur);
  Tape::Id cat = tape.concat_c(up, skips[0]);
  cur = tape.relu(conv(cat, "dec0", 2 * cfg_.channels[0], cfg_.channels[0], 3));
  Tape::Id y0 = tape.sigmoid(conv(cur, "head", cfg_.channels[0], 1, 1));
  return CondForward{y0, std::move(features)};
}

double total_variation(const Grid2D& g) {
  const int h = g.height(), w = g.width();
  const int64_t terms = static_cast<int64_t>(h - 1) * w + static_cast<int64_t>(h) * (w - 1);
  double s = 0.0;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      if (j + 1 < w) s += std::abs(g.at(i, j + 1) - g.at(i, j));
      if (i + 1 < h) s += std::abs(g.at(i + 1, j) - g.at(i, j));
    }
  return terms > 0 ? s / terms : 0.0;
}

CondLossReport loss_cond(const Grid2D& y0, const Grid2D& truth, const HelmholtzField& geom,
                         const LossWeights& w) {
  w.validate();
  if (y0.height() != truth.height() || y0.width() != truth.width())
    throw std::invalid_argument("prediction/truth shape mismatch");
  CondLossReport rep;
  double mse = 0.0;
  for (size_t i = 0; i < y0.size(); ++i) {
    const double d = y0.values()[i] - truth.values()[i];
    mse += d * d;
  }
  rep.mse = mse / y0.size();
  if (w.pinn_enabled()) {
    const PinnLossTerms t = pinn_losses_at(y0.values(), geom, w.pinn());
    rep.pinn = t.total;
    rep.pde = t.pde;
    rep.bc = t.bc;
    rep.source = t.source;
  }
  rep.reg = total_variation(y0);
  rep.total = w.mse * rep.mse + rep.pinn + w.reg * rep.reg;
  return rep;
}

}  // namespace phyrm
