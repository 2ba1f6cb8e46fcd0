// Reverse-mode autodiff over dense tensors. A Tape records primitive
// operations with enough saved state for exact backward passes; gradients
// accumulate additively at fan-out and flush into ModelParams blocks.
#pragma once

#include "phyrm/params.hpp"
#include "phyrm/physics.hpp"
#include "phyrm/tensor.hpp"

#include <functional>
#include <string>
#include <vector>

namespace phyrm {

class Tape {
 public:
  using Id = int;

  explicit Tape(ModelParams* params = nullptr) : params_(params) {}

  // --- leaves ---
  Id input(Tensor4 t);  // constant, receives no gradient
  Id param(const std::string& name, int n, int c, int h, int w, int fan_in);

  // --- primitives ---
  // Cross-correlation; kernel (Cout, Cin, K, K) with odd K, bias (1, Cout, 1, 1).
  Id conv2d(Id x, Id weight, Id bias, int stride = 1, int pad = -1);
  Id relu(Id x);
  Id sigmoid(Id x);
  Id tanh_act(Id x);
  Id add(Id a, Id b);
  Id mul(Id a, Id b);
  Id scale(Id x, double k);
  Id add_bias_hw(Id x, Id bias_nc11);
  Id avgpool2(Id x);
  Id upsample2(Id x);
  Id concat_c(Id a, Id b);
  Id detach(Id x);  // forward copy, gradient barrier
  // out[i] = ca[i] * a[i] + cb[i] * b[i] per batch item
  Id blend(Id a, Id b, std::vector<double> ca, std::vector<double> cb);

  // --- scalar losses (shape 1,1,1,1) ---
  Id mse(Id a, Id b);
  Id tv(Id x);  // mean |forward difference|, both orientations pooled
  Id weighted_sum(const std::vector<std::pair<Id, double>>& terms);
  // Mean over batch items of the physics loss of u (N,1,H,W); per-item
  // geometry supplied by the caller. Averaged components optionally reported.
  Id pinn(Id u, std::vector<const HelmholtzField*> fields, PinnWeights w,
          PinnLossTerms* components_out = nullptr);
  // Spectral gate: per channel G = sigmoid(s_c * |fft2(f_input)| + b_c);
  // out = G * f_spatial. scale/bias are (1, C, 1, 1).
  Id fft_gate(Id f_input, Id f_spatial, Id scale_c, Id bias_c);

  // --- access ---
  const Tensor4& val(Id id) const { return nodes_[id].val; }
  const Tensor4& grad_of(Id id) const { return nodes_[id].grad; }
  double scalar(Id id) const;

  // Seeds d(root) = seed, sweeps the tape in reverse creation order, then
  // adds parameter-leaf gradients into their ModelParams blocks.
  void backward(Id root, double seed = 1.0);

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor4 val;
    Tensor4 grad;
    std::function<void(Tape&)> back;  // null for leaves
    std::string param_name;           // non-empty for parameter leaves
  };

  Id push(Tensor4 val, std::function<void(Tape&)> back = nullptr, std::string pname = {});
  Tensor4& gref(Id id) { return nodes_[id].grad; }

  std::vector<Node> nodes_;
  ModelParams* params_;
  Id cursor_ = -1;  // node whose backward closure is currently running
};

}  // namespace phyrm
