#include "phyrm/tape.hpp"

#include "phyrm/fft.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace phyrm {

namespace {

// C(M x N) += A(M x K) * B(K x N); row-major, j-contiguous inner loops.
void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C(M x N) += A(M x K) * B(N x K)^T
void gemm_nt(int m, int n, int k, const double* a, const double* b, double* c) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<size_t>(j) * k;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

// C(M x N) += A(K x M)^T * B(K x N)
void gemm_tn(int m, int n, int k, const double* a, const double* b, double* c) {
  for (int p = 0; p < k; ++p) {
    const double* arow = a + static_cast<size_t>(p) * m;
    const double* brow = b + static_cast<size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void im2col(const Tensor4& x, int item, int kk, int stride, int pad, int ho, int wo,
            std::vector<double>& col) {
  const int cin = x.c, h = x.h, w = x.w;
  col.assign(static_cast<size_t>(cin) * kk * kk * ho * wo, 0.0);
  size_t row = 0;
  for (int ci = 0; ci < cin; ++ci) {
    const double* plane = x.v.data() + x.plane_offset(item, ci);
    for (int ky = 0; ky < kk; ++ky)
      for (int kx = 0; kx < kk; ++kx, ++row) {
        double* dst = col.data() + row * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          const double* src = plane + static_cast<size_t>(iy) * w;
          double* drow = dst + static_cast<size_t>(oy) * wo;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) drow[ox] = src[ix];
          }
        }
      }
  }
}

void col2im_add(const std::vector<double>& col, int item, int cin, int h, int w, int kk,
                int stride, int pad, int ho, int wo, Tensor4& gx) {
  size_t row = 0;
  for (int ci = 0; ci < cin; ++ci) {
    double* plane = gx.v.data() + gx.plane_offset(item, ci);
    for (int ky = 0; ky < kk; ++ky)
      for (int kx = 0; kx < kk; ++kx, ++row) {
        const double* src = col.data() + row * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          double* drow = plane + static_cast<size_t>(iy) * w;
          const double* srow = src + static_cast<size_t>(oy) * wo;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) drow[ix] += srow[ox];
          }
        }
      }
  }
}

}  // namespace

Tape::Id Tape::push(Tensor4 val, std::function<void(Tape&)> back, std::string pname) {
  nodes_.push_back(Node{std::move(val), Tensor4{}, std::move(back), std::move(pname)});
  return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::input(Tensor4 t) { return push(std::move(t)); }

Tape::Id Tape::param(const std::string& name, int n, int c, int h, int w, int fan_in) {
  if (!params_) throw std::logic_error("tape has no parameter store");
  ParamBlock& blk = params_->ensure(name, {n, c, h, w}, fan_in);
  Tensor4 t(n, c, h, w);
  if (static_cast<int64_t>(blk.value.size()) != t.size())
    throw std::logic_error("parameter size mismatch: " + name);
  t.v = blk.value;
  return push(std::move(t), nullptr, name);
}

double Tape::scalar(Id id) const {
  const Tensor4& t = nodes_[id].val;
  if (t.size() != 1) throw std::logic_error("node is not a scalar");
  return t.v[0];
}

Tape::Id Tape::conv2d(Id x, Id weight, Id bias, int stride, int pad) {
  const Tensor4& xv = nodes_[x].val;
  const Tensor4& wv = nodes_[weight].val;
  const Tensor4& bv = nodes_[bias].val;
  const int kk = wv.h;
  if (wv.w != kk || kk % 2 == 0) throw std::invalid_argument("conv kernel must be odd square");
  if (wv.c != xv.c) throw std::invalid_argument("conv channel mismatch");
  if (bv.n != 1 || bv.c != wv.n || bv.h != 1 || bv.w != 1)
    throw std::invalid_argument("conv bias shape mismatch");
  if (pad < 0) pad = (kk - 1) / 2;
  const int ho = (xv.h + 2 * pad - kk) / stride + 1;
  const int wo = (xv.w + 2 * pad - kk) / stride + 1;
  if (ho < 1 || wo < 1) throw std::invalid_argument("conv output would be empty");

  const int cout = wv.n, cin = xv.c;
  Tensor4 out(xv.n, cout, ho, wo);
  std::vector<double> col;
  for (int item = 0; item < xv.n; ++item) {
    im2col(xv, item, kk, stride, pad, ho, wo, col);
    double* y = out.v.data() + out.plane_offset(item, 0);
    for (int co = 0; co < cout; ++co) {
      const double b = bv.v[co];
      double* row = y + static_cast<size_t>(co) * ho * wo;
      for (int i = 0; i < ho * wo; ++i) row[i] = b;
    }
    gemm_nn(cout, ho * wo, cin * kk * kk, wv.v.data(), col.data(), y);
  }

  return push(std::move(out), [x, weight, bias, stride, pad, kk](Tape& t) {
    const Tensor4& xv = t.nodes_[x].val;
    const Tensor4& wv = t.nodes_[weight].val;
    Tensor4& gx = t.gref(x);
    Tensor4& gw = t.gref(weight);
    Tensor4& gb = t.gref(bias);
    const Tensor4& go = t.gref(t.cursor_);
    const int cout = wv.n, cin = xv.c;
    const int ho = go.h, wo = go.w;
    std::vector<double> col, gcol(static_cast<size_t>(cin) * kk * kk * ho * wo);
    for (int item = 0; item < xv.n; ++item) {
      const double* g = go.v.data() + go.plane_offset(item, 0);
      im2col(xv, item, kk, stride, pad, ho, wo, col);
      // dW += dY * X^T
      gemm_nt(cout, cin * kk * kk, ho * wo, g, col.data(), gw.v.data());
      // db += row sums of dY
      for (int co = 0; co < cout; ++co) {
        const double* row = g + static_cast<size_t>(co) * ho * wo;
        double s = 0.0;
        for (int i = 0; i < ho * wo; ++i) s += row[i];
        gb.v[co] += s;
      }
      // dX = W^T * dY, scattered back
      std::fill(gcol.begin(), gcol.end(), 0.0);
      gemm_tn(cin * kk * kk, ho * wo, cout, wv.v.data(), g, gcol.data());
      col2im_add(gcol, item, cin, xv.h, xv.w, kk, stride, pad, ho, wo, gx);
    }
  });
}

Tape::Id Tape::relu(Id x) {
  Tensor4 out = nodes_[x].val;
  for (double& v : out.v) v = v > 0.0 ? v : 0.0;
  return push(std::move(out), [x](Tape& t) {
    const Tensor4& xv = t.nodes_[x].val;
    const Tensor4& go = t.gref(t.cursor_);
    Tensor4& gx = t.gref(x);
    for (int64_t i = 0; i < xv.size(); ++i)
      if (xv.v[i] > 0.0) gx.v[i] += go.v[i];
  });
}

Tape::Id Tape::sigmoid(Id x) {
  Tensor4 out = nodes_[x].val;
  for (double& v : out.v) v = 1.0 / (1.0 + std::exp(-v));
  const Id id = push(std::move(out));
  nodes_[id].back = [x, id](Tape& t) {
    const Tensor4& y = t.nodes_[id].val;
    const Tensor4& go = t.gref(id);
    Tensor4& gx = t.gref(x);
    for (int64_t i = 0; i < y.size(); ++i) gx.v[i] += go.v[i] * y.v[i] * (1.0 - y.v[i]);
  };
  return id;
}

Tape::Id Tape::tanh_act(Id x) {
  Tensor4 out = nodes_[x].val;
  for (double& v : out.v) v = std::tanh(v);
  const Id id = push(std::move(out));
  nodes_[id].back = [x, id](Tape& t) {
    const Tensor4& y = t.nodes_[id].val;
    const Tensor4& go = t.gref(id);
    Tensor4& gx = t.gref(x);
    for (int64_t i = 0; i < y.size(); ++i) gx.v[i] += go.v[i] * (1.0 - y.v[i] * y.v[i]);
  };
  return id;
}

Tape::Id Tape::add(Id a, Id b) {
  const Tensor4& av = nodes_[a].val;
  const Tensor4& bv = nodes_[b].val;
  if (!av.same_shape(bv)) throw std::invalid_argument("add shape mismatch");
  Tensor4 out = av;
  for (int64_t i = 0; i < out.size(); ++i) out.v[i] += bv.v[i];
  return push(std::move(out), [a, b](Tape& t) {
    const Tensor4& go = t.gref(t.cursor_);
    Tensor4& ga = t.gref(a);
    Tensor4& gb = t.gref(b);
    for (int64_t i = 0; i < go.size(); ++i) {
      ga.v[i] += go.v[i];
      gb.v[i] += go.v[i];
    }
  });
}

Tape::Id Tape::mul(Id a, Id b) {
  const Tensor4& av = nodes_[a].val;
  const Tensor4& bv = nodes_[b].val;
  if (!av.same_shape(bv)) throw std::invalid_argument("mul shape mismatch");
  Tensor4 out = av;
  for (int64_t i = 0; i < out.size(); ++i) out.v[i] *= bv.v[i];
  return push(std::move(out), [a, b](Tape& t) {
    const Tensor4& av = t.nodes_[a].val;
    const Tensor4& bv = t.nodes_[b].val;
    const Tensor4& go = t.gref(t.cursor_);
    Tensor4& ga = t.gref(a);
    Tensor4& gb = t.gref(b);
    for (int64_t i = 0; i < go.size(); ++i) {
      ga.v[i] += go.v[i] * bv.v[i];
      gb.v[i] += go.v[i] * av.v[i];
    }
  });
}

Tape::Id Tape::scale(Id x, double k) {
  Tensor4 out = nodes_[x].val;
  for (double& v : out.v) v *= k;
  return push(std::move(out), [x, k](Tape& t) {
    const Tensor4& go = t.gref(t.cursor_);
    Tensor4& gx = t.gref(x);
    for (int64_t i = 0; i < go.size(); ++i) gx.v[i] += k * go.v[i];
  });
}

Tape::Id Tape::add_bias_hw(Id x, Id bias_nc11) {
  const Tensor4& xv = nodes_[x].val;
  const Tensor4& bv = nodes_[bias_nc11].val;
  if (bv.n != xv.n || bv.c != xv.c || bv.h != 1 || bv.w != 1)
    throw std::invalid_argument("bias shape mismatch");
  Tensor4 out = xv;
  for (int in = 0; in < xv.n; ++in)
    for (int ic = 0; ic < xv.c; ++ic) {
      const double b = bv.at(in, ic, 0, 0);
      double* plane = out.v.data() + out.plane_offset(in, ic);
      for (int i = 0; i < xv.h * xv.w; ++i) plane[i] += b;
    }
  return push(std::move(out), [x, bias_nc11](Tape& t) {
    const Tensor4& go = t.gref(t.cursor_);
    Tensor4& gx = t.gref(x);
    Tensor4& gb = t.gref(bias_nc11);
    for (int64_t i = 0; i < go.size(); ++i) gx.v[i] += go.v[i];
    for (int in = 0; in < go.n; ++in)
      for (int ic = 0; ic < go.c; ++ic) {
        const double* plane = go.v.data() + go.plane_offset(in, ic);
        double s = 0.0;
        for (int i = 0; i < go.h * go.w; ++i) s += plane[i];
        gb.at(in, ic, 0, 0) += s;
      }
  });
}

Tape::Id Tape::avgpool2(Id x) {
  const Tensor4& xv = nodes_[x].val;
  if (xv.h % 2 != 0 || xv.w % 2 != 0) throw std::invalid_argument("avgpool2 needs even dims");
  Tensor4 out(xv.n, xv.c, xv.h / 2, xv.w / 2);
  for (int in = 0; in < xv.n; ++in)
    for (int ic = 0; ic < xv.c; ++ic)
      for (int oy = 0; oy < out.h; ++oy)
        for (int ox = 0; ox < out.w; ++ox)
          out.at(in, ic, oy, ox) = 0.25 * (xv.at(in, ic, 2 * oy, 2 * ox) +
                                           xv.at(in, ic, 2 * oy, 2 * ox + 1) +
                                           xv.at(in, ic, 2 * oy + 1, 2 * ox) +
                                           xv.at(in, ic, 2 * oy + 1, 2 * ox + 1));
  return push(std::move(out), [x](Tape& t) {
    const Tensor4& go = t.gref(t.cursor_);
    Tensor4& gx = t.gref(x);
    for (int in = 0; in < go.n; ++in)
      for (int ic = 0; ic < go.c; ++ic)
        for (int oy = 0; oy < go.h; ++oy)
          for (int ox = 0; ox < go.w; ++ox) {
            const double g = 0.25 * go.at(in, ic, oy, ox);
            gx.at(in, ic, 2 * oy, 2 * ox) += g;
            gx.at(in, ic, 2 * oy, 2 * ox + 1) += g;
            gx.at(in, ic, 2 * oy + 1, 2 * ox) += g;
            gx.at(in, ic, 2 * oy + 1, 2 * ox + 1) += g;
          }
  });
}

Tape::Id Tape::upsample2(Id x) {
  const Tensor4& xv = nodes_[x].val;
  Tensor4 out(xv.n, xv.c, xv.h * 2, xv.w * 2);
  for (int in = 0; in < xv.n; ++in)
    for (int ic = 0; ic < xv.c; ++ic)
      for (int iy = 0; iy < xv.h; ++iy)
        for (int ix = 0; ix < xv.w; ++ix) {
          const double v = xv.at(in, ic, iy, ix);
          out.at(in, ic, 2 * iy, 2 * ix) = v;
          out.at(in, ic, 2 * iy, 2 * ix + 1) = v;
          out.at(in, ic, 2 * iy + 1, 2 * ix) = v;
          out.at(in, ic, 2 * iy + 1, 2 * ix + 1) = v;
        }
  return push(std::move(out), [x](Tape& t) {
    const Tensor4& go = t.gref(t.cursor_);
    Tensor4& gx = t.gref(x);
    for (int in = 0; in < gx.n; ++in)
      for (int ic = 0; ic < gx.c; ++ic)
        for (int iy = 0; iy < gx.h; ++iy)
          for (int ix = 0; ix < gx.w; ++ix)
            gx.at(in, ic, iy, ix) += go.at(in, ic, 2 * iy, 2 * ix) +
                                     go.at(in, ic, 2 * iy, 2 * ix + 1) +
                                     go.at(in, ic, 2 * iy + 1, 2 * ix) +
                                     go.at(in, ic, 2 * iy + 1, 2 * ix + 1);
  });
}

Tape::Id Tape::concat_c(Id a, Id b) {
  const Tensor4& av = nodes_[a].val;
  const Tensor4& bv = nodes_[b].val;
  if (av.n != bv.n || av.h != bv.h || av.w != bv.w)
    throw std::invalid_argument("concat shape mismatch");
  Tensor4 out(av.n, av.c + bv.c, av.h, av.w);
  const size_t plane = static_cast<size_t>(av.h) * av.w;
  for (int in = 0; in < av.n; ++in) {
    std::copy_n(av.v.data() + av.plane_offset(in, 0), plane * av.c,
                out.v.data() + out.plane_offset(in, 0));
    std::copy_n(bv.v.data() + bv.plane_offset(in, 0), plane * bv.c,
                out.v.data() + out.plane_offset(in, av.c));
  }
  return push(std::move(out), [a, b](Tape& t) {
    const Tensor4& go = t.gref(t.cursor_);
    Tensor4& ga = t.gref(a);
    Tensor4& gb = t.gref(b);
    const size_t plane = static_cast<size_t>(go.h) * go.w;
    for (int in = 0; in < go.n; ++in) {
      const double* g = go.v.data() + go.plane_offset(in, 0);
      double* pa = ga.v.data() + ga.plane_offset(in, 0);
      for (size_t i = 0; i < plane * ga.c; ++i) pa[i] += g[i];
      const double* g2 = go.v.data() + go.plane_offset(in, ga.c);
      double* pb = gb.v.data() + gb.plane_offset(in, 0);
      for (size_t i = 0; i < plane * gb.c; ++i) pb[i] += g2[i];
    }
  });
}

Tape::Id Tape::detach(Id x) { return push(nodes_[x].val); }

Tape::Id Tape::blend(Id a, Id b, std::vector<double> ca, std::vector<double> cb) {
  const Tensor4& av = nodes_[a].val;
  const Tensor4& bv = nodes_[b].val;
  if (!av.same_shape(bv)) throw std::invalid_argument("blend shape mismatch");
  if (static_cast<int>(ca.size()) != av.n || static_cast<int>(cb.size()) != av.n)
    throw std::invalid_argument("blend coefficient count mismatch");
  Tensor4 out = Tensor4::zeros_like(av);
  const size_t per = static_cast<size_t>(av.c) * av.h * av.w;
  for (int in = 0; in < av.n; ++in)
    for (size_t i = 0; i < per; ++i)
      out.v[in * per + i] = ca[in] * av.v[in * per + i] + cb[in] * bv.v[in * per + i];
  return push(std::move(out), [a, b, ca = std::move(ca), cb = std::move(cb)](Tape& t) {
    const Tensor4& go = t.gref(t.cursor_);
    Tensor4& ga = t.gref(a);
    Tensor4& gb = t.gref(b);
    const size_t per = static_cast<size_t>(go.c) * go.h * go.w;
    for (int in = 0; in < go.n; ++in)
      for (size_t i = 0; i < per; ++i) {
        ga.v[in * per + i] += ca[in] * go.v[in * per + i];
        gb.v[in * per + i] += cb[in] * go.v[in * per + i];
      }
  });
}

Tape::Id Tape::mse(Id a, Id b) {
  const Tensor4& av = nodes_[a].val;
  const Tensor4& bv = nodes_[b].val;
  if (!av.same_shape(bv)) throw std::invalid_argument("mse shape mismatch");
  double s = 0.0;
  for (int64_t i = 0; i < av.size(); ++i) {
    const double d = av.v[i] - bv.v[i];
    s += d * d;
  }
  Tensor4 out(1, 1, 1, 1, s / av.size());
  return push(std::move(out), [a, b](Tape& t) {
    const Tensor4& av = t.nodes_[a].val;
    const Tensor4& bv = t.nodes_[b].val;
    const double g = t.gref(t.cursor_).v[0] * 2.0 / av.size();
    Tensor4& ga = t.gref(a);
    Tensor4& gb = t.gref(b);
    for (int64_t i = 0; i < av.size(); ++i) {
      const double d = g * (av.v[i] - bv.v[i]);
      ga.v[i] += d;
      gb.v[i] -= d;
    }
  });
}

Tape::Id Tape::tv(Id x) {
  const Tensor4& xv = nodes_[x].val;
  const int64_t terms = static_cast<int64_t>(xv.n) * xv.c *
                        (static_cast<int64_t>(xv.h - 1) * xv.w + static_cast<int64_t>(xv.h) * (xv.w - 1));
  double s = 0.0;
  for (int in = 0; in < xv.n; ++in)
    for (int ic = 0; ic < xv.c; ++ic)
      for (int iy = 0; iy < xv.h; ++iy)
        for (int ix = 0; ix < xv.w; ++ix) {
          if (ix + 1 < xv.w) s += std::abs(xv.at(in, ic, iy, ix + 1) - xv.at(in, ic, iy, ix));
          if (iy + 1 < xv.h) s += std::abs(xv.at(in, ic, iy + 1, ix) - xv.at(in, ic, iy, ix));
        }
  Tensor4 out(1, 1, 1, 1, terms > 0 ? s / terms : 0.0);
  return push(std::move(out), [x, terms](Tape& t) {
    if (terms == 0) return;
    const Tensor4& xv = t.nodes_[x].val;
    const double g = t.gref(t.cursor_).v[0] / terms;
    Tensor4& gx = t.gref(x);
    auto sgn = [](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); };
    for (int in = 0; in < xv.n; ++in)
      for (int ic = 0; ic < xv.c; ++ic)
        for (int iy = 0; iy < xv.h; ++iy)
          for (int ix = 0; ix < xv.w; ++ix) {
            if (ix + 1 < xv.w) {
              const double s = g * sgn(xv.at(in, ic, iy, ix + 1) - xv.at(in, ic, iy, ix));
              gx.at(in, ic, iy, ix + 1) += s;
              gx.at(in, ic, iy, ix) -= s;
            }
            if (iy + 1 < xv.h) {
              const double s = g * sgn(xv.at(in, ic, iy + 1, ix) - xv.at(in, ic, iy, ix));
              gx.at(in, ic, iy + 1, ix) += s;
              gx.at(in, ic, iy, ix) -= s;
            }
          }
  });
}

Tape::Id Tape::weighted_sum(const std::vector<std::pair<Id, double>>& terms) {
  double s = 0.0;
  for (const auto& [id, k] : terms) s += k * scalar(id);
  Tensor4 out(1, 1, 1, 1, s);
  return push(std::move(out), [terms](Tape& t) {
    const double g = t.gref(t.cursor_).v[0];
    for (const auto& [id, k] : terms) t.gref(id).v[0] += k * g;
  });
}

Tape::Id Tape::pinn(Id u, std::vector<const HelmholtzField*> fields, PinnWeights w,
                    PinnLossTerms* components_out) {
  const Tensor4& uv = nodes_[u].val;
  if (uv.c != 1) throw std::invalid_argument("physics loss expects a single channel");
  if (static_cast<int>(fields.size()) != uv.n)
    throw std::invalid_argument("one field geometry required per batch item");
  const size_t plane = static_cast<size_t>(uv.h) * uv.w;
  PinnLossTerms mean;
  std::vector<double> item(plane);
  for (int in = 0; in < uv.n; ++in) {
    std::copy_n(uv.v.data() + uv.plane_offset(in, 0), plane, item.begin());
    const PinnLossTerms t = pinn_losses_at(item, *fields[in], w);
    mean.pde += t.pde;
    mean.bc += t.bc;
    mean.source += t.source;
    mean.total += t.total;
  }
  mean.pde /= uv.n;
  mean.bc /= uv.n;
  mean.source /= uv.n;
  mean.total /= uv.n;
  if (components_out) *components_out = mean;

  Tensor4 out(1, 1, 1, 1, mean.total);
  return push(std::move(out), [u, fields = std::move(fields), w](Tape& t) {
    const Tensor4& uv = t.nodes_[u].val;
    const double g = t.gref(t.cursor_).v[0] / uv.n;
    Tensor4& gu = t.gref(u);
    const size_t plane = static_cast<size_t>(uv.h) * uv.w;
    std::vector<double> item(plane), grad;
    for (int in = 0; in < uv.n; ++in) {
      std::copy_n(uv.v.data() + uv.plane_offset(in, 0), plane, item.begin());
      pinn_losses_grad_at(item, *fields[in], w, grad);
      double* dst = gu.v.data() + gu.plane_offset(in, 0);
      for (size_t i = 0; i < plane; ++i) dst[i] += g * grad[i];
    }
  });
}

Tape::Id Tape::fft_gate(Id f_input, Id f_spatial, Id scale_c, Id bias_c) {
  const Tensor4& fi = nodes_[f_input].val;
  const Tensor4& fs = nodes_[f_spatial].val;
  const Tensor4& sc = nodes_[scale_c].val;
  const Tensor4& bc = nodes_[bias_c].val;
  if (!fi.same_shape(fs)) throw std::invalid_argument("spectral gate shape mismatch");
  if (sc.n != 1 || sc.c != fi.c || sc.h != 1 || sc.w != 1 || !sc.same_shape(bc))
    throw std::invalid_argument("spectral gate parameter shape mismatch");
  if (!is_pow2(fi.h) || !is_pow2(fi.w))
    throw std::invalid_argument("fft size must be a power of two");

  const size_t plane = static_cast<size_t>(fi.h) * fi.w;
  auto saved = std::make_shared<std::vector<ComplexPlane>>();
  auto gates = std::make_shared<Tensor4>(Tensor4::zeros_like(fi));
  auto mags = std::make_shared<Tensor4>(Tensor4::zeros_like(fi));
  saved->reserve(static_cast<size_t>(fi.n) * fi.c);

  Tensor4 out = Tensor4::zeros_like(fi);
  std::vector<double> buf(plane);
  for (int in = 0; in < fi.n; ++in)
    for (int ic = 0; ic < fi.c; ++ic) {
      std::copy_n(fi.v.data() + fi.plane_offset(in, ic), plane, buf.begin());
      ComplexPlane spec = fft2(buf, fi.h, fi.w);
      const double s = sc.at(0, ic, 0, 0), b = bc.at(0, ic, 0, 0);
      double* gplane = gates->v.data() + gates->plane_offset(in, ic);
      double* mplane = mags->v.data() + mags->plane_offset(in, ic);
      const double* fsp = fs.v.data() + fs.plane_offset(in, ic);
      double* op = out.v.data() + out.plane_offset(in, ic);
      for (size_t i = 0; i < plane; ++i) {
        const double m = std::sqrt(spec.re[i] * spec.re[i] + spec.im[i] * spec.im[i]);
        const double gate = 1.0 / (1.0 + std::exp(-(s * m + b)));
        mplane[i] = m;
        gplane[i] = gate;
        op[i] = gate * fsp[i];
      }
      saved->push_back(std::move(spec));
    }

  return push(std::move(out), [f_input, f_spatial, scale_c, bias_c, saved, gates, mags](Tape& t) {
    const Tensor4& fi = t.nodes_[f_input].val;
    const Tensor4& fs = t.nodes_[f_spatial].val;
    const Tensor4& sc = t.nodes_[scale_c].val;
    const Tensor4& go = t.gref(t.cursor_);
    Tensor4& gfi = t.gref(f_input);
    Tensor4& gfs = t.gref(f_spatial);
    Tensor4& gsc = t.gref(scale_c);
    Tensor4& gbc = t.gref(bias_c);
    const size_t plane = static_cast<size_t>(fi.h) * fi.w;
    const double hw = static_cast<double>(fi.h) * fi.w;
    ComplexPlane gspec;
    gspec.h = fi.h;
    gspec.w = fi.w;
    for (int in = 0; in < fi.n; ++in)
      for (int ic = 0; ic < fi.c; ++ic) {
        const size_t idx = static_cast<size_t>(in) * fi.c + ic;
        const ComplexPlane& spec = (*saved)[idx];
        const double* gp = go.v.data() + go.plane_offset(in, ic);
        const double* fsp = fs.v.data() + fs.plane_offset(in, ic);
        const double* gate = gates->v.data() + gates->plane_offset(in, ic);
        const double* mag = mags->v.data() + mags->plane_offset(in, ic);
        const double s = sc.at(0, ic, 0, 0);
        double* gfsp = gfs.v.data() + gfs.plane_offset(in, ic);
        gspec.re.assign(plane, 0.0);
        gspec.im.assign(plane, 0.0);
        double gs = 0.0, gb = 0.0;
        for (size_t i = 0; i < plane; ++i) {
          gfsp[i] += gate[i] * gp[i];
          const double dgate = gp[i] * fsp[i] * gate[i] * (1.0 - gate[i]);
          gs += dgate * mag[i];
          gb += dgate;
          if (mag[i] > 0.0) {
            const double dm = dgate * s / mag[i];
            gspec.re[i] = dm * spec.re[i];
            gspec.im[i] = dm * spec.im[i];
          }
        }
        gsc.at(0, ic, 0, 0) += gs;
        gbc.at(0, ic, 0, 0) += gb;
        // adjoint of the unnormalized forward transform
        const ComplexPlane back = ifft2(gspec);
        double* gfip = gfi.v.data() + gfi.plane_offset(in, ic);
        for (size_t i = 0; i < plane; ++i) gfip[i] += hw * back.re[i];
      }
  });
}

void Tape::backward(Id root, double seed) {
  if (nodes_.empty()) throw std::logic_error("empty tape");
  if (root < 0 || root >= static_cast<Id>(nodes_.size()))
    throw std::logic_error("bad backward root");
  if (nodes_[root].val.size() != 1) throw std::logic_error("backward root must be scalar");

  for (Id i = 0; i <= root; ++i) nodes_[i].grad = Tensor4::zeros_like(nodes_[i].val);
  nodes_[root].grad.v[0] = seed;
  for (Id i = root; i >= 0; --i) {
    if (nodes_[i].back) {
      cursor_ = i;
      nodes_[i].back(*this);
    }
  }
  if (params_) {
    for (Id i = 0; i <= root; ++i) {
      if (nodes_[i].param_name.empty()) continue;
      ParamBlock& blk = params_->get(nodes_[i].param_name);
      const Tensor4& g = nodes_[i].grad;
      for (size_t k = 0; k < blk.grad.size(); ++k) blk.grad[k] += g.v[k];
    }
  }
}

}  // namespace phyrm
