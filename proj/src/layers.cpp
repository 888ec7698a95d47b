// SPDX-License-Identifier: Apache-2.0
#include "anticipate/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace anticipate {
namespace {

// out[o] += sum_i W[o,i] x[i]
void matvec_add(const Tensor& W, const double* x, double* out) {
  const std::size_t rows = W.rows(), cols = W.cols();
  const double* w = W.ptr();
  for (std::size_t o = 0; o < rows; ++o) {
    const double* wr = w + o * cols;
    double acc = 0.0;
    for (std::size_t i = 0; i < cols; ++i) acc += wr[i] * x[i];
    out[o] += acc;
  }
}

// out[i] += sum_o W[o,i] dy[o]
void matvec_t_add(const Tensor& W, const double* dy, double* out) {
  const std::size_t rows = W.rows(), cols = W.cols();
  const double* w = W.ptr();
  for (std::size_t o = 0; o < rows; ++o) {
    const double g = dy[o];
    if (g == 0.0) continue;
    const double* wr = w + o * cols;
    for (std::size_t i = 0; i < cols; ++i) out[i] += wr[i] * g;
  }
}

// G[o,i] += dy[o] x[i]
void outer_add(Tensor& G, const double* dy, const double* x) {
  const std::size_t rows = G.rows(), cols = G.cols();
  double* g = G.ptr();
  for (std::size_t o = 0; o < rows; ++o) {
    const double d = dy[o];
    if (d == 0.0) continue;
    double* gr = g + o * cols;
    for (std::size_t i = 0; i < cols; ++i) gr[i] += d * x[i];
  }
}

void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

Tensor dense_forward(const Tensor& x, const Tensor& W, const Tensor& b) {
  if (W.rank() != 2 || x.rank() != 1 || b.rank() != 1 || W.cols() != x.size() || W.rows() != b.size())
    throw std::invalid_argument("dense_forward: incompatible shapes x" + x.shape_string() + " W" +
                                W.shape_string() + " b" + b.shape_string());
  Tensor y = b;
  matvec_add(W, x.ptr(), y.ptr());
  return y;
}

Tensor dense_backward(const Tensor& x, const Tensor& W, const Tensor& dy, Tensor& dW, Tensor& db) {
  outer_add(dW, dy.ptr(), x.ptr());
  add_into(db, dy);
  Tensor dx({W.cols()});
  matvec_t_add(W, dy.ptr(), dx.ptr());
  return dx;
}

void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data()) v = rng.uniform_real(-a, a);
}

// ---- GRU -------------------------------------------------------------------

GruLayerParams::GruLayerParams(std::size_t input, std::size_t hidden, const std::string& prefix)
    : input_size(input),
      hidden_size(hidden),
      w_z(prefix + ".w_z", {hidden, input}),
      u_z(prefix + ".u_z", {hidden, hidden}),
      b_z(prefix + ".b_z", {hidden}),
      w_r(prefix + ".w_r", {hidden, input}),
      u_r(prefix + ".u_r", {hidden, hidden}),
      b_r(prefix + ".b_r", {hidden}),
      w_h(prefix + ".w_h", {hidden, input}),
      u_h(prefix + ".u_h", {hidden, hidden}),
      b_h(prefix + ".b_h", {hidden}) {}

ParameterList GruLayerParams::parameters() { return {&w_z, &u_z, &b_z, &w_r, &u_r, &b_r, &w_h, &u_h, &b_h}; }

void GruLayerParams::init(Rng& rng) {
  for (auto* w : {&w_z, &w_r, &w_h}) glorot_uniform(w->value, input_size, hidden_size, rng);
  for (auto* u : {&u_z, &u_r, &u_h}) glorot_uniform(u->value, hidden_size, hidden_size, rng);
  for (auto* b : {&b_z, &b_r, &b_h}) b->value.fill(0.0);
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor gru_cell_step(const Tensor& x, const Tensor& h_prev, const GruLayerParams& p, GruStepCache* cache) {
  const std::size_t H = p.hidden_size;
  require_shape(x, {p.input_size}, "gru_cell_step input");
  require_shape(h_prev, {H}, "gru_cell_step hidden state");

  Tensor z = p.b_z.value, r = p.b_r.value, cand = p.b_h.value;
  matvec_add(p.w_z.value, x.ptr(), z.ptr());
  matvec_add(p.u_z.value, h_prev.ptr(), z.ptr());
  matvec_add(p.w_r.value, x.ptr(), r.ptr());
  matvec_add(p.u_r.value, h_prev.ptr(), r.ptr());
  for (std::size_t j = 0; j < H; ++j) {
    z[j] = sigmoid(z[j]);
    r[j] = sigmoid(r[j]);
  }
  Tensor rh({H});
  for (std::size_t j = 0; j < H; ++j) rh[j] = r[j] * h_prev[j];
  matvec_add(p.w_h.value, x.ptr(), cand.ptr());
  matvec_add(p.u_h.value, rh.ptr(), cand.ptr());
  Tensor h({H});
  for (std::size_t j = 0; j < H; ++j) {
    cand[j] = std::tanh(cand[j]);
    h[j] = (1.0 - z[j]) * h_prev[j] + z[j] * cand[j];
  }
  if (cache) *cache = {x, h_prev, std::move(z), std::move(r), std::move(cand), std::move(rh)};
  return h;
}

Tensor gru_cell_backward(const GruStepCache& c, const Tensor& dh, GruLayerParams& p, Tensor& dh_prev) {
  const std::size_t H = p.hidden_size;
  dh_prev = Tensor({H});
  Tensor da_z({H}), da_r({H}), da_h({H});
  for (std::size_t j = 0; j < H; ++j) {
    const double g = dh[j];
    dh_prev[j] = g * (1.0 - c.z[j]);
    const double dz = g * (c.candidate[j] - c.h_prev[j]);
    da_z[j] = dz * c.z[j] * (1.0 - c.z[j]);
    da_h[j] = g * c.z[j] * (1.0 - c.candidate[j] * c.candidate[j]);
  }
  // candidate branch
  outer_add(p.w_h.grad, da_h.ptr(), c.x.ptr());
  outer_add(p.u_h.grad, da_h.ptr(), c.reset_hidden.ptr());
  add_into(p.b_h.grad, da_h);
  Tensor d_rh({H});
  matvec_t_add(p.u_h.value, da_h.ptr(), d_rh.ptr());
  for (std::size_t j = 0; j < H; ++j) {
    dh_prev[j] += d_rh[j] * c.r[j];
    da_r[j] = d_rh[j] * c.h_prev[j] * c.r[j] * (1.0 - c.r[j]);
  }
  // gates
  outer_add(p.w_z.grad, da_z.ptr(), c.x.ptr());
  outer_add(p.u_z.grad, da_z.ptr(), c.h_prev.ptr());
  add_into(p.b_z.grad, da_z);
  outer_add(p.w_r.grad, da_r.ptr(), c.x.ptr());
  outer_add(p.u_r.grad, da_r.ptr(), c.h_prev.ptr());
  add_into(p.b_r.grad, da_r);
  matvec_t_add(p.u_z.value, da_z.ptr(), dh_prev.ptr());
  matvec_t_add(p.u_r.value, da_r.ptr(), dh_prev.ptr());

  Tensor dx({p.input_size});
  matvec_t_add(p.w_h.value, da_h.ptr(), dx.ptr());
  matvec_t_add(p.w_z.value, da_z.ptr(), dx.ptr());
  matvec_t_add(p.w_r.value, da_r.ptr(), dx.ptr());
  return dx;
}

// ---- conv ------------------------------------------------------------------

Conv1dParams::Conv1dParams(std::size_t in, std::size_t k, const std::string& prefix)
    : in_channels(in),
      filters(k),
      kernels(prefix + ".kernels", {k, kConvWidth, in}),
      bias(prefix + ".bias", {k}) {}

ParameterList Conv1dParams::parameters() { return {&kernels, &bias}; }

void Conv1dParams::init(Rng& rng) {
  glorot_uniform(kernels.value, kConvWidth * in_channels, kConvWidth * filters, rng);
  bias.value.fill(0.0);
}

Tensor conv1d_forward(const Tensor& x, const Conv1dParams& p) {
  if (x.rank() != 2 || x.cols() != p.in_channels || x.rows() == 0)
    throw std::invalid_argument("conv1d_forward: input " + x.shape_string() + " does not have " +
                                std::to_string(p.in_channels) + " channels");
  const std::size_t S = x.rows(), Cin = p.in_channels, K = p.filters;
  constexpr std::ptrdiff_t half = kConvWidth / 2;
  Tensor y({S, K});
  const double* w = p.kernels.value.ptr();
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t k = 0; k < K; ++k) {
      double acc = p.bias.value[k];
      for (std::size_t j = 0; j < kConvWidth; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(s) + static_cast<std::ptrdiff_t>(j) - half;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(S)) continue;
        const double* xr = x.ptr() + static_cast<std::size_t>(src) * Cin;
        const double* wr = w + (k * kConvWidth + j) * Cin;
        for (std::size_t c = 0; c < Cin; ++c) acc += wr[c] * xr[c];
      }
      y.at(s, k) = acc;
    }
  }
  return y;
}

Tensor conv1d_backward(const Tensor& x, const Tensor& dy, Conv1dParams& p) {
  const std::size_t S = x.rows(), Cin = p.in_channels, K = p.filters;
  constexpr std::ptrdiff_t half = kConvWidth / 2;
  Tensor dx({S, Cin});
  const double* w = p.kernels.value.ptr();
  double* dw = p.kernels.grad.ptr();
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t k = 0; k < K; ++k) {
      const double g = dy.at(s, k);
      if (g == 0.0) continue;
      p.bias.grad[k] += g;
      for (std::size_t j = 0; j < kConvWidth; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(s) + static_cast<std::ptrdiff_t>(j) - half;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(S)) continue;
        const double* xr = x.ptr() + static_cast<std::size_t>(src) * Cin;
        double* dxr = dx.ptr() + static_cast<std::size_t>(src) * Cin;
        const std::size_t off = (k * kConvWidth + j) * Cin;
        for (std::size_t c = 0; c < Cin; ++c) {
          dw[off + c] += g * xr[c];
          dxr[c] += g * w[off + c];
        }
      }
    }
  }
  return dx;
}

// ---- pooling / pointwise ---------------------------------------------------

Tensor maxpool_rows(const Tensor& x, std::vector<std::size_t>* argmax) {
  if (x.rank() != 2 || x.rows() == 0) throw std::invalid_argument("maxpool_rows: expected a non-empty matrix");
  const std::size_t S = x.rows(), K = x.cols(), out_rows = (S + 1) / 2;
  Tensor y({out_rows, K});
  if (argmax) argmax->assign(out_rows * K, 0);
  for (std::size_t r = 0; r < out_rows; ++r) {
    const std::size_t a = 2 * r, b = 2 * r + 1;
    for (std::size_t k = 0; k < K; ++k) {
      std::size_t win = a;
      if (b < S && x.at(b, k) > x.at(a, k)) win = b;
      y.at(r, k) = x.at(win, k);
      if (argmax) (*argmax)[r * K + k] = win;
    }
  }
  return y;
}

Tensor maxpool_rows_backward(const Tensor& dy, const std::vector<std::size_t>& argmax, std::size_t input_rows) {
  const std::size_t K = dy.cols();
  Tensor dx({input_rows, K});
  for (std::size_t r = 0; r < dy.rows(); ++r)
    for (std::size_t k = 0; k < K; ++k) dx.at(argmax[r * K + k], k) += dy.at(r, k);
  return dx;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& y, const Tensor& dy) {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (!(y[i] > 0.0)) dx[i] = 0.0;
  return dx;
}

namespace {

void softmax_inplace(std::span<double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (auto& e : v) {
    e = std::exp(e - m);
    sum += e;
  }
  for (auto& e : v) e /= sum;
}

}  // namespace

Tensor softmax(const Tensor& x) {
  if (x.size() == 0) throw std::invalid_argument("softmax of an empty tensor");
  Tensor y = x;
  softmax_inplace(y.data());
  return y;
}

Tensor softmax_rows(const Tensor& x) {
  if (x.rank() != 2) throw std::invalid_argument("softmax_rows: expected a matrix");
  Tensor y = x;
  for (std::size_t r = 0; r < y.rows(); ++r) softmax_inplace(y.row(r));
  return y;
}

Tensor l2_normalize_rows(const Tensor& x) {
  if (x.rank() != 2) throw std::invalid_argument("l2_normalize_rows: expected a matrix");
  Tensor y = x;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    double sq = 0.0;
    for (double v : row) sq += v * v;
    if (sq == 0.0) continue;
    const double n = std::sqrt(sq);
    for (auto& v : row) v /= n;
  }
  return y;
}

Tensor l2_normalize_rows_backward(const Tensor& x, const Tensor& y, const Tensor& dy) {
  Tensor dx({x.rows(), x.cols()});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    double sq = 0.0;
    for (double v : xr) sq += v * v;
    if (sq == 0.0) continue;
    const double n = std::sqrt(sq);
    auto yr = y.row(r);
    auto gr = dy.row(r);
    double dot = 0.0;
    for (std::size_t c = 0; c < yr.size(); ++c) dot += yr[c] * gr[c];
    auto dr = dx.row(r);
    for (std::size_t c = 0; c < yr.size(); ++c) dr[c] = (gr[c] - yr[c] * dot) / n;
  }
  return dx;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian sigma must be positive");
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double v = std::exp(-static_cast<double>(k * k) / (2.0 * sigma * sigma));
    w[static_cast<std::size_t>(k + radius)] = v;
    sum += v;
  }
  for (auto& v : w) v /= sum;
  return w;
}

Tensor gaussian_filter_columns(const Tensor& Y, double sigma) {
  if (Y.rank() != 2) throw std::invalid_argument("gaussian_filter_columns: expected a matrix");
  const auto w = gaussian_kernel(sigma);
  const auto radius = static_cast<std::ptrdiff_t>(w.size() / 2);
  const auto S = static_cast<std::ptrdiff_t>(Y.rows());
  Tensor out({Y.rows(), Y.cols()});
  for (std::ptrdiff_t s = 0; s < S; ++s) {
    for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
      const std::ptrdiff_t src = std::clamp<std::ptrdiff_t>(s + k, 0, S - 1);
      const double wk = w[static_cast<std::size_t>(k + radius)];
      auto in_row = Y.row(static_cast<std::size_t>(src));
      auto out_row = out.row(static_cast<std::size_t>(s));
      for (std::size_t c = 0; c < in_row.size(); ++c) out_row[c] += wk * in_row[c];
    }
  }
  return out;
}

}  // namespace anticipate
