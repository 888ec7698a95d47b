// SPDX-License-Identifier: Apache-2.0
//
// Forward and backward kernels for the two fixed architectures. Backward
// functions accumulate (+=) into parameter gradients and return or accumulate
// the input gradient, so the callers can sum over time steps and batches.
#pragma once

#include <cstddef>
#include <vector>

#include "anticipate/random.hpp"
#include "anticipate/tensor.hpp"

namespace anticipate {

// ---- dense -----------------------------------------------------------------

/// y = W x + b with x:[in], W:[out x in], b:[out].
Tensor dense_forward(const Tensor& x, const Tensor& W, const Tensor& b);
/// Accumulates dW, db; returns dL/dx.
Tensor dense_backward(const Tensor& x, const Tensor& W, const Tensor& dy, Tensor& dW, Tensor& db);

/// Uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

// ---- GRU -------------------------------------------------------------------

/// One GRU layer. Update gate z, reset gate r, candidate state:
///   z  = sigmoid(Wz x + Uz h + bz)
///   r  = sigmoid(Wr x + Ur h + br)
///   h~ = tanh(Wh x + Uh (r . h) + bh)
///   h' = (1 - z) . h + z . h~
struct GruLayerParams {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Parameter w_z, u_z, b_z;
  Parameter w_r, u_r, b_r;
  Parameter w_h, u_h, b_h;

  GruLayerParams() = default;
  GruLayerParams(std::size_t input, std::size_t hidden, const std::string& prefix);

  ParameterList parameters();
  void init(Rng& rng);
};

struct GruStepCache {
  Tensor x, h_prev, z, r, candidate, reset_hidden;
};

Tensor gru_cell_step(const Tensor& x, const Tensor& h_prev, const GruLayerParams& p, GruStepCache* cache = nullptr);

/// Backward through one step given dL/dh'. Accumulates parameter gradients into p,
/// returns dL/dx and writes dL/dh_prev.
Tensor gru_cell_backward(const GruStepCache& cache, const Tensor& dh, GruLayerParams& p, Tensor& dh_prev);

// ---- 1-D convolution over rows ---------------------------------------------

inline constexpr std::size_t kConvWidth = 5;

/// K filters of width 5 along the row axis, fully connected across input channels.
/// kernels:[K x 5 x Cin], bias:[K].
struct Conv1dParams {
  std::size_t in_channels = 0;
  std::size_t filters = 0;
  Parameter kernels, bias;

  Conv1dParams() = default;
  Conv1dParams(std::size_t in, std::size_t k, const std::string& prefix);

  ParameterList parameters();
  void init(Rng& rng);
};

/// x:[S x Cin] -> [S x K], zero padding of 2 rows at each end.
Tensor conv1d_forward(const Tensor& x, const Conv1dParams& p);
/// Accumulates kernel and bias gradients; returns dL/dx.
Tensor conv1d_backward(const Tensor& x, const Tensor& dy, Conv1dParams& p);

// ---- pooling and pointwise ops ---------------------------------------------

/// Non-overlapping size-2 max pooling along rows; an odd last row passes through.
/// argmax receives, per output element, the input row that won (first on ties).
Tensor maxpool_rows(const Tensor& x, std::vector<std::size_t>* argmax = nullptr);
Tensor maxpool_rows_backward(const Tensor& dy, const std::vector<std::size_t>& argmax, std::size_t input_rows);

Tensor relu(const Tensor& x);
/// dL/dx given the forward output y = relu(x).
Tensor relu_backward(const Tensor& y, const Tensor& dy);

double sigmoid(double x);

/// Softmax of a vector, with max subtraction.
Tensor softmax(const Tensor& x);
/// Row-wise softmax of a matrix.
Tensor softmax_rows(const Tensor& x);

/// Each row divided by its Euclidean norm; all-zero rows stay zero.
Tensor l2_normalize_rows(const Tensor& x);
/// Backward of l2_normalize_rows given the input x and output y.
Tensor l2_normalize_rows_backward(const Tensor& x, const Tensor& y, const Tensor& dy);

/// Normalized Gaussian weights for offsets -r..r with r = ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Convolves each column with gaussian_kernel(sigma), replicating edge rows.
Tensor gaussian_filter_columns(const Tensor& Y, double sigma);

}  // namespace anticipate
