#pragma once

#include <vector>

#include "dtnet/rng.hpp"
#include "dtnet/tensor.hpp"

namespace dtnet {

// Parameters of one 2-d convolution. Weight layout [C_out, C_in, kH, kW];
// zero padding is symmetric.
struct ConvParams {
  Tensor weight;
  Tensor bias;  // optional: undefined handle means no bias
  int stride = 1;
  int padding = 0;

  int out_channels() const { return weight.dim(0); }
  int in_channels() const { return weight.dim(1); }
};

// Creates a trainable conv with He-uniform init (for ReLU fan-out).
ConvParams make_conv_he(int c_out, int c_in, int k, int stride, int padding,
                        bool with_bias, Rng& rng);
// Creates a trainable conv with Glorot-uniform init (for sigmoid/tanh fan-out).
ConvParams make_conv_glorot(int c_out, int c_in, int k, int stride, int padding,
                            bool with_bias, Rng& rng);

enum class BnMode { Train, Eval };

// Per-channel batch normalization state. Train mode normalizes with batch
// statistics over (N, H, W) and updates the running stats by EMA; Eval mode
// applies a fixed affine map from the running stats.
struct BatchNormState {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;
  BnMode mode = BnMode::Train;
};

BatchNormState make_batchnorm(int channels);

// --- differentiable operations -------------------------------------------
// Every op returns a fresh tensor; when a Tape is active and any input
// requires grad, a backward step is recorded on it.

Tensor conv2d(const Tensor& input, const ConvParams& params);
Tensor batchnorm(const Tensor& input, BatchNormState& state);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

// Mean over the spatial dimensions: [N, C, H, W] -> [N, C].
Tensor global_avg_pool(const Tensor& input);

// Affine map [N, C] -> [N, K] with weight [K, C] and bias [K].
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

// Mean over the batch of -log softmax(logits)[label]; max-subtraction for
// numeric stability. logits [N, K], labels in [0, K).
Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels);

// [N, C1, H, W] ++ [N, C2, H, W] -> [N, C1+C2, H, W] on the channel axis.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Multiplies each sample's slice by a per-sample scalar: x [N, ...] by
// w (numel N) -> same shape as x.
Tensor scale_rows(const Tensor& x, const Tensor& w);

// Sum of all elements -> scalar.
Tensor sum(const Tensor& x);

// --- non-differentiable helpers -------------------------------------------

// Row-wise softmax probabilities of [N, K] logits (evaluation only).
std::vector<double> softmax_rows(const Tensor& logits);

// Row-wise argmax of [N, K] logits; ties resolve to the smallest index.
std::vector<int> argmax_rows(const Tensor& logits);

void fill_he_uniform(Tensor& w, int fan_in, Rng& rng);
void fill_glorot_uniform(Tensor& w, int fan_in, int fan_out, Rng& rng);

}  // namespace dtnet
