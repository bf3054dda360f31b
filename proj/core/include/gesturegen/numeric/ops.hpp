#pragma once

#include <functional>
#include <initializer_list>
#include <vector>

#include "gesturegen/numeric/dense_array.hpp"

// Dense kernels with hand-written backward passes. Every forward that needs
// intermediate values for its gradient takes an optional cache pointer; pass
// nullptr for inference.
namespace gesturegen::numeric {

inline constexpr double kLayerNormEps = 1e-5;

DenseArray matmul(const DenseArray& a, const DenseArray& b);
// a^T b and a b^T, used by the backward passes.
DenseArray matmul_tn(const DenseArray& a, const DenseArray& b);
DenseArray matmul_nt(const DenseArray& a, const DenseArray& b);

struct MatmulGrad {
  DenseArray da;
  DenseArray db;
};
MatmulGrad matmul_backward(const DenseArray& a, const DenseArray& b, const DenseArray& dy);

DenseArray transpose(const DenseArray& a);

void add_row_bias(DenseArray& x, const DenseArray& bias);
// Sums over rows; the gradient of a row-broadcast bias.
DenseArray column_sums(const DenseArray& x);
DenseArray broadcast_rows(const DenseArray& v, std::size_t rows);
DenseArray hadamard(const DenseArray& a, const DenseArray& b);

using ArrayRef = std::reference_wrapper<const DenseArray>;
DenseArray concat_cols(const std::vector<ArrayRef>& parts);
DenseArray slice_cols(const DenseArray& x, std::size_t begin, std::size_t count);
DenseArray slice_rows(const DenseArray& x, std::size_t begin, std::size_t count);

DenseArray softmax_rows(const DenseArray& x);

struct LayerNormCache {
  DenseArray normalized;
  std::vector<double> inv_std;
};

DenseArray layer_norm(const DenseArray& x, const DenseArray& gamma, const DenseArray& beta,
                      double eps = kLayerNormEps, LayerNormCache* cache = nullptr);

struct LayerNormGrad {
  DenseArray dx;
  DenseArray dgamma;
  DenseArray dbeta;
};
LayerNormGrad layer_norm_backward(const LayerNormCache& cache, const DenseArray& gamma,
                                  const DenseArray& dy);

struct AttentionCache {
  DenseArray q;
  DenseArray k;
  DenseArray v;
  DenseArray probs;
  double scale = 1.0;
};

/// softmax(Q K^T / sqrt(d)) V with d the shared feature width of Q and K.
DenseArray scaled_dot_attention(const DenseArray& q, const DenseArray& k, const DenseArray& v,
                                AttentionCache* cache = nullptr);

struct AttentionGrad {
  DenseArray dq;
  DenseArray dk;
  DenseArray dv;
};
AttentionGrad attention_backward(const AttentionCache& cache, const DenseArray& dout);

double sigmoid(double x);
double softplus(double x);

DenseArray silu(const DenseArray& x);
DenseArray silu_backward(const DenseArray& x, const DenseArray& dy);

struct DepthwiseConvGrad {
  DenseArray dx;
  DenseArray dkernel;
  DenseArray dbias;
};

/// Causal depthwise convolution over rows: out[k, c] = bias[c] +
/// sum_j kernel[j, c] * x[k - (w - 1) + j, c], zero-padded on the left.
DenseArray causal_depthwise_conv(const DenseArray& x, const DenseArray& kernel,
                                 const DenseArray& bias);
DepthwiseConvGrad causal_depthwise_conv_backward(const DenseArray& x, const DenseArray& kernel,
                                                 const DenseArray& dy);

struct LossValue {
  double value = 0.0;
  DenseArray grad;  // d value / d prediction
};

/// Mean Huber loss over all elements of (prediction - target).
LossValue huber_loss(const DenseArray& prediction, const DenseArray& target, double delta);
/// Mean absolute difference over all elements.
LossValue l1_loss(const DenseArray& prediction, const DenseArray& target);

}  // namespace gesturegen::numeric
