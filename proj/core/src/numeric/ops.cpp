#include "gesturegen/numeric/ops.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>
#include <fmt/format.h>

#include "gesturegen/error.hpp"

namespace gesturegen::numeric {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutableMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(const DenseArray& a) {
  return {a.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols())};
}
MutableMap as_matrix(DenseArray& a) {
  return {a.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols())};
}

void require(bool condition, const char* op, const DenseArray& a, const DenseArray& b) {
  if (!condition) {
    fail(ErrorKind::kDimension, fmt::format("{}: incompatible shapes {} and {}", op,
                                            shape_string(a.shape()), shape_string(b.shape())));
  }
}

}  // namespace

DenseArray matmul(const DenseArray& a, const DenseArray& b) {
  require(a.cols() == b.rows(), "matmul", a, b);
  DenseArray out = DenseArray::matrix(a.rows(), b.cols());
  as_matrix(out).noalias() = as_matrix(a) * as_matrix(b);
  return out;
}

DenseArray matmul_tn(const DenseArray& a, const DenseArray& b) {
  require(a.rows() == b.rows(), "matmul_tn", a, b);
  DenseArray out = DenseArray::matrix(a.cols(), b.cols());
  as_matrix(out).noalias() = as_matrix(a).transpose() * as_matrix(b);
  return out;
}

DenseArray matmul_nt(const DenseArray& a, const DenseArray& b) {
  require(a.cols() == b.cols(), "matmul_nt", a, b);
  DenseArray out = DenseArray::matrix(a.rows(), b.rows());
  as_matrix(out).noalias() = as_matrix(a) * as_matrix(b).transpose();
  return out;
}

MatmulGrad matmul_backward(const DenseArray& a, const DenseArray& b, const DenseArray& dy) {
  return {matmul_nt(dy, b), matmul_tn(a, dy)};
}

DenseArray transpose(const DenseArray& a) {
  DenseArray out = DenseArray::matrix(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  return out;
}

void add_row_bias(DenseArray& x, const DenseArray& bias) {
  require(bias.size() == x.cols(), "add_row_bias", x, bias);
  const std::size_t cols = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double* row = x.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += bias[c];
  }
}

DenseArray column_sums(const DenseArray& x) {
  DenseArray out = DenseArray::vector(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out[c] += x(r, c);
  return out;
}

DenseArray broadcast_rows(const DenseArray& v, std::size_t rows) {
  DenseArray out = DenseArray::matrix(rows, v.size());
  for (std::size_t r = 0; r < rows; ++r) std::copy(v.data(), v.data() + v.size(), out.data() + r * v.size());
  return out;
}

DenseArray hadamard(const DenseArray& a, const DenseArray& b) {
  require(a.shape() == b.shape(), "hadamard", a, b);
  DenseArray out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

DenseArray concat_cols(const std::vector<ArrayRef>& parts) {
  if (parts.empty()) fail(ErrorKind::kDimension, "concat_cols: no inputs");
  const std::size_t rows = parts.front().get().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.get().rows() == rows, "concat_cols", parts.front().get(), p.get());
    total += p.get().cols();
  }
  DenseArray out = DenseArray::matrix(rows, total);
  for (std::size_t r = 0; r < rows; ++r) {
    double* dst = out.data() + r * total;
    for (const auto& p : parts) {
      const auto src = p.get().row(r);
      dst = std::copy(src.begin(), src.end(), dst);
    }
  }
  return out;
}

DenseArray slice_cols(const DenseArray& x, std::size_t begin, std::size_t count) {
  if (begin + count > x.cols() || count == 0) {
    fail(ErrorKind::kDimension, fmt::format("slice_cols [{}, {}) out of {} columns", begin,
                                            begin + count, x.cols()));
  }
  DenseArray out = DenseArray::matrix(x.rows(), count);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* src = x.data() + r * x.cols() + begin;
    std::copy(src, src + count, out.data() + r * count);
  }
  return out;
}

DenseArray slice_rows(const DenseArray& x, std::size_t begin, std::size_t count) {
  if (begin + count > x.rows() || count == 0) {
    fail(ErrorKind::kDimension, fmt::format("slice_rows [{}, {}) out of {} rows", begin,
                                            begin + count, x.rows()));
  }
  const std::size_t cols = x.cols();
  std::vector<double> data(x.data() + begin * cols, x.data() + (begin + count) * cols);
  return DenseArray({count, cols}, std::move(data));
}

DenseArray softmax_rows(const DenseArray& x) {
  DenseArray out = x;
  const std::size_t cols = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double* row = out.data() + r * cols;
    const double peak = *std::max_element(row, row + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - peak);
      total += row[c];
    }
    for (std::size_t c = 0; c < cols; ++c) row[c] /= total;
  }
  return out;
}

DenseArray layer_norm(const DenseArray& x, const DenseArray& gamma, const DenseArray& beta,
                      double eps, LayerNormCache* cache) {
  const std::size_t d = x.cols();
  if (d == 0) fail(ErrorKind::kDimension, "layer_norm: empty feature dimension");
  if (eps <= 0.0) fail(ErrorKind::kParameter, "layer_norm: eps must be positive");
  require(gamma.size() == d && beta.size() == d, "layer_norm", x, gamma);

  DenseArray normalized = DenseArray::matrix(x.rows(), d);
  std::vector<double> inv_std(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) normalized(r, c) = (row[c] - mean) * inv_std[r];
  }

  DenseArray out = normalized;
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < d; ++c) out(r, c) = out(r, c) * gamma[c] + beta[c];

  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

LayerNormGrad layer_norm_backward(const LayerNormCache& cache, const DenseArray& gamma,
                                  const DenseArray& dy) {
  const DenseArray& xhat = cache.normalized;
  const std::size_t rows = xhat.rows();
  const std::size_t d = xhat.cols();
  LayerNormGrad g{DenseArray::matrix(rows, d), DenseArray::vector(d), DenseArray::vector(d)};
  std::vector<double> dxhat(d);
  for (std::size_t r = 0; r < rows; ++r) {
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      g.dgamma[c] += dy(r, c) * xhat(r, c);
      g.dbeta[c] += dy(r, c);
      dxhat[c] = dy(r, c) * gamma[c];
      mean_dxhat += dxhat[c];
      mean_dxhat_xhat += dxhat[c] * xhat(r, c);
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    for (std::size_t c = 0; c < d; ++c) {
      g.dx(r, c) = cache.inv_std[r] * (dxhat[c] - mean_dxhat - xhat(r, c) * mean_dxhat_xhat);
    }
  }
  return g;
}

DenseArray scaled_dot_attention(const DenseArray& q, const DenseArray& k, const DenseArray& v,
                                AttentionCache* cache) {
  if (k.rows() == 0 || k.empty()) fail(ErrorKind::kDimension, "attention: no keys");
  require(q.cols() == k.cols(), "attention (Q vs K)", q, k);
  require(k.rows() == v.rows(), "attention (K vs V)", k, v);
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  DenseArray scores = matmul_nt(q, k);
  scores *= scale;
  DenseArray probs = softmax_rows(scores);
  DenseArray out = matmul(probs, v);
  if (cache != nullptr) {
    cache->q = q;
    cache->k = k;
    cache->v = v;
    cache->probs = std::move(probs);
    cache->scale = scale;
  }
  return out;
}

AttentionGrad attention_backward(const AttentionCache& cache, const DenseArray& dout) {
  const DenseArray& p = cache.probs;
  DenseArray dv = matmul_tn(p, dout);
  DenseArray dp = matmul_nt(dout, cache.v);
  DenseArray ds = DenseArray::matrix(p.rows(), p.cols());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double dot = 0.0;
    for (std::size_t c = 0; c < p.cols(); ++c) dot += dp(r, c) * p(r, c);
    for (std::size_t c = 0; c < p.cols(); ++c) ds(r, c) = p(r, c) * (dp(r, c) - dot) * cache.scale;
  }
  return {matmul(ds, cache.k), matmul_tn(ds, cache.q), std::move(dv)};
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

DenseArray silu(const DenseArray& x) {
  DenseArray out = x;
  for (auto& v : out.values()) v = v * sigmoid(v);
  return out;
}

DenseArray silu_backward(const DenseArray& x, const DenseArray& dy) {
  DenseArray out = dy;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double s = sigmoid(x[i]);
    out[i] *= s * (1.0 + x[i] * (1.0 - s));
  }
  return out;
}

DenseArray causal_depthwise_conv(const DenseArray& x, const DenseArray& kernel,
                                 const DenseArray& bias) {
  const std::size_t length = x.rows();
  const std::size_t channels = x.cols();
  const std::size_t width = kernel.rows();
  require(kernel.cols() == channels && bias.size() == channels, "causal_depthwise_conv", x, kernel);
  DenseArray out = DenseArray::matrix(length, channels);
  for (std::size_t k = 0; k < length; ++k) {
    double* dst = out.data() + k * channels;
    for (std::size_t c = 0; c < channels; ++c) dst[c] = bias[c];
    for (std::size_t j = 0; j < width; ++j) {
      const std::size_t lag = width - 1 - j;
      if (lag > k) continue;
      const double* src = x.data() + (k - lag) * channels;
      const double* w = kernel.data() + j * channels;
      for (std::size_t c = 0; c < channels; ++c) dst[c] += w[c] * src[c];
    }
  }
  return out;
}

DepthwiseConvGrad causal_depthwise_conv_backward(const DenseArray& x, const DenseArray& kernel,
                                                 const DenseArray& dy) {
  const std::size_t length = x.rows();
  const std::size_t channels = x.cols();
  const std::size_t width = kernel.rows();
  DepthwiseConvGrad g{DenseArray::matrix(length, channels), DenseArray::matrix(width, channels),
                      column_sums(dy)};
  for (std::size_t k = 0; k < length; ++k) {
    const double* grad = dy.data() + k * channels;
    for (std::size_t j = 0; j < width; ++j) {
      const std::size_t lag = width - 1 - j;
      if (lag > k) continue;
      const double* src = x.data() + (k - lag) * channels;
      const double* w = kernel.data() + j * channels;
      double* dk = g.dkernel.data() + j * channels;
      double* dx = g.dx.data() + (k - lag) * channels;
      for (std::size_t c = 0; c < channels; ++c) {
        dk[c] += grad[c] * src[c];
        dx[c] += grad[c] * w[c];
      }
    }
  }
  return g;
}

LossValue huber_loss(const DenseArray& prediction, const DenseArray& target, double delta) {
  require(prediction.shape() == target.shape(), "huber_loss", prediction, target);
  const double n = static_cast<double>(prediction.size());
  LossValue loss{0.0, DenseArray(prediction.shape())};
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double diff = prediction[i] - target[i];
    const double mag = std::abs(diff);
    if (mag <= delta) {
      loss.value += 0.5 * diff * diff;
      loss.grad[i] = diff / n;
    } else {
      loss.value += delta * (mag - 0.5 * delta);
      loss.grad[i] = (diff > 0.0 ? delta : -delta) / n;
    }
  }
  loss.value /= n;
  return loss;
}

LossValue l1_loss(const DenseArray& prediction, const DenseArray& target) {
  require(prediction.shape() == target.shape(), "l1_loss", prediction, target);
  const double n = static_cast<double>(prediction.size());
  LossValue loss{0.0, DenseArray(prediction.shape())};
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double diff = prediction[i] - target[i];
    loss.value += std::abs(diff);
    loss.grad[i] = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) / n;
  }
  loss.value /= n;
  return loss;
}

}  // namespace gesturegen::numeric
