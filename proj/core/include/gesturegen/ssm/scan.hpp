#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "gesturegen/numeric/dense_array.hpp"

namespace gesturegen::ssm {

using numeric::DenseArray;

/// Single-channel continuous SSM x' = A x + B u, y = C x + D u with diagonal A.
struct ContinuousSsm {
  std::vector<double> a;  // diagonal, strictly negative
  std::vector<double> b;
  std::vector<double> c;
  double d = 0.0;

  std::size_t state_dim() const { return a.size(); }
  void validate() const;
};

struct DiscreteSsm {
  std::vector<double> abar;
  std::vector<double> bbar;
};

/// Abar = exp(delta * A) (zero-order hold), Bbar = delta * B.
DiscreteSsm discretize_zoh(const std::vector<double>& a, const std::vector<double>& b, double delta);

/// Per-step discretized parameters; abar, bbar and c are [length x channels x
/// state] in row-major order, d is per channel.
struct SelectiveSsmParams {
  std::size_t length = 0;
  std::size_t channels = 0;
  std::size_t state = 0;
  std::vector<double> abar;
  std::vector<double> bbar;
  std::vector<double> c;
  std::vector<double> d;

  SelectiveSsmParams() = default;
  SelectiveSsmParams(std::size_t length, std::size_t channels, std::size_t state);

  std::size_t offset(std::size_t k, std::size_t e) const { return (k * channels + e) * state; }
  void validate() const;
};

/// h_k = Abar_k h_{k-1} + Bbar_k u_k, y_k = C_k . h_k + D u_k, h_{-1} = 0.
/// When `states` is non-null it receives every h_k ([L x E x N]).
DenseArray selective_scan_seq(const SelectiveSsmParams& params, const DenseArray& u,
                              std::vector<double>* states = nullptr);

/// Same contract, computed with the associative combine
/// (a1, b1) o (a2, b2) = (a1 a2, a2 b1 + b2) in an up-sweep / down-sweep tree.
DenseArray selective_scan_parallel(const SelectiveSsmParams& params, const DenseArray& u);

struct ScanGrad {
  std::vector<double> dabar;
  std::vector<double> dbbar;
  std::vector<double> dc;
  std::vector<double> dd;
  DenseArray du;
};
ScanGrad selective_scan_backward(const SelectiveSsmParams& params, const DenseArray& u,
                                 const std::vector<double>& states, const DenseArray& dy);

/// k_j = C . Abar^j Bbar for j < length (the D skip term is not included).
std::vector<double> ssm_impulse_kernel(const ContinuousSsm& ssm, double delta, std::size_t length);

/// y_k = sum_{j<=k} kernel_j u_{k-j} + d u_k.
std::vector<double> causal_convolve(const std::vector<double>& kernel, const std::vector<double>& u,
                                    double d);

}  // namespace gesturegen::ssm
