#pragma once

#include <string>

#include "gesturegen/numeric/layers.hpp"
#include "gesturegen/numeric/ops.hpp"
#include "gesturegen/ssm/scan.hpp"

namespace gesturegen::ssm {

using numeric::DualValue;
using numeric::Linear;

struct MambaConfig {
  std::size_t d_model = 64;
  std::size_t expand = 2;
  std::size_t state = 16;
  std::size_t conv_width = 4;
  std::size_t dt_rank = 0;  // 0 selects ceil(d_model / 16)

  std::size_t inner() const { return expand * d_model; }
  std::size_t rank() const { return dt_rank != 0 ? dt_rank : (d_model + 15) / 16; }
};

/// Selective-SSM block: in_proj -> (main, gate); main -> causal depthwise
/// conv -> SiLU -> per-step (delta, B, C) -> selective scan; output gated by
/// SiLU(gate) and projected back to d_model.
struct MambaBlockWeights {
  MambaConfig config;
  Linear in_proj;      // d -> 2E
  DualValue conv_kernel;  // conv_width x E
  DualValue conv_bias;    // E
  Linear x_proj;       // E -> rank + 2N
  Linear dt_proj;      // rank -> E, with bias
  DualValue a_log;     // E x N, A = -exp(a_log)
  DualValue d_skip;    // E
  Linear out_proj;     // E -> d

  /// Gaussian(init_std) projections, A_n = -(n + 1), D = 1 and a dt bias
  /// giving softplus(bias) log-uniform in [1e-3, 1e-1].
  static MambaBlockWeights initialized(const MambaConfig& config, numeric::Rng& rng, double init_std);
  static MambaBlockWeights zeros(const MambaConfig& config);

  void register_params(numeric::ParameterSet& set, const std::string& prefix);
};

struct MambaCache {
  DenseArray x;
  DenseArray main;
  DenseArray gate;
  DenseArray conv_out;
  DenseArray u;
  DenseArray dbc;
  DenseArray dt_low;
  DenseArray dt_pre;
  DenseArray delta;
  SelectiveSsmParams params;
  std::vector<double> states;
  DenseArray scan_out;
  DenseArray gated;
};

DenseArray mamba_block_forward(const MambaBlockWeights& weights, const DenseArray& x,
                               MambaCache* cache = nullptr);

/// Accumulates weight gradients and returns dL/dx.
DenseArray mamba_block_backward(MambaBlockWeights& weights, const MambaCache& cache,
                                const DenseArray& dout);

}  // namespace gesturegen::ssm
