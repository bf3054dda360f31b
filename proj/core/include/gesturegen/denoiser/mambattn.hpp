#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gesturegen/numeric/layers.hpp"
#include "gesturegen/numeric/ops.hpp"
#include "gesturegen/ssm/mamba_block.hpp"

namespace gesturegen::denoiser {

using numeric::DenseArray;
using numeric::DualValue;
using numeric::Linear;

struct DenoiserConfig {
  std::size_t layers = 8;
  bool use_attention = true;
  bool use_mamba = true;
  bool use_conv = false;
  bool residual = true;
  std::size_t d = 64;
  std::size_t gesture_dim = 75;
  std::size_t conv_width = 3;
  ssm::MambaConfig mamba;  // d_model is forced to d
  double init_std = 0.02;

  ssm::MambaConfig mamba_config() const;
  void validate() const;
};

struct MambaAttnBlockWeights {
  DualValue ln1_gamma;
  DualValue ln1_beta;
  DualValue conv_kernel;  // conv_width x d, only with use_conv
  DualValue conv_bias;
  Linear query;
  Linear key;
  Linear value;
  Linear out;
  ssm::MambaBlockWeights mamba;
  DualValue ln2_gamma;
  DualValue ln2_beta;

  static MambaAttnBlockWeights initialized(const DenoiserConfig& config, numeric::Rng& rng);
  void register_params(numeric::ParameterSet& set, const std::string& prefix, const DenoiserConfig& config);
};

struct BlockCache {
  DenseArray x;
  numeric::LayerNormCache ln1;
  DenseArray normed;
  DenseArray conv_out;
  numeric::AttentionCache attn;
  DenseArray attended;
  DenseArray attn_out;
  ssm::MambaCache mamba;
  DenseArray mamba_out;
  numeric::LayerNormCache ln2;
};

/// y = LN2(Mamba(Attn(Conv(LN1(x))))) + x, stages skipped per the config toggles.
DenseArray mambattn_block(const MambaAttnBlockWeights& weights, const DenseArray& x, const DenoiserConfig& config,
                          BlockCache* cache = nullptr);
DenseArray mambattn_block_backward(MambaAttnBlockWeights& weights, const BlockCache& cache,
                                   const DenseArray& dy, const DenoiserConfig& config);

struct Denoiser {
  DenoiserConfig config;
  std::vector<MambaAttnBlockWeights> blocks;
  Linear head;  // d -> gesture_dim

  struct Cache {
    std::vector<BlockCache> blocks;
    DenseArray last;
  };

  void register_params(numeric::ParameterSet& set, const std::string& prefix);
};

/// Block stack followed by the output projection. The timestep is already
/// folded into f_fuse by the fusion stage; t is only range-checked context.
DenseArray denoiser_forward(const Denoiser& model, const DenseArray& f_fuse, std::size_t t,
                            Denoiser::Cache* cache = nullptr);
DenseArray denoiser_backward(Denoiser& model, const Denoiser::Cache& cache, const DenseArray& dy);

Denoiser build_variant(const DenoiserConfig& config, std::uint64_t seed);
Denoiser build_variant(const DenoiserConfig& config, numeric::Rng& rng);

struct VariantSpec {
  std::string id;
  std::string name;
  DenoiserConfig config;
};
/// The layer-count rows (1, 2, 4, 8, 12 layers) and the seven block-design
/// rows at 8 layers, built on top of base.
std::vector<VariantSpec> block_ablation_variants(const DenoiserConfig& base);

}  // namespace gesturegen::denoiser
