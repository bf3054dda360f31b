#include "gesturegen/denoiser/mambattn.hpp"

#include <fmt/format.h>

#include "gesturegen/error.hpp"

namespace gesturegen::denoiser {

ssm::MambaConfig DenoiserConfig::mamba_config() const {
  ssm::MambaConfig m = mamba;
  m.d_model = d;
  return m;
}

void DenoiserConfig::validate() const {
  if (layers == 0) fail(ErrorKind::kConfig, "denoiser needs at least one layer");
  if (!use_attention && !use_mamba && !use_conv)
    fail(ErrorKind::kConfig, "at least one of attention, mamba, conv must be enabled");
  if (d == 0 || gesture_dim == 0) fail(ErrorKind::kConfig, "denoiser widths must be positive");
  if (use_conv && conv_width == 0) fail(ErrorKind::kConfig, "conv width must be positive");
  if (mamba.expand == 0 || mamba.state == 0 || mamba.conv_width == 0)
    fail(ErrorKind::kConfig, "mamba expand, state and conv width must be positive");
}

MambaAttnBlockWeights MambaAttnBlockWeights::initialized(const DenoiserConfig& config, numeric::Rng& rng) {
  const std::size_t d = config.d;
  const double s = config.init_std;
  MambaAttnBlockWeights w;
  w.ln1_gamma = DualValue(DenseArray::vector(d, 1.0));
  w.ln1_beta = DualValue(DenseArray::vector(d));
  w.ln2_gamma = DualValue(DenseArray::vector(d, 1.0));
  w.ln2_beta = DualValue(DenseArray::vector(d));
  if (config.use_conv) {
    w.conv_kernel = DualValue(numeric::gaussian({config.conv_width, d}, s, rng));
    w.conv_bias = DualValue(DenseArray::vector(d));
  }
  if (config.use_attention) {
    w.query = Linear(d, d, false, s, rng);
    w.key = Linear(d, d, false, s, rng);
    w.value = Linear(d, d, false, s, rng);
    w.out = Linear(d, d, false, s, rng);
  }
  if (config.use_mamba) w.mamba = ssm::MambaBlockWeights::initialized(config.mamba_config(), rng, s);
  return w;
}

void MambaAttnBlockWeights::register_params(numeric::ParameterSet& set, const std::string& prefix,
                                            const DenoiserConfig& config) {
  set.add(prefix + ".ln1.gamma", ln1_gamma);
  set.add(prefix + ".ln1.beta", ln1_beta);
  if (config.use_conv) {
    set.add(prefix + ".conv.kernel", conv_kernel);
    set.add(prefix + ".conv.bias", conv_bias);
  }
  if (config.use_attention) {
    query.register_params(set, prefix + ".attn.query");
    key.register_params(set, prefix + ".attn.key");
    value.register_params(set, prefix + ".attn.value");
    out.register_params(set, prefix + ".attn.out");
  }
  if (config.use_mamba) mamba.register_params(set, prefix + ".mamba");
  set.add(prefix + ".ln2.gamma", ln2_gamma);
  set.add(prefix + ".ln2.beta", ln2_beta);
}

DenseArray mambattn_block(const MambaAttnBlockWeights& w, const DenseArray& x, const DenoiserConfig& config,
                          BlockCache* cache) {
  if (x.cols() != config.d)
    fail(ErrorKind::kDimension, fmt::format("block input width {} != d {}", x.cols(), config.d));
  DenseArray h = numeric::layer_norm(x, w.ln1_gamma.value, w.ln1_beta.value, numeric::kLayerNormEps,
                                     cache != nullptr ? &cache->ln1 : nullptr);
  if (cache != nullptr) cache->normed = h;
  if (config.use_conv) {
    h = numeric::causal_depthwise_conv(h, w.conv_kernel.value, w.conv_bias.value);
    if (cache != nullptr) cache->conv_out = h;
  }
  if (config.use_attention) {
    DenseArray att = numeric::scaled_dot_attention(w.query.forward(h), w.key.forward(h), w.value.forward(h),
                                                   cache != nullptr ? &cache->attn : nullptr);
    if (cache != nullptr) cache->attended = att;
    h = w.out.forward(att);
    if (cache != nullptr) cache->attn_out = h;
  }
  if (config.use_mamba) {
    h = ssm::mamba_block_forward(w.mamba, h, cache != nullptr ? &cache->mamba : nullptr);
    if (cache != nullptr) cache->mamba_out = h;
  }
  DenseArray y = numeric::layer_norm(h, w.ln2_gamma.value, w.ln2_beta.value, numeric::kLayerNormEps,
                                     cache != nullptr ? &cache->ln2 : nullptr);
  if (config.residual) y += x;
  if (cache != nullptr) cache->x = x;
  return y;
}

DenseArray mambattn_block_backward(MambaAttnBlockWeights& w, const BlockCache& cache, const DenseArray& dy,
                                   const DenoiserConfig& config) {
  auto ln2 = numeric::layer_norm_backward(cache.ln2, w.ln2_gamma.value, dy);
  w.ln2_gamma.accumulate(ln2.dgamma);
  w.ln2_beta.accumulate(ln2.dbeta);
  DenseArray g = std::move(ln2.dx);
  if (config.use_mamba) g = ssm::mamba_block_backward(w.mamba, cache.mamba, g);
  if (config.use_attention) {
    const DenseArray& h = config.use_conv ? cache.conv_out : cache.normed;
    const DenseArray d_att = w.out.backward(cache.attended, g);
    const auto ag = numeric::attention_backward(cache.attn, d_att);
    g = w.query.backward(h, ag.dq);
    g += w.key.backward(h, ag.dk);
    g += w.value.backward(h, ag.dv);
  }
  if (config.use_conv) {
    auto cg = numeric::causal_depthwise_conv_backward(cache.normed, w.conv_kernel.value, g);
    w.conv_kernel.accumulate(cg.dkernel);
    w.conv_bias.accumulate(cg.dbias);
    g = std::move(cg.dx);
  }
  auto ln1 = numeric::layer_norm_backward(cache.ln1, w.ln1_gamma.value, g);
  w.ln1_gamma.accumulate(ln1.dgamma);
  w.ln1_beta.accumulate(ln1.dbeta);
  DenseArray dx = std::move(ln1.dx);
  if (config.residual) dx += dy;
  return dx;
}

void Denoiser::register_params(numeric::ParameterSet& set, const std::string& prefix) {
  for (std::size_t i = 0; i < blocks.size(); ++i)
    blocks[i].register_params(set, fmt::format("{}block{}", prefix, i), config);
  head.register_params(set, prefix + "head");
}

DenseArray denoiser_forward(const Denoiser& model, const DenseArray& f_fuse, std::size_t /*t*/,
                            Denoiser::Cache* cache) {
  if (f_fuse.rank() != 2 || f_fuse.cols() != model.config.d)
    fail(ErrorKind::kContract, fmt::format("denoiser expects F x {}, got {}", model.config.d,
                                           numeric::shape_string(f_fuse.shape())));
  if (cache != nullptr) cache->blocks.resize(model.blocks.size());
  DenseArray h = f_fuse;
  for (std::size_t i = 0; i < model.blocks.size(); ++i)
    h = mambattn_block(model.blocks[i], h, model.config, cache != nullptr ? &cache->blocks[i] : nullptr);
  DenseArray out = model.head.forward(h);
  if (cache != nullptr) cache->last = std::move(h);
  return out;
}

DenseArray denoiser_backward(Denoiser& model, const Denoiser::Cache& cache, const DenseArray& dy) {
  DenseArray g = model.head.backward(cache.last, dy);
  for (std::size_t i = model.blocks.size(); i-- > 0;)
    g = mambattn_block_backward(model.blocks[i], cache.blocks[i], g, model.config);
  return g;
}

Denoiser build_variant(const DenoiserConfig& config, numeric::Rng& rng) {
  config.validate();
  Denoiser model;
  model.config = config;
  model.config.mamba.d_model = config.d;
  for (std::size_t i = 0; i < config.layers; ++i)
    model.blocks.push_back(MambaAttnBlockWeights::initialized(config, rng));
  model.head = Linear(config.d, config.gesture_dim, true, config.init_std, rng);
  return model;
}

Denoiser build_variant(const DenoiserConfig& config, std::uint64_t seed) {
  numeric::Rng rng(seed);
  return build_variant(config, rng);
}

std::vector<VariantSpec> block_ablation_variants(const DenoiserConfig& base) {
  std::vector<VariantSpec> out;
  const std::size_t layer_counts[] = {1, 2, 4, 8, 12};
  int row = 1;
  for (std::size_t n : layer_counts) {
    DenoiserConfig c = base;
    c.layers = n;
    c.use_attention = c.use_mamba = true;
    c.use_conv = false;
    out.push_back({fmt::format("A{}", row++), fmt::format("MambaAttn-{}", n), c});
  }
  struct Toggle {
    const char* name;
    bool conv, attn, mamba;
  };
  const Toggle toggles[] = {
      {"MambaAttn", false, true, true},
      {"w/ Conv", true, true, true},
      {"w/o Attn", false, false, true},
      {"w/o Mamba", false, true, false},
      {"w/ Conv, w/o Attn", true, false, true},
      {"w/ Conv, w/o Mamba", true, true, false},
      {"w/ Conv, w/o Attn & Mamba", true, false, false},
  };
  row = 1;
  for (const auto& t : toggles) {
    DenoiserConfig c = base;
    c.layers = 8;
    c.use_conv = t.conv;
    c.use_attention = t.attn;
    c.use_mamba = t.mamba;
    out.push_back({fmt::format("B{}", row++), t.name, c});
  }
  return out;
}

}  // namespace gesturegen::denoiser
