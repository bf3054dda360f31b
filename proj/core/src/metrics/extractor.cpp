#include "gesturegen/metrics/extractor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "gesturegen/error.hpp"
#include "gesturegen/numeric/ops.hpp"

namespace gesturegen::metrics {

Conv1d::Conv1d(std::size_t in_, std::size_t out_, std::size_t kernel_, std::size_t stride_, std::size_t padding_,
               numeric::Rng& rng)
    : in(in_), out(out_), kernel(kernel_), stride(stride_), padding(padding_),
      weight(numeric::gaussian({kernel_ * in_, out_}, 1.0 / std::sqrt(static_cast<double>(kernel_ * in_)), rng)),
      bias(DenseArray::vector(out_)) {}

std::size_t Conv1d::output_length(std::size_t length) const {
  if (length + 2 * padding < kernel)
    fail(ErrorKind::kDimension, fmt::format("conv input of {} frames is shorter than the kernel", length));
  return (length + 2 * padding - kernel) / stride + 1;
}

DenseArray Conv1d::unfold(const DenseArray& x) const {
  if (x.cols() != in) fail(ErrorKind::kDimension, fmt::format("conv expects {} channels, got {}", in, x.cols()));
  const std::size_t length = x.rows();
  const std::size_t out_len = output_length(length);
  DenseArray cols = DenseArray::matrix(out_len, kernel * in);
  for (std::size_t t = 0; t < out_len; ++t) {
    for (std::size_t j = 0; j < kernel; ++j) {
      const long long src = static_cast<long long>(t * stride + j) - static_cast<long long>(padding);
      if (src < 0 || src >= static_cast<long long>(length)) continue;
      std::copy_n(x.data() + static_cast<std::size_t>(src) * in, in, cols.data() + t * kernel * in + j * in);
    }
  }
  return cols;
}

DenseArray Conv1d::forward(const DenseArray& x, DenseArray* unfolded) const {
  DenseArray cols = unfold(x);
  DenseArray y = numeric::matmul(cols, weight.value);
  numeric::add_row_bias(y, bias.value);
  if (unfolded != nullptr) *unfolded = std::move(cols);
  return y;
}

DenseArray Conv1d::backward(const DenseArray& unfolded, const DenseArray& dy, std::size_t input_length) {
  weight.gradient += numeric::matmul_tn(unfolded, dy);
  bias.gradient += numeric::column_sums(dy);
  const DenseArray dcols = numeric::matmul_nt(dy, weight.value);
  DenseArray dx = DenseArray::matrix(input_length, in);
  for (std::size_t t = 0; t < dcols.rows(); ++t) {
    for (std::size_t j = 0; j < kernel; ++j) {
      const long long src = static_cast<long long>(t * stride + j) - static_cast<long long>(padding);
      if (src < 0 || src >= static_cast<long long>(input_length)) continue;
      const double* g = dcols.data() + t * kernel * in + j * in;
      double* d = dx.data() + static_cast<std::size_t>(src) * in;
      for (std::size_t c = 0; c < in; ++c) d[c] += g[c];
    }
  }
  return dx;
}

DenseArray upsample_rows(const DenseArray& x, std::size_t length) {
  DenseArray y = DenseArray::matrix(length, x.cols());
  for (std::size_t i = 0; i < length; ++i) {
    const std::size_t src = i * x.rows() / length;
    std::copy_n(x.data() + src * x.cols(), x.cols(), y.data() + i * x.cols());
  }
  return y;
}

DenseArray upsample_rows_backward(const DenseArray& dy, std::size_t input_length) {
  DenseArray dx = DenseArray::matrix(input_length, dy.cols());
  for (std::size_t i = 0; i < dy.rows(); ++i) {
    const std::size_t src = i * input_length / dy.rows();
    for (std::size_t c = 0; c < dy.cols(); ++c) dx(src, c) += dy(i, c);
  }
  return dx;
}

FeatureExtractor::FeatureExtractor(std::size_t frames, std::size_t width, const ExtractorConfig& config,
                                   std::uint64_t seed)
    : frames_(frames), width_(width), seed_(seed), config_(config),
      mean_(DenseArray::vector(width)), std_(DenseArray::vector(width, 1.0)) {
  if (frames < 4) fail(ErrorKind::kDataset, fmt::format("extractor needs clips of at least 4 frames, got {}", frames));
  numeric::Rng rng(seed);
  enc1_ = Conv1d(width, config.hidden, 4, 2, 1, rng);
  enc2_ = Conv1d(config.hidden, config.latent, 4, 2, 1, rng);
  dec1_ = Conv1d(config.latent, config.hidden, 3, 1, 1, rng);
  dec2_ = Conv1d(config.hidden, width, 3, 1, 1, rng);
}

void FeatureExtractor::set_normalization(DenseArray mean, DenseArray stddev) {
  mean_ = std::move(mean);
  std_ = std::move(stddev);
}

DenseArray FeatureExtractor::normalize(const DenseArray& clip) const {
  if (clip.rows() != frames_ || clip.cols() != width_)
    fail(ErrorKind::kDataset, fmt::format("extractor was trained on {}x{} clips, got {}", frames_, width_,
                                          numeric::shape_string(clip.shape())));
  DenseArray out = clip;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = (out(r, c) - mean_[c]) / std_[c];
  return out;
}

DenseArray FeatureExtractor::encode(const DenseArray& clip) const {
  return enc2_.forward(numeric::silu(enc1_.forward(normalize(clip))));
}

DenseArray FeatureExtractor::reconstruct(const DenseArray& clip) const {
  const DenseArray z = encode(clip);
  const std::size_t mid = enc1_.output_length(frames_);
  const DenseArray h = numeric::silu(dec1_.forward(upsample_rows(z, mid)));
  return dec2_.forward(upsample_rows(h, frames_));
}

DenseArray FeatureExtractor::features(const std::vector<DenseArray>& clips) const {
  if (clips.empty()) fail(ErrorKind::kDataset, "no clips to featurize");
  std::vector<DenseArray> latents;
  latents.reserve(clips.size());
  for (const auto& c : clips) latents.push_back(encode(c));
  const std::size_t per = latents.front().rows();
  DenseArray out = DenseArray::matrix(per * clips.size(), config_.latent);
  for (std::size_t i = 0; i < latents.size(); ++i)
    std::copy_n(latents[i].data(), latents[i].size(), out.data() + i * per * config_.latent);
  return out;
}

DenseArray FeatureExtractor::pooled_features(const std::vector<DenseArray>& clips) const {
  if (clips.empty()) fail(ErrorKind::kDataset, "no clips to featurize");
  DenseArray out = DenseArray::matrix(clips.size(), config_.latent);
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const DenseArray z = encode(clips[i]);
    const DenseArray sums = numeric::column_sums(z);
    for (std::size_t c = 0; c < config_.latent; ++c) out(i, c) = sums[c] / static_cast<double>(z.rows());
  }
  return out;
}

numeric::ParameterSet FeatureExtractor::parameters() {
  numeric::ParameterSet set;
  const std::pair<const char*, Conv1d*> layers[] = {{"enc1", &enc1_}, {"enc2", &enc2_}, {"dec1", &dec1_}, {"dec2", &dec2_}};
  for (const auto& [name, layer] : layers) {
    set.add(fmt::format("extractor.{}.weight", name), layer->weight);
    set.add(fmt::format("extractor.{}.bias", name), layer->bias);
  }
  return set;
}

double FeatureExtractor::train_step(const std::vector<const DenseArray*>& batch, numeric::AdamW& optimizer) {
  auto params = parameters();
  params.zero_grad();
  const double inv = 1.0 / static_cast<double>(batch.size());
  const std::size_t mid = enc1_.output_length(frames_);
  double loss = 0.0;
  for (const DenseArray* clip : batch) {
    const DenseArray x = normalize(*clip);
    DenseArray u1, u2, u3, u4;
    const DenseArray a1 = enc1_.forward(x, &u1);
    const DenseArray h1 = numeric::silu(a1);
    const DenseArray z = enc2_.forward(h1, &u2);
    const DenseArray up1 = upsample_rows(z, mid);
    const DenseArray a3 = dec1_.forward(up1, &u3);
    const DenseArray h3 = numeric::silu(a3);
    const DenseArray up2 = upsample_rows(h3, frames_);
    const DenseArray recon = dec2_.forward(up2, &u4);
    auto l = numeric::l1_loss(recon, x);
    loss += l.value * inv;
    l.grad *= inv;
    DenseArray g = dec2_.backward(u4, l.grad, frames_);
    g = upsample_rows_backward(g, h3.rows());
    g = numeric::silu_backward(a3, g);
    g = dec1_.backward(u3, g, mid);
    g = upsample_rows_backward(g, z.rows());
    g = enc2_.backward(u2, g, h1.rows());
    g = numeric::silu_backward(a1, g);
    enc1_.weight.gradient += numeric::matmul_tn(u1, g);
    enc1_.bias.gradient += numeric::column_sums(g);
  }
  if (!std::isfinite(loss)) fail(ErrorKind::kNumerical, "extractor loss is not finite");
  optimizer.step(params);
  return loss;
}

io::Checkpoint FeatureExtractor::to_checkpoint() const {
  io::Checkpoint ck;
  ck.step = static_cast<std::int64_t>(losses_.size());
  ck.header["extractor.frames"] = std::to_string(frames_);
  ck.header["extractor.width"] = std::to_string(width_);
  ck.header["extractor.seed"] = std::to_string(seed_);
  ck.header["extractor.hidden"] = std::to_string(config_.hidden);
  ck.header["extractor.latent"] = std::to_string(config_.latent);
  ck.header["extractor.steps"] = std::to_string(config_.steps);
  ck.header["extractor.batch"] = std::to_string(config_.batch);
  ck.header["extractor.lr"] = fmt::format("{:.17g}", config_.lr);
  ck.arrays.push_back({"norm.mean", mean_});
  ck.arrays.push_back({"norm.std", std_});
  auto self = const_cast<FeatureExtractor*>(this)->parameters();
  for (const auto& [name, p] : self.entries()) ck.arrays.push_back({name, p->value});
  return ck;
}

FeatureExtractor FeatureExtractor::from_checkpoint(const io::Checkpoint& ck) {
  auto field = [&](const char* key) {
    const auto it = ck.header.find(key);
    if (it == ck.header.end()) fail(ErrorKind::kDataset, fmt::format("extractor checkpoint lacks '{}'", key));
    return it->second;
  };
  ExtractorConfig cfg;
  cfg.hidden = std::stoul(field("extractor.hidden"));
  cfg.latent = std::stoul(field("extractor.latent"));
  cfg.steps = std::stoul(field("extractor.steps"));
  cfg.batch = std::stoul(field("extractor.batch"));
  cfg.lr = std::stod(field("extractor.lr"));
  FeatureExtractor fx(std::stoul(field("extractor.frames")), std::stoul(field("extractor.width")), cfg,
                      std::stoull(field("extractor.seed")));
  fx.set_normalization(ck.get("norm.mean"), ck.get("norm.std"));
  auto params = fx.parameters();
  for (const auto& [name, p] : params.entries()) {
    const DenseArray& v = ck.get(name);
    if (v.shape() != p->value.shape())
      fail(ErrorKind::kDataset, fmt::format("extractor array '{}' has shape {}, expected {}", name,
                                            numeric::shape_string(v.shape()), numeric::shape_string(p->value.shape())));
    p->value = v;
  }
  return fx;
}

FeatureExtractor train_fgd_extractor(const std::vector<DenseArray>& clips, std::uint64_t seed,
                                     const ExtractorConfig& config) {
  if (clips.size() < 2) fail(ErrorKind::kDataset, "extractor training needs at least 2 clips");
  const auto shape = clips.front().shape();
  for (const auto& c : clips)
    if (c.shape() != shape)
      fail(ErrorKind::kDataset, fmt::format("extractor clips differ in shape: {} vs {}", numeric::shape_string(shape),
                                            numeric::shape_string(c.shape())));
  const std::size_t frames = clips.front().rows();
  const std::size_t width = clips.front().cols();
  FeatureExtractor fx(frames, width, config, seed);

  DenseArray mean = DenseArray::vector(width);
  DenseArray var = DenseArray::vector(width);
  const double n = static_cast<double>(clips.size() * frames);
  for (const auto& c : clips)
    for (std::size_t r = 0; r < frames; ++r)
      for (std::size_t k = 0; k < width; ++k) mean[k] += c(r, k) / n;
  for (const auto& c : clips)
    for (std::size_t r = 0; r < frames; ++r)
      for (std::size_t k = 0; k < width; ++k) var[k] += (c(r, k) - mean[k]) * (c(r, k) - mean[k]) / n;
  for (auto& v : var.values()) v = std::max(std::sqrt(v), 1e-3);
  fx.set_normalization(mean, var);

  auto params = fx.parameters();
  numeric::AdamW optimizer(params, {config.lr, 0.9, 0.999, 1e-8, 0.0});
  numeric::Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(clips.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::min(config.batch == 0 ? clips.size() : config.batch, clips.size());
  for (std::size_t step = 0; step < config.steps; ++step) {
    if (batch < clips.size()) std::shuffle(order.begin(), order.end(), rng);
    std::vector<const DenseArray*> picked;
    for (std::size_t i = 0; i < batch; ++i) picked.push_back(&clips[order[i]]);
    fx.record_loss(fx.train_step(picked, optimizer));
  }
  // Match the on-disk precision so a cached extractor scores identically.
  for (const auto& entry : fx.parameters().entries()) io::round_to_f32(entry.second->value);
  io::round_to_f32(mean);
  io::round_to_f32(var);
  fx.set_normalization(mean, var);
  return fx;
}

}  // namespace gesturegen::metrics
