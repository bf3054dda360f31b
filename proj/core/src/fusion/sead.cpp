#include "gesturegen/fusion/sead.hpp"

#include <cmath>

#include <fmt/format.h>

#include "gesturegen/error.hpp"

namespace gesturegen::fusion {

using numeric::ArrayRef;
using numeric::broadcast_rows;
using numeric::column_sums;
using numeric::concat_cols;
using numeric::slice_cols;
using numeric::slice_rows;

std::string_view to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::kSA: return "SA";
    case FusionMode::kSEA: return "SEA";
    case FusionMode::kSeadBasic: return "SEAD_BASIC";
    case FusionMode::kSead: return "SEAD";
  }
  return "?";
}

FusionMode parse_fusion_mode(std::string_view text) {
  if (text == "SA") return FusionMode::kSA;
  if (text == "SEA") return FusionMode::kSEA;
  if (text == "SEAD_BASIC") return FusionMode::kSeadBasic;
  if (text == "SEAD") return FusionMode::kSead;
  fail(ErrorKind::kConfig, fmt::format("unknown fusion mode '{}'", text));
}

bool uses_emotion(FusionMode mode) { return mode != FusionMode::kSA; }

bool uses_disentanglement(FusionMode mode) {
  return mode == FusionMode::kSeadBasic || mode == FusionMode::kSead;
}

namespace {

void check_one_hot(const DenseArray& v, const char* what) {
  if (v.rank() != 1) fail(ErrorKind::kContract, fmt::format("{} must be a vector", what));
  int active = 0;
  for (double x : v.values()) {
    if (x == 1.0) {
      ++active;
    } else if (x != 0.0) {
      fail(ErrorKind::kContract, fmt::format("{} has a non-binary entry", what));
    }
  }
  if (active != 1) fail(ErrorKind::kContract, fmt::format("{} must have exactly one active class", what));
}

DenseArray as_row(const DenseArray& v) { return v.reshaped({1, v.size()}); }

}  // namespace

void ClipConditions::validate() const {
  if (audio.rank() != 2 || audio.empty()) fail(ErrorKind::kContract, "audio features missing");
  if (text.rank() != 2 || text.rows() != audio.rows())
    fail(ErrorKind::kContract, fmt::format("text has {} frames, audio has {}", text.rows(), audio.rows()));
  check_one_hot(style_onehot, "style one-hot");
  check_one_hot(emotion_onehot, "emotion one-hot");
  if (emotion_onehot.size() != kEmotionClasses)
    fail(ErrorKind::kContract, fmt::format("emotion one-hot must have {} classes", kEmotionClasses));
}

DenseArray one_hot(std::size_t index, std::size_t classes) {
  if (index >= classes) fail(ErrorKind::kIndex, fmt::format("class {} out of range [0, {})", index, classes));
  DenseArray v = DenseArray::vector(classes);
  v[index] = 1.0;
  return v;
}

std::size_t FusionConfig::concat_width() const {
  switch (mode) {
    case FusionMode::kSA: return audio_dim + text_dim + 3 * d;
    case FusionMode::kSEA: return audio_dim + text_dim + 4 * d;
    case FusionMode::kSeadBasic:
    case FusionMode::kSead: return text_dim + 5 * d;
  }
  return 0;
}

void FusionConfig::validate() const {
  if (d == 0 || audio_dim == 0 || text_dim == 0 || gesture_dim == 0 || n_styles == 0)
    fail(ErrorKind::kConfig, "fusion widths must be positive");
  if (window == 0) fail(ErrorKind::kConfig, "cross-local window must be >= 1");
}

DenseArray sinusoidal_encoding(std::size_t t, std::size_t d) {
  DenseArray pe = DenseArray::vector(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double pair = static_cast<double>(i / 2 * 2);
    const double freq = std::pow(10000.0, -pair / static_cast<double>(d));
    const double angle = static_cast<double>(t) * freq;
    pe[i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
  }
  return pe;
}

DenseArray TimestepEncoder::forward(std::size_t t, Cache* cache) const {
  DenseArray pe = as_row(sinusoidal_encoding(t, fc1.in_features()));
  DenseArray pre = fc1.forward(pe);
  DenseArray hidden = numeric::silu(pre);
  DenseArray out = fc2.forward(hidden);
  if (cache != nullptr) {
    cache->pe = std::move(pe);
    cache->hidden_pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return out.reshaped({out.size()});
}

void TimestepEncoder::backward(const Cache& cache, const DenseArray& df_t) {
  DenseArray dh = fc2.backward(cache.hidden, as_row(df_t));
  fc1.accumulate_only(cache.pe, numeric::silu_backward(cache.hidden_pre, dh));
}

DenseArray CrossLocalAttention::forward(const DenseArray& x, Cache* cache) const {
  if (window == 0) fail(ErrorKind::kParameter, "cross-local window must be >= 1");
  const std::size_t frames = x.rows();
  const DenseArray q = query.forward(x);
  const DenseArray k = key.forward(x);
  const DenseArray v = value.forward(x);
  DenseArray attended = DenseArray::matrix(frames, v.cols());
  if (cache != nullptr) cache->windows.clear();
  for (std::size_t start = 0; start < frames; start += window) {
    const std::size_t len = std::min(window, frames - start);
    numeric::AttentionCache* wc = nullptr;
    if (cache != nullptr) wc = &cache->windows.emplace_back();
    DenseArray part = numeric::scaled_dot_attention(slice_rows(q, start, len), slice_rows(k, start, len),
                                                    slice_rows(v, start, len), wc);
    std::copy(part.data(), part.data() + part.size(), attended.data() + start * attended.cols());
  }
  DenseArray y = out.forward(attended);
  y += skip.forward(x);
  if (cache != nullptr) {
    cache->x = x;
    cache->attended = std::move(attended);
  }
  return y;
}

DenseArray CrossLocalAttention::backward(const Cache& cache, const DenseArray& dy) {
  const DenseArray d_att = out.backward(cache.attended, dy);
  DenseArray dx = skip.backward(cache.x, dy);
  const std::size_t frames = cache.x.rows();
  const std::size_t width = d_att.cols();
  DenseArray dq = DenseArray::matrix(frames, width);
  DenseArray dk = DenseArray::matrix(frames, width);
  DenseArray dv = DenseArray::matrix(frames, width);
  std::size_t start = 0;
  for (const auto& wc : cache.windows) {
    const std::size_t len = wc.q.rows();
    const auto g = numeric::attention_backward(wc, slice_rows(d_att, start, len));
    std::copy(g.dq.data(), g.dq.data() + g.dq.size(), dq.data() + start * width);
    std::copy(g.dk.data(), g.dk.data() + g.dk.size(), dk.data() + start * width);
    std::copy(g.dv.data(), g.dv.data() + g.dv.size(), dv.data() + start * width);
    start += len;
  }
  dx += query.backward(cache.x, dq);
  dx += key.backward(cache.x, dk);
  dx += value.backward(cache.x, dv);
  return dx;
}

FusionModel::FusionModel(const FusionConfig& config, numeric::Rng& rng) : config_(config) {
  config_.validate();
  const std::size_t d = config.d;
  const double s = config.init_std;
  time_mlp.fc1 = Linear(d, d, true, s, rng);
  time_mlp.fc2 = Linear(d, d, true, s, rng);
  gesture_in = Linear(config.gesture_dim, d, true, s, rng);
  style_embed = Linear(config.n_styles, d, false, s, rng);
  emotion_embed = Linear(kEmotionClasses, d, false, s, rng);
  to_style = Linear(config.audio_dim, d, false, s, rng);
  to_emotion = Linear(config.audio_dim, d, false, s, rng);
  to_gesture = Linear(config.audio_dim, d, false, s, rng);
  enhance_style = Linear(2 * d, d, true, s, rng);
  enhance_emotion = Linear(2 * d, d, true, s, rng);
  fuse_style_emotion = Linear(2 * d, d, true, s, rng);
  const std::size_t cat = config.concat_width();
  local.query = Linear(cat, d, false, s, rng);
  local.key = Linear(cat, d, false, s, rng);
  local.value = Linear(cat, d, false, s, rng);
  local.out = Linear(d, d, false, s, rng);
  local.skip = Linear(cat, d, true, s, rng);
  local.window = config.window;
}

ConditionBundle FusionModel::encode(const ClipConditions& conditions, const DenseArray& x_t, std::size_t t,
                                    EncodeCache* cache) const {
  conditions.validate();
  if (conditions.audio.cols() != config_.audio_dim || conditions.text.cols() != config_.text_dim)
    fail(ErrorKind::kDimension,
         fmt::format("condition widths {}/{} do not match model {}/{}", conditions.audio.cols(),
                     conditions.text.cols(), config_.audio_dim, config_.text_dim));
  if (conditions.style_onehot.size() != config_.n_styles)
    fail(ErrorKind::kDimension, fmt::format("style one-hot has {} classes, model expects {}",
                                            conditions.style_onehot.size(), config_.n_styles));
  if (x_t.rows() != conditions.frames() || x_t.cols() != config_.gesture_dim)
    fail(ErrorKind::kDimension, fmt::format("noisy gesture is {}, expected {}x{}", numeric::shape_string(x_t.shape()),
                                            conditions.frames(), config_.gesture_dim));
  ConditionBundle b;
  b.f_a = conditions.audio;
  b.f_text = conditions.text;
  b.f_s = style_embed.forward(as_row(conditions.style_onehot)).reshaped({config_.d});
  b.f_e = emotion_embed.forward(as_row(conditions.emotion_onehot)).reshaped({config_.d});
  b.f_t = time_mlp.forward(t, cache != nullptr ? &cache->time : nullptr);
  b.f_g = gesture_in.forward(x_t);
  if (cache != nullptr) {
    cache->conditions = conditions;
    cache->x_t = x_t;
  }
  return b;
}

void FusionModel::encode_backward(const EncodeCache& cache, const BundleGrad& grad) {
  gesture_in.accumulate_only(cache.x_t, grad.f_g);
  style_embed.accumulate_only(as_row(cache.conditions.style_onehot), as_row(grad.f_s));
  if (!grad.f_e.empty()) emotion_embed.accumulate_only(as_row(cache.conditions.emotion_onehot), as_row(grad.f_e));
  time_mlp.backward(cache.time, grad.f_t);
}

DisentangledAudio disentangle_audio(const FusionModel& model, const DenseArray& f_a) {
  return {model.to_style.forward(f_a), model.to_emotion.forward(f_a), model.to_gesture.forward(f_a)};
}

std::pair<DenseArray, DenseArray> enhance_style_emotion(const FusionModel& model, const DisentangledAudio& audio,
                                                        const DenseArray& f_s, const DenseArray& f_e) {
  const std::size_t frames = audio.f_a_s.rows();
  const DenseArray s = broadcast_rows(f_s, frames);
  const DenseArray e = broadcast_rows(f_e, frames);
  return {model.enhance_style.forward(concat_cols({audio.f_a_s, s})),
          model.enhance_emotion.forward(concat_cols({audio.f_a_e, e}))};
}

DenseArray fuse_se(const FusionModel& model, const DenseArray& f_s_h, const DenseArray& f_e_h) {
  return model.fuse_style_emotion.forward(concat_cols({f_s_h, f_e_h}));
}

DenseArray cross_attend_audio(const DenseArray& f_a_g, const DenseArray& f_prime_se,
                              numeric::AttentionCache* cache) {
  if (f_a_g.shape() != f_prime_se.shape())
    fail(ErrorKind::kDimension, fmt::format("cross attention shapes {} and {} differ",
                                            numeric::shape_string(f_a_g.shape()),
                                            numeric::shape_string(f_prime_se.shape())));
  DenseArray out = numeric::scaled_dot_attention(f_a_g, f_prime_se, f_prime_se, cache);
  out += f_a_g;
  return out;
}

DenseArray cross_local_attention(const FusionModel& model, const DenseArray& x) { return model.local.forward(x); }

FusionOutput FusionModel::fuse(const ConditionBundle& bundle, FuseCache* cache) const {
  const FusionMode m = config_.mode;
  const std::size_t frames = bundle.frames();
  auto require_frames = [&](const DenseArray& a, const char* name) {
    if (a.empty()) fail(ErrorKind::kContract, fmt::format("fusion mode {} needs {}", to_string(m), name));
    if (a.rows() != frames)
      fail(ErrorKind::kContract, fmt::format("{} has {} frames, expected {}", name, a.rows(), frames));
  };
  auto require_vector = [&](const DenseArray& a, const char* name) {
    if (a.empty()) fail(ErrorKind::kContract, fmt::format("fusion mode {} needs {}", to_string(m), name));
    if (a.size() != config_.d)
      fail(ErrorKind::kDimension, fmt::format("{} has width {}, expected {}", name, a.size(), config_.d));
  };
  if (frames == 0) fail(ErrorKind::kContract, "fusion needs the noisy-gesture feature");
  require_frames(bundle.f_a, "f_a");
  require_frames(bundle.f_text, "f_text");
  require_vector(bundle.f_s, "f_s");
  require_vector(bundle.f_t, "f_t");
  if (uses_emotion(m)) require_vector(bundle.f_e, "f_e");

  FusionOutput out;
  const DenseArray s_b = broadcast_rows(bundle.f_s, frames);
  const DenseArray t_b = broadcast_rows(bundle.f_t, frames);
  DenseArray concat;
  FuseCache local_cache;
  FuseCache& c = cache != nullptr ? *cache : local_cache;

  if (!uses_disentanglement(m)) {
    if (m == FusionMode::kSA) {
      concat = concat_cols({bundle.f_a, bundle.f_text, s_b, bundle.f_g, t_b});
    } else {
      const DenseArray e_b = broadcast_rows(bundle.f_e, frames);
      concat = concat_cols({bundle.f_a, bundle.f_text, s_b, e_b, bundle.f_g, t_b});
    }
  } else {
    DisentangledAudio da = disentangle_audio(*this, bundle.f_a);
    const DenseArray e_b = broadcast_rows(bundle.f_e, frames);
    c.cat_style = concat_cols({da.f_a_s, s_b});
    c.cat_emotion = concat_cols({da.f_a_e, e_b});
    out.f_s_h = enhance_style.forward(c.cat_style);
    out.f_e_h = enhance_emotion.forward(c.cat_emotion);
    DenseArray audio = da.f_a_g;
    if (m == FusionMode::kSead) {
      c.cat_se = concat_cols({out.f_s_h, out.f_e_h});
      out.f_prime_se = fuse_style_emotion.forward(c.cat_se);
      audio = cross_attend_audio(da.f_a_g, out.f_prime_se, &c.cross);
    }
    concat = concat_cols({audio, bundle.f_text, out.f_s_h, out.f_e_h, bundle.f_g, t_b});
    out.disentangled = std::move(da);
  }
  out.f_fuse = local.forward(concat, cache != nullptr ? &c.local : nullptr);
  if (cache != nullptr) {
    c.bundle = bundle;
    c.concat = std::move(concat);
    c.output = out;
  }
  return out;
}

FusionModel::BundleGrad FusionModel::fuse_backward(const FuseCache& cache, const DenseArray& d_fuse,
                                                   const DenseArray& d_audio_style,
                                                   const DenseArray& d_audio_emotion) {
  const FusionMode m = config_.mode;
  const std::size_t d = config_.d;
  const ConditionBundle& b = cache.bundle;
  const DenseArray d_cat = local.backward(cache.local, d_fuse);

  BundleGrad g;
  std::size_t col = 0;
  auto take = [&](std::size_t width) {
    DenseArray part = slice_cols(d_cat, col, width);
    col += width;
    return part;
  };

  if (!uses_disentanglement(m)) {
    take(config_.audio_dim);
    g.f_text = take(config_.text_dim);
    g.f_s = column_sums(take(d));
    if (m == FusionMode::kSEA) g.f_e = column_sums(take(d));
    g.f_g = take(d);
    g.f_t = column_sums(take(d));
    return g;
  }

  DenseArray d_audio = take(d);
  g.f_text = take(config_.text_dim);
  DenseArray d_fsh = take(d);
  DenseArray d_feh = take(d);
  g.f_g = take(d);
  g.f_t = column_sums(take(d));

  DenseArray d_fag = d_audio;
  if (m == FusionMode::kSead) {
    const auto ag = numeric::attention_backward(cache.cross, d_audio);
    d_fag += ag.dq;
    DenseArray d_se = ag.dk;
    d_se += ag.dv;
    const DenseArray d_cat_se = fuse_style_emotion.backward(cache.cat_se, d_se);
    d_fsh += slice_cols(d_cat_se, 0, d);
    d_feh += slice_cols(d_cat_se, d, d);
  }
  const DenseArray d_cat_s = enhance_style.backward(cache.cat_style, d_fsh);
  const DenseArray d_cat_e = enhance_emotion.backward(cache.cat_emotion, d_feh);
  DenseArray d_fas = slice_cols(d_cat_s, 0, d);
  DenseArray d_fae = slice_cols(d_cat_e, 0, d);
  g.f_s = column_sums(slice_cols(d_cat_s, d, d));
  g.f_e = column_sums(slice_cols(d_cat_e, d, d));
  if (!d_audio_style.empty()) d_fas += d_audio_style;
  if (!d_audio_emotion.empty()) d_fae += d_audio_emotion;
  to_style.accumulate_only(b.f_a, d_fas);
  to_emotion.accumulate_only(b.f_a, d_fae);
  to_gesture.accumulate_only(b.f_a, d_fag);
  return g;
}

void FusionModel::register_params(numeric::ParameterSet& set, const std::string& prefix) {
  time_mlp.fc1.register_params(set, prefix + "time.fc1");
  time_mlp.fc2.register_params(set, prefix + "time.fc2");
  gesture_in.register_params(set, prefix + "gesture_in");
  style_embed.register_params(set, prefix + "style_embed");
  if (uses_emotion(config_.mode)) emotion_embed.register_params(set, prefix + "emotion_embed");
  if (uses_disentanglement(config_.mode)) {
    to_style.register_params(set, prefix + "disentangle.style");
    to_emotion.register_params(set, prefix + "disentangle.emotion");
    to_gesture.register_params(set, prefix + "disentangle.gesture");
    enhance_style.register_params(set, prefix + "enhance.style");
    enhance_emotion.register_params(set, prefix + "enhance.emotion");
  }
  if (config_.mode == FusionMode::kSead) fuse_style_emotion.register_params(set, prefix + "fuse_se");
  local.query.register_params(set, prefix + "local.query");
  local.key.register_params(set, prefix + "local.key");
  local.value.register_params(set, prefix + "local.value");
  local.out.register_params(set, prefix + "local.out");
  local.skip.register_params(set, prefix + "local.skip");
}

MaskedConditions mask_conditions(const DenseArray& f_s, const DenseArray& f_e, double p, numeric::Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::kParameter, fmt::format("mask probability {} outside [0, 1]", p));
  std::bernoulli_distribution draw(p);
  MaskedConditions out{f_s, f_e, draw(rng), draw(rng)};
  if (out.style_masked) out.f_s.fill(0.0);
  if (out.emotion_masked && !out.f_e.empty()) out.f_e.fill(0.0);
  return out;
}

FusionOutput fusion_forward(const FusionModel& model, const ConditionBundle& bundle) { return model.fuse(bundle); }

StyleEmotionLosses style_emotion_losses(const DisentangledAudio& audio, const DenseArray& f_s, const DenseArray& f_e) {
  const std::size_t frames = audio.f_a_s.rows();
  auto style = numeric::l1_loss(audio.f_a_s, broadcast_rows(f_s, frames));
  auto emotion = numeric::l1_loss(audio.f_a_e, broadcast_rows(f_e, frames));
  StyleEmotionLosses out;
  out.style = style.value;
  out.emotion = emotion.value;
  out.d_style = column_sums(style.grad) * -1.0;
  out.d_emotion = column_sums(emotion.grad) * -1.0;
  out.d_audio_style = std::move(style.grad);
  out.d_audio_emotion = std::move(emotion.grad);
  return out;
}

}  // namespace gesturegen::fusion
