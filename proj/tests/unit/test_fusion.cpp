#include <cmath>

#include <gtest/gtest.h>

#include "gesturegen/error.hpp"
#include "gesturegen/fusion/sead.hpp"
#include "gesturegen/numeric/gradcheck.hpp"
#include "gesturegen/numeric/ops.hpp"
#include "test_support.hpp"

using namespace gesturegen;
using namespace gesturegen::fusion;
using numeric::ParameterSet;
using numeric::Rng;
using gesturegen::testing::random_array;

namespace {

FusionConfig small_config(FusionMode mode) {
  FusionConfig c;
  c.mode = mode;
  c.d = 8;
  c.audio_dim = 5;
  c.text_dim = 3;
  c.gesture_dim = 4;
  c.n_styles = 3;
  c.window = 4;
  c.init_std = 0.4;
  return c;
}

ClipConditions random_conditions(const FusionConfig& c, std::size_t frames, Rng& rng) {
  return {random_array({frames, c.audio_dim}, rng), random_array({frames, c.text_dim}, rng), one_hot(1, c.n_styles),
          one_hot(5, kEmotionClasses)};
}

// x W with W built from explicit loops, the oracle for the Linear paths.
DenseArray affine_oracle(const DenseArray& x, const numeric::Linear& layer) {
  DenseArray out = DenseArray::matrix(x.rows(), layer.out_features());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < layer.out_features(); ++j) {
      double s = layer.has_bias() ? layer.bias.value[j] : 0.0;
      for (std::size_t k = 0; k < x.cols(); ++k) s += x(r, k) * layer.weight.value(k, j);
      out(r, j) = s;
    }
  return out;
}

DenseArray concat_oracle(const DenseArray& a, const DenseArray& row_vector) {
  DenseArray out = DenseArray::matrix(a.rows(), a.cols() + row_vector.size());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c);
    for (std::size_t c = 0; c < row_vector.size(); ++c) out(r, a.cols() + c) = row_vector[c];
  }
  return out;
}

// Copies rows of `from` into `to`, mapping source row i to destination row map[i].
void copy_rows(const numeric::DualValue& from, numeric::DualValue& to, const std::vector<std::size_t>& map) {
  for (std::size_t i = 0; i < map.size(); ++i)
    for (std::size_t c = 0; c < from.value.cols(); ++c) to.value(map[i], c) = from.value(i, c);
}

std::vector<std::size_t> iota_map(std::size_t n, std::size_t offset_after, std::size_t split) {
  std::vector<std::size_t> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = i < split ? i : i + offset_after;
  return m;
}

void copy_local(const CrossLocalAttention& from, CrossLocalAttention& to, const std::vector<std::size_t>& map) {
  copy_rows(from.query.weight, to.query.weight, map);
  copy_rows(from.key.weight, to.key.weight, map);
  copy_rows(from.value.weight, to.value.weight, map);
  copy_rows(from.skip.weight, to.skip.weight, map);
  to.skip.bias.value = from.skip.bias.value;
  to.out.weight.value = from.out.weight.value;
}

}  // namespace

TEST(FusionMode, NamesRoundTrip) {
  for (FusionMode m : {FusionMode::kSA, FusionMode::kSEA, FusionMode::kSeadBasic, FusionMode::kSead})
    EXPECT_EQ(parse_fusion_mode(to_string(m)), m);
  EXPECT_THROW((void)parse_fusion_mode("SEADX"), Error);
}

TEST(FusionConfig, ConcatWidths) {
  FusionConfig c = small_config(FusionMode::kSA);
  EXPECT_EQ(c.concat_width(), 5u + 3u + 3u * 8u);
  c.mode = FusionMode::kSEA;
  EXPECT_EQ(c.concat_width(), 5u + 3u + 4u * 8u);
  c.mode = FusionMode::kSead;
  EXPECT_EQ(c.concat_width(), 3u + 5u * 8u);
}

TEST(ClipConditions, RejectsBadOneHot) {
  Rng rng(60);
  const FusionConfig cfg = small_config(FusionMode::kSead);
  ClipConditions c = random_conditions(cfg, 4, rng);
  c.validate();
  c.emotion_onehot[0] = 1.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Timestep, EncodingAtZero) {
  const DenseArray pe = sinusoidal_encoding(0, 16);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(pe[i], i % 2 == 0 ? 0.0 : 1.0);
}

TEST(Timestep, DistinctForEveryStep) {
  Rng rng(61);
  FusionModel model(small_config(FusionMode::kSead), rng);
  std::vector<DenseArray> enc;
  for (std::size_t t = 0; t < 1000; ++t) enc.push_back(model.time_mlp.forward(t));
  double closest = 1e300;
  for (std::size_t a = 0; a < enc.size(); ++a)
    for (std::size_t b = a + 1; b < enc.size(); ++b) closest = std::min(closest, numeric::max_abs_diff(enc[a], enc[b]));
  EXPECT_GT(closest, 0.0);
}

TEST(Timestep, GradientCheck) {
  Rng rng(62);
  FusionModel model(small_config(FusionMode::kSead), rng);
  const DenseArray w = random_array({8}, rng);
  auto loss = [&](bool backward) {
    TimestepEncoder::Cache cache;
    const double v = numeric::weighted_sum(model.time_mlp.forward(123, &cache), w);
    if (backward) model.time_mlp.backward(cache, w);
    return v;
  };
  for (auto* p : {&model.time_mlp.fc1.weight, &model.time_mlp.fc1.bias, &model.time_mlp.fc2.weight,
                  &model.time_mlp.fc2.bias})
    EXPECT_LT(numeric::finite_diff_check_param(*p, loss, 1e-5), 1e-6);
}

TEST(Disentangle, ZeroAudioAndDistinctStreams) {
  Rng rng(63);
  const FusionConfig cfg = small_config(FusionMode::kSead);
  FusionModel model(cfg, rng);
  const DisentangledAudio zero = disentangle_audio(model, DenseArray::matrix(6, cfg.audio_dim));
  EXPECT_EQ(zero.f_a_s.max_abs(), 0.0);
  EXPECT_EQ(zero.f_a_e.max_abs(), 0.0);
  EXPECT_EQ(zero.f_a_g.max_abs(), 0.0);
  const DisentangledAudio da = disentangle_audio(model, random_array({6, cfg.audio_dim}, rng));
  EXPECT_EQ(da.f_a_s.shape(), (numeric::Shape{6, 8}));
  EXPECT_GT(numeric::max_abs_diff(da.f_a_s, da.f_a_e), 0.0);
  EXPECT_GT(numeric::max_abs_diff(da.f_a_s, da.f_a_g), 0.0);
  EXPECT_GT(numeric::max_abs_diff(da.f_a_e, da.f_a_g), 0.0);
}

TEST(Enhance, MatchesConcatenateThenMatmul) {
  Rng rng(64);
  const FusionConfig cfg = small_config(FusionMode::kSead);
  FusionModel model(cfg, rng);
  model.enhance_style.bias.value = random_array({8}, rng);
  const DisentangledAudio da = disentangle_audio(model, random_array({6, cfg.audio_dim}, rng));
  const DenseArray f_s = random_array({8}, rng), f_e = random_array({8}, rng);
  const auto [s_h, e_h] = enhance_style_emotion(model, da, f_s, f_e);
  EXPECT_LT(numeric::max_abs_diff(s_h, affine_oracle(concat_oracle(da.f_a_s, f_s), model.enhance_style)), 1e-12);
  EXPECT_LT(numeric::max_abs_diff(e_h, affine_oracle(concat_oracle(da.f_a_e, f_e), model.enhance_emotion)), 1e-12);

  // Masked label with silent audio leaves only the bias.
  const DisentangledAudio silent = disentangle_audio(model, DenseArray::matrix(6, cfg.audio_dim));
  const auto [s0, e0] = enhance_style_emotion(model, silent, DenseArray::vector(8), DenseArray::vector(8));
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(s0(r, c), model.enhance_style.bias.value[c]);
}

TEST(FuseSe, OracleAndBiasRows) {
  Rng rng(65);
  FusionModel model(small_config(FusionMode::kSead), rng);
  model.fuse_style_emotion.bias.value = random_array({8}, rng);
  const DenseArray a = random_array({5, 8}, rng), b = random_array({5, 8}, rng);
  EXPECT_LT(numeric::max_abs_diff(fuse_se(model, a, b), affine_oracle(numeric::concat_cols({a, b}), model.fuse_style_emotion)),
            1e-12);
  const DenseArray zero = fuse_se(model, DenseArray::matrix(5, 8), DenseArray::matrix(5, 8));
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(zero(r, c), model.fuse_style_emotion.bias.value[c]);
}

TEST(CrossAttend, SingleFrameAndSymmetry) {
  Rng rng(66);
  const DenseArray q1 = random_array({1, 8}, rng), k1 = random_array({1, 8}, rng);
  EXPECT_LT(numeric::max_abs_diff(cross_attend_audio(q1, k1), q1 + k1), 1e-15);

  const DenseArray q = random_array({5, 8}, rng);
  const DenseArray same = numeric::broadcast_rows(random_array({8}, rng), 5);
  const DenseArray attn = cross_attend_audio(q, same) - q;
  for (std::size_t r = 1; r < 5; ++r)
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(attn(r, c), attn(0, c), 1e-14);

  const DenseArray k = random_array({5, 8}, rng);
  DenseArray oracle = DenseArray::matrix(5, 8);
  for (std::size_t i = 0; i < 5; ++i) {
    std::vector<double> w(5);
    double total = 0;
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0;
      for (std::size_t c = 0; c < 8; ++c) s += q(i, c) * k(j, c);
      w[j] = std::exp(s / std::sqrt(8.0));
      total += w[j];
    }
    for (std::size_t c = 0; c < 8; ++c) {
      oracle(i, c) = q(i, c);
      for (std::size_t j = 0; j < 5; ++j) oracle(i, c) += w[j] / total * k(j, c);
    }
  }
  EXPECT_LT(numeric::max_abs_diff(cross_attend_audio(q, k), oracle), 1e-12);
}

TEST(CrossLocal, WindowCoveringClipIsFullAttention) {
  Rng rng(67);
  FusionModel model(small_config(FusionMode::kSA), rng);
  const DenseArray x = random_array({7, model.config().concat_width()}, rng);
  CrossLocalAttention local = model.local;
  local.window = 100;
  DenseArray expect =
      numeric::matmul(numeric::scaled_dot_attention(local.query.forward(x), local.key.forward(x), local.value.forward(x)),
                      local.out.weight.value);
  expect += local.skip.forward(x);
  EXPECT_LT(numeric::max_abs_diff(local.forward(x), expect), 1e-12);
}

TEST(CrossLocal, WindowOnePassesValuesThrough) {
  Rng rng(68);
  FusionModel model(small_config(FusionMode::kSA), rng);
  const DenseArray x = random_array({5, model.config().concat_width()}, rng);
  CrossLocalAttention local = model.local;
  local.window = 1;
  DenseArray expect = numeric::matmul(local.value.forward(x), local.out.weight.value);
  expect += local.skip.forward(x);
  EXPECT_LT(numeric::max_abs_diff(local.forward(x), expect), 1e-12);
}

TEST(CrossLocal, Locality) {
  Rng rng(69);
  FusionModel model(small_config(FusionMode::kSA), rng);
  const std::size_t frames = 11;
  const DenseArray x = random_array({frames, model.config().concat_width()}, rng);
  for (std::size_t window : {1u, 2u, 3u, 4u, 5u, 11u}) {
    CrossLocalAttention local = model.local;
    local.window = window;
    const DenseArray y = local.forward(x);
    for (std::size_t k = 0; k < frames; ++k) {
      DenseArray x2 = x;
      for (std::size_t c = 0; c < x.cols(); ++c) x2(k, c) += 0.5;
      const DenseArray y2 = local.forward(x2);
      for (std::size_t r = 0; r < frames; ++r) {
        if (r / window == k / window) continue;
        for (std::size_t c = 0; c < y.cols(); ++c) ASSERT_EQ(y(r, c), y2(r, c)) << window << " " << k << " " << r;
      }
    }
  }
}

TEST(Mask, EdgeProbabilities) {
  Rng rng(70);
  const DenseArray s = random_array({8}, rng), e = random_array({8}, rng);
  const MaskedConditions keep = mask_conditions(s, e, 0.0, rng);
  EXPECT_EQ(keep.f_s, s);
  EXPECT_EQ(keep.f_e, e);
  const MaskedConditions drop = mask_conditions(s, e, 1.0, rng);
  EXPECT_EQ(drop.f_s.max_abs(), 0.0);
  EXPECT_EQ(drop.f_e.max_abs(), 0.0);
  EXPECT_THROW((void)mask_conditions(s, e, 1.5, rng), Error);
}

TEST(Mask, EmpiricalRate) {
  Rng rng(71);
  const DenseArray s = DenseArray::vector(4, 1.0), e = DenseArray::vector(4, 1.0);
  for (double p : {0.1, 0.5}) {
    const int n = 10000;
    int style = 0, emotion = 0, both = 0;
    for (int i = 0; i < n; ++i) {
      const MaskedConditions m = mask_conditions(s, e, p, rng);
      style += m.style_masked;
      emotion += m.emotion_masked;
      both += m.style_masked && m.emotion_masked;
      EXPECT_EQ(m.f_s.max_abs(), m.style_masked ? 0.0 : 1.0);
    }
    const double sigma = std::sqrt(p * (1 - p) / n);
    EXPECT_LT(std::abs(style / double(n) - p), 3 * sigma);
    EXPECT_LT(std::abs(emotion / double(n) - p), 3 * sigma);
    const double sigma_both = std::sqrt(p * p * (1 - p * p) / n);
    EXPECT_LT(std::abs(both / double(n) - p * p), 3 * sigma_both);
  }
}

TEST(Fusion, AllModesProduceFrameByD) {
  Rng rng(72);
  for (FusionMode m : {FusionMode::kSA, FusionMode::kSEA, FusionMode::kSeadBasic, FusionMode::kSead}) {
    const FusionConfig cfg = small_config(m);
    FusionModel model(cfg, rng);
    const ClipConditions c = random_conditions(cfg, 9, rng);
    const ConditionBundle b = model.encode(c, random_array({9, cfg.gesture_dim}, rng), 17);
    const FusionOutput out = fusion_forward(model, b);
    EXPECT_EQ(out.f_fuse.shape(), (numeric::Shape{9, 8})) << to_string(m);
    EXPECT_EQ(out.disentangled.has_value(), uses_disentanglement(m));
    EXPECT_EQ(out.f_fuse, fusion_forward(model, b).f_fuse);
  }
}

TEST(Fusion, MissingEmotionIsContractError) {
  Rng rng(73);
  const FusionConfig cfg = small_config(FusionMode::kSEA);
  FusionModel model(cfg, rng);
  ConditionBundle b = model.encode(random_conditions(cfg, 4, rng), random_array({4, cfg.gesture_dim}, rng), 3);
  b.f_e = DenseArray();
  try {
    (void)model.fuse(b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kContract);
  }
  FusionModel sa(small_config(FusionMode::kSA), rng);
  EXPECT_NO_THROW((void)sa.fuse(b));
}

TEST(Fusion, SeaWithZeroEmotionEqualsSa) {
  Rng rng(74);
  const FusionConfig sa_cfg = small_config(FusionMode::kSA);
  const FusionConfig sea_cfg = small_config(FusionMode::kSEA);
  FusionModel sa(sa_cfg, rng);
  FusionModel sea(sea_cfg, rng);
  // SA columns [a, text, S | f_g, T] map into SEA columns around the extra E slot.
  const std::size_t split = sa_cfg.audio_dim + sa_cfg.text_dim + sa_cfg.d;
  copy_local(sa.local, sea.local, iota_map(sa_cfg.concat_width(), sa_cfg.d, split));
  const ClipConditions c = random_conditions(sa_cfg, 10, rng);
  ConditionBundle b = sa.encode(c, random_array({10, sa_cfg.gesture_dim}, rng), 40);
  const DenseArray y_sa = sa.fuse(b).f_fuse;
  b.f_e = DenseArray::vector(sa_cfg.d);
  EXPECT_LT(numeric::max_abs_diff(sea.fuse(b).f_fuse, y_sa), 1e-12);
  b.f_e = random_array({sa_cfg.d}, rng);
  EXPECT_GT(numeric::max_abs_diff(sea.fuse(b).f_fuse, y_sa), 1e-6);
}

TEST(Fusion, SeadWithConfiguredWeightsReducesToSea) {
  Rng rng(75);
  FusionConfig sea_cfg = small_config(FusionMode::kSEA);
  sea_cfg.audio_dim = sea_cfg.d;  // lets to_gesture be the identity
  FusionConfig sead_cfg = sea_cfg;
  sead_cfg.mode = FusionMode::kSead;
  ASSERT_EQ(sea_cfg.concat_width(), sead_cfg.concat_width());
  FusionModel sea(sea_cfg, rng);
  FusionModel sead(sead_cfg, rng);
  const std::size_t d = sead_cfg.d;
  // Silent style/emotion audio streams, identity gesture stream, enhanced
  // features that copy the labels, and a zero f'_se (so the cross attention
  // adds nothing beyond its residual).
  for (auto* layer : {&sead.to_style, &sead.to_emotion, &sead.fuse_style_emotion}) {
    layer->weight.value.fill(0.0);
    layer->bias.value.fill(0.0);
  }
  sead.to_gesture.weight.value = DenseArray::identity(d);
  for (auto* layer : {&sead.enhance_style, &sead.enhance_emotion}) {
    layer->weight.value.fill(0.0);
    layer->bias.value.fill(0.0);
    for (std::size_t i = 0; i < d; ++i) layer->weight.value(d + i, i) = 1.0;
  }
  std::vector<std::size_t> same(sea_cfg.concat_width());
  for (std::size_t i = 0; i < same.size(); ++i) same[i] = i;
  copy_local(sea.local, sead.local, same);

  const ClipConditions c = random_conditions(sea_cfg, 10, rng);
  ConditionBundle b = sea.encode(c, random_array({10, sea_cfg.gesture_dim}, rng), 40);
  EXPECT_LT(numeric::max_abs_diff(sead.fuse(b).f_fuse, sea.fuse(b).f_fuse), 1e-12);
  b.f_s = DenseArray::vector(d);
  b.f_e = DenseArray::vector(d);
  EXPECT_LT(numeric::max_abs_diff(sead.fuse(b).f_fuse, sea.fuse(b).f_fuse), 1e-12);
}

TEST(StyleEmotionLoss, ValuesAndOracle) {
  Rng rng(76);
  const DenseArray f_s = random_array({8}, rng), f_e = random_array({8}, rng);
  DisentangledAudio aligned{numeric::broadcast_rows(f_s, 4), numeric::broadcast_rows(f_e, 4), DenseArray::matrix(4, 8)};
  const StyleEmotionLosses zero = style_emotion_losses(aligned, f_s, f_e);
  EXPECT_EQ(zero.style, 0.0);
  EXPECT_EQ(zero.emotion, 0.0);

  DisentangledAudio shifted{numeric::broadcast_rows(f_s, 4) + DenseArray::matrix(4, 8, 1.0),
                            numeric::broadcast_rows(f_e, 4) - DenseArray::matrix(4, 8, 1.0), DenseArray::matrix(4, 8)};
  const StyleEmotionLosses unit = style_emotion_losses(shifted, f_s, f_e);
  EXPECT_NEAR(unit.style, 1.0, 1e-15);
  EXPECT_NEAR(unit.emotion, 1.0, 1e-15);

  DisentangledAudio rnd{random_array({4, 8}, rng), random_array({4, 8}, rng), DenseArray::matrix(4, 8)};
  const StyleEmotionLosses r = style_emotion_losses(rnd, f_s, f_e);
  double s = 0, e = 0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 8; ++c) {
      s += std::abs(rnd.f_a_s(i, c) - f_s[c]);
      e += std::abs(rnd.f_a_e(i, c) - f_e[c]);
    }
  EXPECT_NEAR(r.style, s / 32, 1e-15);
  EXPECT_NEAR(r.emotion, e / 32, 1e-15);
  EXPECT_GE(r.style, 0.0);
}

// Gradient of weighted f_fuse plus L_s + L_e with respect to every fusion
// parameter and the raw text features, for each mode.
TEST(Fusion, GradientCheckAllModes) {
  for (FusionMode m : {FusionMode::kSA, FusionMode::kSEA, FusionMode::kSeadBasic, FusionMode::kSead}) {
    Rng rng(77);
    const FusionConfig cfg = small_config(m);
    FusionModel model(cfg, rng);
    ClipConditions c = random_conditions(cfg, 6, rng);
    const DenseArray x_t = random_array({6, cfg.gesture_dim}, rng);
    const DenseArray w = random_array({6, cfg.d}, rng);
    DenseArray text_grad;
    auto loss = [&](bool backward) {
      FusionModel::EncodeCache ec;
      FusionModel::FuseCache fc;
      const ConditionBundle b = model.encode(c, x_t, 42, &ec);
      const FusionOutput out = model.fuse(b, &fc);
      double v = numeric::weighted_sum(out.f_fuse, w);
      StyleEmotionLosses se;
      if (out.disentangled) {
        se = style_emotion_losses(*out.disentangled, b.f_s, b.f_e);
        v += se.style + se.emotion;
      }
      if (backward) {
        FusionModel::BundleGrad g = model.fuse_backward(fc, w, se.d_audio_style, se.d_audio_emotion);
        if (out.disentangled) {
          g.f_s += se.d_style;
          g.f_e += se.d_emotion;
        }
        model.encode_backward(ec, g);
        text_grad = g.f_text;
      }
      return v;
    };
    ParameterSet params;
    model.register_params(params, "");
    for (const auto& [name, p] : params.entries()) {
      params.zero_grad();
      EXPECT_LT(numeric::finite_diff_check_param(*p, loss, 1e-5), 1e-4) << to_string(m) << " " << name;
    }
    numeric::DifferentiableOp text{[&](const DenseArray& x) {
                                     c.text = x;
                                     return loss(false);
                                   },
                                   [&](const DenseArray& x) {
                                     c.text = x;
                                     params.zero_grad();
                                     (void)loss(true);
                                     return text_grad;
                                   }};
    const DenseArray start = c.text;
    EXPECT_LT(numeric::finite_diff_check(text, start, 1e-5), 1e-4) << to_string(m);
  }
}
