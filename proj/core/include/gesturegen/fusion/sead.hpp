#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gesturegen/numeric/layers.hpp"
#include "gesturegen/numeric/ops.hpp"

namespace gesturegen::fusion {

using numeric::DenseArray;
using numeric::Linear;

inline constexpr std::size_t kEmotionClasses = 8;

/// Fusion ladder, weakest to strongest.
enum class FusionMode { kSA, kSEA, kSeadBasic, kSead };

std::string_view to_string(FusionMode mode);
FusionMode parse_fusion_mode(std::string_view text);
bool uses_emotion(FusionMode mode);
bool uses_disentanglement(FusionMode mode);

/// Raw per-clip inputs as they arrive from feature and label files.
struct ClipConditions {
  DenseArray audio;           // F x audio_dim
  DenseArray text;            // F x text_dim
  DenseArray style_onehot;    // n_styles
  DenseArray emotion_onehot;  // kEmotionClasses

  std::size_t frames() const { return audio.rows(); }
  void validate() const;
};

DenseArray one_hot(std::size_t index, std::size_t classes);

/// Encoded per-clip features. f_s, f_e and f_t are clip-level vectors of
/// width d and are broadcast along frames inside the fusion.
struct ConditionBundle {
  DenseArray f_a;     // F x audio_dim (raw audio features)
  DenseArray f_text;  // F x text_dim (raw text features)
  DenseArray f_s;     // d
  DenseArray f_e;     // d
  DenseArray f_t;     // d
  DenseArray f_g;     // F x d

  std::size_t frames() const { return f_g.rows(); }
};

struct DisentangledAudio {
  DenseArray f_a_s;
  DenseArray f_a_e;
  DenseArray f_a_g;
};

struct FusionOutput {
  DenseArray f_fuse;
  DenseArray f_s_h;
  DenseArray f_e_h;
  DenseArray f_prime_se;
  std::optional<DisentangledAudio> disentangled;
};

struct FusionConfig {
  FusionMode mode = FusionMode::kSead;
  std::size_t d = 64;
  std::size_t audio_dim = 32;
  std::size_t text_dim = 16;
  std::size_t gesture_dim = 75;
  std::size_t n_styles = 4;
  std::size_t window = 30;
  double init_std = 0.02;

  std::size_t concat_width() const;
  void validate() const;
};

/// Sinusoidal position encoding: even entries sin(t w_i), odd entries cos(t w_i)
/// with w_i = 10000^(-2i/d).
DenseArray sinusoidal_encoding(std::size_t t, std::size_t d);

struct TimestepEncoder {
  Linear fc1;
  Linear fc2;

  struct Cache {
    DenseArray pe;
    DenseArray hidden_pre;
    DenseArray hidden;
  };
  DenseArray forward(std::size_t t, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const DenseArray& df_t);
};

/// Windowed self-attention over frames followed by a projection to d, with a
/// linear skip path from the input: out = Attn_w(xWq, xWk, xWv) Wo + x Ws + b.
struct CrossLocalAttention {
  Linear query;
  Linear key;
  Linear value;
  Linear out;
  Linear skip;
  std::size_t window = 30;

  struct Cache {
    DenseArray x;
    std::vector<numeric::AttentionCache> windows;
    DenseArray attended;
  };
  DenseArray forward(const DenseArray& x, Cache* cache = nullptr) const;
  DenseArray backward(const Cache& cache, const DenseArray& dy);
};

/// All trainable weights of the condition encoders and the fusion module.
class FusionModel {
 public:
  FusionModel() = default;
  FusionModel(const FusionConfig& config, numeric::Rng& rng);

  const FusionConfig& config() const { return config_; }
  FusionMode mode() const { return config_.mode; }

  struct EncodeCache {
    ClipConditions conditions;
    DenseArray x_t;
    TimestepEncoder::Cache time;
  };
  ConditionBundle encode(const ClipConditions& conditions, const DenseArray& x_t, std::size_t t,
                         EncodeCache* cache = nullptr) const;

  struct FuseCache {
    ConditionBundle bundle;
    DenseArray cat_style;
    DenseArray cat_emotion;
    DenseArray cat_se;
    DenseArray audio_in;  // f_a_g before the cross-attention residual
    numeric::AttentionCache cross;
    DenseArray concat;
    CrossLocalAttention::Cache local;
    FusionOutput output;
  };
  FusionOutput fuse(const ConditionBundle& bundle, FuseCache* cache = nullptr) const;

  struct BundleGrad {
    DenseArray f_text;
    DenseArray f_s;
    DenseArray f_e;
    DenseArray f_t;
    DenseArray f_g;
  };
  /// d_audio_style / d_audio_emotion are extra upstream gradients on the
  /// disentangled audio streams (from the style and emotion losses); pass
  /// empty arrays when not needed.
  BundleGrad fuse_backward(const FuseCache& cache, const DenseArray& d_fuse,
                           const DenseArray& d_audio_style, const DenseArray& d_audio_emotion);
  void encode_backward(const EncodeCache& cache, const BundleGrad& grad);

  void register_params(numeric::ParameterSet& set, const std::string& prefix);

  TimestepEncoder time_mlp;
  Linear gesture_in;
  Linear style_embed;
  Linear emotion_embed;
  Linear to_style;
  Linear to_emotion;
  Linear to_gesture;
  Linear enhance_style;
  Linear enhance_emotion;
  Linear fuse_style_emotion;
  CrossLocalAttention local;

 private:
  FusionConfig config_;
};

DisentangledAudio disentangle_audio(const FusionModel& model, const DenseArray& f_a);

/// f_s_h = Linear(Cat(f_a_s, f_s)), f_e_h = Linear(Cat(f_a_e, f_e)), per frame.
std::pair<DenseArray, DenseArray> enhance_style_emotion(const FusionModel& model,
                                                        const DisentangledAudio& audio,
                                                        const DenseArray& f_s, const DenseArray& f_e);

DenseArray fuse_se(const FusionModel& model, const DenseArray& f_s_h, const DenseArray& f_e_h);

/// Attention(Q = f_a_g, K = V = f'_se) plus the residual f_a_g.
DenseArray cross_attend_audio(const DenseArray& f_a_g, const DenseArray& f_prime_se,
                              numeric::AttentionCache* cache = nullptr);

DenseArray cross_local_attention(const FusionModel& model, const DenseArray& x);

struct MaskedConditions {
  DenseArray f_s;
  DenseArray f_e;
  bool style_masked = false;
  bool emotion_masked = false;
};
/// Independently zeroes f_s and f_e, each with probability p.
MaskedConditions mask_conditions(const DenseArray& f_s, const DenseArray& f_e, double p,
                                 numeric::Rng& rng);

FusionOutput fusion_forward(const FusionModel& model, const ConditionBundle& bundle);

struct StyleEmotionLosses {
  double style = 0.0;
  double emotion = 0.0;
  DenseArray d_audio_style;    // dL_s / df_a_s
  DenseArray d_audio_emotion;  // dL_e / df_a_e
  DenseArray d_style;          // dL_s / df_s
  DenseArray d_emotion;        // dL_e / df_e
};
/// Mean absolute differences |f_a_s - f_s| and |f_a_e - f_e| with the label
/// features broadcast along frames.
StyleEmotionLosses style_emotion_losses(const DisentangledAudio& audio, const DenseArray& f_s,
                                        const DenseArray& f_e);

}  // namespace gesturegen::fusion
