#include "gesturegen/harness/config.hpp"

#include <charconv>
#include <functional>

#include <fmt/format.h>

#include "gesturegen/error.hpp"

namespace gesturegen::harness {

namespace {

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct Binding {
  std::string key;
  Setter set;
  Getter get;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  fail(ErrorKind::kConfig, fmt::format("{}: '{}' is not {}", key, value, expected));
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

double parse_f64(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::string fmt_f64(double v) { return fmt::format("{:.17g}", v); }
std::string fmt_bool(bool v) { return v ? "true" : "false"; }

template <class T, class Access>
Binding size_key(std::string key, Access access) {
  return {key,
          [access, key](ExperimentConfig& c, const std::string& v) { access(c) = static_cast<T>(parse_u64(key, v)); },
          [access](const ExperimentConfig& c) { return std::to_string(access(const_cast<ExperimentConfig&>(c))); }};
}

template <class Access>
Binding real_key(std::string key, Access access) {
  return {key, [access, key](ExperimentConfig& c, const std::string& v) { access(c) = parse_f64(key, v); },
          [access](const ExperimentConfig& c) { return fmt_f64(access(const_cast<ExperimentConfig&>(c))); }};
}

template <class Access>
Binding bool_key(std::string key, Access access) {
  return {key, [access, key](ExperimentConfig& c, const std::string& v) { access(c) = parse_bool(key, v); },
          [access](const ExperimentConfig& c) { return fmt_bool(access(const_cast<ExperimentConfig&>(c))); }};
}

template <class Access>
Binding string_key(std::string key, Access access) {
  return {key, [access](ExperimentConfig& c, const std::string& v) { access(c) = v; },
          [access](const ExperimentConfig& c) { return access(const_cast<ExperimentConfig&>(c)); }};
}

#define GG_FIELD(expr) [](ExperimentConfig & c) -> auto& { return expr; }

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = {
      string_key("preset", GG_FIELD(c.preset)),
      {"model.mode", [](ExperimentConfig& c, const std::string& v) { c.mode = fusion::parse_fusion_mode(v); },
       [](const ExperimentConfig& c) { return std::string(fusion::to_string(c.mode)); }},
      size_key<std::size_t>("model.layers", GG_FIELD(c.denoiser.layers)),
      bool_key("model.attention", GG_FIELD(c.denoiser.use_attention)),
      bool_key("model.mamba", GG_FIELD(c.denoiser.use_mamba)),
      bool_key("model.conv", GG_FIELD(c.denoiser.use_conv)),
      bool_key("model.residual", GG_FIELD(c.denoiser.residual)),
      size_key<std::size_t>("model.d", GG_FIELD(c.denoiser.d)),
      size_key<std::size_t>("model.state_dim", GG_FIELD(c.denoiser.mamba.state)),
      size_key<std::size_t>("model.expand", GG_FIELD(c.denoiser.mamba.expand)),
      size_key<std::size_t>("model.conv_width", GG_FIELD(c.denoiser.mamba.conv_width)),
      size_key<std::size_t>("model.dt_rank", GG_FIELD(c.denoiser.mamba.dt_rank)),
      size_key<std::size_t>("model.block_conv_width", GG_FIELD(c.denoiser.conv_width)),
      size_key<std::size_t>("model.window", GG_FIELD(c.window)),
      real_key("model.init_std", GG_FIELD(c.denoiser.init_std)),
      size_key<std::size_t>("diffusion.steps", GG_FIELD(c.diffusion_steps)),
      real_key("diffusion.beta_start", GG_FIELD(c.beta_start)),
      real_key("diffusion.beta_end", GG_FIELD(c.beta_end)),
      size_key<std::size_t>("train.steps", GG_FIELD(c.train.steps)),
      size_key<std::size_t>("train.batch", GG_FIELD(c.train.batch)),
      real_key("train.lr", GG_FIELD(c.train.optim.lr)),
      real_key("train.weight_decay", GG_FIELD(c.train.optim.weight_decay)),
      real_key("train.beta1", GG_FIELD(c.train.optim.beta1)),
      real_key("train.beta2", GG_FIELD(c.train.optim.beta2)),
      real_key("train.eps", GG_FIELD(c.train.optim.eps)),
      size_key<std::uint64_t>("train.seed", GG_FIELD(c.train.seed)),
      real_key("train.mask_prob", GG_FIELD(c.train.mask_prob)),
      real_key("train.huber_delta", GG_FIELD(c.train.huber_delta)),
      size_key<std::size_t>("train.checkpoint_every", GG_FIELD(c.checkpoint_every)),
      size_key<std::size_t>("sample.n", GG_FIELD(c.sample_n)),
      size_key<std::uint64_t>("sample.seed", GG_FIELD(c.sample_seed)),
      real_key("eval.sigma", GG_FIELD(c.eval.sigma)),
      real_key("eval.threshold", GG_FIELD(c.eval.threshold)),
      size_key<std::size_t>("eval.n_diversity", GG_FIELD(c.eval.n_diversity)),
      size_key<std::size_t>("eval.extractor_steps", GG_FIELD(c.eval.extractor_steps)),
      real_key("eval.extractor_lr", GG_FIELD(c.eval.extractor_lr)),
      size_key<std::size_t>("eval.latent", GG_FIELD(c.eval.latent)),
      size_key<std::uint64_t>("eval.seed", GG_FIELD(c.eval.seed)),
      string_key("eval.extractor_cache", GG_FIELD(c.eval.extractor_cache)),
      size_key<std::size_t>("ablate.steps", GG_FIELD(c.ablate_steps)),
      string_key("data.dir", GG_FIELD(c.data_dir)),
      size_key<std::size_t>("data.synthetic.clips", GG_FIELD(c.synthetic.n_clips)),
      size_key<std::size_t>("data.synthetic.frames", GG_FIELD(c.synthetic.frames)),
      size_key<std::size_t>("data.synthetic.joints", GG_FIELD(c.synthetic.joints)),
      size_key<std::size_t>("data.synthetic.styles", GG_FIELD(c.synthetic.n_styles)),
      size_key<std::size_t>("data.synthetic.emotions", GG_FIELD(c.synthetic.n_emotions)),
      size_key<std::size_t>("data.synthetic.audio_dim", GG_FIELD(c.synthetic.audio_dim)),
      size_key<std::size_t>("data.synthetic.text_dim", GG_FIELD(c.synthetic.text_dim)),
      real_key("data.synthetic.fps", GG_FIELD(c.synthetic.fps)),
      real_key("data.synthetic.noise", GG_FIELD(c.synthetic.noise)),
      size_key<std::uint64_t>("data.synthetic.seed", GG_FIELD(c.synthetic.seed)),
  };
  return table;
}

#undef GG_FIELD

}  // namespace

void SyntheticSpec::validate() const {
  if (n_clips == 0) fail(ErrorKind::kConfig, "data.synthetic.clips must be >= 1");
  if (frames < 3) fail(ErrorKind::kConfig, "data.synthetic.frames must be >= 3");
  if (joints < 2) fail(ErrorKind::kConfig, "data.synthetic.joints must be >= 2");
  if (n_styles == 0) fail(ErrorKind::kConfig, "data.synthetic.styles must be >= 1");
  if (n_emotions != fusion::kEmotionClasses)
    fail(ErrorKind::kConfig, fmt::format("data.synthetic.emotions must be {}", fusion::kEmotionClasses));
  if (audio_dim == 0 || text_dim == 0) fail(ErrorKind::kConfig, "feature widths must be positive");
  if (!(fps > 0.0)) fail(ErrorKind::kConfig, "data.synthetic.fps must be positive");
  if (!(noise >= 0.0)) fail(ErrorKind::kConfig, "data.synthetic.noise must be >= 0");
}

void ExperimentConfig::validate() const {
  denoiser.validate();
  if (window == 0) fail(ErrorKind::kConfig, "model.window must be >= 1");
  if (diffusion_steps == 0) fail(ErrorKind::kConfig, "diffusion.steps must be >= 1");
  if (train.batch == 0) fail(ErrorKind::kConfig, "train.batch must be >= 1");
  if (!(train.optim.lr > 0.0)) fail(ErrorKind::kConfig, "train.lr must be positive");
  if (!(train.mask_prob >= 0.0 && train.mask_prob <= 1.0)) fail(ErrorKind::kConfig, "train.mask_prob must lie in [0, 1]");
  if (!(train.huber_delta > 0.0)) fail(ErrorKind::kConfig, "train.huber_delta must be positive");
  if (!(eval.sigma > 0.0)) fail(ErrorKind::kConfig, "eval.sigma must be positive");
  if (eval.n_diversity < 2) fail(ErrorKind::kConfig, "eval.n_diversity must be >= 2");
  if (eval.latent == 0) fail(ErrorKind::kConfig, "eval.latent must be >= 1");
  synthetic.validate();
}

io::KeyValues ExperimentConfig::to_key_values() const {
  io::KeyValues out;
  for (const auto& b : bindings()) out[b.key] = b.get(*this);
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& b : bindings()) keys.push_back(b.key);
  return keys;
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  if (name == "toy") return c;
  if (name == "paper") {
    c.preset = "paper";
    c.denoiser.d = 256;
    c.denoiser.layers = 8;
    c.diffusion_steps = 1000;
    c.beta_start = 1e-4;
    c.beta_end = 0.02;
    c.train.steps = 40000;
    c.train.batch = 400;
    c.train.optim.lr = 3e-5;
    c.checkpoint_every = 1000;
    c.synthetic.frames = 300;
    c.synthetic.n_clips = 400;
    c.eval.extractor_steps = 2000;
    return c;
  }
  fail(ErrorKind::kConfig, fmt::format("unknown preset '{}' (expected toy or paper)", name));
}

void apply_overrides(ExperimentConfig& config, const io::KeyValues& values) {
  const auto& table = bindings();
  for (const auto& [key, value] : values) {
    auto it = std::find_if(table.begin(), table.end(), [&](const Binding& b) { return b.key == key; });
    if (it == table.end()) fail(ErrorKind::kConfig, fmt::format("unknown config key '{}'", key));
    it->set(config, value);
  }
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path, const std::optional<std::string>& preset) {
  io::KeyValues file;
  if (path) {
    if (!std::filesystem::exists(*path)) fail(ErrorKind::kConfig, fmt::format("config file {} not found", path->string()));
    file = io::read_key_values(*path);
  }
  std::string name = "toy";
  if (auto it = file.find("preset"); it != file.end()) name = it->second;
  if (preset) name = *preset;
  ExperimentConfig c = preset_config(name);
  file.erase("preset");
  apply_overrides(c, file);
  c.validate();
  return c;
}

}  // namespace gesturegen::harness
