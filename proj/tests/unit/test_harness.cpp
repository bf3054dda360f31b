#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "gesturegen/error.hpp"
#include "gesturegen/harness/config.hpp"
#include "gesturegen/harness/dataset.hpp"
#include "gesturegen/harness/experiment.hpp"
#include "gesturegen/harness/synthetic.hpp"
#include "gesturegen/io/feature_file.hpp"
#include "gesturegen/metrics/metrics.hpp"
#include "gesturegen/motion/clip_ops.hpp"
#include "test_support.hpp"

using namespace gesturegen;
using namespace gesturegen::harness;
namespace fs = std::filesystem;
using gesturegen::testing::TempDir;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kContract;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Small enough that a full train/sample/eval cycle runs in seconds.
ExperimentConfig tiny_config() {
  ExperimentConfig c = preset_config("toy");
  apply_overrides(c, {{"data.synthetic.clips", "4"},
                      {"data.synthetic.frames", "24"},
                      {"data.synthetic.audio_dim", "6"},
                      {"data.synthetic.text_dim", "4"},
                      {"model.d", "16"},
                      {"model.layers", "2"},
                      {"model.state_dim", "4"},
                      {"model.window", "8"},
                      {"diffusion.steps", "10"},
                      {"train.steps", "6"},
                      {"train.batch", "2"},
                      {"train.checkpoint_every", "3"},
                      {"eval.extractor_steps", "20"},
                      {"eval.latent", "8"},
                      {"ablate.steps", "2"}});
  c.validate();
  return c;
}

class HarnessData : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("harness_data");
    gen_synthetic_dataset(tiny_config().synthetic, dir_->path() / "data");
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static fs::path data() { return dir_->path() / "data"; }
  static TempDir* dir_;
};
TempDir* HarnessData::dir_ = nullptr;

}  // namespace

TEST(Config, PresetsAndKeys) {
  const ExperimentConfig toy = preset_config("toy");
  EXPECT_EQ(toy.denoiser.d, 64u);
  EXPECT_EQ(toy.denoiser.layers, 8u);
  EXPECT_EQ(toy.diffusion_steps, 100u);
  EXPECT_DOUBLE_EQ(toy.train.optim.lr, 1e-3);
  EXPECT_EQ(toy.synthetic.n_clips, 16u);
  EXPECT_EQ(toy.synthetic.frames, 60u);
  const ExperimentConfig full = preset_config("paper");
  EXPECT_EQ(full.denoiser.d, 256u);
  EXPECT_EQ(full.diffusion_steps, 1000u);
  EXPECT_DOUBLE_EQ(full.beta_start, 1e-4);
  EXPECT_DOUBLE_EQ(full.beta_end, 0.02);
  EXPECT_DOUBLE_EQ(full.train.optim.lr, 3e-5);
  EXPECT_EQ(full.train.steps, 40000u);
  EXPECT_EQ(full.train.batch, 400u);
  EXPECT_EQ(full.synthetic.frames, 300u);
  EXPECT_EQ(kind_of([] { (void)preset_config("huge"); }), ErrorKind::kConfig);

  const auto keys = config_keys();
  const auto kv = toy.to_key_values();
  EXPECT_EQ(keys.size(), kv.size());
  for (const auto& k : keys) EXPECT_TRUE(kv.count(k)) << k;
}

TEST(Config, OverridesRoundTrip) {
  ExperimentConfig c = preset_config("toy");
  apply_overrides(c, {{"model.mode", "SA"}, {"train.lr", "0.5"}, {"model.attention", "off"}, {"sample.n", "3"}});
  EXPECT_EQ(c.mode, fusion::FusionMode::kSA);
  EXPECT_DOUBLE_EQ(c.train.optim.lr, 0.5);
  EXPECT_FALSE(c.denoiser.use_attention);
  EXPECT_EQ(c.sample_n, 3u);
  ExperimentConfig again = preset_config("toy");
  apply_overrides(again, c.to_key_values());
  EXPECT_EQ(again.to_key_values(), c.to_key_values());
}

TEST(Config, Errors) {
  ExperimentConfig c = preset_config("toy");
  try {
    apply_overrides(c, {{"model.colour", "red"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    EXPECT_NE(std::string(e.what()).find("model.colour"), std::string::npos);
  }
  EXPECT_EQ(kind_of([&] { apply_overrides(c, {{"train.steps", "-1"}}); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([&] { apply_overrides(c, {{"train.lr", "fast"}}); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([&] { apply_overrides(c, {{"model.conv", "maybe"}}); }), ErrorKind::kConfig);
  ExperimentConfig bad = preset_config("toy");
  bad.train.mask_prob = 2.0;
  EXPECT_EQ(kind_of([&] { bad.validate(); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([] { (void)load_config(fs::path("/nonexistent/cfg.txt"), std::nullopt); }), ErrorKind::kConfig);
}

TEST(Config, FileWithPresetKey) {
  TempDir dir("cfg");
  io::write_text(dir / "c.txt", "preset=paper\ntrain.steps=7\n");
  const ExperimentConfig c = load_config(dir / "c.txt", std::nullopt);
  EXPECT_EQ(c.preset, "paper");
  EXPECT_EQ(c.denoiser.d, 256u);
  EXPECT_EQ(c.train.steps, 7u);
  const ExperimentConfig forced = load_config(dir / "c.txt", std::string("toy"));
  EXPECT_EQ(forced.denoiser.d, 64u);
  EXPECT_EQ(forced.train.steps, 7u);
}

TEST(Synthetic, DefaultCorpusShape) {
  TempDir dir("synth");
  gen_synthetic_dataset(SyntheticSpec{}, dir / "d");
  std::size_t bvh = 0;
  for (const auto& e : fs::directory_iterator(dir / "d")) bvh += e.path().extension() == ".bvh";
  EXPECT_EQ(bvh, 16u);
  const Dataset ds = load_dataset(dir / "d");
  EXPECT_EQ(ds.clips.size(), 16u);
  EXPECT_EQ(ds.frames(), 60u);
  EXPECT_EQ(ds.skeleton.joint_count(), 8u);
  EXPECT_EQ(ds.n_emotions, fusion::kEmotionClasses);
  for (const auto& c : ds.clips) EXPECT_FALSE(c.onsets.empty()) << c.name;
  EXPECT_EQ(kind_of([&] { gen_synthetic_dataset(SyntheticSpec{}, dir / "d"); }), ErrorKind::kDataset);
}

TEST(Synthetic, ByteIdenticalForSameSeed) {
  TempDir dir("synth_det");
  SyntheticSpec s;
  s.n_clips = 3;
  gen_synthetic_dataset(s, dir / "a");
  gen_synthetic_dataset(s, dir / "b");
  s.seed += 1;
  gen_synthetic_dataset(s, dir / "c");
  std::size_t files = 0;
  bool any_diff = false;
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    const auto name = e.path().filename();
    EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / name)) << name;
    any_diff |= e.path().extension() == ".bvh" && slurp(e.path()) != slurp(dir / "c" / name);
    ++files;
  }
  EXPECT_GT(files, 3u);
  EXPECT_TRUE(any_diff);
}

// The dominant frequency of the root sway follows the emotion label.
TEST(Synthetic, EmotionSetsMotionFrequency) {
  SyntheticSpec s;
  s.n_clips = 8;
  s.frames = 240;
  const auto clips = generate_synthetic(s);
  std::set<long> distinct;
  for (const auto& c : clips) {
    double best = 0, best_f = 0;
    for (double f = 0.3; f < 3.0; f += 0.005) {
      double re = 0, im = 0;
      for (std::size_t k = 0; k < c.clip.frames; ++k) {
        const double x = c.clip.root_translation[k * 3 + 2];
        const double w = 2 * motion::kPi * f * static_cast<double>(k) / c.clip.fps;
        re += x * std::cos(w);
        im += x * std::sin(w);
      }
      if (re * re + im * im > best) {
        best = re * re + im * im;
        best_f = f;
      }
    }
    EXPECT_NEAR(best_f, c.frequency_hz, 0.03) << c.name;
    EXPECT_NEAR(c.frequency_hz, 0.8 + 0.15 * static_cast<double>(c.labels.emotion), 1e-12);
    distinct.insert(std::lround(c.frequency_hz * 100));
  }
  EXPECT_GE(distinct.size(), 4u);
}

TEST(Synthetic, SkeletonLayout) {
  const auto s = synthetic_skeleton(8);
  EXPECT_EQ(s.joint_count(), 8u);
  EXPECT_TRUE(s.has_root_translation());
  EXPECT_EQ(synthetic_skeleton(12).joint_count(), 12u);
  EXPECT_EQ(kind_of([] { (void)synthetic_skeleton(1); }), ErrorKind::kConfig);
}

TEST_F(HarnessData, LoadAndNormalize) {
  const Dataset ds = load_dataset(data());
  EXPECT_EQ(ds.clips.size(), 4u);
  EXPECT_EQ(ds.audio_dim(), 6u);
  EXPECT_EQ(ds.text_dim(), 4u);
  EXPECT_EQ(ds.gesture_dim(), motion::gesture_width(8, true));
  ASSERT_NE(ds.find("clip_000"), nullptr);
  EXPECT_EQ(ds.find("nope"), nullptr);
  const auto cond = clip_conditions(ds.clips[0], ds);
  EXPECT_NO_THROW(cond.validate());

  const auto g = gesture_matrices(ds);
  const GestureNormalizer n = GestureNormalizer::fit(g);
  EXPECT_LT(numeric::max_abs_diff(n.denormalize(n.normalize(g[1])), g[1]), 1e-10);
  for (std::size_t i = 0; i < n.stddev.size(); ++i) EXPECT_GE(n.stddev[i], 1e-3);
}

TEST_F(HarnessData, LoadErrors) {
  TempDir dir("bad_data");
  EXPECT_EQ(kind_of([&] { (void)load_dataset(dir / "missing"); }), ErrorKind::kDataset);
  fs::copy(data(), dir / "copy", fs::copy_options::recursive);
  fs::remove(dir / "copy" / "clip_001.audio.feat");
  EXPECT_NE(kind_of([&] { (void)load_dataset(dir / "copy"); }), ErrorKind::kConfig);
  fs::copy(data(), dir / "frames", fs::copy_options::recursive);
  io::write_feature_file(dir / "frames" / "clip_002.text.feat", numeric::DenseArray::matrix(5, 4), "text");
  EXPECT_EQ(kind_of([&] { (void)load_dataset(dir / "frames"); }), ErrorKind::kDataset);
}

TEST_F(HarnessData, TrainLogsEveryStepAndResumesBitIdentically) {
  TempDir dir("train");
  ExperimentConfig c = tiny_config();
  const Dataset ds = load_dataset(data());
  const TrainOutcome full = run_train(c, ds, dir / "full");
  EXPECT_EQ(full.losses.size(), 6u);
  const std::string log = slurp(full.loss_log);
  EXPECT_EQ(log.rfind(std::string(kLossLogHeader) + "\n", 0), 0u);
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 7);

  // Weights pass through float32 at every checkpoint, so the interrupted run
  // must stop on the checkpoint grid to match the uninterrupted one.
  ExperimentConfig half = c;
  half.train.steps = 3;
  (void)run_train(half, ds, dir / "split");
  const TrainOutcome resumed = run_train(c, ds, dir / "split");
  EXPECT_EQ(resumed.resumed_from, 3u);
  EXPECT_EQ(slurp(resumed.loss_log), log);
  EXPECT_EQ(slurp(resumed.checkpoint), slurp(full.checkpoint));

  // Architecture changes cannot resume.
  ExperimentConfig other = c;
  other.denoiser.layers = 3;
  other.train.steps = 8;
  EXPECT_EQ(kind_of([&] { (void)run_train(other, ds, dir / "split"); }), ErrorKind::kConfig);

  const TrainedModel tm = load_trained_model(io::read_checkpoint(full.checkpoint));
  EXPECT_EQ(tm.step, 6);
  EXPECT_EQ(tm.config.denoiser.layers, 2u);
}

TEST_F(HarnessData, SampleAndEval) {
  TempDir dir("sample");
  ExperimentConfig c = tiny_config();
  const Dataset ds = load_dataset(data());
  const TrainOutcome t = run_train(c, ds, dir / "train");

  const auto a = run_sample(c, t.checkpoint, ds, 2, 9, dir / "a");
  const auto b = run_sample(c, t.checkpoint, ds, 2, 9, dir / "b");
  ASSERT_EQ(a.size(), 8u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].filename(), b[i].filename());
    EXPECT_EQ(slurp(a[i]), slurp(b[i]));
  }
  EXPECT_EQ(a[0].filename().string(), "clip_000__s0.bvh");
  const auto s0 = motion::read_bvh_file(a[0]), s1 = motion::read_bvh_file(a[1]);
  EXPECT_EQ(s0.skeleton, ds.skeleton);
  EXPECT_EQ(s0.clip.frames, ds.frames());
  EXPECT_GT(metrics::l1_diversity(std::vector<motion::MotionClip>{s0.clip, s1.clip}), 0.0);
  const auto other_seed = run_sample(c, t.checkpoint, ds, 1, 10, dir / "c");
  EXPECT_NE(slurp(other_seed[0]), slurp(a[0]));

  ExperimentConfig sa = c;
  sa.mode = fusion::FusionMode::kSA;
  EXPECT_EQ(kind_of([&] { (void)run_sample(sa, t.checkpoint, ds, 1, 9, dir / "d"); }), ErrorKind::kContract);

  const auto report = run_eval(c, dir / "a", ds, dir / "eval");
  EXPECT_TRUE(std::isfinite(report.fgd));
  EXPECT_GE(report.fgd, 0.0);
  EXPECT_GT(report.diversity, 0.0);
  EXPECT_TRUE(fs::exists(dir / "eval" / "report.txt"));
  EXPECT_TRUE(fs::exists(dir / "eval" / "report.json"));
}

TEST_F(HarnessData, ReferenceScoredAgainstItself) {
  TempDir dir("selfeval");
  const ExperimentConfig c = tiny_config();
  const Dataset ds = load_dataset(data());
  const auto r = run_eval(c, data(), ds, dir / "eval");
  EXPECT_LT(r.fgd, 1e-6);
  ASSERT_TRUE(r.srgr.has_value());
  EXPECT_DOUBLE_EQ(*r.srgr, 1.0);
  EXPECT_DOUBLE_EQ(r.beat_align, 1.0);
  // The cached extractor gives the same report.
  const auto again = run_eval(c, data(), ds, dir / "eval2");
  EXPECT_EQ(again.to_text(), r.to_text());
}

TEST_F(HarnessData, NoiseCorpusScoresWorseThanReference) {
  TempDir dir("noise");
  const ExperimentConfig c = tiny_config();
  const Dataset ds = load_dataset(data());
  write_noise_corpus(ds, 3, dir / "noise");
  const auto noise = run_eval(c, dir / "noise", ds, dir / "eval");
  EXPECT_GT(noise.fgd, 1e-3);
}

namespace {

int run_cli(const std::string& args) {
  const char* cli = std::getenv("GESTUREGEN_CLI_PATH");
  if (cli == nullptr) return -1;
  const int status = std::system((std::string(cli) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

}  // namespace

TEST_F(HarnessData, CliExitCodes) {
  if (std::getenv("GESTUREGEN_CLI_PATH") == nullptr) GTEST_SKIP() << "GESTUREGEN_CLI_PATH not set";
  TempDir dir("cli");
  const std::string out = (dir / "o").string();
  const std::string tiny =
      "--set model.d=16 --set model.layers=1 --set model.state_dim=4 --set diffusion.steps=5 "
      "--set train.batch=2 --set model.window=8";
  EXPECT_EQ(run_cli("train --out " + out + " --set model.colour=red"), 2);
  EXPECT_EQ(run_cli("train --out " + out + " --preset huge"), 2);
  EXPECT_EQ(run_cli("train --out " + out), 2);
  EXPECT_EQ(run_cli("train --out " + out + " --data " + (dir / "nowhere").string()), 3);
  EXPECT_EQ(run_cli("train --out " + (dir / "ok").string() + " --data " + data().string() + " " + tiny +
                    " --set train.steps=2"),
            0);
  EXPECT_EQ(run_cli("train --out " + (dir / "boom").string() + " --data " + data().string() + " " + tiny +
                    " --set train.steps=4 --set train.lr=1e300"),
            4);
  EXPECT_EQ(run_cli("sample --out " + out + " --data " + data().string() + " --checkpoint " +
                    (dir / "ok" / kCheckpointFile).string() + " --set model.mode=SA"),
            3);
}
