// Command-line front end: gen-synthetic, train, sample, eval, ablate.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gesturegen/error.hpp"
#include "gesturegen/harness/config.hpp"
#include "gesturegen/harness/dataset.hpp"
#include "gesturegen/harness/experiment.hpp"
#include "gesturegen/harness/synthetic.hpp"

namespace fs = std::filesystem;
using namespace gesturegen;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return kExitConfig;
    case ErrorKind::kNumerical: return kExitNumerical;
    default: return kExitData;
  }
}

struct CommonOptions {
  std::optional<std::string> config;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
  std::optional<std::string> data;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool out_required = true) {
  cmd->add_option("--config", o.config, "key=value config file");
  cmd->add_option("--preset", o.preset, "base preset")->check(CLI::IsMember({"toy", "paper"}));
  cmd->add_option("--seed", o.seed, "seed override for this command");
  auto* out = cmd->add_option("--out", o.out, "output directory");
  if (out_required) out->required();
  cmd->add_option("--set", o.overrides, "extra key=value override (repeatable)");
}

harness::ExperimentConfig resolve(const CommonOptions& o) {
  std::optional<fs::path> path;
  if (o.config) path = fs::path(*o.config);
  harness::ExperimentConfig c = harness::load_config(path, o.preset);
  io::KeyValues kv;
  for (const auto& s : o.overrides) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) fail(ErrorKind::kConfig, fmt::format("--set expects key=value, got '{}'", s));
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  harness::apply_overrides(c, kv);
  if (o.data) c.data_dir = *o.data;
  return c;
}

harness::Dataset require_dataset(const harness::ExperimentConfig& c) {
  if (c.data_dir.empty()) fail(ErrorKind::kConfig, "no dataset: pass --data or set data.dir");
  return harness::load_dataset(c.data_dir);
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Training churns through multi-megabyte temporaries; keep them on the heap
  // instead of paying for a fresh mmap and page zeroing on every allocation.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
  CLI::App app{"Diffusion-based co-speech gesture generation toolkit"};
  app.require_subcommand(1);

  CommonOptions gen_opts, train_opts, sample_opts, eval_opts, ablate_opts;
  std::string checkpoint, gen_dir;
  std::optional<std::size_t> sample_n;

  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic dataset");
  add_common(gen, gen_opts);

  auto* train = app.add_subcommand("train", "train a model (resumes from <out>/checkpoint.ckpt)");
  add_common(train, train_opts);
  train->add_option("--data", train_opts.data, "dataset directory");

  auto* sample = app.add_subcommand("sample", "generate BVH clips for every dataset clip");
  add_common(sample, sample_opts);
  sample->add_option("--data", sample_opts.data, "dataset directory supplying the conditions");
  sample->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  sample->add_option("--n", sample_n, "samples per clip");

  auto* eval = app.add_subcommand("eval", "score generated clips against a reference dataset");
  add_common(eval, eval_opts);
  eval->add_option("--data", eval_opts.data, "reference dataset directory");
  eval->add_option("--gen", gen_dir, "directory of generated BVH files")->required();

  auto* ablate = app.add_subcommand("ablate", "train and score every ablation variant");
  add_common(ablate, ablate_opts);
  ablate->add_option("--data", ablate_opts.data, "dataset (generated under <out>/data when absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen->parsed()) {
      auto c = resolve(gen_opts);
      if (gen_opts.seed) c.synthetic.seed = *gen_opts.seed;
      harness::gen_synthetic_dataset(c.synthetic, gen_opts.out);
      fmt::print("wrote {} clips to {}\n", c.synthetic.n_clips, gen_opts.out);
    } else if (train->parsed()) {
      auto c = resolve(train_opts);
      if (train_opts.seed) c.train.seed = *train_opts.seed;
      c.validate();
      const auto ds = require_dataset(c);
      const auto outcome = harness::run_train(c, ds, train_opts.out);
      if (!outcome.losses.empty()) {
        const auto& first = outcome.losses.front();
        const auto& last = outcome.losses.back();
        fmt::print("steps={} resumed_from={} first_l_total={:.6f} last_l_total={:.6f} last_l_g={:.6f}\n",
                   outcome.losses.size(), outcome.resumed_from, first.total, last.total, last.gesture);
      }
      fmt::print("checkpoint={}\nloss_log={}\n", outcome.checkpoint.string(), outcome.loss_log.string());
    } else if (sample->parsed()) {
      auto c = resolve(sample_opts);
      if (sample_opts.seed) c.sample_seed = *sample_opts.seed;
      if (sample_n) c.sample_n = *sample_n;
      const auto ds = require_dataset(c);
      const auto files = harness::run_sample(c, checkpoint, ds, c.sample_n, c.sample_seed, sample_opts.out);
      fmt::print("wrote {} samples to {}\n", files.size(), sample_opts.out);
    } else if (eval->parsed()) {
      auto c = resolve(eval_opts);
      if (eval_opts.seed) c.eval.seed = *eval_opts.seed;
      c.validate();
      const auto ds = require_dataset(c);
      const auto report = harness::run_eval(c, gen_dir, ds, eval_opts.out);
      fmt::print("{}", report.to_text());
    } else if (ablate->parsed()) {
      auto c = resolve(ablate_opts);
      if (ablate_opts.seed) c.train.seed = *ablate_opts.seed;
      c.validate();
      if (c.data_dir.empty()) {
        const fs::path data = fs::path(ablate_opts.out) / "data";
        if (!fs::exists(data / "dataset.cfg")) harness::gen_synthetic_dataset(c.synthetic, data);
        c.data_dir = data.string();
      }
      const auto ds = harness::load_dataset(c.data_dir);
      const auto rows = harness::run_ablation(c, ds, ablate_opts.out);
      fmt::print("{}", harness::format_ablation_table(rows));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
