#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gesturegen/harness/config.hpp"
#include "gesturegen/harness/dataset.hpp"
#include "gesturegen/io/checkpoint.hpp"
#include "gesturegen/metrics/metrics.hpp"

namespace gesturegen::harness {

inline constexpr const char* kCheckpointFile = "checkpoint.ckpt";
inline constexpr const char* kLossLogFile = "loss.csv";
inline constexpr const char* kLossLogHeader = "step,l_total,l_g,l_s,l_e";

/// Everything needed to run a trained model: weights, normalization and the
/// configuration it was trained with.
struct TrainedModel {
  ExperimentConfig config;
  denoiser::GestureModel model;
  GestureNormalizer normalizer;
  std::int64_t step = 0;
};

struct ModelDims {
  std::size_t audio_dim = 0;
  std::size_t text_dim = 0;
  std::size_t n_styles = 0;
  std::size_t gesture_dim = 0;
};

ModelDims dataset_dims(const Dataset& dataset);
denoiser::GestureModel build_model(const ExperimentConfig& config, const ModelDims& dims);

io::Checkpoint make_checkpoint(const ExperimentConfig& config, const ModelDims& dims, denoiser::GestureModel& model,
                               numeric::AdamW* optimizer, const GestureNormalizer& normalizer);
/// Rebuilds the model (and, when given, the optimizer state) from a checkpoint.
TrainedModel load_trained_model(const io::Checkpoint& checkpoint, numeric::AdamW* optimizer = nullptr);

struct TrainOutcome {
  std::filesystem::path checkpoint;
  std::filesystem::path loss_log;
  std::vector<denoiser::StepLosses> losses;  // every logged step, resumed ones included
  std::size_t resumed_from = 0;
};

/// Trains for config.train.steps optimizer steps, resuming from an existing
/// checkpoint in out_dir. Checkpoints every train.checkpoint_every steps and
/// at the end; a numerical failure leaves the last good checkpoint in place.
TrainOutcome run_train(const ExperimentConfig& config, const Dataset& dataset, const std::filesystem::path& out_dir);

/// n samples per dataset clip, written as <clip>__s<k>.bvh. The config's
/// fusion mode must match the checkpoint's.
std::vector<std::filesystem::path> run_sample(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                                              const Dataset& conditions, std::size_t n, std::uint64_t seed,
                                              const std::filesystem::path& out_dir);

/// Trains (or loads from the cache path) the feature extractor on the
/// reference corpus.
metrics::FeatureExtractor obtain_extractor(const ExperimentConfig& config, const Dataset& reference,
                                           const std::filesystem::path& cache);

/// Scores every BVH in gen_dir named <clip> or <clip>__s<k> against the
/// reference dataset; writes report.txt and report.json into out_dir.
metrics::MetricReport run_eval(const ExperimentConfig& config, const std::filesystem::path& gen_dir,
                               const Dataset& reference, const std::filesystem::path& out_dir,
                               const metrics::FeatureExtractor* extractor = nullptr);

struct AblationRow {
  std::string group;
  std::string id;
  std::string name;
  std::optional<metrics::MetricReport> report;
  std::string status;  // "ok" or the failure message
};

/// Layer-count, block-design and fusion-mode variants, each trained for
/// ablate.steps steps, sampled and evaluated. Writes ablation.txt,
/// ablation.csv and ablation.json.
std::vector<AblationRow> run_ablation(const ExperimentConfig& config, const Dataset& dataset,
                                      const std::filesystem::path& out_dir);

std::string format_ablation_table(const std::vector<AblationRow>& rows);
std::string format_ablation_csv(const std::vector<AblationRow>& rows);
std::string format_ablation_json(const std::vector<AblationRow>& rows);

/// Gaussian noise in normalized gesture space, mapped back to clips; the
/// baseline corpus for ordering checks.
void write_noise_corpus(const Dataset& dataset, std::uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace gesturegen::harness
