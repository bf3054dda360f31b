#include "gesturegen/harness/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "gesturegen/diffusion/schedule.hpp"
#include "gesturegen/error.hpp"
#include "gesturegen/io/feature_file.hpp"
#include "gesturegen/motion/clip_ops.hpp"

namespace gesturegen::harness {

namespace fs = std::filesystem;
using numeric::DenseArray;

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

fusion::FusionConfig fusion_config(const ExperimentConfig& config, const ModelDims& dims) {
  fusion::FusionConfig f;
  f.mode = config.mode;
  f.d = config.denoiser.d;
  f.audio_dim = dims.audio_dim;
  f.text_dim = dims.text_dim;
  f.gesture_dim = dims.gesture_dim;
  f.n_styles = dims.n_styles;
  f.window = config.window;
  f.init_std = config.denoiser.init_std;
  return f;
}

denoiser::DenoiserConfig denoiser_config(const ExperimentConfig& config, const ModelDims& dims) {
  denoiser::DenoiserConfig d = config.denoiser;
  d.gesture_dim = dims.gesture_dim;
  return d;
}

std::size_t header_size(const io::Checkpoint& ck, const std::string& key) {
  const auto it = ck.header.find(key);
  if (it == ck.header.end()) fail(ErrorKind::kDataset, fmt::format("checkpoint header lacks '{}'", key));
  return std::stoul(it->second);
}

/// Keys that may change between a run and its resumption.
bool resumable_key(const std::string& key) {
  return key == "train.steps" || key == "train.checkpoint_every" || key == "data.dir" || key.rfind("sample.", 0) == 0 ||
         key.rfind("eval.", 0) == 0 || key.rfind("ablate.", 0) == 0;
}

std::string loss_row(std::size_t step, const denoiser::StepLosses& l) {
  return fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", step, l.total, l.gesture, l.style, l.emotion);
}

void write_loss_log(const fs::path& path, const std::vector<denoiser::StepLosses>& losses) {
  std::string text = std::string(kLossLogHeader) + "\n";
  for (std::size_t i = 0; i < losses.size(); ++i) text += loss_row(i, losses[i]);
  io::write_text(path, text);
}

std::vector<denoiser::StepLosses> read_loss_log(const fs::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  if (!std::getline(in, line) || line != kLossLogHeader)
    fail(ErrorKind::kDataset, fmt::format("{}: missing header '{}'", path.string(), kLossLogHeader));
  std::vector<denoiser::StepLosses> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(fields, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != 5) fail(ErrorKind::kDataset, fmt::format("{}: malformed row '{}'", path.string(), line));
    out.push_back({v[1], v[2], v[3], v[4]});
  }
  return out;
}

motion::MotionClip rotmat_layout(const Dataset& dataset) { return motion::to_rotmat9(dataset.clips.front().clip); }

motion::MotionClip gesture_to_clip(const DenseArray& gesture, const motion::MotionClip& layout) {
  return motion::to_euler(motion::from_gesture_matrix(gesture, layout), true);
}

std::optional<std::string> match_clip_name(const std::string& stem, const Dataset& reference) {
  if (reference.find(stem) != nullptr) return stem;
  const auto pos = stem.rfind("__s");
  if (pos == std::string::npos) return std::nullopt;
  const std::string suffix = stem.substr(pos + 3);
  if (suffix.empty() || !std::all_of(suffix.begin(), suffix.end(), [](char c) { return c >= '0' && c <= '9'; }))
    return std::nullopt;
  const std::string base = stem.substr(0, pos);
  if (reference.find(base) == nullptr) return std::nullopt;
  return base;
}

}  // namespace

ModelDims dataset_dims(const Dataset& dataset) {
  return {dataset.audio_dim(), dataset.text_dim(), dataset.n_styles, dataset.gesture_dim()};
}

denoiser::GestureModel build_model(const ExperimentConfig& config, const ModelDims& dims) {
  return denoiser::GestureModel(fusion_config(config, dims), denoiser_config(config, dims), config.train.seed);
}

io::Checkpoint make_checkpoint(const ExperimentConfig& config, const ModelDims& dims, denoiser::GestureModel& model,
                               numeric::AdamW* optimizer, const GestureNormalizer& normalizer) {
  io::Checkpoint ck;
  ck.header = config.to_key_values();
  ck.header["dims.audio"] = std::to_string(dims.audio_dim);
  ck.header["dims.text"] = std::to_string(dims.text_dim);
  ck.header["dims.styles"] = std::to_string(dims.n_styles);
  ck.header["dims.gesture"] = std::to_string(dims.gesture_dim);
  ck.step = optimizer != nullptr ? optimizer->step_count() : 0;
  ck.arrays.push_back({"norm.mean", normalizer.mean});
  ck.arrays.push_back({"norm.std", normalizer.stddev});
  const auto params = model.parameters();
  for (const auto& [name, p] : params.entries()) ck.arrays.push_back({name, p->value});
  if (optimizer != nullptr) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      ck.arrays.push_back({"opt.m." + params.entries()[i].first, optimizer->first_moments()[i]});
      ck.arrays.push_back({"opt.v." + params.entries()[i].first, optimizer->second_moments()[i]});
    }
  }
  for (auto& a : ck.arrays) io::round_to_f32(a.value);
  return ck;
}

TrainedModel load_trained_model(const io::Checkpoint& ck, numeric::AdamW* optimizer) {
  TrainedModel tm;
  io::KeyValues kv;
  for (const auto& [k, v] : ck.header)
    if (k.rfind("dims.", 0) != 0) kv[k] = v;
  const auto preset = kv.find("preset");
  tm.config = preset_config(preset != kv.end() ? preset->second : "toy");
  kv.erase("preset");
  apply_overrides(tm.config, kv);
  const ModelDims dims{header_size(ck, "dims.audio"), header_size(ck, "dims.text"), header_size(ck, "dims.styles"),
                       header_size(ck, "dims.gesture")};
  tm.model = build_model(tm.config, dims);
  tm.normalizer = {ck.get("norm.mean"), ck.get("norm.std")};
  tm.step = ck.step;
  auto params = tm.model.parameters();
  auto assign = [](DenseArray& dst, const DenseArray& src, const std::string& name) {
    if (dst.shape() != src.shape())
      fail(ErrorKind::kDataset, fmt::format("checkpoint array '{}' has shape {}, model expects {}", name,
                                            numeric::shape_string(src.shape()), numeric::shape_string(dst.shape())));
    dst = src;
  };
  for (const auto& [name, p] : params.entries()) assign(p->value, ck.get(name), name);
  if (optimizer != nullptr) {
    *optimizer = numeric::AdamW(params, tm.config.train.optim);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const std::string& name = params.entries()[i].first;
      assign(optimizer->first_moments()[i], ck.get("opt.m." + name), "opt.m." + name);
      assign(optimizer->second_moments()[i], ck.get("opt.v." + name), "opt.v." + name);
    }
    optimizer->set_step_count(ck.step);
  }
  return tm;
}

TrainOutcome run_train(const ExperimentConfig& config, const Dataset& dataset, const fs::path& out_dir) {
  config.validate();
  fs::create_directories(out_dir);
  TrainOutcome outcome{out_dir / kCheckpointFile, out_dir / kLossLogFile, {}, 0};
  const ModelDims dims = dataset_dims(dataset);
  const auto schedule = diffusion::build_schedule(config.diffusion_steps, config.beta_start, config.beta_end);

  const auto gestures = gesture_matrices(dataset);
  GestureNormalizer normalizer = GestureNormalizer::fit(gestures);
  io::round_to_f32(normalizer.mean);
  io::round_to_f32(normalizer.stddev);
  std::vector<denoiser::TrainingExample> examples;
  for (std::size_t i = 0; i < dataset.clips.size(); ++i)
    examples.push_back({normalizer.normalize(gestures[i]), clip_conditions(dataset.clips[i], dataset)});

  denoiser::GestureModel model;
  numeric::AdamW optimizer;
  if (fs::exists(outcome.checkpoint)) {
    const io::Checkpoint ck = io::read_checkpoint(outcome.checkpoint);
    const io::KeyValues mine = config.to_key_values();
    for (const auto& [k, v] : mine) {
      if (resumable_key(k)) continue;
      const auto it = ck.header.find(k);
      if (it == ck.header.end() || it->second != v)
        fail(ErrorKind::kConfig, fmt::format("cannot resume {}: '{}' is '{}' in the checkpoint but '{}' now",
                                             outcome.checkpoint.string(), k,
                                             it == ck.header.end() ? "<absent>" : it->second, v));
    }
    TrainedModel tm = load_trained_model(ck, &optimizer);
    model = std::move(tm.model);
    normalizer = tm.normalizer;
    outcome.resumed_from = static_cast<std::size_t>(tm.step);
    if (fs::exists(outcome.loss_log)) outcome.losses = read_loss_log(outcome.loss_log);
    if (outcome.losses.size() < outcome.resumed_from)
      fail(ErrorKind::kDataset, fmt::format("{} has {} rows but the checkpoint is at step {}",
                                            outcome.loss_log.string(), outcome.losses.size(), outcome.resumed_from));
    outcome.losses.resize(outcome.resumed_from);
  } else {
    model = build_model(config, dims);
    optimizer = numeric::AdamW(model.parameters(), config.train.optim);
  }

  std::vector<const denoiser::TrainingExample*> batch;
  const std::size_t every = config.checkpoint_every == 0 ? config.train.steps : config.checkpoint_every;
  for (std::size_t step = outcome.resumed_from; step < config.train.steps; ++step) {
    numeric::Rng rng = denoiser::step_rng(config.train.seed, step);
    batch.clear();
    for (std::size_t i : denoiser::select_batch(examples.size(), config.train.batch, rng)) batch.push_back(&examples[i]);
    try {
      outcome.losses.push_back(denoiser::training_step(model, optimizer, batch, schedule, rng, config.train));
    } catch (const Error& e) {
      write_loss_log(outcome.loss_log, outcome.losses);
      if (e.kind() != ErrorKind::kNumerical) throw;
      throw Error(ErrorKind::kNumerical,
                  fmt::format("{}; training aborted, last good checkpoint kept at {}", e.what(),
                              fs::exists(outcome.checkpoint) ? outcome.checkpoint.string() : "<none>"));
    }
    if ((step + 1) % every == 0 || step + 1 == config.train.steps) {
      const io::Checkpoint ck = make_checkpoint(config, dims, model, &optimizer, normalizer);
      io::write_checkpoint(outcome.checkpoint, ck);
      // Continue from exactly what was saved so a resumed run matches.
      auto params = model.parameters();
      for (auto& entry : params.entries()) io::round_to_f32(entry.second->value);
      for (auto& m : optimizer.first_moments()) io::round_to_f32(m);
      for (auto& v : optimizer.second_moments()) io::round_to_f32(v);
      write_loss_log(outcome.loss_log, outcome.losses);
    }
  }
  if (config.train.steps <= outcome.resumed_from) {
    if (!fs::exists(outcome.loss_log)) write_loss_log(outcome.loss_log, outcome.losses);
  }
  return outcome;
}

std::vector<fs::path> run_sample(const ExperimentConfig& config, const fs::path& checkpoint, const Dataset& conditions,
                                 std::size_t n, std::uint64_t seed, const fs::path& out_dir) {
  const TrainedModel tm = load_trained_model(io::read_checkpoint(checkpoint));
  if (tm.config.mode != config.mode)
    fail(ErrorKind::kContract, fmt::format("checkpoint was trained with fusion mode {} but {} was requested",
                                           fusion::to_string(tm.config.mode), fusion::to_string(config.mode)));
  if (tm.normalizer.mean.size() != conditions.gesture_dim())
    fail(ErrorKind::kContract, "conditions dataset skeleton does not match the checkpoint");
  fs::create_directories(out_dir);
  const auto schedule = diffusion::build_schedule(tm.config.diffusion_steps, tm.config.beta_start, tm.config.beta_end);
  const motion::MotionClip layout = rotmat_layout(conditions);
  std::vector<fs::path> written;
  for (std::size_t i = 0; i < conditions.clips.size(); ++i) {
    const ClipRecord& clip = conditions.clips[i];
    const fusion::ClipConditions cond = clip_conditions(clip, conditions);
    auto predictor = [&](const DenseArray& x_t, std::size_t t) { return tm.model.predict(cond, x_t, t); };
    for (std::size_t k = 0; k < n; ++k) {
      const DenseArray x0 = diffusion::sample_loop(predictor, clip.clip.frames, conditions.gesture_dim(), schedule,
                                                   mix_seed(seed, i, k));
      if (!x0.all_finite()) fail(ErrorKind::kNumerical, fmt::format("non-finite sample for {}", clip.name));
      const fs::path path = out_dir / fmt::format("{}__s{}.bvh", clip.name, k);
      motion::write_bvh_file(path, conditions.skeleton, gesture_to_clip(tm.normalizer.denormalize(x0), layout));
      written.push_back(path);
    }
  }
  return written;
}

void write_noise_corpus(const Dataset& dataset, std::uint64_t seed, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const auto normalizer = GestureNormalizer::fit(gesture_matrices(dataset));
  const motion::MotionClip layout = rotmat_layout(dataset);
  numeric::Rng rng(seed);
  for (const auto& clip : dataset.clips) {
    const DenseArray z = numeric::gaussian({clip.clip.frames, dataset.gesture_dim()}, 1.0, rng);
    motion::write_bvh_file(out_dir / (clip.name + "__s0.bvh"), dataset.skeleton,
                           gesture_to_clip(normalizer.denormalize(z), layout));
  }
}

metrics::FeatureExtractor obtain_extractor(const ExperimentConfig& config, const Dataset& reference,
                                           const fs::path& cache) {
  metrics::ExtractorConfig ec;
  ec.latent = config.eval.latent;
  ec.steps = config.eval.extractor_steps;
  ec.lr = config.eval.extractor_lr;
  const auto mats = gesture_matrices(reference);
  if (fs::exists(cache)) {
    metrics::FeatureExtractor fx = metrics::FeatureExtractor::from_checkpoint(io::read_checkpoint(cache));
    const auto& c = fx.config();
    if (fx.seed() == config.eval.seed && c.latent == ec.latent && c.steps == ec.steps && c.lr == ec.lr &&
        c.hidden == ec.hidden && c.batch == ec.batch && fx.frames() == mats.front().rows() &&
        fx.width() == mats.front().cols())
      return fx;
  }
  metrics::FeatureExtractor fx = metrics::train_fgd_extractor(mats, config.eval.seed, ec);
  if (!cache.empty()) {
    if (cache.has_parent_path()) fs::create_directories(cache.parent_path());
    io::write_checkpoint(cache, fx.to_checkpoint());
  }
  return fx;
}

metrics::MetricReport run_eval(const ExperimentConfig& config, const fs::path& gen_dir, const Dataset& reference,
                               const fs::path& out_dir, const metrics::FeatureExtractor* extractor) {
  if (!fs::is_directory(gen_dir)) fail(ErrorKind::kDataset, fmt::format("{} is not a directory", gen_dir.string()));
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(gen_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".bvh") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::vector<motion::MotionClip> gen_clips;
  std::vector<const ClipRecord*> matched;
  std::size_t ignored = 0;
  for (const auto& f : files) {
    const auto name = match_clip_name(f.stem().string(), reference);
    if (!name) {
      ++ignored;
      continue;
    }
    auto doc = motion::read_bvh_file(f);
    if (doc.clip.joints != reference.skeleton.joint_count() || doc.clip.frames != reference.frames())
      fail(ErrorKind::kDataset, fmt::format("{}: {} frames x {} joints, reference has {} x {}", f.string(),
                                            doc.clip.frames, doc.clip.joints, reference.frames(),
                                            reference.skeleton.joint_count()));
    gen_clips.push_back(std::move(doc.clip));
    matched.push_back(reference.find(*name));
  }
  if (gen_clips.size() < 2)
    fail(ErrorKind::kDataset, fmt::format("{} holds {} matching clips; at least 2 are needed", gen_dir.string(),
                                          gen_clips.size()));

  fs::create_directories(out_dir);
  std::optional<metrics::FeatureExtractor> owned;
  if (extractor == nullptr) {
    const fs::path cache = config.eval.extractor_cache.empty() ? out_dir / "extractor.ckpt"
                                                               : fs::path(config.eval.extractor_cache);
    owned = obtain_extractor(config, reference, cache);
    extractor = &*owned;
  }

  std::vector<DenseArray> gen_mats;
  for (const auto& c : gen_clips) gen_mats.push_back(metrics::clip_matrix(c));
  const auto ref_mats = gesture_matrices(reference);

  metrics::MetricReport report;
  report.fgd = metrics::frechet_distance(extractor->features(ref_mats), extractor->features(gen_mats));
  const std::size_t n_div = std::min(config.eval.n_diversity, gen_mats.size());
  report.diversity = metrics::diversity_score(extractor->pooled_features(gen_mats), n_div, config.eval.seed);
  report.l1div = metrics::l1_diversity(gen_mats);
  double srgr_sum = 0.0, beat_sum = 0.0;
  for (std::size_t i = 0; i < gen_clips.size(); ++i) {
    srgr_sum += metrics::srgr(gen_clips[i], matched[i]->clip, matched[i]->weights, config.eval.threshold);
    beat_sum += metrics::beat_align(matched[i]->onsets, metrics::detect_gesture_beats(gen_clips[i]), config.eval.sigma);
  }
  report.srgr = srgr_sum / static_cast<double>(gen_clips.size());
  report.beat_align = beat_sum / static_cast<double>(gen_clips.size());
  report.metadata["gen_clips"] = std::to_string(gen_clips.size());
  report.metadata["ref_clips"] = std::to_string(reference.clips.size());
  report.metadata["ignored_files"] = std::to_string(ignored);
  report.metadata["n_diversity"] = std::to_string(n_div);
  report.metadata["eval_seed"] = std::to_string(config.eval.seed);
  report.metadata["extractor_steps"] = std::to_string(extractor->config().steps);
  report.metadata["extractor_latent"] = std::to_string(extractor->latent_width());
  report.metadata["sigma"] = fmt::format("{:.17g}", config.eval.sigma);
  report.metadata["threshold"] = fmt::format("{:.17g}", config.eval.threshold);

  io::write_text(out_dir / "report.txt", report.to_text());
  io::write_text(out_dir / "report.json", report.to_json());
  return report;
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& config, const Dataset& dataset, const fs::path& out_dir) {
  config.validate();
  fs::create_directories(out_dir);
  struct Variant {
    std::string group, id, name;
    ExperimentConfig cfg;
  };
  std::vector<Variant> variants;
  for (const auto& v : denoiser::block_ablation_variants(config.denoiser)) {
    ExperimentConfig c = config;
    c.denoiser = v.config;
    variants.push_back({v.id[0] == 'A' ? "layers" : "block", v.id, v.name, c});
  }
  const fusion::FusionMode modes[] = {fusion::FusionMode::kSA, fusion::FusionMode::kSEA, fusion::FusionMode::kSeadBasic,
                                      fusion::FusionMode::kSead};
  int index = 1;
  for (auto m : modes) {
    ExperimentConfig c = config;
    c.mode = m;
    variants.push_back({"fusion", fmt::format("F{}", index++), std::string(fusion::to_string(m)), c});
  }

  const fs::path cache = config.eval.extractor_cache.empty() ? out_dir / "extractor.ckpt"
                                                             : fs::path(config.eval.extractor_cache);
  const metrics::FeatureExtractor extractor = obtain_extractor(config, dataset, cache);

  std::vector<AblationRow> rows;
  for (auto& v : variants) {
    AblationRow row{v.group, v.id, v.name, std::nullopt, "ok"};
    const fs::path dir = out_dir / "rows" / v.id;
    try {
      if (fs::exists(dir)) fs::remove_all(dir);
      v.cfg.train.steps = config.ablate_steps;
      v.cfg.checkpoint_every = config.ablate_steps;
      const auto trained = run_train(v.cfg, dataset, dir);
      run_sample(v.cfg, trained.checkpoint, dataset, config.sample_n, config.sample_seed, dir / "samples");
      row.report = run_eval(v.cfg, dir / "samples", dataset, dir, &extractor);
    } catch (const std::exception& e) {
      row.status = fmt::format("failed: {}", e.what());
    }
    rows.push_back(std::move(row));
  }
  io::write_text(out_dir / "ablation.txt", format_ablation_table(rows));
  io::write_text(out_dir / "ablation.csv", format_ablation_csv(rows));
  io::write_text(out_dir / "ablation.json", format_ablation_json(rows));
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::string out = fmt::format("{:<8} {:<4} {:<27} {:>12} {:>12} {:>12} {:>8} {:>10}  {}\n", "group", "no", "name", "FGD",
                                "Diversity", "L1Div", "SRGR", "BeatAlign", "status");
  for (const auto& r : rows) {
    if (r.report) {
      out += fmt::format("{:<8} {:<4} {:<27} {:>12.4f} {:>12.4f} {:>12.4f} {:>8.4f} {:>10.4f}  {}\n", r.group, r.id,
                         r.name, r.report->fgd, r.report->diversity, r.report->l1div, r.report->srgr.value_or(0.0),
                         r.report->beat_align, r.status);
    } else {
      out += fmt::format("{:<8} {:<4} {:<27} {:>12} {:>12} {:>12} {:>8} {:>10}  {}\n", r.group, r.id, r.name, "-", "-",
                         "-", "-", "-", r.status);
    }
  }
  return out;
}

std::string format_ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "group,id,name,fgd,diversity,l1div,srgr,beat_align,status\n";
  for (const auto& r : rows) {
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    if (r.report) {
      out += fmt::format("{},{},\"{}\",{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", r.group, r.id, r.name,
                         r.report->fgd, r.report->diversity, r.report->l1div, r.report->srgr.value_or(0.0),
                         r.report->beat_align, status);
    } else {
      out += fmt::format("{},{},\"{}\",,,,,,{}\n", r.group, r.id, r.name, status);
    }
  }
  return out;
}

std::string format_ablation_json(const std::vector<AblationRow>& rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["group"] = r.group;
    j["id"] = r.id;
    j["name"] = r.name;
    if (r.report) {
      j["fgd"] = r.report->fgd;
      j["diversity"] = r.report->diversity;
      j["l1div"] = r.report->l1div;
      j["srgr"] = r.report->srgr.value_or(0.0);
      j["beat_align"] = r.report->beat_align;
    }
    j["status"] = r.status;
    arr.push_back(j);
  }
  return arr.dump(2) + "\n";
}

}  // namespace gesturegen::harness
