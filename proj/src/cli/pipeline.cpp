#include "rainseg/cli/pipeline.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "rainseg/core/binary_io.hpp"
#include "rainseg/core/error.hpp"
#include "rainseg/core/rng.hpp"
#include "rainseg/kernels/parallel.hpp"
#include "rainseg/model/unet.hpp"

namespace rainseg {

namespace {

constexpr std::uint64_t kInitTag = 0x1417;

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> out(n);
  std::iota(out.begin(), out.end(), 0);
  return out;
}

Tensor stats_tensor(const std::vector<double>& v) {
  std::vector<float> f(v.begin(), v.end());
  return Tensor({f.size()}, f);
}

}  // namespace

std::vector<std::string> scheme_names(const LpaScheme& scheme) {
  std::vector<std::string> out;
  for (const auto& c : scheme.classes) out.push_back(c.name);
  return out;
}

PreparedData prepare_data(const GridStack& raw, const LabelGrid& labels, std::size_t patch_size,
                          const std::array<double, 3>& fractions, std::uint64_t seed,
                          const SplitAssignment* fixed_split, const ChannelStats* stats) {
  const auto raw_patches = tile_patches(raw, labels, patch_size);
  SplitAssignment split = fixed_split ? *fixed_split : stratified_split(raw_patches, fractions, seed);
  if (split.assignment.size() != raw_patches.size()) {
    throw ConfigError("split covers " + std::to_string(split.assignment.size()) + " patches, scene has " +
                      std::to_string(raw_patches.size()));
  }
  ChannelStats st;
  if (stats) {
    st = *stats;
  } else {
    GridStack masked = raw;
    const auto cover = patch_coverage(raw_patches, split.indices(Split::train));
    for (std::size_t i = 0; i < masked.valid.size(); ++i) masked.valid[i] &= cover[i];
    st = compute_stats(masked);
    // Rounded to f32 so a checkpoint reproduces them exactly.
    for (auto& v : st.mean) v = static_cast<float>(v);
    for (auto& v : st.stddev) v = static_cast<float>(v);
  }
  const auto normalized = normalize_channels(raw, &st).first;
  return {tile_patches(normalized, labels, patch_size), std::move(split), std::move(st)};
}

void store_stats(Checkpoint& ckpt, const ChannelStats& stats) {
  std::erase_if(ckpt.extras, [](const auto& e) { return e.first == "norm_mean" || e.first == "norm_std"; });
  ckpt.extras.emplace_back("norm_mean", stats_tensor(stats.mean));
  ckpt.extras.emplace_back("norm_std", stats_tensor(stats.stddev));
}

ChannelStats stored_stats(const Checkpoint& ckpt) {
  const Tensor* mean = ckpt.extra("norm_mean");
  const Tensor* stddev = ckpt.extra("norm_std");
  if (!mean || !stddev) throw FormatError("checkpoint carries no normalization statistics", 0);
  if (mean->numel() != stddev->numel()) throw FormatError("checkpoint normalization statistics disagree in length", 0);
  ChannelStats st;
  st.mean.assign(mean->data().begin(), mean->data().end());
  st.stddev.assign(stddev->data().begin(), stddev->data().end());
  return st;
}

std::vector<std::uint8_t> predict_patches(ModelParams& params, const PatchSet& patches, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  const auto data = patches.dataset(all_indices(patches.size()));
  std::vector<std::uint8_t> out;
  out.reserve(patches.size() * patches.cells_per_patch());
  for (std::size_t start = 0; start < patches.size(); start += batch_size) {
    std::vector<std::size_t> batch(std::min(batch_size, patches.size() - start));
    std::iota(batch.begin(), batch.end(), start);
    Tape tape(false);
    const auto result = forward(tape, params, data.batch_inputs(batch), ForwardOptions{Mode::eval, nullptr});
    const auto classes = predict_classes(result.probs);
    out.insert(out.end(), classes.begin(), classes.end());
  }
  return out;
}

ConfusionMatrix split_confusion(const PatchSet& patches, const std::vector<std::uint8_t>& predictions,
                                std::span<const std::size_t> indices) {
  const std::size_t area = patches.cells_per_patch();
  if (predictions.size() != patches.size() * area) throw ConfigError("prediction buffer does not match the patch set");
  std::vector<std::uint8_t> pred, truth, mask;
  for (const std::size_t p : indices) {
    const auto from = static_cast<std::ptrdiff_t>(p * area), to = from + static_cast<std::ptrdiff_t>(area);
    pred.insert(pred.end(), predictions.begin() + from, predictions.begin() + to);
    truth.insert(truth.end(), patches.labels.begin() + from, patches.labels.begin() + to);
    mask.insert(mask.end(), patches.valid.begin() + from, patches.valid.begin() + to);
  }
  return confusion(pred, truth, mask, patches.num_classes);
}

RunResult train_run(const RunConfig& config, const std::filesystem::path& out, std::ostream& log,
                    const std::optional<std::string>& config_text) {
  config.validate();
  if (config.threads > 0) kernels::set_threads(config.threads);

  const auto manifest = read_manifest(config.manifest);
  const auto raw = load_stack(manifest);
  const auto labels = load_labels(manifest);
  std::optional<SplitAssignment> fixed;
  if (!config.splits.empty()) {
    fixed = parse_split_csv(io::read_text(config.splits), tile_patches(raw, labels, config.model.patch_size));
  }
  const auto data = prepare_data(raw, labels, config.model.patch_size, config.fractions, config.seed,
                                 fixed ? &*fixed : nullptr, manifest.normalization ? &*manifest.normalization : nullptr);
  const auto train_idx = data.split.indices(Split::train);
  const auto val_idx = data.split.indices(Split::val);
  const auto test_idx = data.split.indices(Split::test);
  if (train_idx.empty() || val_idx.empty() || test_idx.empty()) {
    throw ConfigError("every split needs at least one patch (train " + std::to_string(train_idx.size()) + ", val " +
                      std::to_string(val_idx.size()) + ", test " + std::to_string(test_idx.size()) + ")");
  }

  ModelConfig model = config.model;
  model.in_channels = raw.num_channels();
  model.num_classes = manifest.scheme.num_classes();
  model.validate();

  std::filesystem::create_directories(out);
  io::write_text(out / "config.txt", config_text ? *config_text : run_config_text(config));
  io::write_text(out / "config.resolved.txt", run_config_text(config));
  io::write_text(out / "splits.csv", split_csv(data.patches, data.split));

  log << "patches " << data.patches.size() << " (train " << train_idx.size() << ", val " << val_idx.size()
      << ", test " << test_idx.size() << ")\n";
  RunResult result;
  result.fit = fit(init_params(model, derive_seed(config.seed, kInitTag)), data.patches.dataset(train_idx),
                   data.patches.dataset(val_idx), config.train, [&](const EpochRecord& r) {
                     char line[160];
                     std::snprintf(line, sizeof line, "epoch %zu train %.6f val %.6f (focal %.6f dice %.6f)\n",
                                   r.epoch, r.train.total, r.val.total, r.val.focal, r.val.dice);
                     log << line << std::flush;
                   });
  result.stopped_early = result.fit.stopped_early;

  Checkpoint ckpt{result.fit.best, {}};
  store_stats(ckpt, data.stats);
  save_checkpoint(ckpt, out / "best.munw");
  io::write_text(out / "history.csv", history_csv(result.fit.history));

  auto best = result.fit.best;
  const auto predictions = predict_patches(best, data.patches, config.train.batch_size);
  result.test = scores(split_confusion(data.patches, predictions, test_idx));
  io::write_text(out / "metrics.csv", metrics_csv(result.test, scheme_names(manifest.scheme)));
  log << "best epoch " << result.fit.best_epoch << ", test accuracy " << result.test.accuracy << ", weighted F1 "
      << result.test.weighted_f1 << "\n";
  return result;
}

}  // namespace rainseg
