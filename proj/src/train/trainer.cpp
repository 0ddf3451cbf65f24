#include "rainseg/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "rainseg/core/error.hpp"
#include "rainseg/core/rng.hpp"
#include "rainseg/model/unet.hpp"
#include "rainseg/tensor/ops.hpp"

namespace rainseg {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
  if (!(learning_rate >= 0.0f)) throw ConfigError("learning_rate must be >= 0");
  if (!(weight_decay >= 0.0f)) throw ConfigError("weight_decay must be >= 0");
  loss.validate();
}

std::size_t PatchDataset::size() const noexcept {
  return cells_per_patch() == 0 ? 0 : labels.size() / cells_per_patch();
}

Tensor PatchDataset::batch_inputs(std::span<const std::size_t> indices) const {
  const std::size_t per = channels * cells_per_patch();
  std::vector<float> out(indices.size() * per);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(inputs.begin() + static_cast<std::ptrdiff_t>(indices[i] * per), per,
                out.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return Tensor({indices.size(), channels, patch_size, patch_size}, std::move(out));
}

namespace {

std::vector<std::uint8_t> gather(const std::vector<std::uint8_t>& src, std::size_t per,
                                 std::span<const std::size_t> indices) {
  std::vector<std::uint8_t> out(indices.size() * per);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(indices[i] * per), per,
                out.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> PatchDataset::batch_labels(std::span<const std::size_t> indices) const {
  return gather(labels, cells_per_patch(), indices);
}

std::vector<std::uint8_t> PatchDataset::batch_mask(std::span<const std::size_t> indices) const {
  return gather(mask, cells_per_patch(), indices);
}

std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(derive_seed(seed, epoch));
  for (std::size_t i = count; i > 1; --i) {
    const std::size_t j = rng.next_below(i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

LossStats train_epoch(ModelParams& params, AdamState& state, const PatchDataset& data, const TrainConfig& config,
                      std::size_t epoch) {
  config.validate();
  if (data.size() == 0) throw ConfigError("train_epoch: empty batch list");
  const auto order = epoch_order(data.size(), config.seed, epoch);
  DropoutStream stream{derive_seed(config.seed ^ 0xD70F0D70ULL, epoch), 0};
  LossStats sum;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
    const std::size_t end = std::min(order.size(), start + config.batch_size);
    const std::span<const std::size_t> idx(order.data() + start, end - start);
    const Tensor x = data.batch_inputs(idx);
    const auto labels = data.batch_labels(idx);
    const auto mask = data.batch_mask(idx);

    Tape tape;
    auto out = forward(tape, params, x, ForwardOptions{Mode::train, &stream});
    auto loss = combined_loss(tape, out.probs, LossTargets{labels, mask}, config.loss);
    tape.backward(loss.total);
    const auto grads = out.params.gradients(tape);
    adam_step(params, grads, state, config.learning_rate, config.weight_decay);

    sum.total += loss.total.item();
    sum.focal += loss.focal;
    sum.dice += loss.dice;
    ++batches;
  }
  const double n = static_cast<double>(batches);
  return {sum.total / n, sum.focal / n, sum.dice / n};
}

Evaluation evaluate(ModelParams& params, const PatchDataset& data, const LossConfig& loss, std::size_t batch_size) {
  if (data.size() == 0) throw ConfigError("evaluate: empty dataset");
  if (batch_size == 0) throw ConfigError("evaluate: batch_size must be >= 1");
  const std::size_t k = params.config().num_classes;
  const std::size_t cells = data.cells_per_patch();
  std::vector<float> probs(data.size() * k * cells);
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    Tape tape(false);
    const auto out = forward(tape, params, data.batch_inputs(idx), ForwardOptions{Mode::eval, nullptr});
    std::copy(out.probs.data().begin(), out.probs.data().end(),
              probs.begin() + static_cast<std::ptrdiff_t>(start * k * cells));
  }
  const Tensor all({data.size(), k, data.patch_size, data.patch_size}, std::move(probs));
  Tape tape(false);
  const auto l = combined_loss(tape, all, LossTargets{data.labels, data.mask}, loss);
  return {{static_cast<double>(l.total.item()), l.focal, l.dice}, predict_classes(all)};
}

FitResult fit(const ModelParams& initial, const PatchDataset& train, const PatchDataset& val, const TrainConfig& config,
              const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (train.size() == 0 || val.size() == 0) throw ConfigError("fit: train and validation splits must be non-empty");
  ModelParams params = initial;
  AdamState state = AdamState::for_params(params);
  FitResult result{params, 0, 0.0, {}, false};
  double best = INFINITY;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train = train_epoch(params, state, train, config, epoch);
    rec.val = evaluate(params, val, config.loss, config.batch_size).loss;
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.val.total < best - config.min_delta) {
      best = rec.val.total;
      result.best = params;
      result.best_epoch = epoch;
      result.best_val_loss = rec.val.total;
      since_best = 0;
    } else if (++since_best >= config.early_stop_patience) {
      result.stopped_early = epoch < config.max_epochs;
      break;
    }
  }
  return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_total,train_focal,train_dice,val_total,val_focal,val_dice\n";
  char line[256];
  for (const auto& r : history) {
    std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.train.total, r.train.focal,
                  r.train.dice, r.val.total, r.val.focal, r.val.dice);
    out += line;
  }
  return out;
}

}  // namespace rainseg
