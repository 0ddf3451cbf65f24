// Acceptance checks. Prints one PASS/FAIL line per criterion; exits non-zero
// when any selected criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>
#include <unistd.h>

#include "rainseg/cli/cli.hpp"
#include "rainseg/cli/pipeline.hpp"
#include "rainseg/cli/run_config.hpp"
#include "rainseg/core/binary_io.hpp"
#include "rainseg/core/rng.hpp"
#include "rainseg/data/lpa.hpp"
#include "rainseg/data/patches.hpp"
#include "rainseg/data/split.hpp"
#include "rainseg/data/stack.hpp"
#include "rainseg/data/synth.hpp"
#include "rainseg/losses/losses.hpp"
#include "rainseg/metrics/metrics.hpp"
#include "rainseg/verify/gradcheck_suite.hpp"

using namespace rainseg;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Scratch {
 public:
  explicit Scratch(const std::string& tag)
      : path_(std::filesystem::temp_directory_path() / ("rainseg_accept_" + tag + "_" + std::to_string(::getpid()))) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~Scratch() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto items = run_gradcheck_suite(42);
  const double secs = seconds_since(t0);
  bool ok = items.size() >= 10 && secs < 300.0;
  std::string failed;
  double worst_ratio = 0.0;
  for (const auto& it : items) {
    ok = ok && it.passed;
    if (!it.passed) failed += " " + it.name;
    worst_ratio = std::max(worst_ratio, it.max_rel_error / it.threshold);
  }
  std::string d = std::to_string(items.size()) + " items, worst error/threshold " + fmt("%.3f", worst_ratio) + ", " +
                  fmt("%.1f", secs) + " s";
  if (!failed.empty()) d += ", failing:" + failed;
  return {ok, d};
}

Outcome loss_oracles() {
  using Tape64 = BasicTape<double>;
  using Tensor64 = BasicTensor<double>;
  Tape64 tape(false);
  const LossConfig cfg;
  const Tensor64 half({1, 2, 1, 1}, {0.5, 0.5});
  const std::vector<std::uint8_t> one{0};
  const double focal = focal_loss(tape, half, LossTargets{one, {}}, cfg).item();
  const Tensor64 flat = Tensor64::full({1, 2, 2, 2}, 0.5);
  const std::vector<std::uint8_t> zeros(4, 0);
  const double dice = dice_loss(tape, flat, LossTargets{zeros, {}}, cfg).item();

  // Combination and degenerate weights on a random batch.
  const auto probs = softmax_channel(tape, Tensor64::randn({2, 5, 4, 4}, 7, 1.5));
  std::vector<std::uint8_t> labels(32);
  CounterRng rng(8);
  for (auto& l : labels) l = static_cast<std::uint8_t>(rng.next_below(5));
  const LossTargets t{labels, {}};
  LossConfig w = cfg;
  w.lambda_fl = 0.7f;
  w.lambda_dice = 0.3f;
  const double f = focal_loss(tape, probs, t, w).item();
  const double d = dice_loss(tape, probs, t, w).item();
  const double c = combined_loss(tape, probs, t, w).total.item();
  const double combo_err = std::abs(c - (0.7f * f + 0.3f * d));
  LossConfig only_f = cfg, only_d = cfg;
  only_f.lambda_dice = 0.0f;
  only_d.lambda_fl = 0.0f;
  const bool degenerate = combined_loss(tape, probs, t, only_f).total.item() == focal_loss(tape, probs, t, cfg).item() &&
                          combined_loss(tape, probs, t, only_d).total.item() == dice_loss(tape, probs, t, cfg).item();

  const bool ok = std::abs(focal - 0.25 * std::numbers::ln2) <= 1e-6 && std::abs(focal - 0.173287) <= 1e-6 &&
                  std::abs(dice - (1.0 - (5.0 / 7.0 + 1.0 / 3.0) / 2.0)) <= 1e-6 && std::abs(dice - 0.476190) <= 1e-6 &&
                  combo_err <= 1e-7 && degenerate;
  return {ok, "focal " + fmt("%.6f", focal) + ", dice " + fmt("%.6f", dice) + ", combination error " +
                  fmt("%.1e", combo_err) + ", degenerate weights " + (degenerate ? "exact" : "inexact")};
}

// Scene on disk plus a run configuration pointing at it.
RunConfig scene_config(const std::filesystem::path& dir, const std::vector<std::string>& synth_args) {
  std::vector<std::string> args{"synth", "--out", dir.string()};
  args.insert(args.end(), synth_args.begin(), synth_args.end());
  if (cli(args) != 0) throw std::runtime_error("synth failed");
  RunConfig config;
  config.manifest = dir / "manifest.json";
  return config;
}

Outcome synthetic_end_to_end() {
  Scratch scratch("e2e");
  // Default configuration: RunConfig defaults.
  const auto config = scene_config(scratch.path() / "scene", {"--seed", "42", "--height", "256", "--width", "256"});
  std::ostringstream log;
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = train_run(config, scratch.path() / "run", log);
  const double secs = seconds_since(t0);
  const bool ok = result.test.accuracy >= 0.95 && result.test.weighted_f1 >= 0.95;
  return {ok, "test accuracy " + fmt("%.4f", result.test.accuracy) + ", weighted F1 " +
                  fmt("%.4f", result.test.weighted_f1) + " (need >= 0.95), best epoch " +
                  std::to_string(result.fit.best_epoch) + " of " + std::to_string(result.fit.history.size()) + ", " +
                  fmt("%.0f", secs) + " s"};
}

Outcome loss_ablation() {
  Scratch scratch("ablation");
  const std::size_t rare = 4;
  auto base = scene_config(scratch.path() / "scene",
                           {"--seed", "7", "--height", "96", "--width", "96", "--feature-scale", "8", "--terrace", "1",
                            "--balance", "0.3,0.27,0.25,0.15,0.03"});
  base.model.patch_size = 16;
  base.model.encoder_features = {8, 16, 32, 64};
  base.train.learning_rate = 0.01f;
  base.train.batch_size = 32;
  base.train.max_epochs = 400;
  base.train.early_stop_patience = 400;

  struct Variant {
    std::string name;
    float lambda_fl, lambda_dice;
  };
  const std::vector<Variant> variants{{"focal", 1.0f, 0.0f}, {"dice", 0.0f, 1.0f}, {"combined", 1.0f, 1.0f}};
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> medians;
  std::string d;
  for (const auto& v : variants) {
    std::vector<double> f1;
    for (const std::uint64_t seed : {1, 2, 3}) {
      RunConfig c = base;
      c.seed = seed;
      c.train.seed = seed;
      c.train.loss.lambda_fl = v.lambda_fl;
      c.train.loss.lambda_dice = v.lambda_dice;
      std::ostringstream log;
      const auto r = train_run(c, scratch.path() / (v.name + std::to_string(seed)), log);
      f1.push_back(r.test.per_class[rare].f1);
    }
    std::sort(f1.begin(), f1.end());
    medians.push_back(f1[1]);
    d += v.name + " " + fmt("%.4f", f1[1]) + " [" + fmt("%.3f", f1[0]) + " " + fmt("%.3f", f1[1]) + " " +
         fmt("%.3f", f1[2]) + "], ";
  }
  const double secs = seconds_since(t0);
  const bool ok = medians[2] >= medians[0] && medians[2] >= medians[1] && secs <= 90 * 60;
  return {ok, "median rare-class F1: " + d + fmt("%.0f", secs) + " s"};
}

Outcome invariants() {
  const auto t0 = std::chrono::steady_clock::now();
  CounterRng rng(2024);
  std::size_t trials = 0, failures = 0;
  auto check = [&](bool ok) { failures += ok ? 0 : 1; };

  // Tiling round trips.
  for (int i = 0; i < 400; ++i, ++trials) {
    const std::size_t z = 8u << rng.next_below(3);
    const std::size_t h = z + rng.next_below(3 * z), w = z + rng.next_below(3 * z), c = 1 + rng.next_below(3);
    std::vector<ModalitySlice> slices;
    std::vector<std::uint8_t> valid(h * w);
    for (auto& v : valid) v = rng.next_uniform() < 0.9 ? 1 : 0;
    for (std::size_t ch = 0; ch < c; ++ch) {
      auto g = RasterGrid::filled(h, w, 1, 0.0f);
      for (std::size_t k = 0; k < h * w; ++k) {
        if (valid[k]) {
          g.values[k] = static_cast<float>(rng.next_normal());
        } else {
          g.invalidate(k / w, k % w);
        }
      }
      slices.push_back({"m", ch + 1, g});
    }
    LabelGrid labels{h, w, 5, std::vector<std::uint8_t>(h * w)};
    for (auto& l : labels.labels) l = rng.next_uniform() < 0.05 ? 255 : static_cast<std::uint8_t>(rng.next_below(5));
    const auto stack = stack_modalities(slices);
    const auto ps = tile_patches(stack, labels, z);
    const auto back = untile(ps, ps.labels);
    bool ok = ps.size() == ((h + z - 1) / z) * ((w + z - 1) / z);
    for (std::size_t k = 0; k < h * w; ++k) {
      const bool counted = valid[k] && labels.labels[k] != 255;
      ok = ok && back.labels[k] == (counted ? labels.labels[k] : 255);
    }
    // Inputs land where they came from.
    for (std::size_t p = 0; p < ps.size() && ok; ++p) {
      const auto& o = ps.origins[p];
      for (std::size_t r = 0; r < z && ok; ++r) {
        for (std::size_t col = 0; col < z && ok; ++col) {
          const std::size_t gr = o.row + r, gc = o.col + col;
          const float v = ps.inputs[((p * c) * z + r) * z + col];
          ok = gr < h && gc < w ? v == stack.at(0, gr, gc) : v == 0.0f;
        }
      }
    }
    check(ok);
  }

  // Quantizer totality across all schemes.
  for (int i = 0; i < 300; ++i, ++trials) {
    const auto& schemes = builtin_schemes();
    const auto& s = schemes[rng.next_below(schemes.size())];
    bool ok = true;
    for (int j = 0; j < 50; ++j) {
      const double mm = rng.next_uniform() < 0.1 ? s.classes[rng.next_below(s.num_classes())].lower_mm
                                                 : rng.next_uniform() * 3.0 * s.lpa_mm;
      std::size_t hits = 0, hit = 0;
      for (std::size_t k = 0; k < s.num_classes(); ++k) {
        const auto& c = s.classes[k];
        if (mm >= c.lower_mm && (!c.upper_mm || mm < *c.upper_mm)) {
          ++hits;
          hit = k;
        }
      }
      ok = ok && hits == 1 && s.classify(mm) == hit;
    }
    check(ok);
  }

  // Split partition, disjointness and proportions.
  for (int i = 0; i < 300; ++i, ++trials) {
    const std::size_t pr = 1 + rng.next_below(8), pc = 3 + rng.next_below(8);
    const std::size_t h = pr * 8, w = pc * 8;
    std::vector<ModalitySlice> slices{{"m", 1, RasterGrid::filled(h, w, 1, 1.0f)}};
    LabelGrid labels{h, w, 5, std::vector<std::uint8_t>(h * w)};
    const std::size_t kinds = 1 + rng.next_below(5);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t col = 0; col < w; ++col) {
        labels.labels[r * w + col] = static_cast<std::uint8_t>((r / 8 * 7 + col / 8 * 3 + rng.next_below(2)) % kinds);
      }
    }
    // Some fully masked patches are unassignable.
    for (std::size_t col = 0; col < 8; ++col) {
      if (rng.next_uniform() < 0.3) {
        for (std::size_t r = 0; r < 8; ++r) labels.labels[r * w + col] = 255;
      }
    }
    const auto ps = tile_patches(stack_modalities(slices), labels, 8);
    std::size_t assignable = 0;
    for (std::size_t p = 0; p < ps.size(); ++p) assignable += ps.valid_cells(p) > 0 ? 1 : 0;
    if (assignable < 3) {
      --trials;
      --i;
      continue;
    }
    const auto s = stratified_split(ps, {0.7, 0.15, 0.15}, rng.next_bits());
    bool ok = s.assignment.size() == ps.size();
    std::vector<int> seen(ps.size(), 0);
    for (const auto sp : {Split::train, Split::val, Split::test}) {
      for (const auto p : s.indices(sp)) ++seen[p];
    }
    for (std::size_t p = 0; p < ps.size(); ++p) {
      const bool assignable_p = ps.valid_cells(p) > 0;
      ok = ok && seen[p] == (assignable_p ? 1 : 0) && (s.assignment[p] == Split::unassigned) == !assignable_p;
    }
    const double fr[3] = {0.7, 0.15, 0.15};
    for (int k = 0; k < 3; ++k) {
      ok = ok && std::abs(static_cast<double>(s.count(static_cast<Split>(k))) - fr[k] * static_cast<double>(assignable)) <= 1.0;
    }
    check(ok);
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && trials >= 1000 && secs < 60.0,
          std::to_string(trials) + " randomized trials, " + std::to_string(failures) + " failures, " +
              fmt("%.1f", secs) + " s"};
}

Outcome determinism() {
  Scratch scratch("determinism");
  const auto scene = scratch.path() / "scene";
  if (cli({"synth", "--preset", "overfit", "--seed", "5", "--out", scene.string()}) != 0) return {false, "synth failed"};
  const auto conf = scene / "train.conf";
  std::string detail;
  bool ok = true;
  for (const auto* run : {"a", "b"}) {
    if (cli({"train", "--config", conf.string(), "--out", (scratch.path() / run).string()}) != 0) {
      return {false, "train failed"};
    }
  }
  for (const auto* file : {"best.munw", "history.csv", "metrics.csv", "splits.csv"}) {
    const bool same = io::read_file(scratch.path() / "a" / file) == io::read_file(scratch.path() / "b" / file);
    ok = ok && same;
    detail += std::string(file) + (same ? " identical" : " DIFFERS") + ", ";
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

Outcome metrics_oracle() {
  const LabelGrid truth{1, 4, 2, {0, 0, 1, 1}};
  const LabelGrid pred{1, 4, 2, {0, 1, 1, 1}};
  const auto s = scores(confusion(pred, truth));
  const auto perfect = scores(confusion(truth, truth));
  const bool ok = std::abs(s.accuracy - 0.75) < 1e-12 && std::abs(s.weighted_f1 - 0.7333) <= 1e-4 &&
                  perfect.accuracy == 1.0 && perfect.weighted_f1 == 1.0 && perfect.macro_f1 == 1.0;
  return {ok, "accuracy " + fmt("%.4f", s.accuracy) + ", weighted F1 " + fmt("%.4f", s.weighted_f1) +
                  ", perfect case accuracy " + fmt("%.1f", perfect.accuracy) + " F1 " + fmt("%.1f", perfect.weighted_f1)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "Criteria to run (default: all)")->check(CLI::Range(1, 7));
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7};

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite},   {"loss oracles", loss_oracles},
      {"synthetic end-to-end", synthetic_end_to_end}, {"loss ablation ordering", loss_ablation},
      {"tiling/quantization invariants", invariants}, {"determinism", determinism},
      {"metrics oracle", metrics_oracle}};
  bool all = true;
  for (const int n : selected) {
    const auto& [name, run] = criteria[static_cast<std::size_t>(n - 1)];
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << "criterion " << n << " " << (o.pass ? "PASS" : "FAIL") << " " << name << ": " << o.detail << std::endl;
  }
  return all ? 0 : 1;
}
