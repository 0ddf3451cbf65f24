#include "rainseg/cli/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <memory>
#include <ostream>
#include <sstream>

#include "rainseg/cli/pipeline.hpp"
#include "rainseg/cli/run_config.hpp"
#include "rainseg/core/binary_io.hpp"
#include "rainseg/core/error.hpp"
#include "rainseg/data/synth.hpp"
#include "rainseg/kernels/parallel.hpp"
#include "rainseg/verify/gradcheck_suite.hpp"

namespace rainseg {

namespace {

class VerificationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SynthArgs {
  std::filesystem::path out;
  std::uint64_t seed = 42;
  std::string preset = "full";
  std::optional<std::size_t> height, width;
  std::optional<double> noise, terrace, feature_scale;
  std::optional<std::string> region;
  std::vector<double> balance;
};

// Scene and training settings of a named preset.
struct Preset {
  SynthSpec spec;
  std::string train_conf;
};

Preset preset(const std::string& name) {
  Preset p;
  if (name == "full") {
    p.train_conf = "manifest = manifest.json\n";
  } else if (name == "overfit") {
    p.spec.height = p.spec.width = 64;
    p.spec.feature_scale = 8.0;
    p.spec.terrace = 1.0;
    p.train_conf =
        "manifest = manifest.json\n"
        "patch_size = 16\n"
        "features = 8,16,32,64\n"
        "learning_rate = 0.01\n"
        "batch_size = 16\n"
        "max_epochs = 300\n"
        "patience = 300\n";
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected full or overfit)");
  }
  return p;
}

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  auto p = preset(a.preset);
  SynthSpec& spec = p.spec;
  if (a.height) spec.height = *a.height;
  if (a.width) spec.width = *a.width;
  if (a.noise) spec.noise = *a.noise;
  if (a.terrace) spec.terrace = *a.terrace;
  if (a.feature_scale) spec.feature_scale = *a.feature_scale;
  if (a.region) spec.region = *a.region;
  if (!a.balance.empty()) spec.class_balance = a.balance;
  const auto scene = synth_generate(spec, a.seed);

  std::filesystem::create_directories(a.out);
  Manifest m;
  m.scheme = scene.scheme;
  m.height = spec.height;
  m.width = spec.width;
  for (const auto& s : scene.slices) {
    const auto name = s.modality + "_" + std::to_string(s.month) + ".mgrid";
    write_grid(s.grid, a.out / name);
    m.channels.push_back({s.modality, s.month, name});
  }
  write_grid(scene.rain, a.out / "rain.mgrid");
  m.rain = "rain.mgrid";
  write_manifest(m, a.out / "manifest.json");
  io::write_text(a.out / "train.conf", "seed = " + std::to_string(a.seed) + "\n" + p.train_conf);
  out << "wrote " << scene.slices.size() << " modality grids, rain grid and manifest to " << a.out.string() << "\n";
}

void cmd_quantize(const std::filesystem::path& manifest_path, const std::filesystem::path& dest, std::ostream& out) {
  const auto m = read_manifest(manifest_path);
  const auto labels = load_labels(m);
  write_labels(labels, dest);
  std::vector<std::size_t> hist(labels.num_classes, 0);
  std::size_t masked = 0;
  for (const auto v : labels.labels) {
    if (v == 255) {
      ++masked;
    } else {
      ++hist[v];
    }
  }
  for (std::size_t k = 0; k < hist.size(); ++k) out << m.scheme.classes[k].name << " " << hist[k] << "\n";
  out << "masked " << masked << "\n";
}

void cmd_split(const std::filesystem::path& manifest_path, std::uint64_t seed, std::size_t patch_size,
               const std::filesystem::path& dest, std::ostream& out) {
  const auto m = read_manifest(manifest_path);
  const auto patches = tile_patches(load_stack(m), load_labels(m), patch_size);
  const auto split = stratified_split(patches, {0.7, 0.15, 0.15}, seed);
  io::write_text(dest, split_csv(patches, split));
  out << "train " << split.count(Split::train) << " val " << split.count(Split::val) << " test "
      << split.count(Split::test) << " unassigned " << split.count(Split::unassigned) << "\n";
}

void cmd_train(const std::filesystem::path& config_path, const std::filesystem::path& dest, std::ostream& out) {
  const auto text = io::read_text(config_path);
  const auto config = parse_run_config(text, config_path.parent_path());
  try {
    train_run(config, dest, out, text);
  } catch (const NumericError& e) {
    throw NumericError(std::string("training diverged: ") + e.what());
  }
}

struct EvalArgs {
  std::filesystem::path checkpoint, manifest, splits;
  std::string split = "test";
  std::uint64_t seed = 42;
  std::size_t batch_size = 16;
};

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto ckpt = load_checkpoint(a.checkpoint);
  const auto m = read_manifest(a.manifest);
  const auto raw = load_stack(m);
  const auto labels = load_labels(m);
  const std::size_t z = ckpt.params.config().patch_size;
  const auto stats = stored_stats(ckpt);
  std::optional<SplitAssignment> fixed;
  if (!a.splits.empty()) fixed = parse_split_csv(io::read_text(a.splits), tile_patches(raw, labels, z));
  const auto data = prepare_data(raw, labels, z, {0.7, 0.15, 0.15}, a.seed, fixed ? &*fixed : nullptr, &stats);
  std::vector<std::size_t> indices;
  if (a.split == "all") {
    for (std::size_t p = 0; p < data.patches.size(); ++p) indices.push_back(p);
  } else {
    indices = data.split.indices(parse_split(a.split));
  }
  if (indices.empty()) throw ConfigError("split '" + a.split + "' holds no patches");
  auto params = ckpt.params;
  const auto predictions = predict_patches(params, data.patches, a.batch_size);
  out << metrics_csv(scores(split_confusion(data.patches, predictions, indices)), scheme_names(m.scheme));
}

void cmd_predict(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest_path,
                 const std::filesystem::path& dest, std::filesystem::path labels_dest, std::ostream& out) {
  const auto ckpt = load_checkpoint(checkpoint);
  const auto m = read_manifest(manifest_path);
  const auto raw = load_stack(m);
  const auto stats = stored_stats(ckpt);
  // Targets are not needed; an all-valid placeholder keeps every stack cell.
  LabelGrid placeholder{raw.height, raw.width, m.scheme.num_classes(),
                        std::vector<std::uint8_t>(raw.cells(), 0)};
  const std::size_t z = ckpt.params.config().patch_size;
  const auto patches = tile_patches(normalize_channels(raw, &stats).first, placeholder, z);
  auto params = ckpt.params;
  const auto map = untile(patches, predict_patches(params, patches, 16));
  io::write_file(dest, render_classmap(map));
  if (labels_dest.empty()) labels_dest = std::filesystem::path(dest).replace_extension(".mlbl");
  write_labels(map, labels_dest);
  out << "wrote " << map.width << "x" << map.height << " class map to " << dest.string() << " and "
      << labels_dest.string() << "\n";
}

void cmd_gradcheck(std::uint64_t seed, const std::string& fault, std::ostream& out) {
  if (!fault.empty() && fault != "conv2d") throw ConfigError("unknown fault '" + fault + "' (expected conv2d)");
  struct Restore {
    ~Restore() { kernels::fault::corrupt_conv_backward(false); }
  } restore;
  kernels::fault::corrupt_conv_backward(fault == "conv2d");
  const auto items = run_gradcheck_suite(seed);
  std::string failed;
  char line[160];
  for (const auto& it : items) {
    std::snprintf(line, sizeof line, "%-22s max_rel_error %.3e  threshold %.0e  coords %4zu  skipped %2zu  %s\n",
                  it.name.c_str(), it.max_rel_error, it.threshold, it.coordinates, it.skipped,
                  it.passed ? "ok" : "FAIL");
    out << line;
    if (!it.passed) failed += (failed.empty() ? "" : ", ") + it.name;
  }
  out << items.size() << " items checked\n";
  if (!failed.empty()) throw VerificationFailure("gradient check failed: " + failed);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attention U-Net rainfall-class segmentation"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP threads (0 keeps the runtime default)")->check(CLI::NonNegativeNumber);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic scene");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--seed", synth.seed, "Scene seed");
  s->add_option("--preset", synth.preset, "full or overfit");
  s->add_option("--height", synth.height, "Grid rows");
  s->add_option("--width", synth.width, "Grid columns");
  s->add_option("--noise", synth.noise, "Latent noise stddev");
  s->add_option("--terrace", synth.terrace, "Per-class humidity step");
  s->add_option("--feature-scale", synth.feature_scale, "Coarsest noise spacing in cells");
  s->add_option("--region", synth.region, "Rainfall scheme");
  s->add_option("--balance", synth.balance, "Class fractions")->delimiter(',');

  std::filesystem::path manifest, dest, config, checkpoint, labels_dest;
  std::uint64_t seed = 42;
  std::size_t patch_size = 32;
  auto* q = app.add_subcommand("quantize", "Quantize rainfall into classes");
  q->add_option("--manifest", manifest, "Dataset manifest")->required();
  q->add_option("--out", dest, "Output MLBL file")->required();

  auto* sp = app.add_subcommand("split", "Stratified train/val/test split");
  sp->add_option("--manifest", manifest, "Dataset manifest")->required();
  sp->add_option("--seed", seed, "Split seed");
  sp->add_option("--patch-size", patch_size, "Patch size");
  sp->add_option("--out", dest, "Output CSV")->required();

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--config", config, "Run configuration")->required();
  tr->add_option("--out", dest, "Run directory")->required();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Print metrics of a checkpoint on a split");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint")->required();
  e->add_option("--manifest", ev.manifest, "Dataset manifest")->required();
  e->add_option("--split", ev.split, "train, val, test or all");
  e->add_option("--splits", ev.splits, "Split CSV (default: derive from --seed)");
  e->add_option("--seed", ev.seed, "Split seed when no CSV is given");
  e->add_option("--batch-size", ev.batch_size, "Inference batch size");

  auto* pr = app.add_subcommand("predict", "Predict a full class map");
  pr->add_option("--checkpoint", checkpoint, "Checkpoint")->required();
  pr->add_option("--manifest", manifest, "Dataset manifest")->required();
  pr->add_option("--out", dest, "Output PPM")->required();
  pr->add_option("--labels", labels_dest, "Output MLBL (default: next to the PPM)");

  std::string fault;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  g->add_option("--seed", seed, "Suite seed");
  g->add_option("--inject-fault", fault, "Corrupt a backward kernel (conv2d)");

  std::vector<std::string> argv_store{"rainseg"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (threads > 0) kernels::set_threads(threads);
    if (s->parsed()) cmd_synth(synth, out);
    if (q->parsed()) cmd_quantize(manifest, dest, out);
    if (sp->parsed()) cmd_split(manifest, seed, patch_size, dest, out);
    if (tr->parsed()) cmd_train(config, dest, out);
    if (e->parsed()) cmd_eval(ev, out);
    if (pr->parsed()) cmd_predict(checkpoint, manifest, dest, labels_dest, out);
    if (g->parsed()) cmd_gradcheck(seed, fault, out);
  } catch (const VerificationFailure& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitVerification;
  } catch (const NumericError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitDiverged;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace rainseg
