#include "rainseg/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rainseg/core/error.hpp"
#include "rainseg/core/rng.hpp"

namespace rainseg {

namespace {
constexpr std::size_t kOctaves = 3;

enum Stream : std::uint64_t { kLst = 1, kNdvi, kSoil, kWind, kHumid, kElev, kLulc, kMask, kNoise };

double fade(double t) { return t * t * (3.0 - 2.0 * t); }
}  // namespace

void SynthSpec::validate() const {
  if (height == 0 || width == 0) {
    throw ConfigError("synthetic scene extents must be non-zero, got " + std::to_string(height) + "x" +
                      std::to_string(width));
  }
  if (!(feature_scale >= 2.0) || !std::isfinite(feature_scale)) throw ConfigError("feature scale must be at least 2 cells");
  if (!(terrace >= 0.0) || !std::isfinite(terrace)) throw ConfigError("terrace step must be finite and non-negative");
  if (months == 0) throw ConfigError("synthetic scene needs at least one month");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("noise level must be finite and non-negative");
  double sum = 0.0;
  for (const double b : class_balance) {
    if (!(b > 0.0) || !std::isfinite(b)) throw ConfigError("every class balance entry must be positive");
    sum += b;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ConfigError("class balance must sum to 1, got " + std::to_string(sum));
}

const std::vector<std::string>& synth_modalities() {
  static const std::vector<std::string> names{"lst", "ndvi", "soil_moisture", "wind_speed",
                                              "humidity", "elevation", "lulc"};
  return names;
}

std::vector<double> value_noise(std::size_t height, std::size_t width, std::uint64_t seed, std::uint64_t stream,
                                double cell, std::size_t octaves) {
  std::vector<double> out(height * width, 0.0);
  double amp = 1.0, total = 0.0;
  for (std::size_t o = 0; o < octaves; ++o) {
    const CounterRng rng(seed, stream * 16 + o);
    const auto gw = static_cast<std::size_t>(std::floor(static_cast<double>(width) / cell)) + 2;
    auto lattice = [&](std::size_t iy, std::size_t ix) { return 2.0 * rng.uniform_at(iy * gw + ix) - 1.0; };
    for (std::size_t r = 0; r < height; ++r) {
      const double y = static_cast<double>(r) / cell;
      const auto iy = static_cast<std::size_t>(y);
      const double fy = fade(y - static_cast<double>(iy));
      for (std::size_t c = 0; c < width; ++c) {
        const double x = static_cast<double>(c) / cell;
        const auto ix = static_cast<std::size_t>(x);
        const double fx = fade(x - static_cast<double>(ix));
        const double top = lattice(iy, ix) * (1 - fx) + lattice(iy, ix + 1) * fx;
        const double bot = lattice(iy + 1, ix) * (1 - fx) + lattice(iy + 1, ix + 1) * fx;
        out[r * width + c] += amp * (top * (1 - fy) + bot * fy);
      }
    }
    total += amp;
    amp *= 0.5;
    cell *= 0.5;
  }
  for (auto& v : out) v /= total;
  return out;
}

SynthScene synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  SynthScene scene;
  scene.scheme = builtin_scheme(spec.region);
  if (spec.class_balance.size() != scene.scheme.num_classes()) {
    throw ConfigError("class balance lists " + std::to_string(spec.class_balance.size()) + " classes, scheme has " +
                      std::to_string(scene.scheme.num_classes()));
  }
  const std::size_t H = spec.height, W = spec.width, T = spec.months, N = H * W;

  std::vector<std::uint8_t> valid(N, 1);
  if (spec.mask_border) {
    const auto wobble = value_noise(H, W, seed, kMask, 64.0, 2);
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t c = 0; c < W; ++c) {
        const double dy = (static_cast<double>(r) + 0.5) / static_cast<double>(H) * 2.0 - 1.0;
        const double dx = (static_cast<double>(c) + 0.5) / static_cast<double>(W) * 2.0 - 1.0;
        valid[r * W + c] = std::sqrt(dx * dx + dy * dy) < 1.15 + 0.3 * wobble[r * W + c] ? 1 : 0;
      }
    }
  }

  auto field = [&](Stream s, std::uint64_t sub) { return value_noise(H, W, seed, s * 64 + sub, spec.feature_scale, kOctaves); };
  auto monthly = [&](Stream s) {
    const auto base = field(s, 0);
    std::vector<std::vector<double>> out;
    for (std::size_t t = 0; t < T; ++t) {
      auto d = field(s, t + 1);
      for (std::size_t i = 0; i < N; ++i) d[i] = 0.8 * base[i] + 0.2 * d[i];
      out.push_back(std::move(d));
    }
    return out;
  };

  auto make = [&](const std::string& name, std::size_t t, const std::vector<float>& v) {
    ModalitySlice s{name, t + 1, RasterGrid::filled(H, W, 1, 0.0f)};
    s.grid.values = v;
    s.grid.valid = valid;
    for (std::size_t i = 0; i < N; ++i) {
      if (!valid[i]) s.grid.values[i] = 0.0f;
    }
    return s;
  };

  const auto be = field(kElev, 0);
  const auto bl = field(kLulc, 0);
  std::vector<float> elev(N), lulc(N);
  for (std::size_t i = 0; i < N; ++i) {
    elev[i] = static_cast<float>(std::max(0.0, 1500.0 + 1400.0 * be[i]));
    lulc[i] = static_cast<float>(std::clamp(1.0 + std::floor(4.0 * (bl[i] + 1.0)), 1.0, 8.0));
  }
  const auto fl = monthly(kLst), fn = monthly(kNdvi), fs = monthly(kSoil), fw = monthly(kWind), fh = monthly(kHumid);
  std::vector<std::vector<float>> lst(T, std::vector<float>(N)), ndvi = lst, soil = lst, wind = lst, hum = lst;
  for (std::size_t t = 0; t < T; ++t) {
    const double td = static_cast<double>(t);
    for (std::size_t i = 0; i < N; ++i) {
      hum[t][i] = static_cast<float>(70.0 + 18.0 * fh[t][i] + 3.0 * td);
      wind[t][i] = static_cast<float>(5.0 + 3.0 * fw[t][i] + 0.5 * td);
      lst[t][i] = static_cast<float>(305.0 + 8.0 * fl[t][i] - 0.004 * (elev[i] - 1500.0) - 1.5 * td);
      ndvi[t][i] = static_cast<float>(0.45 + 0.3 * fn[t][i] + 0.02 * td);
      soil[t][i] = static_cast<float>(0.25 + 0.12 * fs[t][i] - 0.01 * td);
    }
  }
  const std::vector<std::pair<std::string, const std::vector<std::vector<float>>*>> dynamic{
      {"lst", &lst}, {"ndvi", &ndvi}, {"soil_moisture", &soil}, {"wind_speed", &wind}, {"humidity", &hum}};
  for (const auto& [name, data] : dynamic) {
    for (std::size_t t = 0; t < T; ++t) scene.slices.push_back(make(name, t, (*data)[t]));
  }
  for (std::size_t t = 0; t < T; ++t) scene.slices.push_back(make("elevation", t, elev));
  for (std::size_t t = 0; t < T; ++t) scene.slices.push_back(make("lulc", t, lulc));

  // Latent score from the emitted f32 values.
  const CounterRng noise_rng(seed, kNoise);
  std::vector<double> score(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    double h = 0, w = 0, l = 0;
    for (std::size_t t = 0; t < T; ++t) {
      h += hum[t][i];
      w += wind[t][i];
      l += lst[t][i];
    }
    h /= static_cast<double>(T);
    w /= static_cast<double>(T);
    l /= static_cast<double>(T);
    score[i] = (h - 70.0) / 18.0 + 0.6 * (w - 5.0) / 3.0 - 0.5 * (l - 305.0) / 8.0 + 0.4 * (elev[i] - 1500.0) / 1400.0;
    if (spec.noise > 0.0) score[i] += spec.noise * noise_rng.normal_at(i);
  }

  std::vector<double> sorted;
  for (std::size_t i = 0; i < N; ++i) {
    if (valid[i]) sorted.push_back(score[i]);
  }
  if (sorted.empty()) throw ConfigError("synthetic scene has no valid cells");
  std::sort(sorted.begin(), sorted.end());
  const std::size_t K = scene.scheme.num_classes();
  const std::size_t nv = sorted.size();
  // knots[k] is the score at which class k starts; knots[0] = min, knots[K] = max.
  std::vector<double> knots(K + 1);
  knots[0] = sorted.front();
  knots[K] = sorted.back();
  double cum = 0.0;
  std::size_t prev = 0;
  for (std::size_t k = 1; k < K; ++k) {
    cum += spec.class_balance[k - 1];
    const auto idx = static_cast<std::size_t>(std::llround(cum * static_cast<double>(nv)));
    if (idx <= prev || idx >= nv || sorted[idx] <= sorted[idx - 1]) {
      throw ConfigError("class balance cannot be realized on " + std::to_string(nv) +
                        " valid cells (class " + std::to_string(k - 1) + " would be empty or split a tie)");
    }
    knots[k] = sorted[idx];
    prev = idx;
  }
  if (!(knots[K] > knots[K - 1])) throw ConfigError("class balance leaves the top class empty");

  std::vector<double> mm(K + 1);
  for (std::size_t k = 0; k < K; ++k) mm[k] = scene.scheme.classes[k].lower_mm;
  mm[K] = mm[K - 1] + (mm[K - 1] - mm[K - 2]);

  // Terraces: humidity steps by 18 * terrace per class, widening every class gap of the score by `terrace`.
  if (spec.terrace > 0.0) {
    auto& slices = scene.slices;
    const std::size_t h0 = 4 * T;
    for (std::size_t i = 0; i < N; ++i) {
      if (!valid[i]) continue;
      const auto k = static_cast<double>(std::upper_bound(knots.begin() + 1, knots.end() - 1, score[i]) - knots.begin() - 1);
      const double shift = 18.0 * spec.terrace * (k - 0.5 * static_cast<double>(K - 1));
      for (std::size_t t = 0; t < T; ++t) {
        auto& v = slices[h0 + t].grid.values[i];
        v = static_cast<float>(static_cast<double>(v) + shift);
      }
    }
  }

  scene.rain = RasterGrid::filled(H, W, 1, 0.0f);
  scene.rain.valid = valid;
  for (std::size_t i = 0; i < N; ++i) {
    if (!valid[i]) continue;
    const double s = score[i];
    std::size_t k = static_cast<std::size_t>(std::upper_bound(knots.begin() + 1, knots.end() - 1, s) - knots.begin()) - 1;
    const double t = (s - knots[k]) / (knots[k + 1] - knots[k]);
    // Keep the value strictly inside the class interval after rounding to f32.
    const double lo = mm[k], hi = mm[k + 1];
    float v = static_cast<float>(lo + t * (hi - lo));
    while (scene.scheme.classify(v) < k) v = std::nextafter(v, static_cast<float>(hi));
    while (scene.scheme.classify(v) > k) v = std::nextafter(v, static_cast<float>(lo));
    scene.rain.values[i] = v;
  }
  return scene;
}

GridStack synth_stack(const SynthScene& scene) { return stack_modalities(scene.slices); }

}  // namespace rainseg
