#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rainseg/data/lpa.hpp"
#include "rainseg/data/raster.hpp"
#include "rainseg/data/stack.hpp"

namespace rainseg {

struct SynthSpec {
  std::size_t height = 256;
  std::size_t width = 256;
  std::size_t months = 3;
  std::vector<double> class_balance{0.2, 0.2, 0.2, 0.2, 0.2};
  double noise = 0.0;          // stddev of per-cell noise added to the latent score
  std::string region = "Bihar";
  bool mask_border = true;     // irregular nodata margin around the scene
  double feature_scale = 24.0; // lattice spacing of the coarsest noise octave, in cells
  double terrace = 0.0;        // per-class humidity step, in latent-score units

  void validate() const;
};

struct SynthScene {
  std::vector<ModalitySlice> slices;  // modality-major, month-minor
  RasterGrid rain;                    // mm, single channel
  LpaScheme scheme;
};

// Modalities in stacking order: lst, ndvi, soil_moisture, wind_speed,
// humidity, elevation, lulc.
const std::vector<std::string>& synth_modalities();

// Smooth field in [-1, 1]: `octaves` layers of bilinear value noise with a
// smoothstep fade, lattice spacing `cell` halving and amplitude halving per
// layer, lattice values uniform in [-1, 1] from CounterRng(seed, stream * 16 + octave).
std::vector<double> value_noise(std::size_t height, std::size_t width, std::uint64_t seed, std::uint64_t stream,
                                double cell, std::size_t octaves);

/// Deterministic scene.
///
/// Each modality m has a base noise field B_m and per-month fields D_{m,t}
/// (coarsest spacing `feature_scale` cells, 3 octaves); monthly fields are 0.8 B_m + 0.2 D_{m,t}:
///   elevation   e = max(0, 1500 + 1400 B_e)           static
///   lulc          1 + floor(4 (B_l + 1)) clamped 1..8 static
///   humidity    h = 70 + 18 F_h + 3 t                 %
///   wind        w = 5 + 3 F_w + 0.5 t                 m/s
///   lst         l = 305 + 8 F_l - 0.004 (e - 1500) - 1.5 t   K
///   ndvi          0.45 + 0.3 F_n + 0.02 t
///   soil          0.25 + 0.12 F_s - 0.01 t
/// Values are rounded to f32 before use. The latent score per cell is
///   s = (hbar - 70) / 18 + 0.6 (wbar - 5) / 3 - 0.5 (lbar - 305) / 8 + 0.4 (e - 1500) / 1400 + noise * N(0, 1)
/// with bars the mean over months. Rainfall maps s piecewise linearly onto the
/// scheme so that the cell-count quantiles of s at the cumulative class
/// balance land exactly on the class bounds. With terrace > 0 the emitted
/// humidity of a class-k cell is then raised by 18 * terrace * (k - (K - 1) / 2),
/// so the score recomputed from the grids separates classes by gaps of at least `terrace`.
SynthScene synth_generate(const SynthSpec& spec, std::uint64_t seed);

// Stacks a scene's modalities.
GridStack synth_stack(const SynthScene& scene);

}  // namespace rainseg
