#include <doctest.h>

#include <algorithm>
#include <string>

#include "rainseg/core/error.hpp"
#include "rainseg/core/rng.hpp"
#include "rainseg/data/patches.hpp"
#include "rainseg/data/stack.hpp"
#include "rainseg/metrics/metrics.hpp"

using namespace rainseg;

namespace {

LabelGrid grid(std::size_t h, std::size_t w, std::size_t k, std::vector<std::uint8_t> v) {
  return LabelGrid{h, w, k, std::move(v)};
}

LabelGrid random_labels(std::size_t h, std::size_t w, std::size_t k, std::uint64_t seed, double masked) {
  CounterRng rng(seed);
  LabelGrid l{h, w, k, std::vector<std::uint8_t>(h * w)};
  for (auto& v : l.labels) v = rng.next_uniform() < masked ? 255 : static_cast<std::uint8_t>(rng.next_below(k));
  return l;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("two-class hand example") {
  const auto truth = grid(1, 4, 2, {0, 0, 1, 1});
  const auto pred = grid(1, 4, 2, {0, 1, 1, 1});
  const auto cm = confusion(pred, truth);
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.at(1, 0) == 0);
  CHECK(cm.at(1, 1) == 2);
  const auto s = scores(cm);
  CHECK(s.accuracy == doctest::Approx(0.75));
  CHECK(s.per_class[0].precision == doctest::Approx(1.0));
  CHECK(s.per_class[0].recall == doctest::Approx(0.5));
  CHECK(s.per_class[0].f1 == doctest::Approx(2.0 / 3.0));
  CHECK(s.per_class[1].f1 == doctest::Approx(0.8));
  CHECK(s.macro_f1 == doctest::Approx((2.0 / 3.0 + 0.8) / 2));
  CHECK(s.weighted_f1 == doctest::Approx(0.733333).epsilon(1e-5));
}

TEST_CASE("perfect prediction") {
  const auto truth = random_labels(20, 20, 5, 1, 0.1);
  const auto cm = confusion(truth, truth);
  std::uint64_t diag = 0;
  for (std::size_t k = 0; k < 5; ++k) diag += cm.at(k, k);
  CHECK(diag == cm.total);
  const auto s = scores(cm);
  CHECK(s.accuracy == 1.0);
  CHECK(s.macro_f1 == 1.0);
  CHECK(s.weighted_f1 == 1.0);
}

TEST_CASE("masked cells are excluded") {
  const auto truth = grid(1, 4, 3, {0, 255, 2, 1});
  const auto pred = grid(1, 4, 3, {0, 1, 255, 1});
  const auto cm = confusion(pred, truth);
  CHECK(cm.total == 2);
  const auto none = grid(1, 2, 3, {255, 255});
  CHECK_THROWS_AS(confusion(none, none), NumericError);
  CHECK_THROWS_AS(confusion(grid(1, 2, 3, {0, 1}), grid(2, 1, 3, {0, 1})), ConfigError);
}

TEST_CASE("class predicted but never true") {
  const auto truth = grid(1, 4, 3, {0, 0, 1, 1});
  const auto pred = grid(1, 4, 3, {0, 2, 1, 1});
  const auto s = scores(confusion(pred, truth));
  CHECK(s.per_class[2].absent);
  CHECK(s.per_class[2].precision == 0.0);
  CHECK(s.per_class[2].recall == 0.0);
  CHECK(s.per_class[2].f1 == 0.0);
  // Macro runs over the three classes seen in either grid.
  CHECK(s.macro_f1 == doctest::Approx((2.0 / 3.0 + 1.0 + 0.0) / 3));
  CHECK(s.weighted_f1 == doctest::Approx((2.0 / 3.0 * 2 + 1.0 * 2) / 4));
  const auto csv = metrics_csv(s, {"a", "b", "c"});
  CHECK(csv.rfind("class,name,precision,recall,f1,support\n", 0) == 0);
  CHECK(csv.find("2,c,0.000000,0.000000,--,0") != std::string::npos);
  CHECK(csv.find("accuracy") != std::string::npos);
}

TEST_CASE("metrics ignore cell order") {
  const auto truth = random_labels(16, 16, 5, 2, 0.1);
  const auto pred = random_labels(16, 16, 5, 3, 0.1);
  std::vector<std::size_t> perm(256);
  for (std::size_t i = 0; i < 256; ++i) perm[i] = i;
  CounterRng rng(4);
  for (std::size_t i = 255; i > 0; --i) std::swap(perm[i], perm[rng.next_below(i + 1)]);
  auto t2 = truth, p2 = pred;
  for (std::size_t i = 0; i < 256; ++i) {
    t2.labels[i] = truth.labels[perm[i]];
    p2.labels[i] = pred.labels[perm[i]];
  }
  CHECK(confusion(pred, truth) == confusion(p2, t2));
}

TEST_CASE("pooled patch counts equal untiled counts") {
  const auto truth = random_labels(40, 24, 5, 5, 0.1);
  const auto pred = random_labels(40, 24, 5, 6, 0.05);
  std::vector<ModalitySlice> slices{{"x", 1, RasterGrid::filled(40, 24, 1, 0.0f)}};
  const auto stack = stack_modalities(slices);
  const auto pt = tile_patches(stack, truth, 16);
  const auto pp = tile_patches(stack, pred, 16);
  ConfusionMatrix pooled(5);
  const std::size_t area = 16 * 16;
  for (std::size_t p = 0; p < pt.size(); ++p) {
    const std::span<const std::uint8_t> t(pt.labels.data() + p * area, area);
    const std::span<const std::uint8_t> q(pp.labels.data() + p * area, area);
    bool any = false;
    for (std::size_t i = 0; i < area; ++i) any = any || (t[i] != 255 && q[i] != 255);
    if (any) pooled += confusion(q, t, {}, 5);
  }
  CHECK(pooled == confusion(pred, truth));
}

TEST_CASE("class map rendering") {
  const auto l = grid(2, 3, 5, {0, 1, 2, 3, 4, 255});
  const auto ppm = render_classmap(l);
  const std::string header = "P6\n3 2\n255\n";
  REQUIRE(ppm.size() == header.size() + 18);
  CHECK(std::string(ppm.begin(), ppm.begin() + static_cast<std::ptrdiff_t>(header.size())) == header);
  const std::size_t o = header.size();
  CHECK(ppm[o] == 0xD7);
  CHECK(ppm[o + 1] == 0x30);
  CHECK(ppm[o + 2] == 0x27);
  CHECK(ppm[o + 12] == 0x45);
  CHECK(ppm[o + 15] == 0xFF);
  CHECK(ppm[o + 17] == 0xFF);
  CHECK(render_classmap(l) == ppm);

  const auto blank = render_classmap(grid(4, 4, 5, std::vector<std::uint8_t>(16, 255)));
  CHECK(std::all_of(blank.begin() + 12, blank.end(), [](std::uint8_t b) { return b == 0xFF; }));
}

}  // TEST_SUITE
