#include "rainseg/data/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rainseg/core/error.hpp"
#include "rainseg/core/rng.hpp"

namespace rainseg {

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::unassigned: return "none";
  }
  return "none";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  if (name == "none") return Split::unassigned;
  throw ConfigError("unknown split '" + name + "' (expected train, val, test or none)");
}

std::vector<std::size_t> SplitAssignment::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == s) out.push_back(i);
  }
  return out;
}

std::size_t SplitAssignment::count(Split s) const {
  return static_cast<std::size_t>(std::count(assignment.begin(), assignment.end(), s));
}

std::vector<std::size_t> largest_remainder(std::size_t total, const std::vector<double>& fractions) {
  std::vector<std::size_t> out(fractions.size());
  std::vector<double> rem(fractions.size());
  std::size_t used = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double ideal = static_cast<double>(total) * fractions[i];
    out[i] = static_cast<std::size_t>(std::floor(ideal + 1e-9));
    rem[i] = ideal - static_cast<double>(out[i]);
    used += out[i];
  }
  std::vector<std::size_t> order(fractions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b] + 1e-12; });
  for (std::size_t i = 0; used < total; ++i, ++used) out[order[i % order.size()]] += 1;
  return out;
}

namespace {

// Unit-capacity bipartite flow from buckets (needing `need[b]` extras) to
// splits (accepting `take[s]` extras). Edges are tried in the order given.
class ExtraFlow {
 public:
  ExtraFlow(std::vector<std::size_t> need, std::vector<std::size_t> take,
            std::vector<std::vector<std::size_t>> edges)
      : need_(std::move(need)), take_(std::move(take)), edges_(std::move(edges)),
        used_(need_.size(), std::vector<bool>(take_.size(), false)) {}

  std::size_t run() {
    std::size_t flow = 0;
    for (std::size_t b = 0; b < need_.size(); ++b) {
      while (need_[b] > 0) {
        std::vector<bool> seen(take_.size(), false);
        if (!augment(b, seen)) break;
        --need_[b];
        ++flow;
      }
    }
    return flow;
  }
  bool used(std::size_t b, std::size_t s) const { return used_[b][s]; }

 private:
  // Finds an alternating path from bucket b to a split with spare capacity.
  bool augment(std::size_t b, std::vector<bool>& seen) {
    for (const auto s : edges_[b]) {
      if (used_[b][s] || seen[s]) continue;
      seen[s] = true;
      if (take_[s] > 0) {
        --take_[s];
        used_[b][s] = true;
        return true;
      }
      // Reroute another bucket's extra away from s.
      for (std::size_t other = 0; other < need_.size(); ++other) {
        if (other == b || !used_[other][s]) continue;
        used_[other][s] = false;
        if (augment(other, seen)) {
          used_[b][s] = true;
          return true;
        }
        used_[other][s] = true;
      }
    }
    return false;
  }

  std::vector<std::size_t> need_;
  std::vector<std::size_t> take_;
  std::vector<std::vector<std::size_t>> edges_;
  std::vector<std::vector<bool>> used_;
};

}  // namespace

SplitAssignment stratified_split(const PatchSet& patches, std::array<double, 3> fractions, std::uint64_t seed) {
  double sum = 0.0;
  for (const double f : fractions) {
    if (!(f >= 0.0) || !std::isfinite(f)) throw ConfigError("split fractions must be finite and non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1, got " + std::to_string(sum));

  const std::size_t K = patches.num_classes;
  const std::size_t zz = patches.cells_per_patch();
  SplitAssignment out;
  out.assignment.assign(patches.size(), Split::unassigned);
  out.bucket.assign(patches.size(), -1);
  std::vector<std::vector<std::size_t>> members(K);
  std::size_t assignable = 0;
  for (std::size_t p = 0; p < patches.size(); ++p) {
    std::vector<std::size_t> hist(K, 0);
    for (std::size_t l = 0; l < zz; ++l) {
      if (patches.valid[p * zz + l]) ++hist[patches.labels[p * zz + l]];
    }
    if (std::accumulate(hist.begin(), hist.end(), std::size_t{0}) == 0) continue;
    const auto majority = static_cast<std::size_t>(std::max_element(hist.begin(), hist.end()) - hist.begin());
    out.bucket[p] = static_cast<std::int32_t>(majority);
    members[majority].push_back(p);
    ++assignable;
  }
  if (assignable < 3) {
    throw ConfigError("need at least 3 patches with valid cells to split, have " + std::to_string(assignable));
  }

  const std::vector<double> fr(fractions.begin(), fractions.end());
  const auto totals = largest_remainder(assignable, fr);

  // Per-bucket base counts and fractional remainders.
  std::vector<std::array<std::size_t, 3>> alloc(K);
  std::vector<std::array<double, 3>> rem(K);
  std::vector<std::size_t> need(K, 0);
  std::vector<std::size_t> take(3, 0);
  std::array<std::size_t, 3> base_total{};
  for (std::size_t b = 0; b < K; ++b) {
    std::size_t used = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      const double ideal = static_cast<double>(members[b].size()) * fr[s];
      alloc[b][s] = static_cast<std::size_t>(std::floor(ideal + 1e-9));
      rem[b][s] = ideal - static_cast<double>(alloc[b][s]);
      used += alloc[b][s];
      base_total[s] += alloc[b][s];
    }
    need[b] = members[b].size() - used;
  }
  for (std::size_t s = 0; s < 3; ++s) take[s] = totals[s] - base_total[s];

  auto edge_order = [&](bool allow_integral) {
    std::vector<std::vector<std::size_t>> edges(K);
    for (std::size_t b = 0; b < K; ++b) {
      std::vector<std::size_t> e;
      for (std::size_t s = 0; s < 3; ++s) {
        if (rem[b][s] > 1e-9 || allow_integral) e.push_back(s);
      }
      std::stable_sort(e.begin(), e.end(), [&](std::size_t x, std::size_t y) { return rem[b][x] > rem[b][y] + 1e-12; });
      edges[b] = std::move(e);
    }
    return edges;
  };
  // Extras first go only where a bucket's ideal count is fractional, which
  // keeps every count within one of its ideal; integral cells are a fallback.
  const std::size_t required = std::accumulate(need.begin(), need.end(), std::size_t{0});
  ExtraFlow flow(need, take, edge_order(false));
  if (flow.run() != required) {
    flow = ExtraFlow(need, take, edge_order(true));
    if (flow.run() != required) throw NumericError("stratified split: no allocation meets bucket and split totals");
  }
  for (std::size_t b = 0; b < K; ++b) {
    for (std::size_t s = 0; s < 3; ++s) {
      if (flow.used(b, s)) ++alloc[b][s];
    }
  }

  for (auto& h : out.class_cells) h.assign(K, 0);
  for (auto& h : out.bucket_patches) h.assign(K, 0);
  for (std::size_t b = 0; b < K; ++b) {
    auto& m = members[b];
    CounterRng rng(derive_seed(seed, b));
    for (std::size_t i = m.size(); i > 1; --i) std::swap(m[i - 1], m[rng.next_below(i)]);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t j = 0; j < alloc[b][s]; ++j, ++pos) {
        const auto p = m[pos];
        out.assignment[p] = static_cast<Split>(s);
        ++out.bucket_patches[s][b];
        for (std::size_t l = 0; l < zz; ++l) {
          if (patches.valid[p * zz + l]) ++out.class_cells[s][patches.labels[p * zz + l]];
        }
      }
    }
  }
  return out;
}

std::string split_csv(const PatchSet& patches, const SplitAssignment& split) {
  std::ostringstream os;
  os << "patch_row,patch_col,split\n";
  for (std::size_t p = 0; p < patches.size(); ++p) {
    os << patches.origins[p].row / patches.patch_size << ',' << patches.origins[p].col / patches.patch_size << ','
       << split_name(split.assignment[p]) << '\n';
  }
  return os.str();
}

SplitAssignment parse_split_csv(const std::string& text, const PatchSet& patches) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "patch_row,patch_col,split") {
    throw ConfigError("split file must start with the header patch_row,patch_col,split");
  }
  SplitAssignment out;
  out.assignment.assign(patches.size(), Split::unassigned);
  out.bucket.assign(patches.size(), -1);
  std::vector<bool> seen(patches.size(), false);
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string r, c, s;
    if (!std::getline(ls, r, ',') || !std::getline(ls, c, ',') || !std::getline(ls, s)) {
      throw ConfigError("split file line " + std::to_string(lineno) + ": expected three fields");
    }
    std::size_t row = 0, col = 0;
    try {
      row = std::stoul(r);
      col = std::stoul(c);
    } catch (const std::exception&) {
      throw ConfigError("split file line " + std::to_string(lineno) + ": bad patch coordinates");
    }
    if (row >= patches.patch_rows || col >= patches.patch_cols) {
      throw ConfigError("split file line " + std::to_string(lineno) + ": patch outside the " +
                        std::to_string(patches.patch_rows) + "x" + std::to_string(patches.patch_cols) + " patch grid");
    }
    const std::size_t p = row * patches.patch_cols + col;
    if (seen[p]) throw ConfigError("split file line " + std::to_string(lineno) + ": patch listed twice");
    seen[p] = true;
    out.assignment[p] = parse_split(s);
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw ConfigError("split file does not list every patch");
  }
  return out;
}

}  // namespace rainseg
