#include "latent/sectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "latent/rng.hpp"

namespace latent {

std::optional<std::uint32_t> sector_of(const float* code, const SectorSpec& spec) {
  if (!(spec.threshold > 0.0f)) throw std::invalid_argument("sector_of: threshold must be > 0");
  const std::size_t n = spec.selected.size();
  if (n == 0 || n > 31) throw std::invalid_argument("sector_of: need 1..31 selected variables");
  if (spec.norm == SectorNorm::per_coordinate) {
    for (std::size_t i = 0; i < n; ++i)
      if (std::abs(code[spec.selected[i]]) < spec.threshold) return std::nullopt;
  } else {
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double v = code[spec.selected[i]];
      norm_sq += v * v;
    }
    if (norm_sq < static_cast<double>(spec.threshold) * spec.threshold) return std::nullopt;
  }
  std::uint32_t id = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (code[spec.selected[i]] > 0.0f) id |= (1u << i);
  return id;
}

std::optional<std::uint32_t> sector_of(const Tensor& code, const SectorSpec& spec) {
  for (std::size_t v : spec.selected)
    if (v >= code.numel()) throw std::invalid_argument("sector_of: selected index out of range");
  return sector_of(code.data.data(), spec);
}

SectorCensus sector_census(const Tensor& encodings, const SectorSpec& spec) {
  if (encodings.rows() == 0) throw std::invalid_argument("sector_census: empty encodings");
  SectorCensus census;
  census.counts.assign(std::size_t{1} << spec.selected.size(), 0);
  for (std::size_t i = 0; i < encodings.rows(); ++i) {
    auto id = sector_of(encodings.row(i), spec);
    if (id) census.counts[*id] += 1;
    else census.none_count += 1;
  }
  return census;
}

std::vector<std::size_t> SupportSet::indices() const {
  std::vector<std::size_t> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.dataset_index);
  return out;
}

namespace {

double sq_dist(const float* a, const float* b, std::size_t d) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double diff = static_cast<double>(a[i]) - b[i];
    acc += diff * diff;
  }
  return acc;
}

}  // namespace

SupportSet build_support_set(const Tensor& encodings, const GainReport& gains,
                             const SupportSetParams& params) {
  const std::size_t n_points = encodings.rows();
  if (n_points == 0) throw std::invalid_argument("build_support_set: empty encodings");
  if (params.target_size == 0) throw std::invalid_argument("build_support_set: target_size must be >= 1");

  TopSelection top = select_top(gains, params.n_features, params.target_size);
  SectorSpec spec{top.indices, params.threshold, params.norm};
  const std::size_t n_sectors = std::size_t{1} << params.n_features;
  const std::size_t d = encodings.cols();

  // Sector membership, one pass.
  std::vector<std::vector<std::size_t>> members(n_sectors);
  for (std::size_t i = 0; i < n_points; ++i) {
    auto id = sector_of(encodings.row(i), spec);
    if (id) members[*id].push_back(i);
  }

  // Pick order: highest occupancy first so trimming keeps the busiest sectors.
  std::vector<std::size_t> occupied;
  for (std::size_t s = 0; s < n_sectors; ++s)
    if (!members[s].empty()) occupied.push_back(s);
  std::sort(occupied.begin(), occupied.end(), [&](std::size_t a, std::size_t b) {
    if (members[a].size() != members[b].size()) return members[a].size() > members[b].size();
    return a < b;
  });
  if (occupied.size() > params.target_size) occupied.resize(params.target_size);

  RngState pick_rng = make_rng(derive_seed(params.pick_seed, 0x5ec7));
  SupportSet set;
  set.selected = top.indices;
  set.params = params;
  std::vector<bool> taken(n_points, false);
  for (std::size_t s : occupied) {
    std::size_t chosen = members[s].front();
    if (params.pick == PickMode::extreme) {
      // Most extreme: maximize the minimum |z[sel]| inside the sector.
      double best = -1.0;
      for (std::size_t idx : members[s]) {
        double lo = std::numeric_limits<double>::infinity();
        for (std::size_t v : spec.selected) lo = std::min(lo, std::abs(double(encodings.at(idx, v))));
        if (lo > best) {
          best = lo;
          chosen = idx;
        }
      }
    } else {
      chosen = members[s][rng_next_u64(pick_rng) % members[s].size()];
    }
    taken[chosen] = true;
    set.entries.push_back({chosen, s});
  }
  std::sort(set.entries.begin(), set.entries.end(),
            [](const SupportEntry& a, const SupportEntry& b) { return *a.sector_id < *b.sector_id; });

  // Top-up by farthest-point sampling in the full latent space.
  std::vector<double> min_dist(n_points, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n_points; ++i) {
    if (taken[i]) continue;
    for (const auto& e : set.entries)
      min_dist[i] = std::min(min_dist[i], sq_dist(encodings.row(i), encodings.row(e.dataset_index), d));
  }
  while (set.entries.size() < params.target_size && set.entries.size() < n_points) {
    std::size_t best_idx = n_points;
    double best = -1.0;
    bool empty_set = set.entries.empty();
    for (std::size_t i = 0; i < n_points; ++i) {
      if (taken[i]) continue;
      double score = empty_set ? 0.0 : min_dist[i];
      if (score > best) {
        best = score;
        best_idx = i;
      }
    }
    if (best_idx == n_points) break;
    taken[best_idx] = true;
    set.entries.push_back({best_idx, std::nullopt});
    for (std::size_t i = 0; i < n_points; ++i) {
      if (taken[i]) continue;
      min_dist[i] = std::min(min_dist[i], sq_dist(encodings.row(i), encodings.row(best_idx), d));
    }
  }
  return set;
}

double diversity_score(const Tensor& images, std::span<const std::size_t> indices) {
  if (indices.size() < 2) throw std::invalid_argument("diversity_score: need at least 2 indices");
  const std::size_t cols = images.cols();
  double total = 0.0;
  for (std::size_t a = 0; a + 1 < indices.size(); ++a) {
    double part = 0.0;
    for (std::size_t b = a + 1; b < indices.size(); ++b)
      part += mse_span(images.row(indices[a]), images.row(indices[b]), cols);
    total += part;
  }
  const std::size_t n_pairs = indices.size() * (indices.size() - 1) / 2;
  return total / static_cast<double>(n_pairs);
}

}  // namespace latent
