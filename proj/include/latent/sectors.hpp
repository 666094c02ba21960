#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "latent/gain.hpp"
#include "latent/tensor.hpp"

namespace latent {

// A sector is one of the 2^n extreme regions of latent space: each selected
// coordinate exceeds the threshold in magnitude with a prescribed sign. Bit i
// of the sector id is 1 when the sign of z[selected[i]] is positive.
enum class SectorNorm {
  per_coordinate,  // |z[sel[i]]| >= th for every i (default)
  euclidean,       // |z[sel]|_2 >= th over the selected subspace
};

struct SectorSpec {
  std::vector<std::size_t> selected;
  float threshold = 1.0f;
  SectorNorm norm = SectorNorm::per_coordinate;
};

std::optional<std::uint32_t> sector_of(const float* code, const SectorSpec& spec);
std::optional<std::uint32_t> sector_of(const Tensor& code, const SectorSpec& spec);

struct SectorCensus {
  std::vector<std::size_t> counts;  // 2^n bins
  std::size_t none_count = 0;       // points below threshold
};

SectorCensus sector_census(const Tensor& encodings, const SectorSpec& spec);

enum class PickMode { extreme, random };

struct SupportSetParams {
  std::size_t n_features = 5;
  float threshold = 1.0f;
  std::size_t target_size = 32;
  SectorNorm norm = SectorNorm::per_coordinate;
  PickMode pick = PickMode::extreme;
  std::uint64_t pick_seed = 0;  // used by PickMode::random
};

struct SupportEntry {
  std::size_t dataset_index = 0;
  std::optional<std::uint32_t> sector_id;  // nullopt marks a diversity top-up
};

struct SupportSet {
  std::vector<SupportEntry> entries;
  std::vector<std::size_t> selected;  // variable indices defining the sectors
  SupportSetParams params;
  std::vector<std::size_t> indices() const;
};

// One representative per nonempty sector (the most extreme point by default,
// deterministic tie-break by dataset index), topped up to target_size by
// farthest-point sampling over the remaining encodings. When more sectors are
// populated than target_size, the highest-occupancy sectors win.
SupportSet build_support_set(const Tensor& encodings, const GainReport& gains,
                             const SupportSetParams& params);

// Mean over unordered index pairs of per-pixel MSE.
double diversity_score(const Tensor& images, std::span<const std::size_t> indices);

}  // namespace latent
