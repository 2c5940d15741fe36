#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "geoprobe/geodata.hpp"

namespace geoprobe {

enum class SkewProfile {
  None,
  // Southern locations are sampled less often and carry extra noise that
  // grows linearly towards the south pole.
  South,
};

SkewProfile parse_skew_profile(std::string_view name);

struct SynthConfig {
  std::size_t n = 1000;
  std::size_t d = 16;
  double sigma = 0.0;
  std::uint64_t seed = 42;
  SkewProfile skew = SkewProfile::None;
  std::string model_id = "synthetic";
  std::uint32_t layer = 0;
};

struct SynthData {
  std::string locations_csv;
  Dataset locations;
  EmbeddingMatrix embeddings;
};

// Coordinates are scaled to unit variance (the spread of a uniform draw on
// [-90, 90] or [-180, 180]) and mapped through a seeded 2 x d matrix with
// orthonormal rows, then isotropic Gaussian noise of scale sigma is added.
// Without skew the best linear probe therefore has per-coordinate
// R2 = 1 / (1 + sigma^2).
SynthData gen_synthetic(const SynthConfig& config);

double expected_r2_percent(double sigma);
double sigma_for_r2_percent(double r2_percent);

// Coarse continent boxes so synthetic maps get plausible colours.
std::string synthetic_continent(double lat, double lon);

}  // namespace geoprobe
