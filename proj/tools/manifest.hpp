#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace geoprobe::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Provenance written next to every output as <output>.manifest.json.
// Two runs with equal manifests, ignoring wall_clock, produce identical
// numeric outputs.
struct RunManifest {
  std::string subcommand;
  std::vector<std::pair<std::string, std::filesystem::path>> inputs;  // flag -> file
  std::optional<std::uint64_t> seed;
  std::string lambda_policy;
  std::vector<std::pair<std::string, std::string>> parameters;

  std::string to_json() const;
  void write_beside(const std::filesystem::path& output) const;
};

}  // namespace geoprobe::cli
