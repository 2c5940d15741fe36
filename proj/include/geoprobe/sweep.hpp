#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "geoprobe/geodata.hpp"
#include "geoprobe/probe.hpp"

namespace geoprobe {

struct LayerResult {
  std::filesystem::path path;
  std::string model_id;
  std::uint32_t layer = 0;
  std::size_t dim = 0;
  double lambda = 0.0;
  double r2_lat = 0.0;
  double r2_lon = 0.0;
  double r2_mean = 0.0;
};

struct ModelBest {
  std::string model_id;
  std::uint32_t best_layer = 0;
  std::size_t dim = 0;
  double r2_mean = 0.0;
};

struct SweepSummary {
  std::vector<LayerResult> layers;  // ordered by (model_id, layer, path)
  std::vector<ModelBest> best;      // one per model_id, ordered by model_id
};

// Fits and scores one probe per embedding file. Files may run on several
// workers; the summary order does not depend on completion order. The best
// layer per model maximizes test r2_mean, ties going to the deepest layer.
SweepSummary layer_sweep(const std::vector<std::filesystem::path>& embedding_paths,
                         const Dataset& locations, const SplitIndices& split,
                         const LambdaPolicy& policy, std::size_t workers = 1);

// Every *.geoemb file under dir, sorted.
std::vector<std::filesystem::path> list_embedding_files(const std::filesystem::path& dir);

std::string sweep_to_json(const SweepSummary& summary);
std::string sweep_to_csv(const SweepSummary& summary);

}  // namespace geoprobe
