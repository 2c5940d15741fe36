#include "geoprobe/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "geoprobe/csv.hpp"
#include "geoprobe/error.hpp"
#include "geoprobe/metrics.hpp"

namespace geoprobe {

SweepSummary layer_sweep(const std::vector<std::filesystem::path>& embedding_paths,
                         const Dataset& locations, const SplitIndices& split,
                         const LambdaPolicy& policy, std::size_t workers) {
  if (embedding_paths.empty()) {
    throw ValidationError("layer sweep needs at least one embedding file");
  }
  const std::size_t n = embedding_paths.size();
  std::vector<LayerResult> results(n);
  std::vector<std::exception_ptr> failures(n);
  std::vector<std::uint64_t> digests(n);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const EmbeddingMatrix m = read_embeddings(embedding_paths[i]);
        digests[i] = m.locations_digest;
        const FittedProbe fitted = fit_probe(m, locations, split, policy);
        const EvalReport rep = evaluate(fitted.probe, m, locations, split);
        results[i] = {embedding_paths[i], m.model_id, m.layer, m.cols,
                      fitted.probe.lambda, rep.r2_lat, rep.r2_lon, rep.r2_mean};
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(workers, 1, n);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (failures[i]) std::rethrow_exception(failures[i]);
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (digests[i] != digests[0]) {
      throw ValidationError("digest mismatch across files: " + embedding_paths[0].string() +
                            " vs " + embedding_paths[i].string());
    }
  }

  SweepSummary summary;
  summary.layers = std::move(results);
  std::sort(summary.layers.begin(), summary.layers.end(), [](const auto& a, const auto& b) {
    return std::tie(a.model_id, a.layer, a.path) < std::tie(b.model_id, b.layer, b.path);
  });
  for (const auto& r : summary.layers) {
    if (summary.best.empty() || summary.best.back().model_id != r.model_id) {
      summary.best.push_back({r.model_id, r.layer, r.dim, r.r2_mean});
      continue;
    }
    // Layers arrive in ascending order, so >= keeps the deepest on ties.
    auto& best = summary.best.back();
    if (r.r2_mean >= best.r2_mean) {
      best.best_layer = r.layer;
      best.r2_mean = r.r2_mean;
      best.dim = r.dim;
    }
  }
  return summary;
}

std::vector<std::filesystem::path> list_embedding_files(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw IoError("embeddings directory not found: " + dir.string());
  }
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".geoemb") {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) {
    throw ValidationError("no .geoemb files in " + dir.string());
  }
  return out;
}

std::string sweep_to_json(const SweepSummary& summary) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const auto& r : summary.layers) {
    nlohmann::ordered_json o;
    o["file"] = r.path.filename().string();
    o["model_id"] = r.model_id;
    o["layer"] = r.layer;
    o["dim"] = r.dim;
    o["lambda"] = r.lambda;
    o["r2_lat"] = r.r2_lat;
    o["r2_lon"] = r.r2_lon;
    o["r2_mean"] = r.r2_mean;
    layers.push_back(std::move(o));
  }
  j["layers"] = std::move(layers);
  nlohmann::ordered_json best = nlohmann::ordered_json::array();
  for (const auto& b : summary.best) {
    nlohmann::ordered_json o;
    o["model_id"] = b.model_id;
    o["best_layer"] = b.best_layer;
    o["dim"] = b.dim;
    o["r2_mean"] = b.r2_mean;
    best.push_back(std::move(o));
  }
  j["best"] = std::move(best);
  return j.dump(2) + "\n";
}

std::string sweep_to_csv(const SweepSummary& summary) {
  std::string out = "model_id,layer,dim,lambda,r2_lat,r2_lon,r2_mean,best\n";
  for (const auto& r : summary.layers) {
    const bool is_best = std::any_of(summary.best.begin(), summary.best.end(), [&](const auto& b) {
      return b.model_id == r.model_id && b.best_layer == r.layer;
    });
    out += csv_escape(r.model_id) + ',' + std::to_string(r.layer) + ',' + std::to_string(r.dim) +
           ',' + format_double(r.lambda) + ',' + format_double(r.r2_lat) + ',' +
           format_double(r.r2_lon) + ',' + format_double(r.r2_mean) + ',' +
           (is_best ? "1" : "0") + '\n';
  }
  return out;
}

}  // namespace geoprobe
