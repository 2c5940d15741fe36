// geoprobe: command-line front end for the probing and bias-analysis pipeline.
//
// Exit codes: 0 success, 1 validation error, 2 I/O error.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "geoprobe/corpuscount.hpp"
#include "geoprobe/csv.hpp"
#include "geoprobe/error.hpp"
#include "geoprobe/geodata.hpp"
#include "geoprobe/metrics.hpp"
#include "geoprobe/probe.hpp"
#include "geoprobe/svg.hpp"
#include "geoprobe/sweep.hpp"
#include "geoprobe/synth.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using namespace geoprobe;
using geoprobe::cli::RunManifest;

namespace {

void require_file(const fs::path& p, std::string_view flag) {
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) {
    throw IoError(std::string(flag) + ": file not found: " + p.string());
  }
}

// Writes JSON and CSV siblings. The extension of `out` picks which one
// lands exactly at `out`; the other gets the complementary extension.
void write_pair(const fs::path& out, const std::string& json, const std::string& csv) {
  if (out.extension() == ".csv") {
    write_file(out, csv);
    write_file(fs::path(out).replace_extension(".json"), json);
  } else {
    write_file(out, json);
    write_file(fs::path(out).replace_extension(".csv"), csv);
  }
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    grid.push_back(parse_double(item, "--cv-grid entry"));
  }
  if (grid.empty()) throw ValidationError("--cv-grid is empty");
  return grid;
}

struct LambdaArgs {
  std::optional<double> lambda;
  std::string cv_grid;
  std::size_t folds = 5;
  std::uint64_t cv_seed = 42;

  void attach(CLI::App* cmd) {
    auto* fixed = cmd->add_option("--lambda", lambda, "Fixed ridge strength (skips CV)");
    auto* grid = cmd->add_option("--cv-grid", cv_grid, "Comma-separated lambda grid for k-fold CV");
    fixed->excludes(grid);
    cmd->add_option("--folds", folds, "CV fold count")->check(CLI::Range(2, 1000000));
    cmd->add_option("--cv-seed", cv_seed, "Seed for CV fold assignment");
  }

  LambdaPolicy policy() const {
    LambdaPolicy p;
    p.fixed = lambda;
    if (!cv_grid.empty()) p.grid = parse_grid(cv_grid);
    p.folds = folds;
    p.seed = cv_seed;
    return p;
  }
};

struct Paths {
  fs::path locations, embeddings, split, probe, report, counts, out;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear probes for geographic knowledge in LM representations, and bias analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cli::kToolVersion);

  Paths p;
  std::string by = "continent";
  double test_frac = 0.2;
  std::uint64_t seed = 42;
  double cell_deg = 10.0;
  fs::path out_csv, out_svg, embeddings_dir, corpus_dir, patterns_file, patterns_locations,
      out_dir;
  std::string field = "text";
  bool plain = false;
  bool no_boundary = false;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::size_t n = 1000, d = 16;
  double sigma = 0.0;
  std::optional<double> target_r2;
  std::string skew = "none";
  std::string model_id = "synthetic";
  LambdaArgs fit_lambda, sweep_lambda;

  auto* split = app.add_subcommand("split", "Seeded train/test split of a locations file");
  split->add_option("--locations,--n-from", p.locations, "Locations CSV")->required();
  split->add_option("--test-frac", test_frac, "Fraction of rows held out for testing");
  split->add_option("--seed", seed, "Split seed");
  split->add_option("--out", p.out, "Output split JSON")->required();

  auto* fit = app.add_subcommand("fit", "Fit a ridge probe on the training rows");
  fit->add_option("--embeddings", p.embeddings, "GEOEMB1 file")->required();
  fit->add_option("--locations", p.locations, "Locations CSV")->required();
  fit->add_option("--split", p.split, "Split JSON")->required();
  fit_lambda.attach(fit);
  fit->add_option("--out", p.out, "Output probe JSON")->required();

  auto* eval = app.add_subcommand("eval", "Score a probe on the test rows");
  eval->add_option("--probe", p.probe, "Probe JSON")->required();
  eval->add_option("--embeddings", p.embeddings, "GEOEMB1 file")->required();
  eval->add_option("--locations", p.locations, "Locations CSV")->required();
  eval->add_option("--split", p.split, "Split JSON")->required();
  eval->add_option("--out", p.out, "Output report (.json, with a .csv sibling)")->required();

  auto* bias = app.add_subcommand("bias", "Grouped error statistics and Gini coefficient");
  bias->add_option("--report", p.report, "Report JSON")->required();
  bias->add_option("--locations", p.locations, "Locations CSV")->required();
  bias->add_option("--by", by, "country or continent");
  bias->add_option("--out", p.out, "Output (.json, with a .csv sibling)")->required();

  auto* corr = app.add_subcommand("correlate", "Pearson correlations of error with covariates");
  corr->add_option("--report", p.report, "Report JSON")->required();
  corr->add_option("--locations", p.locations, "Locations CSV")->required();
  corr->add_option("--counts", p.counts, "country,count CSV from the count subcommand");
  corr->add_option("--out", p.out, "Output (.json, with a .csv sibling)")->required();

  auto* heat = app.add_subcommand("heatmap", "Gridded log-MSE world map");
  heat->add_option("--report", p.report, "Report JSON")->required();
  heat->add_option("--locations", p.locations, "Locations CSV")->required();
  heat->add_option("--cell-deg", cell_deg, "Cell size in degrees (must divide 180)");
  heat->add_option("--out-csv", out_csv, "Per-cell CSV")->required();
  heat->add_option("--out-svg", out_svg, "Heatmap SVG")->required();

  auto* count = app.add_subcommand("count", "Count country-name occurrences in a corpus");
  auto* pat = count->add_option("--patterns", patterns_file, "One country name per line");
  auto* pat_loc = count->add_option("--patterns-from-locations", patterns_locations,
                                    "Use the distinct countries of a locations CSV");
  pat->excludes(pat_loc);
  count->add_option("--corpus", corpus_dir, "Corpus directory")->required();
  count->add_flag("--plain", plain, "Treat every file as one plain-text document");
  count->add_option("--field", field, "JSONL field holding the text");
  count->add_flag("--no-boundary", no_boundary, "Count raw substring hits");
  count->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  count->add_option("--out", p.out, "Output country,count CSV")->required();

  auto* sweep = app.add_subcommand("sweep", "Fit and score one probe per layer file");
  sweep->add_option("--embeddings-dir", embeddings_dir, "Directory of .geoemb files")->required();
  sweep->add_option("--locations", p.locations, "Locations CSV")->required();
  sweep->add_option("--split", p.split, "Split JSON")->required();
  sweep_lambda.attach(sweep);
  sweep->add_option("--workers", workers, "Layers fitted concurrently")->check(CLI::PositiveNumber);
  sweep->add_option("--out", p.out, "Output (.json, with a .csv sibling)")->required();

  auto* map = app.add_subcommand("map", "Scatter map of predicted coordinates");
  map->add_option("--report", p.report, "Report JSON")->required();
  map->add_option("--locations", p.locations, "Locations CSV")->required();
  map->add_option("--out", p.out, "Output SVG")->required();

  auto* synth = app.add_subcommand("synth", "Generate synthetic locations and embeddings");
  synth->add_option("--n", n, "Number of locations");
  synth->add_option("--d", d, "Embedding width");
  auto* sigma_opt = synth->add_option("--sigma", sigma, "Noise scale");
  auto* r2_opt = synth->add_option("--target-r2", target_r2,
                                   "Pick sigma for this analytic per-coordinate R2 (percent)");
  sigma_opt->excludes(r2_opt);
  synth->add_option("--seed", seed, "Generator seed");
  synth->add_option("--skew", skew, "none or south");
  synth->add_option("--model-id", model_id, "model_id written into the GEOEMB1 header");
  synth->add_option("--out-dir", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    RunManifest manifest;
    if (*split) {
      require_file(p.locations, "--locations");
      const Dataset ds = load_locations(p.locations);
      write_file(p.out, split_to_json(make_split(ds.size(), test_frac, seed)));
      manifest = {"split", {{"locations", p.locations}}, seed, "",
                  {{"test_frac", format_double(test_frac)}}};
      manifest.write_beside(p.out);
    } else if (*fit) {
      require_file(p.embeddings, "--embeddings");
      require_file(p.locations, "--locations");
      require_file(p.split, "--split");
      const EmbeddingMatrix m = read_embeddings(p.embeddings);
      const Dataset ds = load_locations(p.locations);
      const SplitIndices s = split_from_json(read_file(p.split));
      const LambdaPolicy policy = fit_lambda.policy();
      const FittedProbe fitted = fit_probe(m, ds, s, policy);
      write_file(p.out, probe_to_json(fitted.probe, &fitted.report));
      manifest = {"fit",
                  {{"embeddings", p.embeddings}, {"locations", p.locations}, {"split", p.split}},
                  s.seed, policy.describe(), {}};
      manifest.write_beside(p.out);
      if (fitted.report.condition_warning) {
        std::cerr << "warning: ridge system is ill-conditioned at the chosen lambda\n";
      }
    } else if (*eval) {
      for (const auto& [f, flag] : {std::pair{p.probe, "--probe"}, {p.embeddings, "--embeddings"},
                                    {p.locations, "--locations"}, {p.split, "--split"}}) {
        require_file(f, flag);
      }
      const RidgeProbe probe = probe_from_json(read_file(p.probe));
      const EmbeddingMatrix m = read_embeddings(p.embeddings);
      const Dataset ds = load_locations(p.locations);
      const SplitIndices s = split_from_json(read_file(p.split));
      const EvalReport rep = evaluate(probe, m, ds, s);
      write_pair(p.out, report_to_json(rep), report_to_csv(rep));
      manifest = {"eval",
                  {{"probe", p.probe}, {"embeddings", p.embeddings}, {"locations", p.locations},
                   {"split", p.split}},
                  s.seed, "", {}};
      manifest.write_beside(p.out);
    } else if (*bias) {
      require_file(p.report, "--report");
      require_file(p.locations, "--locations");
      const GroupBy group_by = parse_group_by(by);
      const EvalReport rep = report_from_json(read_file(p.report));
      const Dataset ds = load_locations(p.locations);
      const auto groups = group_error_stats(rep, ds, group_by);
      std::vector<double> means;
      for (const auto& g : groups) means.push_back(g.mean_mse);
      double g = std::nan("");
      try {
        g = gini(means);
      } catch (const ValidationError& e) {
        std::cerr << "warning: Gini not computed: " << e.what() << "\n";
      }
      write_pair(p.out, groups_to_json(groups, group_by, g), groups_to_csv(groups));
      manifest = {"bias", {{"report", p.report}, {"locations", p.locations}}, std::nullopt, "",
                  {{"by", by}}};
      manifest.write_beside(p.out);
    } else if (*corr) {
      require_file(p.report, "--report");
      require_file(p.locations, "--locations");
      const EvalReport rep = report_from_json(read_file(p.report));
      const Dataset ds = load_locations(p.locations);
      std::optional<CountTable> counts;
      manifest = {"correlate", {{"report", p.report}, {"locations", p.locations}}, std::nullopt,
                  "", {}};
      if (!p.counts.empty()) {
        require_file(p.counts, "--counts");
        counts = counts_from_csv(read_file(p.counts));
        manifest.inputs.emplace_back("counts", p.counts);
      }
      const auto loc = correlate_covariates(rep, ds, counts ? &*counts : nullptr);
      std::vector<CorrelationResult> ctry;
      if (counts) ctry = country_level_correlations(*counts, ds);
      write_pair(p.out, correlations_to_json(loc, ctry), correlations_to_csv(loc, ctry));
      manifest.write_beside(p.out);
    } else if (*heat) {
      require_file(p.report, "--report");
      require_file(p.locations, "--locations");
      const EvalReport rep = report_from_json(read_file(p.report));
      const Dataset ds = load_locations(p.locations);
      const HeatmapGrid grid = grid_log_mse(rep, ds, cell_deg);
      write_file(out_csv, grid_to_csv(grid));
      write_file(fs::path(out_csv).replace_extension(".json"), grid_to_json(grid));
      write_file(out_svg, emit_heatmap_svg(grid));
      manifest = {"heatmap", {{"report", p.report}, {"locations", p.locations}}, std::nullopt, "",
                  {{"cell_deg", format_double(cell_deg)}}};
      manifest.write_beside(out_csv);
    } else if (*count) {
      std::vector<std::string> names;
      manifest = {"count", {{"corpus", corpus_dir}}, std::nullopt, "",
                  {{"plain", plain ? "true" : "false"},
                   {"field", field},
                   {"boundary", no_boundary ? "false" : "true"}}};
      if (!patterns_file.empty()) {
        require_file(patterns_file, "--patterns");
        std::stringstream ss(read_file(patterns_file));
        std::string line;
        while (std::getline(ss, line)) {
          if (!line.empty() && line.back() == '\r') line.pop_back();
          if (!line.empty()) names.push_back(line);
        }
        manifest.inputs.emplace_back("patterns", patterns_file);
      } else if (!patterns_locations.empty()) {
        require_file(patterns_locations, "--patterns-from-locations");
        std::set<std::string> distinct;
        for (const auto& r : load_locations(patterns_locations).records) {
          if (!r.country.empty()) distinct.insert(r.country);
        }
        names.assign(distinct.begin(), distinct.end());
        manifest.inputs.emplace_back("patterns_from_locations", patterns_locations);
      } else {
        throw ValidationError("count needs --patterns or --patterns-from-locations");
      }
      const PatternSet patterns = build_patterns(std::move(names));
      CountOptions opts;
      opts.plain = plain;
      opts.field = field;
      opts.boundary = !no_boundary;
      opts.workers = workers;
      const CountTable table = count_corpus(patterns, corpus_dir, opts);
      write_file(p.out, counts_to_csv(table));
      write_file(fs::path(p.out).replace_extension(".summary.json"), counts_summary_json(table));
      manifest.write_beside(p.out);
      std::cerr << "scanned " << table.docs_scanned << " documents (" << table.bytes_scanned
                << " bytes), " << table.total_matches() << " matches, " << table.docs_skipped
                << " skipped\n";
    } else if (*sweep) {
      require_file(p.locations, "--locations");
      require_file(p.split, "--split");
      const Dataset ds = load_locations(p.locations);
      const SplitIndices s = split_from_json(read_file(p.split));
      const LambdaPolicy policy = sweep_lambda.policy();
      const auto files = list_embedding_files(embeddings_dir);
      const SweepSummary summary = layer_sweep(files, ds, s, policy, workers);
      write_pair(p.out, sweep_to_json(summary), sweep_to_csv(summary));
      manifest = {"sweep",
                  {{"embeddings_dir", embeddings_dir},
                   {"locations", p.locations},
                   {"split", p.split}},
                  s.seed, policy.describe(), {}};
      manifest.write_beside(p.out);
    } else if (*map) {
      require_file(p.report, "--report");
      require_file(p.locations, "--locations");
      const EvalReport rep = report_from_json(read_file(p.report));
      const Dataset ds = load_locations(p.locations);
      write_file(p.out, emit_scatter_map(rep, ds));
      manifest = {"map", {{"report", p.report}, {"locations", p.locations}}, std::nullopt, "", {}};
      manifest.write_beside(p.out);
    } else if (*synth) {
      SynthConfig cfg;
      cfg.n = n;
      cfg.d = d;
      cfg.sigma = target_r2 ? sigma_for_r2_percent(*target_r2) : sigma;
      cfg.seed = seed;
      cfg.skew = parse_skew_profile(skew);
      cfg.model_id = model_id;
      const SynthData data = gen_synthetic(cfg);
      const fs::path loc_path = out_dir / "locations.csv";
      const fs::path emb_path = out_dir / "embeddings.geoemb";
      write_file(loc_path, data.locations_csv);
      write_embeddings(data.embeddings, emb_path);
      manifest = {"synth", {}, seed, "",
                  {{"n", std::to_string(n)},
                   {"d", std::to_string(d)},
                   {"sigma", format_double(cfg.sigma)},
                   {"skew", skew},
                   {"expected_r2", format_double(expected_r2_percent(cfg.sigma))}}};
      manifest.write_beside(emb_path);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
