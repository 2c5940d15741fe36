// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoprobe/corpuscount.hpp"
#include "geoprobe/csv.hpp"
#include "geoprobe/geodata.hpp"
#include "geoprobe/metrics.hpp"
#include "geoprobe/probe.hpp"
#include "geoprobe/synth.hpp"
#include "oracles.hpp"

using namespace geoprobe;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + GEOPROBE_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

Eigen::MatrixXd gaussian(SplitMix64& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * rng.next_gaussian();
  }
  return m;
}

oracle::Matrix rows_of(const Eigen::MatrixXd& m) {
  oracle::Matrix out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(r)].push_back(m(r, c));
  }
  return out;
}

Outcome ridge_oracle() {
  Outcome o;
  const auto start = Clock::now();
  SplitMix64 rng(20240601);
  const double lambdas[] = {0.01, 1.0, 100.0};
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = static_cast<Eigen::Index>(1 + rng.next() % 32);
    const auto n = static_cast<Eigen::Index>(2 + rng.next() % 199);
    const double lambda = lambdas[trial % 3];
    const Eigen::MatrixXd x = gaussian(rng, n, d, 1.0);
    Eigen::MatrixXd y = gaussian(rng, n, 2, 1.0);
    y.col(0) *= 30.0;
    y.col(1) *= 90.0;
    const RidgeProbe p = fit_ridge(x, y, lambda);
    const auto w = oracle::ridge_weights(rows_of(x), rows_of(y), lambda);
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index c = 0; c < 2; ++c) worst = std::max(worst, std::abs(p.weights(r, c) - w[r][c]));
    }
  }
  const double secs = seconds_since(start);
  o.require(worst <= 1e-8, "max-abs " + num(worst) + " > 1e-8");
  o.require(secs < 10.0, "runtime " + num(secs) + " s");
  o.detail = o.pass ? "max_abs=" + num(worst) + " time=" + num(secs) + "s" : o.detail;
  return o;
}

Outcome duplicated_feature_law() {
  Outcome o;
  SplitMix64 rng(777);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = static_cast<Eigen::Index>(1 + rng.next() % 32);
    const auto n = static_cast<Eigen::Index>(10 + rng.next() % 191);
    const double lambda = std::pow(10.0, -2.0 + 4.0 * rng.next_unit());
    const Eigen::MatrixXd x = gaussian(rng, n, d, 1.0);
    const Eigen::MatrixXd y = gaussian(rng, n, 2, 50.0);
    Eigen::MatrixXd xx(n, 2 * d);
    xx << x, x;
    const Eigen::MatrixXd dup = predict(fit_ridge(xx, y, lambda), xx);
    const Eigen::MatrixXd half = predict(fit_ridge(x, y, lambda / 2.0), x);
    worst = std::max(worst, (dup - half).cwiseAbs().maxCoeff());
  }
  o.require(worst <= 1e-6, "max-abs " + num(worst) + " > 1e-6");
  if (o.pass) o.detail = "max_abs=" + num(worst);
  return o;
}

Outcome gini_criterion() {
  Outcome o;
  SplitMix64 rng(4040);
  double worst = 0.0, worst_scale = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.next() % 199;
    std::vector<double> v(n);
    for (auto& x : v) x = (rng.next() % 4 == 0) ? 0.0 : 1000.0 * rng.next_unit();
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[0] = 1.0;
    const double g = gini(v);
    worst = std::max(worst, std::abs(g - oracle::gini_bruteforce(v)));
    const double c = std::pow(10.0, -3.0 + 6.0 * rng.next_unit());
    std::vector<double> scaled = v;
    for (auto& x : scaled) x *= c;
    worst_scale = std::max(worst_scale, std::abs(gini(scaled) - g));
  }
  o.require(worst <= 1e-12, "oracle diff " + num(worst));
  o.require(worst_scale <= 1e-12, "scale diff " + num(worst_scale));
  o.require(gini(std::vector<double>{2.5, 2.5, 2.5, 2.5}) == 0.0, "constant input not 0");
  o.require(gini(std::vector<double>{0, 0, 0, 1}) == 0.75, "[0,0,0,1] not 0.75");
  if (o.pass) o.detail = "oracle=" + num(worst) + " scale=" + num(worst_scale);
  return o;
}

Outcome pearson_pvalue() {
  Outcome o;
  SplitMix64 rng(5150);
  double worst_r = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + rng.next() % 500;
    std::vector<double> x(n), y(n);
    const double slope = 2.0 * rng.next_unit() - 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = 100.0 * rng.next_gaussian();
      y[i] = slope * x[i] + 80.0 * rng.next_gaussian();
    }
    worst_r = std::max(worst_r, std::abs(pearson(x, y) - oracle::pearson_definition(x, y)));
  }
  double worst_p = 0.0;
  for (std::size_t n : {5u, 10u, 50u, 200u, 1000u}) {
    for (int k = 1; k <= 9; ++k) {
      const double r = k / 10.0;
      worst_p = std::max(worst_p, std::abs(p_value_two_sided(r, n) - oracle::p_value_quadrature(r, n)));
    }
  }
  o.require(worst_r <= 1e-12, "pearson diff " + num(worst_r));
  o.require(worst_p <= 1e-6, "p-value diff " + num(worst_p));
  for (std::size_t n : {3u, 5u, 1000u}) o.require(p_value_two_sided(0.0, n) == 1.0, "p(0) != 1");
  if (o.pass) o.detail = "pearson=" + num(worst_r) + " p=" + num(worst_p);
  return o;
}

// synth -> split -> fit (CV) -> eval through the command line tool.
double cli_r2(const fs::path& dir, std::uint64_t seed, const std::string& extra = "") {
  const auto loc = q(dir / "locations.csv");
  const auto emb = q(dir / "embeddings.geoemb");
  if (run_cli("synth --n 5000 --d 64 --target-r2 75 --seed " + std::to_string(seed) + " " + extra +
              " --out-dir " + q(dir)) != 0 ||
      run_cli("split --n-from " + loc + " --test-frac 0.2 --seed 42 --out " + q(dir / "split.json")) != 0 ||
      run_cli("fit --embeddings " + emb + " --locations " + loc + " --split " +
              q(dir / "split.json") + " --out " + q(dir / "probe.json")) != 0 ||
      run_cli("eval --probe " + q(dir / "probe.json") + " --embeddings " + emb + " --locations " +
              loc + " --split " + q(dir / "split.json") + " --out " + q(dir / "report.json")) != 0) {
    return std::nan("");
  }
  return report_from_json(read_file(dir / "report.json")).r2_mean;
}

Outcome synthetic_recovery() {
  Outcome o;
  std::string values;
  double slowest = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TempDir dir("geoprobe_accept_synth");
    const auto start = Clock::now();
    const double r2 = cli_r2(dir.path, seed);
    slowest = std::max(slowest, seconds_since(start));
    values += (values.empty() ? "" : ",") + num(r2);
    o.require(r2 >= 70.0 && r2 <= 80.0, "seed " + std::to_string(seed) + " r2_mean " + num(r2));
  }
  o.require(slowest < 30.0, "slowest run " + num(slowest) + " s");
  if (o.pass) o.detail = "r2_mean=" + values + " slowest=" + num(slowest) + "s";
  return o;
}

Outcome bias_detection() {
  Outcome o;
  std::string values;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TempDir dir("geoprobe_accept_bias");
    if (std::isnan(cli_r2(dir.path, seed, "--skew south"))) {
      o.require(false, "pipeline failed");
      continue;
    }
    const Dataset loc = load_locations(dir.path / "locations.csv");
    const EvalReport report = report_from_json(read_file(dir.path / "report.json"));
    const auto res = correlate_covariates(report, loc, nullptr);
    const auto& lat = res.at(0);
    o.require(lat.covariate == "latitude" && lat.ok() && lat.r < 0.0 && lat.p_value < 0.05,
              "seed " + std::to_string(seed) + " r=" + num(lat.r) + " p=" + num(lat.p_value));
    values += (values.empty() ? "" : ",") + num(lat.r);
  }
  if (o.pass) o.detail = "latitude r=" + values;
  return o;
}

const std::vector<std::string> kCountries = {
    "Niger", "Nigeria", "Guinea", "Guinea-Bissau", "Equatorial Guinea", "Papua New Guinea",
    "Dominica", "Dominican Republic", "Sudan", "South Sudan", "Congo", "Chad", "Mali", "Oman",
    "Peru", "Iran", "Iraq", "India", "Indonesia", "Korea", "North Korea", "South Korea",
    "Samoa", "American Samoa", "Georgia", "Jordan", "Chile", "China", "Cuba", "Togo"};

// Name fragments, whole names, separators and letters, so that partial
// matches and boundary failures are frequent.
std::string random_text(SplitMix64& rng, std::size_t bytes) {
  static const std::vector<std::string> filler = {" ", " ", " the ", ", ", ". ", "n", "ia",
                                                  "s", "7", "-", "\n", "\xC3\xA9", "(", ")"};
  std::string out;
  out.reserve(bytes + 32);
  while (out.size() < bytes) {
    const auto roll = rng.next() % 10;
    if (roll < 3) {
      const auto& name = kCountries[rng.next() % kCountries.size()];
      if (roll == 0) {
        out.append(name, 0, 1 + rng.next() % name.size());
      } else {
        out += name;
      }
    } else {
      out += filler[rng.next() % filler.size()];
    }
  }
  return out;
}

std::vector<std::uint64_t> sum_counts(std::vector<std::uint64_t> a, const std::vector<std::uint64_t>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

Outcome counting() {
  Outcome o;
  const PatternSet ps = build_patterns(kCountries);
  SplitMix64 rng(90210);

  int mismatches = 0;
  for (int corpus = 0; corpus < 50; ++corpus) {
    const std::string text = random_text(rng, 1 << 20);
    if (count_document(ps, text) != oracle::naive_counts(kCountries, text, true)) ++mismatches;
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " of 50 corpora differ from the naive scanner");

  TempDir dir("geoprobe_accept_corpus");
  {
    // Small sharded corpus: worker counts must not change the table.
    const fs::path small = dir.path / "small";
    for (int s = 0; s < 16; ++s) {
      std::string shard;
      for (int doc = 0; doc < 50; ++doc) {
        shard += nlohmann::json{{"text", random_text(rng, 2000)}}.dump() + "\n";
      }
      write_file(small / ("part-" + std::to_string(s) + ".jsonl"), shard);
    }
    CountOptions opts;
    opts.workers = 1;
    const CountTable one = count_corpus(ps, small, opts);
    opts.workers = 8;
    const CountTable eight = count_corpus(ps, small, opts);
    o.require(one.counts == eight.counts && one.docs_scanned == eight.docs_scanned &&
                  one.bytes_scanned == eight.bytes_scanned &&
                  counts_to_csv(one) == counts_to_csv(eight),
              "1 vs 8 workers differ");
  }

  // 1 GB corpus: 64 shards of 16 MiB each, built from one repeated block.
  std::string block;
  std::vector<std::uint64_t> block_counts(kCountries.size(), 0);
  while (block.size() < (1u << 20)) {
    const std::string text = random_text(rng, 4096);
    block_counts = sum_counts(block_counts, count_document(ps, text));
    block += nlohmann::json{{"text", text}, {"id", block.size()}}.dump() + "\n";
  }
  const fs::path big = dir.path / "big";
  fs::create_directories(big);
  std::string shard;
  const std::size_t copies_per_shard = (16u << 20) / block.size();
  for (std::size_t i = 0; i < copies_per_shard; ++i) shard += block;
  const std::size_t shards = ((1ull << 30) + shard.size() - 1) / shard.size();
  for (std::size_t s = 0; s < shards; ++s) {
    write_file(big / ("shard-" + std::to_string(1000 + s) + ".jsonl"), shard);
  }
  const std::uint64_t total_bytes = static_cast<std::uint64_t>(shard.size()) * shards;
  CountOptions opts;
  opts.workers = 8;
  const auto start = Clock::now();
  const CountTable table = count_corpus(ps, big, opts);
  const double secs = seconds_since(start);
  std::vector<std::uint64_t> expect = block_counts;
  for (auto& c : expect) c *= copies_per_shard * shards;
  o.require(table.counts == expect, "1 GB corpus counts differ from the expected totals");
  o.require(total_bytes >= (1ull << 30), "corpus smaller than 1 GiB");
  o.require(secs < 60.0, "1 GB scan took " + num(secs) + " s");
  if (o.pass) {
    o.detail = "50/50 naive matches, 1v8 identical, " + num(total_bytes / 1e9) + " GB in " +
               num(secs) + "s";
  }
  return o;
}

void full_pipeline(const fs::path& dir) {
  const auto loc = q(dir / "locations.csv");
  const auto emb = q(dir / "embeddings.geoemb");
  const auto rep = q(dir / "report.json");
  const std::vector<std::string> steps = {
      "synth --n 2000 --d 32 --target-r2 75 --seed 11 --skew south --out-dir " + q(dir),
      "split --n-from " + loc + " --test-frac 0.2 --seed 42 --out " + q(dir / "split.json"),
      "fit --embeddings " + emb + " --locations " + loc + " --split " + q(dir / "split.json") +
          " --out " + q(dir / "probe.json"),
      "eval --probe " + q(dir / "probe.json") + " --embeddings " + emb + " --locations " + loc +
          " --split " + q(dir / "split.json") + " --out " + rep,
      "bias --report " + rep + " --locations " + loc + " --by continent --out " + q(dir / "bias.json"),
      "bias --report " + rep + " --locations " + loc + " --by country --out " +
          q(dir / "bias_country.json"),
      "correlate --report " + rep + " --locations " + loc + " --out " + q(dir / "corr.json"),
      "heatmap --report " + rep + " --locations " + loc + " --cell-deg 10 --out-csv " +
          q(dir / "heat.csv") + " --out-svg " + q(dir / "heat.svg"),
  };
  for (const auto& s : steps) {
    if (run_cli(s) != 0) throw std::runtime_error("step failed: " + s.substr(0, s.find(' ')));
  }
}

Outcome determinism() {
  Outcome o;
  TempDir a("geoprobe_accept_det_a");
  TempDir b("geoprobe_accept_det_b");
  try {
    full_pipeline(a.path);
    full_pipeline(b.path);
  } catch (const std::exception& e) {
    o.require(false, e.what());
    return o;
  }
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(a.path)) {
    const std::string name = entry.path().filename().string();
    if (name.find(".manifest.json") != std::string::npos) continue;  // wall-clock stamp
    o.require(read_file(entry.path()) == read_file(b.path / name), name + " differs");
    ++compared;
  }
  o.require(test_set_size(39504, 0.2) == 7901, "test_set_size(39504, 0.2) != 7901");
  const SplitIndices split = make_split(39504, 0.2, 42);
  o.require(split.test_rows.size() == 7901, "split has " + std::to_string(split.test_rows.size()));
  o.require(split_to_json(split) == split_to_json(make_split(39504, 0.2, 42)), "split not stable");
  if (o.pass) o.detail = std::to_string(compared) + " files identical, 7901 test rows";
  return o;
}

Outcome r2_anchors() {
  Outcome o;
  double worst_truth = 0.0, worst_mean = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SynthConfig cfg;
    cfg.n = 50 + 50 * seed;
    cfg.d = 4;
    cfg.sigma = 0.5;
    cfg.seed = seed;
    const Dataset loc = gen_synthetic(cfg).locations;
    Eigen::MatrixXd truth(static_cast<Eigen::Index>(loc.size()), 2);
    for (std::size_t i = 0; i < loc.size(); ++i) {
      truth(static_cast<Eigen::Index>(i), 0) = loc.records[i].latitude;
      truth(static_cast<Eigen::Index>(i), 1) = loc.records[i].longitude;
    }
    Eigen::MatrixXd mean(truth.rows(), 2);
    mean.rowwise() = truth.colwise().mean();
    const R2Summary t = r2_summary(truth, truth);
    const R2Summary m = r2_summary(truth, mean);
    for (double v : {t.r2_lat, t.r2_lon, t.r2_mean}) worst_truth = std::max(worst_truth, std::abs(v - 100.0));
    for (double v : {m.r2_lat, m.r2_lon, m.r2_mean}) worst_mean = std::max(worst_mean, std::abs(v));
  }
  o.require(worst_truth <= 1e-9, "truth predictor off by " + num(worst_truth));
  o.require(worst_mean <= 1e-9, "mean predictor off by " + num(worst_mean));
  if (o.pass) o.detail = "truth=" + num(worst_truth) + " mean=" + num(worst_mean);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"ridge-oracle", ridge_oracle},
      {"duplicated-feature-law", duplicated_feature_law},
      {"gini", gini_criterion},
      {"pearson-pvalue", pearson_pvalue},
      {"synthetic-recovery", synthetic_recovery},
      {"bias-detection", bias_detection},
      {"counting", counting},
      {"determinism", determinism},
      {"r2-anchors", r2_anchors},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failures;
    std::printf("%s %-24s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
