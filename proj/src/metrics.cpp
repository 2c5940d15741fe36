#include "geoprobe/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "geoprobe/csv.hpp"
#include "geoprobe/error.hpp"

namespace geoprobe {

void CompensatedSum::add(double v) {
  const double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v)) {
    carry_ += (sum_ - t) + v;
  } else {
    carry_ += (v - t) + sum_;
  }
  sum_ = t;
}

double order_independent_sum(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  CompensatedSum s;
  for (double v : sorted) s.add(v);
  return s.value();
}

namespace {

double mean_of(std::span<const double> values) {
  return order_independent_sum(values) / static_cast<double>(values.size());
}

}  // namespace

double squared_error(double true_lat, double true_lon, double pred_lat, double pred_lon) {
  const double dlat = pred_lat - true_lat;
  const double dlon = pred_lon - true_lon;
  return (dlat * dlat + dlon * dlon) / 2.0;
}

double log_mse(double se) { return std::log10(se + kLogEpsilon); }

R2Summary r2_summary(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& predicted) {
  if (truth.rows() != predicted.rows() || truth.cols() != 2 || predicted.cols() != 2) {
    throw ValidationError("R2 needs matching n x 2 truth and prediction matrices");
  }
  static constexpr std::array<const char*, 2> kNames = {"latitude", "longitude"};
  std::array<double, 2> r2{};
  for (Eigen::Index c = 0; c < 2; ++c) {
    const double mean = truth.col(c).mean();
    const double ss_tot = (truth.col(c).array() - mean).square().sum();
    const double ss_res = (truth.col(c) - predicted.col(c)).array().square().sum();
    if (!(ss_tot > 0.0)) {
      throw ValidationError(std::string("R2 undefined: ") + kNames[static_cast<std::size_t>(c)] +
                            " has zero variance on the evaluated rows");
    }
    r2[static_cast<std::size_t>(c)] = 100.0 * (1.0 - ss_res / ss_tot);
  }
  return {r2[0], r2[1], (r2[0] + r2[1]) / 2.0};
}

EvalReport evaluate_predictions(std::string model_id, std::uint32_t layer,
                                std::span<const std::size_t> rows,
                                const Eigen::MatrixXd& truth, const Eigen::MatrixXd& predicted) {
  if (static_cast<std::size_t>(truth.rows()) != rows.size()) {
    throw ValidationError("row list and truth matrix disagree in length");
  }
  const R2Summary r2 = r2_summary(truth, predicted);
  EvalReport rep;
  rep.model_id = std::move(model_id);
  rep.layer = layer;
  rep.r2_lat = r2.r2_lat;
  rep.r2_lon = r2.r2_lon;
  rep.r2_mean = r2.r2_mean;
  rep.per_location.reserve(rows.size());
  std::vector<double> errors;
  errors.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    LocationError e;
    e.row_index = rows[i];
    e.predicted_lat = predicted(r, 0);
    e.predicted_lon = predicted(r, 1);
    e.true_lat = truth(r, 0);
    e.true_lon = truth(r, 1);
    e.squared_error = squared_error(e.true_lat, e.true_lon, e.predicted_lat, e.predicted_lon);
    errors.push_back(e.squared_error);
    rep.per_location.push_back(e);
  }
  rep.mse_overall = errors.empty() ? 0.0 : mean_of(errors);
  return rep;
}

EvalReport evaluate(const RidgeProbe& probe, const EmbeddingMatrix& embeddings,
                    const Dataset& locations, const SplitIndices& split) {
  check_alignment(embeddings, locations);
  if (split.total() != locations.size()) {
    throw ValidationError("split covers " + std::to_string(split.total()) +
                          " rows but locations have " + std::to_string(locations.size()));
  }
  if (static_cast<std::size_t>(probe.dim()) != embeddings.cols) {
    throw ValidationError("probe dimension " + std::to_string(probe.dim()) +
                          " does not match embedding width " + std::to_string(embeddings.cols));
  }
  const Eigen::MatrixXd x = gather_features(embeddings, split.test_rows);
  const Eigen::MatrixXd truth = gather_targets(locations, split.test_rows);
  return evaluate_predictions(embeddings.model_id, embeddings.layer, split.test_rows, truth,
                              predict(probe, x));
}

GroupBy parse_group_by(std::string_view key) {
  if (key == "country") return GroupBy::Country;
  if (key == "continent") return GroupBy::Continent;
  throw ValidationError("unknown grouping key '" + std::string(key) +
                        "' (expected country or continent)");
}

std::string_view to_string(GroupBy by) {
  return by == GroupBy::Country ? "country" : "continent";
}

namespace {

const LocationRecord& record_for(const Dataset& locations, std::size_t row) {
  if (row >= locations.size()) {
    throw ValidationError("report row " + std::to_string(row) + " is not in the locations file");
  }
  return locations.records[row];
}

}  // namespace

std::vector<GroupStats> group_error_stats(const EvalReport& report, const Dataset& locations,
                                          GroupBy by) {
  std::map<std::string, std::vector<double>> errors;
  for (const auto& e : report.per_location) {
    const auto& rec = record_for(locations, e.row_index);
    errors[by == GroupBy::Country ? rec.country : rec.continent].push_back(e.squared_error);
  }
  std::vector<GroupStats> out;
  out.reserve(errors.size());
  for (const auto& [key, errs] : errors) {
    std::vector<double> logs;
    logs.reserve(errs.size());
    for (double e : errs) logs.push_back(log_mse(e));
    out.push_back({key, errs.size(), mean_of(errs), mean_of(logs)});
  }
  return out;
}

double gini(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) {
    throw ValidationError("Gini needs at least 2 values");
  }
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ValidationError("Gini needs finite non-negative values");
    }
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  // Sum_ij |x_i - x_j| = 2 Sum_i (2i - n - 1) x_(i), with 1-based i.
  CompensatedSum weighted;
  CompensatedSum total;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 2.0 * static_cast<double>(i + 1) - static_cast<double>(n) - 1.0;
    weighted.add(w * sorted[i]);
    total.add(sorted[i]);
  }
  if (!(total.value() > 0.0)) {
    throw ValidationError("undefined Gini: all values are zero");
  }
  return weighted.value() / (static_cast<double>(n) * total.value());
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw ValidationError("pearson inputs differ in length");
  }
  const std::size_t n = x.size();
  if (n < 3) {
    throw ValidationError("pearson needs at least 3 pairs, got " + std::to_string(n));
  }
  const auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
  };
  if (constant(x)) throw ValidationError("zero variance in x");
  if (constant(y)) throw ValidationError("zero variance in y");

  const double mx = mean_of(x);
  const double my = mean_of(y);
  CompensatedSum sxy, sxx, syy;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy.add(dx * dy);
    sxx.add(dx * dx);
    syy.add(dy * dy);
  }
  const double r = sxy.value() / std::sqrt(sxx.value() * syy.value());
  return std::clamp(r, -1.0, 1.0);
}

namespace {

// Continued fraction for I_x(a, b), modified Lentz. Converges quickly for
// x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 100000;
  constexpr double kTolerance = 1e-12;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kTolerance) return h;
  }
  throw ValidationError("incomplete beta continued fraction did not converge");
}

// I_x(a, b) with 1 - x supplied separately to avoid cancellation near x = 1.
double incomplete_beta(double a, double b, double x, double one_minus_x) {
  if (x <= 0.0) return 0.0;
  if (one_minus_x <= 0.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log(one_minus_x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, one_minus_x) / b;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw ValidationError("incomplete beta needs a > 0 and b > 0");
  }
  if (!(x >= 0.0 && x <= 1.0)) {
    throw ValidationError("incomplete beta needs x in [0, 1]");
  }
  return incomplete_beta(a, b, x, 1.0 - x);
}

double student_t_cdf(double t, double dof) {
  if (!(dof > 0.0)) {
    throw ValidationError("Student t needs positive degrees of freedom");
  }
  if (t == 0.0) return 0.5;
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double t2 = t * t;
  // P(|T| > |t|) = I_{dof/(dof+t^2)}(dof/2, 1/2)
  const double tail = 0.5 * incomplete_beta(dof / 2.0, 0.5, dof / (dof + t2), t2 / (dof + t2));
  return t > 0.0 ? 1.0 - tail : tail;
}

double p_value_two_sided(double r, std::size_t n) {
  if (n < 3) {
    throw ValidationError("p-value needs n >= 3");
  }
  if (std::isnan(r)) {
    throw ValidationError("p-value of NaN correlation");
  }
  const double ar = std::abs(r);
  if (ar == 0.0) return 1.0;
  if (ar >= 1.0) return 0.0;
  const double dof = static_cast<double>(n - 2);
  // With t = r sqrt(dof / (1 - r^2)), dof / (dof + t^2) reduces to 1 - r^2.
  return incomplete_beta(dof / 2.0, 0.5, (1.0 - ar) * (1.0 + ar), ar * ar);
}

CorrelationResult correlate(std::string covariate, std::span<const double> x,
                            std::span<const double> y) {
  CorrelationResult res;
  res.covariate = std::move(covariate);
  res.n = x.size();
  try {
    res.r = pearson(x, y);
    res.p_value = p_value_two_sided(res.r, res.n);
  } catch (const ValidationError& e) {
    res.r = std::numeric_limits<double>::quiet_NaN();
    res.p_value = std::numeric_limits<double>::quiet_NaN();
    res.error = e.what();
  }
  return res;
}

namespace {

std::unordered_map<std::string, std::uint64_t> count_lookup(const CountTable& counts) {
  std::unordered_map<std::string, std::uint64_t> out;
  for (std::size_t i = 0; i < counts.names.size(); ++i) out[counts.names[i]] = counts.counts[i];
  return out;
}

// Missing from the table and zero matches both count as "not covered".
std::optional<double> log_count(const std::unordered_map<std::string, std::uint64_t>& lookup,
                                const std::string& country) {
  const auto it = lookup.find(country);
  if (it == lookup.end() || it->second == 0) return std::nullopt;
  return std::log10(static_cast<double>(it->second) + 1.0);
}

double log_population(std::uint64_t pop) { return std::log10(static_cast<double>(pop) + 1.0); }

}  // namespace

std::vector<CorrelationResult> correlate_covariates(const EvalReport& report,
                                                    const Dataset& locations,
                                                    const CountTable* counts) {
  std::vector<double> err, lat, lon, pop_err, pop, cnt_err, cnt;
  std::unordered_map<std::string, std::uint64_t> lookup;
  if (counts) lookup = count_lookup(*counts);
  for (const auto& e : report.per_location) {
    const auto& rec = record_for(locations, e.row_index);
    err.push_back(e.squared_error);
    lat.push_back(rec.latitude);
    lon.push_back(rec.longitude);
    if (rec.population) {
      pop_err.push_back(e.squared_error);
      pop.push_back(log_population(*rec.population));
    }
    if (counts) {
      if (const auto c = log_count(lookup, rec.country)) {
        cnt_err.push_back(e.squared_error);
        cnt.push_back(*c);
      }
    }
  }
  std::vector<CorrelationResult> out;
  out.push_back(correlate("latitude", lat, err));
  out.push_back(correlate("longitude", lon, err));
  out.push_back(correlate("log10_population", pop, pop_err));
  if (counts) out.push_back(correlate("log10_country_count", cnt, cnt_err));
  return out;
}

std::vector<CorrelationResult> country_level_correlations(const CountTable& counts,
                                                          const Dataset& locations) {
  struct Acc {
    std::vector<double> lat;
    std::vector<double> lon;
    std::optional<std::uint64_t> max_population;
  };
  std::map<std::string, Acc> by_country;
  for (const auto& rec : locations.records) {
    auto& acc = by_country[rec.country];
    acc.lat.push_back(rec.latitude);
    acc.lon.push_back(rec.longitude);
    if (rec.population) {
      acc.max_population = std::max(acc.max_population.value_or(0), *rec.population);
    }
  }
  const auto lookup = count_lookup(counts);
  std::vector<double> c_all, lat, lon, c_pop, pop;
  for (const auto& [country, acc] : by_country) {
    const auto c = log_count(lookup, country);
    if (!c) continue;
    c_all.push_back(*c);
    lat.push_back(mean_of(acc.lat));
    lon.push_back(mean_of(acc.lon));
    if (acc.max_population) {
      c_pop.push_back(*c);
      pop.push_back(log_population(*acc.max_population));
    }
  }
  std::vector<CorrelationResult> out;
  out.push_back(correlate("latitude", c_all, lat));
  out.push_back(correlate("log10_population", c_pop, pop));
  out.push_back(correlate("longitude", c_all, lon));
  return out;
}

std::size_t band_index(double value, double lower, double cell_degrees, std::size_t bands) {
  const double raw = std::floor((value - lower) / cell_degrees);
  if (raw <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(raw), bands - 1);
}

HeatmapGrid grid_log_mse(const EvalReport& report, const Dataset& locations,
                         double cell_degrees) {
  if (!(cell_degrees > 0.0) || !std::isfinite(cell_degrees) || cell_degrees > 180.0) {
    throw ValidationError("cell size must be in (0, 180] degrees");
  }
  const double ratio = 180.0 / cell_degrees;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * ratio) {
    throw ValidationError("cell size " + format_double(cell_degrees) +
                          " does not divide 180 evenly");
  }
  HeatmapGrid grid;
  grid.cell_degrees = cell_degrees;
  grid.lat_bands = static_cast<std::size_t>(rounded);
  grid.lon_bands = 2 * grid.lat_bands;

  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> cells;
  std::map<std::size_t, std::vector<double>> lat_bands;
  std::map<std::size_t, std::vector<double>> lon_bands;
  for (const auto& e : report.per_location) {
    const auto& rec = record_for(locations, e.row_index);
    const std::size_t i = band_index(rec.latitude, -90.0, cell_degrees, grid.lat_bands);
    const std::size_t j = band_index(rec.longitude, -180.0, cell_degrees, grid.lon_bands);
    const double v = log_mse(e.squared_error);
    cells[{i, j}].push_back(v);
    lat_bands[i].push_back(v);
    lon_bands[j].push_back(v);
  }
  for (const auto& [key, vals] : cells) grid.cells[key] = {vals.size(), mean_of(vals)};
  for (const auto& [key, vals] : lat_bands) grid.lat_profile[key] = {vals.size(), mean_of(vals)};
  for (const auto& [key, vals] : lon_bands) grid.lon_profile[key] = {vals.size(), mean_of(vals)};
  return grid;
}

}  // namespace geoprobe
