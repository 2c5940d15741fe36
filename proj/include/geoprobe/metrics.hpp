#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "geoprobe/corpuscount.hpp"
#include "geoprobe/geodata.hpp"
#include "geoprobe/probe.hpp"

namespace geoprobe {

// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double v);
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

// Sorts a copy of the values before the compensated reduction, so the
// result does not depend on input order.
double order_independent_sum(std::span<const double> values);

inline constexpr double kLogEpsilon = 1e-12;

// Mean of the two squared coordinate errors, in degrees squared.
double squared_error(double true_lat, double true_lon, double pred_lat, double pred_lon);
double log_mse(double squared_error);

struct R2Summary {
  double r2_lat = 0.0;  // percent
  double r2_lon = 0.0;
  double r2_mean = 0.0;
};

// 1 - SSres/SStot per column against the column's own mean, times 100.
// Throws ValidationError naming the column when its variance is zero.
R2Summary r2_summary(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& predicted);

struct LocationError {
  std::size_t row_index = 0;
  double predicted_lat = 0.0;
  double predicted_lon = 0.0;
  double true_lat = 0.0;
  double true_lon = 0.0;
  double squared_error = 0.0;
};

struct EvalReport {
  std::string model_id;
  std::uint32_t layer = 0;
  std::vector<LocationError> per_location;
  double r2_lat = 0.0;
  double r2_lon = 0.0;
  double r2_mean = 0.0;
  double mse_overall = 0.0;
};

EvalReport evaluate_predictions(std::string model_id, std::uint32_t layer,
                                std::span<const std::size_t> rows,
                                const Eigen::MatrixXd& truth, const Eigen::MatrixXd& predicted);

// Scores the probe on the split's test rows.
EvalReport evaluate(const RidgeProbe& probe, const EmbeddingMatrix& embeddings,
                    const Dataset& locations, const SplitIndices& split);

enum class GroupBy { Country, Continent };
GroupBy parse_group_by(std::string_view key);
std::string_view to_string(GroupBy by);

struct GroupStats {
  std::string group_key;
  std::size_t n = 0;
  double mean_mse = 0.0;
  double mean_log_mse = 0.0;
};

// One entry per group, sorted by key.
std::vector<GroupStats> group_error_stats(const EvalReport& report, const Dataset& locations,
                                          GroupBy by);

// Sum_ij |x_i - x_j| / (2 N Sum_i x_i), via sorting: O(n log n).
double gini(std::span<const double> values);

// Product-moment correlation, clamped to [-1, 1].
double pearson(std::span<const double> x, std::span<const double> y);

// I_x(a, b) by Lentz's continued fraction, relative tolerance 1e-12.
double regularized_incomplete_beta(double a, double b, double x);
double student_t_cdf(double t, double dof);

// Two-sided p-value of the t test on a Pearson r from n pairs.
double p_value_two_sided(double r, std::size_t n);

struct CorrelationResult {
  std::string covariate;
  double r = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  std::optional<std::string> error;  // set when the covariate could not be tested

  bool ok() const { return !error.has_value(); }
  bool significant(double alpha = 0.05) const { return ok() && p_value < alpha; }
};

// Pearson r plus p-value; degenerate inputs become an error entry.
CorrelationResult correlate(std::string covariate, std::span<const double> x,
                            std::span<const double> y);

// Per-location squared error against latitude, longitude, log10(population+1)
// and, when counts are given, log10(country count + 1). Rows missing a
// covariate are dropped for that covariate only.
std::vector<CorrelationResult> correlate_covariates(const EvalReport& report,
                                                    const Dataset& locations,
                                                    const CountTable* counts);

// One observation per country: log10(count+1) against the mean latitude,
// log10(max listed population + 1) and mean longitude of its locations.
std::vector<CorrelationResult> country_level_correlations(const CountTable& counts,
                                                          const Dataset& locations);

struct CellStats {
  std::size_t n = 0;
  double mean_log_mse = 0.0;
};

struct HeatmapGrid {
  double cell_degrees = 0.0;
  std::size_t lat_bands = 0;
  std::size_t lon_bands = 0;
  std::map<std::pair<std::size_t, std::size_t>, CellStats> cells;  // (lat band, lon band)
  std::map<std::size_t, CellStats> lat_profile;
  std::map<std::size_t, CellStats> lon_profile;
};

// Band index for a coordinate; the upper boundary is folded into the last band.
std::size_t band_index(double value, double lower, double cell_degrees, std::size_t bands);

// Bins evaluated rows by their true coordinates and averages log10 MSE.
HeatmapGrid grid_log_mse(const EvalReport& report, const Dataset& locations,
                         double cell_degrees);

// JSON / flat CSV writers for the report types, and a reader for EvalReport.
std::string report_to_json(const EvalReport& report);
std::string report_to_csv(const EvalReport& report);
EvalReport report_from_json(std::string_view text);

std::string groups_to_json(const std::vector<GroupStats>& groups, GroupBy by, double gini_value);
std::string groups_to_csv(const std::vector<GroupStats>& groups);

std::string correlations_to_json(const std::vector<CorrelationResult>& location_level,
                                 const std::vector<CorrelationResult>& country_level);
std::string correlations_to_csv(const std::vector<CorrelationResult>& location_level,
                                const std::vector<CorrelationResult>& country_level);

std::string grid_to_json(const HeatmapGrid& grid);
std::string grid_to_csv(const HeatmapGrid& grid);

}  // namespace geoprobe
