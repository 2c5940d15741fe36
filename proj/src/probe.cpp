#include "geoprobe/probe.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "geoprobe/csv.hpp"
#include "geoprobe/error.hpp"
#include "geoprobe/metrics.hpp"

namespace geoprobe {

namespace {

// Below this ratio of smallest Cholesky pivot to largest Gram diagonal the
// system is treated as numerically singular.
constexpr double kPivotRatioFloor = 1e-12;

void require_finite(const Eigen::MatrixXd& m, std::string_view what) {
  if (!m.allFinite()) {
    throw ValidationError("non-finite value in " + std::string(what));
  }
}

// Centered normal equations for one (X, Y) pair, reusable across lambdas.
struct CenteredSystem {
  Eigen::VectorXd x_mean;
  Eigen::RowVector2d y_mean;
  Eigen::MatrixXd gram;  // Xc' Xc
  Eigen::MatrixXd xty;   // Xc' Yc

  CenteredSystem(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    x_mean = x.colwise().mean().transpose();
    y_mean = y.colwise().mean();
    const Eigen::MatrixXd xc = x.rowwise() - x_mean.transpose();
    const Eigen::MatrixXd yc = y.rowwise() - y_mean;
    gram = Eigen::MatrixXd::Zero(x.cols(), x.cols());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(xc.transpose());
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    xty = xc.transpose() * yc;
  }

  struct Solution {
    Eigen::MatrixXd weights;
    double lambda_used = 0.0;
    bool ill_conditioned = false;
  };

  Solution solve(double lambda) const {
    const double max_diag = gram.rows() > 0 ? gram.diagonal().maxCoeff() : 0.0;
    auto attempt = [&](double lam, Solution& out) {
      Eigen::MatrixXd a = gram;
      a.diagonal().array() += lam;
      Eigen::LLT<Eigen::MatrixXd> llt(a);
      if (llt.info() != Eigen::Success) return false;
      const Eigen::VectorXd pivots = llt.matrixLLT().diagonal();
      const double scale = std::max(max_diag + lam, 1e-300);
      const double ratio = pivots.array().square().minCoeff() / scale;
      out.ill_conditioned = !(ratio >= kPivotRatioFloor);
      if (lam == 0.0 && out.ill_conditioned) return false;
      out.weights = llt.solve(xty);
      out.lambda_used = lam;
      return out.weights.allFinite();
    };

    Solution sol;
    if (attempt(lambda, sol)) return sol;
    if (lambda > 0.0) {
      const double jittered = lambda * (1.0 + 1e-10 * gram.trace());
      if (attempt(jittered, sol)) {
        sol.ill_conditioned = true;
        return sol;
      }
      throw ValidationError("ridge system could not be factorized at lambda " +
                            format_double(lambda));
    }
    throw ValidationError("singular system; supply lambda > 0");
  }

  RidgeProbe make_probe(double lambda, bool* warning) const {
    Solution sol = solve(lambda);
    if (warning) *warning = sol.ill_conditioned;
    RidgeProbe p;
    p.lambda = lambda;
    p.feature_means = x_mean;
    p.target_means = y_mean;
    p.weights = std::move(sol.weights);
    p.intercept = y_mean - x_mean.transpose() * p.weights;
    return p;
  }
};

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace

Eigen::MatrixXd gather_features(const EmbeddingMatrix& m, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m.cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m.rows) {
      throw ValidationError("row index " + std::to_string(rows[i]) + " outside embeddings");
    }
    const auto src = m.row(rows[i]);
    for (std::size_t c = 0; c < m.cols; ++c) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = src[c];
    }
  }
  return out;
}

Eigen::MatrixXd gather_features(const EmbeddingMatrix& m) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m.at(r, c);
    }
  }
  return out;
}

Eigen::MatrixXd gather_targets(const Dataset& locations, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= locations.size()) {
      throw ValidationError("row index " + std::to_string(rows[i]) + " outside locations");
    }
    const auto& rec = locations.records[rows[i]];
    out(static_cast<Eigen::Index>(i), 0) = rec.latitude;
    out(static_cast<Eigen::Index>(i), 1) = rec.longitude;
  }
  return out;
}

RidgeProbe fit_ridge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda,
                     bool* condition_warning) {
  if (x.rows() != y.rows()) {
    throw ValidationError("feature and target row counts differ");
  }
  if (y.cols() != 2) {
    throw ValidationError("targets must have exactly 2 columns");
  }
  if (x.rows() < 2) {
    throw ValidationError("ridge fit needs at least 2 rows");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ValidationError("lambda must be a finite non-negative number");
  }
  require_finite(x, "features");
  require_finite(y, "targets");
  return CenteredSystem(x, y).make_probe(lambda, condition_warning);
}

Eigen::MatrixXd predict(const RidgeProbe& probe, const Eigen::MatrixXd& x) {
  if (x.cols() != probe.dim()) {
    throw ValidationError("probe expects " + std::to_string(probe.dim()) +
                          " features, input has " + std::to_string(x.cols()));
  }
  Eigen::MatrixXd out = x * probe.weights;
  out.rowwise() += probe.intercept;
  require_finite(out, "predictions");
  return out;
}

FitReport select_lambda(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                        std::span<const double> lambda_grid, std::size_t folds,
                        std::uint64_t seed) {
  if (folds < 2) {
    throw ValidationError("cross-validation needs at least 2 folds");
  }
  if (lambda_grid.empty()) {
    throw ValidationError("lambda grid is empty");
  }
  for (double lam : lambda_grid) {
    if (!(lam >= 0.0) || !std::isfinite(lam)) {
      throw ValidationError("lambda grid entries must be finite and non-negative");
    }
  }
  const auto n = static_cast<std::size_t>(x.rows());
  if (n < folds) {
    throw ValidationError("fewer rows (" + std::to_string(n) + ") than folds (" +
                          std::to_string(folds) + ")");
  }
  require_finite(x, "features");
  require_finite(y, "targets");

  const auto perm = seeded_permutation(n, seed);
  FitReport report;
  report.lambda_grid.assign(lambda_grid.begin(), lambda_grid.end());
  report.cv_scores.assign(lambda_grid.size(), 0.0);

  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t begin = f * n / folds;
    const std::size_t end = (f + 1) * n / folds;
    std::vector<std::size_t> val(perm.begin() + static_cast<std::ptrdiff_t>(begin),
                                 perm.begin() + static_cast<std::ptrdiff_t>(end));
    std::vector<std::size_t> train;
    train.reserve(n - val.size());
    train.insert(train.end(), perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(begin));
    train.insert(train.end(), perm.begin() + static_cast<std::ptrdiff_t>(end), perm.end());
    std::sort(val.begin(), val.end());
    std::sort(train.begin(), train.end());

    const CenteredSystem system(select_rows(x, train), select_rows(y, train));
    const Eigen::MatrixXd x_val = select_rows(x, val);
    const Eigen::MatrixXd y_val = select_rows(y, val);
    for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
      bool warn = false;
      const RidgeProbe p = system.make_probe(lambda_grid[g], &warn);
      report.condition_warning = report.condition_warning || warn;
      const Eigen::MatrixXd pred = predict(p, x_val);
      report.cv_scores[g] += r2_summary(y_val, pred).r2_mean / static_cast<double>(folds);
    }
  }

  std::size_t best = 0;
  for (std::size_t g = 1; g < lambda_grid.size(); ++g) {
    const double s = report.cv_scores[g];
    const double b = report.cv_scores[best];
    if (s > b || (s == b && lambda_grid[g] >= lambda_grid[best])) best = g;
  }
  report.chosen_lambda = lambda_grid[best];
  return report;
}

std::vector<double> LambdaPolicy::grid_for(Eigen::Index dim) const {
  if (!grid.empty()) return grid;
  std::vector<double> out;
  for (int e = -3; e <= 4; ++e) {
    out.push_back(std::pow(10.0, e) * static_cast<double>(dim));
  }
  return out;
}

std::string LambdaPolicy::describe() const {
  if (fixed) return "fixed:" + format_double(*fixed);
  std::ostringstream ss;
  ss << "cv:folds=" << folds << ",seed=" << seed << ",grid=";
  if (grid.empty()) {
    ss << "default*d";
  } else {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      ss << (i ? ";" : "") << format_double(grid[i]);
    }
  }
  return ss.str();
}

FittedProbe fit_with_policy(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                            const LambdaPolicy& policy) {
  FittedProbe out;
  if (policy.fixed) {
    out.report.lambda_grid = {*policy.fixed};
    out.report.chosen_lambda = *policy.fixed;
  } else {
    const auto grid = policy.grid_for(x.cols());
    out.report = select_lambda(x, y, grid, policy.folds, policy.seed);
  }
  bool warn = false;
  out.probe = fit_ridge(x, y, out.report.chosen_lambda, &warn);
  out.report.condition_warning = out.report.condition_warning || warn;
  if (policy.fixed) {
    out.report.cv_scores = {std::nan("")};
  }
  return out;
}

FittedProbe fit_probe(const EmbeddingMatrix& embeddings, const Dataset& locations,
                      const SplitIndices& split, const LambdaPolicy& policy) {
  check_alignment(embeddings, locations);
  if (split.total() != locations.size()) {
    throw ValidationError("split covers " + std::to_string(split.total()) +
                          " rows but locations have " + std::to_string(locations.size()));
  }
  FittedProbe out = fit_with_policy(gather_features(embeddings, split.train_rows),
                                    gather_targets(locations, split.train_rows), policy);
  out.probe.model_id = embeddings.model_id;
  out.probe.layer = embeddings.layer;
  return out;
}

namespace {

std::vector<double> to_vector(const Eigen::MatrixXd& m) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
  }
  return v;
}

}  // namespace

std::string probe_to_json(const RidgeProbe& probe, const FitReport* report) {
  nlohmann::ordered_json j;
  j["model_id"] = probe.model_id;
  j["layer"] = probe.layer;
  j["lambda"] = probe.lambda;
  j["dim"] = probe.dim();
  j["feature_means"] = to_vector(probe.feature_means);
  j["target_means"] = to_vector(probe.target_means);
  j["intercept"] = to_vector(probe.intercept);
  j["weights"] = to_vector(probe.weights);
  if (report) {
    nlohmann::ordered_json r;
    r["lambda_grid"] = report->lambda_grid;
    nlohmann::ordered_json scores = nlohmann::ordered_json::array();
    for (double s : report->cv_scores) {
      scores.push_back(std::isfinite(s) ? nlohmann::ordered_json(s) : nlohmann::ordered_json());
    }
    r["cv_scores"] = scores;
    r["chosen_lambda"] = report->chosen_lambda;
    r["condition_warning"] = report->condition_warning;
    j["fit_report"] = r;
  }
  return j.dump(2) + "\n";
}

RidgeProbe probe_from_json(std::string_view text) {
  RidgeProbe p;
  try {
    const auto j = nlohmann::json::parse(text);
    p.model_id = j.at("model_id").get<std::string>();
    p.layer = j.at("layer").get<std::uint32_t>();
    p.lambda = j.at("lambda").get<double>();
    const auto means = j.at("feature_means").get<std::vector<double>>();
    const auto tmeans = j.at("target_means").get<std::vector<double>>();
    const auto icpt = j.at("intercept").get<std::vector<double>>();
    const auto w = j.at("weights").get<std::vector<double>>();
    const auto d = static_cast<Eigen::Index>(means.size());
    if (tmeans.size() != 2 || icpt.size() != 2 || w.size() != means.size() * 2) {
      throw ValidationError("probe file has inconsistent shapes");
    }
    p.feature_means = Eigen::Map<const Eigen::VectorXd>(means.data(), d);
    p.target_means << tmeans[0], tmeans[1];
    p.intercept << icpt[0], icpt[1];
    p.weights.resize(d, 2);
    for (Eigen::Index r = 0; r < d; ++r) {
      p.weights(r, 0) = w[static_cast<std::size_t>(2 * r)];
      p.weights(r, 1) = w[static_cast<std::size_t>(2 * r + 1)];
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed probe file: ") + e.what());
  }
  if (!p.weights.allFinite() || !p.intercept.allFinite() || !p.feature_means.allFinite()) {
    throw ValidationError("probe file contains non-finite values");
  }
  return p;
}

}  // namespace geoprobe
