#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "geoprobe/geodata.hpp"

namespace geoprobe {

// Linear map from representation space to (latitude, longitude).
// Prediction is x * weights + intercept, with the intercept unpenalized.
struct RidgeProbe {
  std::string model_id;
  std::uint32_t layer = 0;
  double lambda = 0.0;
  Eigen::VectorXd feature_means;   // d
  Eigen::RowVector2d target_means;
  Eigen::RowVector2d intercept;
  Eigen::MatrixXd weights;         // d x 2

  Eigen::Index dim() const { return weights.rows(); }
};

struct FitReport {
  std::vector<double> lambda_grid;
  std::vector<double> cv_scores;  // mean validation R2 (percent) per grid entry
  double chosen_lambda = 0.0;
  bool condition_warning = false;
};

// Copies the given rows of m into a dense 64-bit matrix.
Eigen::MatrixXd gather_features(const EmbeddingMatrix& m, std::span<const std::size_t> rows);
Eigen::MatrixXd gather_features(const EmbeddingMatrix& m);
// n x 2 matrix of (latitude, longitude) for the given rows.
Eigen::MatrixXd gather_targets(const Dataset& locations, std::span<const std::size_t> rows);

// Closed-form ridge on mean-centered data:
//   (Xc'Xc + lambda I) W = Xc'Yc,  b = mean(Y) - mean(X)' W.
// The Gram system is solved by Cholesky in double precision. If the
// factorization fails at lambda > 0 it is retried once with a jittered
// lambda; lambda = 0 with a singular Gram matrix is an error.
RidgeProbe fit_ridge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda,
                     bool* condition_warning = nullptr);

Eigen::MatrixXd predict(const RidgeProbe& probe, const Eigen::MatrixXd& x);

// Deterministic k-fold CV over the grid. Folds are contiguous blocks of a
// seeded Fisher-Yates permutation of the rows. Ties go to the larger lambda
// and, for equal lambdas, to the later grid entry.
FitReport select_lambda(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                        std::span<const double> lambda_grid, std::size_t folds,
                        std::uint64_t seed);

// How fit picks lambda: a fixed value, or k-fold CV over a grid. An empty
// grid means the default {1e-3, ..., 1e4} scaled by the feature count.
struct LambdaPolicy {
  std::optional<double> fixed;
  std::vector<double> grid;
  std::size_t folds = 5;
  std::uint64_t seed = 42;

  std::vector<double> grid_for(Eigen::Index dim) const;
  std::string describe() const;
};

struct FittedProbe {
  RidgeProbe probe;
  FitReport report;
};

FittedProbe fit_with_policy(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                            const LambdaPolicy& policy);

// Fits on the split's training rows, with provenance copied from the matrix.
FittedProbe fit_probe(const EmbeddingMatrix& embeddings, const Dataset& locations,
                      const SplitIndices& split, const LambdaPolicy& policy);

std::string probe_to_json(const RidgeProbe& probe, const FitReport* report = nullptr);
RidgeProbe probe_from_json(std::string_view text);

}  // namespace geoprobe
