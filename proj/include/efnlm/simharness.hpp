#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "efnlm/fitting.hpp"
#include "efnlm/gof.hpp"

namespace efnlm {

enum class ResidualKind { True, Pearson, Corrected, Adjusted, Pca, PcaScaled };

inline constexpr std::array<ResidualKind, 6> kAllResidualKinds = {
    ResidualKind::True,     ResidualKind::Pearson, ResidualKind::Corrected,
    ResidualKind::Adjusted, ResidualKind::Pca,     ResidualKind::PcaScaled};

/// "true", "pearson", "corrected", "adjusted", "pca", "pca_scaled".
std::string_view to_string(ResidualKind kind);

struct PredictorConfig {
  std::string kind = "power_plus_linear";  // linear | power_plus_linear | expression
  std::string expression;
  std::vector<std::string> parameters;
  std::vector<std::string> covariates;
};

struct CovariateConfig {
  std::string source = "uniform";  // uniform | file
  bool has_seed = false;
  std::uint64_t seed = 0;    // defaults to a stream derived from the master seed
  Eigen::Index dimension = 2;
  bool intercept = false;    // prepend a column of ones (uniform only)
  std::string path;          // CSV with header (file only)
};

struct SimulationConfig {
  std::string family = "gamma";
  std::string link = "log";
  PredictorConfig predictor;
  Vector beta = (Vector(3) << 0.5, 1.0, 2.0).finished();
  double phi = 4.0;
  Eigen::Index n = 20;
  std::size_t replications = 10000;
  CovariateConfig covariates;
  std::uint64_t seed = 20100517;
  DispersionMethod phi_method = DispersionMethod::Pearson;
  unsigned workers = 0;  // 0: hardware concurrency
  std::vector<double> levels = {0.01, 0.025, 0.05, 0.075, 0.10, 0.125, 0.15};
  bool init_at_truth = true;  // false: heuristic initializer
  bool fit = true;            // false: only simulate true residuals
};

/// ConfigError on missing or invalid fields. Unknown keys are rejected.
SimulationConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SimulationConfig& config);
void validate(const SimulationConfig& config);

ModelSpec build_model(const SimulationConfig& config);
/// Covariates held fixed across replications.
Matrix build_covariates(const SimulationConfig& config);

struct FailedReplication {
  std::size_t index = 0;
  bool fit_failed = true;  // false: the fit converged but a residual was undefined
  std::string reason;
};

struct RejectionRow {
  ResidualKind kind = ResidualKind::Pearson;
  std::string reference;  // "true_residual" or "standard_normal"
  Eigen::Index dataset_size = 0;
  std::vector<double> proportions;  // aligned with config.levels
};

struct SimulationReport {
  SimulationConfig config;
  Matrix covariates;
  Vector true_mu;
  std::size_t attempted = 0;
  std::vector<FailedReplication> failures;
  double phi_bar = 0.0;  // mean of per-replication precision estimates
  bool fitted = true;

  /// Stored residual matrices, one row per retained replication.
  std::vector<std::pair<ResidualKind, Matrix>> samples;
  /// Per-position averages of the O(1/n) mean and variance of R.
  Vector mean_expected;
  Vector mean_variance;

  std::vector<std::pair<ResidualKind, std::vector<MomentSummary>>> moments;
  std::vector<std::pair<ResidualKind, std::vector<KsResult>>> ks_one;
  std::vector<std::pair<ResidualKind, std::vector<KsResult>>> ks_two;
  std::vector<RejectionRow> rejections;

  std::size_t used() const;
  const Matrix& sample(ResidualKind kind) const;
  const std::vector<MomentSummary>& moment_table(ResidualKind kind) const;
  const std::vector<KsResult>& ks_one_table(ResidualKind kind) const;
  const std::vector<KsResult>& ks_two_table(ResidualKind kind) const;
  const RejectionRow& rejection(ResidualKind kind) const;
};

/// Reference CDF for the per-dataset battery; receives the position.
using PositionCdf = std::function<double(Eigen::Index position, double x)>;

/// One K-S test per row of `residuals` (its first `columns` entries)
/// against `cdf`; returns the share of p-values below each level.
std::vector<double> per_dataset_ks_battery(const Matrix& residuals, Eigen::Index columns, const PositionCdf& cdf,
                                           const std::vector<double>& levels);

/// Seeded, parallel Monte Carlo study. Replication k draws from the stream
/// seeded with derive_stream_seed(seed, k), so results do not depend on
/// the worker count. Replications whose fit fails or whose residuals are
/// undefined are logged and excluded from every table. Throws
/// NoConvergence when more than 1% of the fits fail.
SimulationReport run_monte_carlo(const SimulationConfig& config);

}  // namespace efnlm
