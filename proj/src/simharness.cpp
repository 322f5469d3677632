#include "efnlm/simharness.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "efnlm/dataset.hpp"
#include "efnlm/error.hpp"
#include "efnlm/residuals.hpp"
#include "efnlm/rng.hpp"

namespace efnlm {

namespace {

using nlohmann::json;

// Sub-stream index reserved for the covariate design.
constexpr std::uint64_t kCovariateStream = 0xC0FFEE5EEDULL;

template <typename T>
T get_field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("field '") + key + "': " + e.what());
  }
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& item : j.items()) {
    if (!allowed.contains(item.key())) {
      fail(ErrorCode::ConfigError, "unknown key '" + item.key() + "' in " + where);
    }
  }
}

struct ReplicationOutcome {
  bool ok = false;
  bool fit_failed = false;
  std::string error;
  double phi = 0.0;
  std::array<Vector, kAllResidualKinds.size()> rows;
  Vector expected;
  Vector variance;
};

std::size_t slot(ResidualKind kind) { return static_cast<std::size_t>(kind); }

template <typename Table>
const auto& find_table(const Table& tables, ResidualKind kind, const char* what) {
  for (const auto& [k, table] : tables)
    if (k == kind) return table;
  fail(ErrorCode::ConfigError, std::string("report has no ") + what + " table for '" + std::string(to_string(kind)) + "'");
}

}  // namespace

std::string_view to_string(ResidualKind kind) {
  switch (kind) {
    case ResidualKind::True: return "true";
    case ResidualKind::Pearson: return "pearson";
    case ResidualKind::Corrected: return "corrected";
    case ResidualKind::Adjusted: return "adjusted";
    case ResidualKind::Pca: return "pca";
    case ResidualKind::PcaScaled: return "pca_scaled";
  }
  return "unknown";
}

SimulationConfig config_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::ConfigError, "configuration must be a JSON object");
  reject_unknown_keys(j,
                      {"family", "link", "predictor", "beta", "phi", "n", "replications", "covariates", "seed",
                       "phi_method", "workers", "levels", "init", "fit"},
                      "configuration");
  SimulationConfig c;
  if (j.contains("family")) c.family = get_field<std::string>(j, "family");
  if (j.contains("link")) c.link = get_field<std::string>(j, "link");
  if (j.contains("predictor")) {
    const json& p = j.at("predictor");
    if (p.is_string()) {
      c.predictor.kind = p.get<std::string>();
    } else {
      reject_unknown_keys(p, {"kind", "expression", "parameters", "covariates"}, "predictor");
      c.predictor.kind = get_field<std::string>(p, "kind");
      if (p.contains("expression")) c.predictor.expression = get_field<std::string>(p, "expression");
      if (p.contains("parameters")) c.predictor.parameters = get_field<std::vector<std::string>>(p, "parameters");
      if (p.contains("covariates")) c.predictor.covariates = get_field<std::vector<std::string>>(p, "covariates");
    }
  }
  if (j.contains("beta")) {
    const auto beta = get_field<std::vector<double>>(j, "beta");
    c.beta = Eigen::Map<const Vector>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  }
  if (j.contains("phi")) c.phi = get_field<double>(j, "phi");
  if (j.contains("n")) c.n = get_field<Eigen::Index>(j, "n");
  if (j.contains("replications")) c.replications = get_field<std::size_t>(j, "replications");
  if (j.contains("covariates")) {
    const json& cv = j.at("covariates");
    reject_unknown_keys(cv, {"source", "seed", "dimension", "intercept", "path"}, "covariates");
    c.covariates.source = get_field<std::string>(cv, "source");
    if (cv.contains("seed")) {
      c.covariates.has_seed = true;
      c.covariates.seed = get_field<std::uint64_t>(cv, "seed");
    }
    if (cv.contains("dimension")) c.covariates.dimension = get_field<Eigen::Index>(cv, "dimension");
    if (cv.contains("intercept")) c.covariates.intercept = get_field<bool>(cv, "intercept");
    if (cv.contains("path")) c.covariates.path = get_field<std::string>(cv, "path");
  }
  if (j.contains("seed")) c.seed = get_field<std::uint64_t>(j, "seed");
  if (j.contains("phi_method")) c.phi_method = dispersion_method_from_name(get_field<std::string>(j, "phi_method"));
  if (j.contains("workers")) c.workers = get_field<unsigned>(j, "workers");
  if (j.contains("levels")) c.levels = get_field<std::vector<double>>(j, "levels");
  if (j.contains("init")) {
    const auto init = get_field<std::string>(j, "init");
    if (init == "true") {
      c.init_at_truth = true;
    } else if (init == "heuristic") {
      c.init_at_truth = false;
    } else {
      fail(ErrorCode::ConfigError, "init must be 'true' or 'heuristic'");
    }
  }
  if (j.contains("fit")) c.fit = get_field<bool>(j, "fit");
  validate(c);
  return c;
}

json to_json(const SimulationConfig& c) {
  json predictor = {{"kind", c.predictor.kind}};
  if (c.predictor.kind == "expression") {
    predictor["expression"] = c.predictor.expression;
    predictor["parameters"] = c.predictor.parameters;
    predictor["covariates"] = c.predictor.covariates;
  }
  json covariates = {{"source", c.covariates.source}};
  if (c.covariates.source == "uniform") {
    covariates["dimension"] = c.covariates.dimension;
    covariates["intercept"] = c.covariates.intercept;
    if (c.covariates.has_seed) covariates["seed"] = c.covariates.seed;
  } else {
    covariates["path"] = c.covariates.path;
  }
  return {{"family", c.family},
          {"link", c.link},
          {"predictor", predictor},
          {"beta", std::vector<double>(c.beta.data(), c.beta.data() + c.beta.size())},
          {"phi", c.phi},
          {"n", c.n},
          {"replications", c.replications},
          {"covariates", covariates},
          {"seed", c.seed},
          {"phi_method", std::string(to_string(c.phi_method))},
          {"workers", c.workers},
          {"levels", c.levels},
          {"init", c.init_at_truth ? "true" : "heuristic"},
          {"fit", c.fit}};
}

void validate(const SimulationConfig& c) {
  if (c.replications < 1) fail(ErrorCode::ConfigError, "replications must be at least 1");
  if (!(c.phi > 0.0)) fail(ErrorCode::ConfigError, "phi must be positive");
  for (double level : c.levels) {
    if (!(level > 0.0 && level < 1.0)) fail(ErrorCode::ConfigError, "significance levels must lie in (0, 1)");
  }
  if (c.covariates.source != "uniform" && c.covariates.source != "file") {
    fail(ErrorCode::ConfigError, "covariates.source must be 'uniform' or 'file'");
  }
  if (c.covariates.source == "file" && c.covariates.path.empty()) {
    fail(ErrorCode::ConfigError, "covariates.path is required for file covariates");
  }
  const ModelSpec model = build_model(c);
  if (c.beta.size() != model.predictor.parameter_dim()) {
    fail(ErrorCode::ConfigError, "beta has " + std::to_string(c.beta.size()) + " entries, predictor needs " +
                                     std::to_string(model.predictor.parameter_dim()));
  }
  if (c.covariates.source == "uniform" && c.n <= model.predictor.parameter_dim()) {
    fail(ErrorCode::ConfigError, "n must exceed the number of parameters");
  }
}

ModelSpec build_model(const SimulationConfig& c) {
  const FamilySpec family = FamilySpec::from_name(c.family);
  const LinkSpec link = LinkSpec::from_name(c.link);
  const PredictorConfig& p = c.predictor;
  if (p.kind == "power_plus_linear") return {family, link, PredictorSpec::power_plus_linear()};
  if (p.kind == "linear") {
    const Eigen::Index q = c.covariates.dimension + (c.covariates.intercept ? 1 : 0);
    return {family, link, PredictorSpec::linear(q)};
  }
  if (p.kind == "expression") {
    try {
      return {family, link, PredictorSpec::expression(Expression::parse(p.expression, p.covariates, p.parameters))};
    } catch (const Error& e) {
      fail(ErrorCode::ConfigError, e.what());
    }
  }
  fail(ErrorCode::ConfigError, "unknown predictor kind '" + p.kind + "'");
}

Matrix build_covariates(const SimulationConfig& c) {
  if (c.covariates.source == "file") {
    Dataset d = load_covariates(c.covariates.path);
    return d.covariates;
  }
  const std::uint64_t seed =
      c.covariates.has_seed ? c.covariates.seed : derive_stream_seed(c.seed, kCovariateStream);
  RandomStream rng(seed);
  const Eigen::Index offset = c.covariates.intercept ? 1 : 0;
  Matrix x(c.n, c.covariates.dimension + offset);
  // row-major draw order
  for (Eigen::Index i = 0; i < c.n; ++i) {
    if (offset) x(i, 0) = 1.0;
    for (Eigen::Index k = 0; k < c.covariates.dimension; ++k) x(i, offset + k) = rng.uniform();
  }
  return x;
}

std::size_t SimulationReport::used() const {
  return samples.empty() ? 0 : static_cast<std::size_t>(samples.front().second.rows());
}

const Matrix& SimulationReport::sample(ResidualKind kind) const { return find_table(samples, kind, "sample"); }
const std::vector<MomentSummary>& SimulationReport::moment_table(ResidualKind kind) const {
  return find_table(moments, kind, "moment");
}
const std::vector<KsResult>& SimulationReport::ks_one_table(ResidualKind kind) const {
  return find_table(ks_one, kind, "one-sample K-S");
}
const std::vector<KsResult>& SimulationReport::ks_two_table(ResidualKind kind) const {
  return find_table(ks_two, kind, "two-sample K-S");
}
const RejectionRow& SimulationReport::rejection(ResidualKind kind) const {
  for (const auto& row : rejections)
    if (row.kind == kind) return row;
  fail(ErrorCode::ConfigError, "report has no rejection row for '" + std::string(to_string(kind)) + "'");
}

std::vector<double> per_dataset_ks_battery(const Matrix& residuals, Eigen::Index columns, const PositionCdf& cdf,
                                           const std::vector<double>& levels) {
  if (columns < 1 || columns > residuals.cols()) {
    fail(ErrorCode::DimensionMismatch, "per_dataset_ks_battery: bad column count");
  }
  std::vector<double> rejected(levels.size(), 0.0);
  if (residuals.rows() == 0) return rejected;
  std::vector<double> pit(static_cast<std::size_t>(columns));
  const auto uniform = [](double u) { return std::clamp(u, 0.0, 1.0); };
  for (Eigen::Index r = 0; r < residuals.rows(); ++r) {
    // probability integral transform, then a uniform test
    for (Eigen::Index c = 0; c < columns; ++c) pit[static_cast<std::size_t>(c)] = cdf(c, residuals(r, c));
    const double p = ks_one_sample(pit, uniform).p_value;
    for (std::size_t l = 0; l < levels.size(); ++l)
      if (p < levels[l]) rejected[l] += 1.0;
  }
  for (double& v : rejected) v /= static_cast<double>(residuals.rows());
  return rejected;
}

SimulationReport run_monte_carlo(const SimulationConfig& config) {
  validate(config);
  const ModelSpec model = build_model(config);
  SimulationReport report;
  report.config = config;
  report.covariates = build_covariates(config);
  model.predictor.validate_covariates(report.covariates);
  const Eigen::Index n = report.covariates.rows();
  const Eigen::Index p = model.predictor.parameter_dim();
  if (n <= p) fail(ErrorCode::ConfigError, "need more observations than parameters");

  const Vector eta = model.predictor.eval_eta(report.covariates, config.beta);
  report.true_mu.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    report.true_mu(i) = model.link.mu_of_eta(eta(i));
    if (!model.family.in_mean_domain(report.true_mu(i))) {
      fail(ErrorCode::ConfigError, "true mean outside the family domain at position " + std::to_string(i + 1));
    }
  }
  Vector true_sd(n);
  for (Eigen::Index i = 0; i < n; ++i) true_sd(i) = std::sqrt(model.family.variance_fn(report.true_mu(i)).v);

  const std::size_t reps = config.replications;
  report.attempted = reps;
  report.fitted = config.fit;
  std::vector<ReplicationOutcome> outcomes(reps);

  const auto run_one = [&](std::size_t k) {
    ReplicationOutcome& out = outcomes[k];
    RandomStream rng(derive_stream_seed(config.seed, k));
    Dataset data;
    data.covariates = report.covariates;
    data.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) data.y(i) = model.family.sample_response(report.true_mu(i), config.phi, rng);
    out.rows[slot(ResidualKind::True)] = ((data.y - report.true_mu).array() / true_sd.array()).matrix();
    if (!config.fit) {
      out.ok = true;
      return;
    }
    try {
      const Vector init = config.init_at_truth ? config.beta : heuristic_initial_beta(model, data);
      FitOptions options;
      options.phi_method = config.phi_method;
      out.fit_failed = true;
      const FitResult fit = irls_fit(model, data, init, options);
      if (!fit.converged) {
        out.error = "IRLS did not converge in " + std::to_string(fit.iterations) + " iterations";
        return;
      }
      out.fit_failed = false;
      ResidualReport rr = residual_report(model, fit, data.y);
      if (!rr.errors.empty()) {
        out.error = rr.errors.front().message;
        return;
      }
      out.phi = fit.phi;
      out.rows[slot(ResidualKind::Pearson)] = std::move(rr.pearson);
      out.rows[slot(ResidualKind::Corrected)] = std::move(rr.corrected);
      out.rows[slot(ResidualKind::Adjusted)] = std::move(rr.adjusted);
      out.rows[slot(ResidualKind::Pca)] = std::move(rr.pca);
      out.rows[slot(ResidualKind::PcaScaled)] = std::move(rr.pca_scaled);
      out.expected = std::move(rr.expected);
      out.variance = std::move(rr.variances);
      out.ok = true;
    } catch (const Error& e) {
      out.error = e.what();
    }
  };

  unsigned workers = config.workers ? config.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, reps));
  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t k = next.fetch_add(1); k < reps; k = next.fetch_add(1)) {
          try {
            run_one(k);
          } catch (...) {
            std::lock_guard lock(fatal_mutex);
            if (!fatal) fatal = std::current_exception();
            next.store(reps);
          }
        }
      });
    }
  }
  if (fatal) std::rethrow_exception(fatal);

  // merge in replication order
  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < reps; ++k) {
    if (outcomes[k].ok) {
      kept.push_back(k);
    } else {
      report.failures.push_back({k, outcomes[k].fit_failed, outcomes[k].error});
    }
  }
  const auto fit_failures = static_cast<std::size_t>(std::count_if(
      report.failures.begin(), report.failures.end(), [](const FailedReplication& f) { return f.fit_failed; }));
  if (static_cast<double>(fit_failures) > 0.01 * static_cast<double>(reps)) {
    const auto first = std::find_if(report.failures.begin(), report.failures.end(),
                                    [](const FailedReplication& f) { return f.fit_failed; });
    fail(ErrorCode::NoConvergence, std::to_string(fit_failures) + " of " + std::to_string(reps) +
                                       " fits failed (limit 1%); first: " + first->reason);
  }
  const auto used = static_cast<Eigen::Index>(kept.size());
  if (used < 2) fail(ErrorCode::DegenerateSample, "fewer than two usable replications");

  std::vector<ResidualKind> kinds = {ResidualKind::True};
  if (config.fit) kinds.assign(kAllResidualKinds.begin(), kAllResidualKinds.end());
  for (ResidualKind kind : kinds) {
    Matrix m(used, n);
    for (Eigen::Index r = 0; r < used; ++r) m.row(r) = outcomes[kept[static_cast<std::size_t>(r)]].rows[slot(kind)];
    report.samples.emplace_back(kind, std::move(m));
  }
  if (config.fit) {
    report.mean_expected = Vector::Zero(n);
    report.mean_variance = Vector::Zero(n);
    double phi_sum = 0.0;
    for (std::size_t k : kept) {
      report.mean_expected += outcomes[k].expected;
      report.mean_variance += outcomes[k].variance;
      phi_sum += outcomes[k].phi;
    }
    report.mean_expected /= static_cast<double>(used);
    report.mean_variance /= static_cast<double>(used);
    report.phi_bar = phi_sum / static_cast<double>(used);
  } else {
    report.phi_bar = config.phi;
  }
  outcomes.clear();

  const FamilySpec& family = model.family;
  const double phi_ref = report.phi_bar;
  const Vector& true_mu = report.true_mu;
  const PositionCdf true_cdf = [&](Eigen::Index pos, double x) {
    return family.true_residual_cdf(x, true_mu(pos), phi_ref);
  };
  const PositionCdf normal_cdf = [](Eigen::Index, double x) { return standard_normal_cdf(x); };
  const auto is_normal_reference = [](ResidualKind kind) {
    return kind == ResidualKind::Adjusted || kind == ResidualKind::Pca || kind == ResidualKind::PcaScaled;
  };

  std::vector<double> column(static_cast<std::size_t>(used));
  std::vector<double> other(static_cast<std::size_t>(used));
  for (const auto& [kind, m] : report.samples) {
    std::vector<MomentSummary> moments;
    std::vector<KsResult> ks1;
    for (Eigen::Index pos = 0; pos < n; ++pos) {
      Eigen::Map<Vector>(column.data(), used) = m.col(pos);
      moments.push_back(sample_moments(column));
      const PositionCdf& ref = is_normal_reference(kind) ? normal_cdf : true_cdf;
      ks1.push_back(ks_one_sample(column, [&](double x) { return ref(pos, x); }));
    }
    report.moments.emplace_back(kind, std::move(moments));
    report.ks_one.emplace_back(kind, std::move(ks1));
  }
  if (config.fit) {
    const Matrix& eps = report.sample(ResidualKind::True);
    for (ResidualKind kind : {ResidualKind::Pearson, ResidualKind::Corrected}) {
      const Matrix& m = report.sample(kind);
      std::vector<KsResult> ks2;
      for (Eigen::Index pos = 0; pos < n; ++pos) {
        Eigen::Map<Vector>(column.data(), used) = m.col(pos);
        Eigen::Map<Vector>(other.data(), used) = eps.col(pos);
        ks2.push_back(ks_two_sample(column, other));
      }
      report.ks_two.emplace_back(kind, std::move(ks2));
    }
    for (ResidualKind kind : {ResidualKind::Pearson, ResidualKind::Corrected, ResidualKind::Adjusted,
                              ResidualKind::Pca, ResidualKind::PcaScaled}) {
      const bool normal = is_normal_reference(kind);
      const bool truncated = kind == ResidualKind::Pca || kind == ResidualKind::PcaScaled;
      const Eigen::Index columns = truncated ? n - p : n;
      RejectionRow row;
      row.kind = kind;
      row.reference = normal ? "standard_normal" : "true_residual";
      row.dataset_size = columns;
      row.proportions = per_dataset_ks_battery(report.sample(kind), columns, normal ? normal_cdf : true_cdf,
                                               config.levels);
      report.rejections.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace efnlm
