#include "efnlm/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <sstream>

#include "efnlm/dataset.hpp"
#include "efnlm/error.hpp"
#include "efnlm/report.hpp"
#include "efnlm/residuals.hpp"
#include "efnlm/simharness.hpp"

namespace efnlm {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kIntercept = "(intercept)";

constexpr const char* kGrammar = R"(Predictor expressions:
  expr    := term (('+' | '-') term)*
  term    := unary (('*' | '/') unary)*
  unary   := '-' unary | power
  power   := primary ('^' unary)?      right associative
  primary := number | name | log(expr) | exp(expr) | '(' expr ')'
  Names matching CSV column headers are covariates; every other name is a
  parameter, ordered by first appearance unless --params lists them.
  Example: --predictor "b0 + x1^b1 + b2*x2"
Families: normal, gamma, inverse_gaussian. Links: identity, log, reciprocal,
inverse_square. Workers default to $EFNLM_WORKERS, then all cores.)";

struct FitArgs {
  std::string family;
  std::string link;
  std::string predictor;
  std::string params;
  std::string data;
  std::string init;
  bool heuristic_init = false;
  bool intercept = false;
  std::string phi_method = "pearson";
  int max_iterations = 100;
  double tolerance = 1e-8;
  std::string out;
};

struct ResidualArgs {
  std::string model;
  std::string data;
  std::string out;
};

struct SimulateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::string formats = "csv,markdown";
};

struct Cli {
  CLI::App app{"Exponential family nonlinear models: fitting, residual corrections and Monte Carlo studies",
               "efnlm"};
  CLI::App* fit = nullptr;
  CLI::App* residuals = nullptr;
  CLI::App* simulate = nullptr;
  FitArgs fit_args;
  ResidualArgs residual_args;
  SimulateArgs simulate_args;

  Cli() {
    app.set_version_flag("--version", std::string(EFNLM_VERSION));
    app.require_subcommand(1);

    fit = app.add_subcommand("fit", "Fit a model by iteratively reweighted least squares; writes JSON");
    fit->add_option("--family", fit_args.family, "normal | gamma | inverse_gaussian")->required();
    fit->add_option("--link", fit_args.link, "identity | log | reciprocal | inverse_square")->required();
    fit->add_option("--predictor", fit_args.predictor, "linear | power_plus_linear | <expression>")->required();
    fit->add_option("--params", fit_args.params, "Comma-separated parameter names for an expression predictor");
    fit->add_option("--data", fit_args.data, "CSV with header; column y is the response")->required();
    auto* init = fit->add_option("--init", fit_args.init, "Comma-separated starting values for beta");
    auto* heuristic = fit->add_flag("--heuristic-init", fit_args.heuristic_init,
                                    "Closed-form starting values (default when --init is absent)");
    init->excludes(heuristic);
    heuristic->excludes(init);
    fit->add_flag("--intercept", fit_args.intercept, "Prepend a column of ones (linear predictor only)");
    fit->add_option("--phi-method", fit_args.phi_method, "pearson | mle")->capture_default_str();
    fit->add_option("--max-iter", fit_args.max_iterations, "IRLS iteration budget")->capture_default_str();
    fit->add_option("--tol", fit_args.tolerance, "Convergence tolerance on beta")->capture_default_str();
    fit->add_option("--out", fit_args.out, "Output JSON path (default: standard output)");

    residuals = app.add_subcommand("residuals", "Residual report for a fitted model; writes CSV plus JSON sidecar");
    residuals->add_option("--model", residual_args.model, "Fitted-model JSON written by 'fit'")->required();
    residuals->add_option("--data", residual_args.data, "CSV the model was fitted to")->required();
    residuals->add_option("--out", residual_args.out, "Output CSV; the sidecar gets a .json extension")->required();

    simulate = app.add_subcommand("simulate", "Monte Carlo study of residual distributions");
    simulate->add_option("--config", simulate_args.config, "Simulation JSON (see configs/)")->required();
    simulate->add_option("--out", simulate_args.out, "Output directory")->required();
    simulate->add_option("--seed", simulate_args.seed, "Override the master seed");
    simulate->add_option("--workers", simulate_args.workers, "Worker threads (0: all cores)")->envname("EFNLM_WORKERS");
    simulate->add_option("--formats", simulate_args.formats, "csv, markdown or both")->capture_default_str();

    // set after the subcommands so they do not inherit it
    app.footer(kGrammar);
    fit->footer("Expression grammar: efnlm --help");
  }

  std::string full_help() const {
    std::string text = app.help();
    for (const CLI::App* sub : {fit, residuals, simulate}) text += "\n" + sub->help("efnlm");
    return text;
  }
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) fail(ErrorCode::ConfigError, "empty entry in list '" + text + "'");
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

Vector parse_vector(const std::string& text) {
  const auto items = split_list(text);
  Vector v(static_cast<Eigen::Index>(items.size()));
  for (std::size_t k = 0; k < items.size(); ++k) {
    std::size_t used = 0;
    try {
      v(static_cast<Eigen::Index>(k)) = std::stod(items[k], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != items[k].size()) fail(ErrorCode::ConfigError, "not a number: '" + items[k] + "'");
  }
  return v;
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
  return rows;
}

void add_intercept(Dataset& data) {
  Matrix x(data.covariates.rows(), data.covariates.cols() + 1);
  x.col(0).setOnes();
  x.rightCols(data.covariates.cols()) = data.covariates;
  data.covariates = std::move(x);
  data.covariate_names.insert(data.covariate_names.begin(), kIntercept);
}

// Predictor from its CLI name; parameter names are recorded for the artifact.
PredictorSpec make_predictor(const std::string& spec, const std::string& params, const Dataset& data,
                             std::vector<std::string>& parameter_names) {
  if (spec == "linear") {
    if (!params.empty()) fail(ErrorCode::ConfigError, "--params only applies to expression predictors");
    parameter_names.clear();
    for (const auto& name : data.covariate_names) parameter_names.push_back("beta_" + name);
    return PredictorSpec::linear(data.covariates.cols());
  }
  if (spec == "power_plus_linear") {
    if (!params.empty()) fail(ErrorCode::ConfigError, "--params only applies to expression predictors");
    if (data.covariates.cols() != 2) {
      fail(ErrorCode::ConfigError, "power_plus_linear needs exactly two covariate columns");
    }
    parameter_names = {"b0", "b1", "b2"};
    return PredictorSpec::power_plus_linear();
  }
  if (params.empty()) {
    parameter_names.clear();
    for (const auto& name : Expression::identifiers(spec)) {
      if (std::find(data.covariate_names.begin(), data.covariate_names.end(), name) == data.covariate_names.end()) {
        parameter_names.push_back(name);
      }
    }
  } else {
    parameter_names = split_list(params);
  }
  return PredictorSpec::expression(Expression::parse(spec, data.covariate_names, parameter_names));
}

int run_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  const FamilySpec family = FamilySpec::from_name(a.family);
  const LinkSpec link = LinkSpec::from_name(a.link);
  const DispersionMethod method = dispersion_method_from_name(a.phi_method);
  if (a.intercept && a.predictor != "linear") fail(ErrorCode::ConfigError, "--intercept requires --predictor linear");
  Dataset data = load_dataset(a.data, family);
  if (a.intercept) add_intercept(data);
  std::vector<std::string> parameter_names;
  const ModelSpec model{family, link, make_predictor(a.predictor, a.params, data, parameter_names)};
  model.predictor.validate_covariates(data.covariates);

  Vector init;
  if (!a.init.empty()) {
    init = parse_vector(a.init);
    if (init.size() != model.predictor.parameter_dim()) {
      fail(ErrorCode::ConfigError, "--init has " + std::to_string(init.size()) + " values, model has " +
                                       std::to_string(model.predictor.parameter_dim()) + " parameters");
    }
  } else {
    init = heuristic_initial_beta(model, data);
  }
  FitOptions options;
  options.phi_method = method;
  options.max_iterations = a.max_iterations;
  options.tolerance = a.tolerance;
  const FitResult fit = irls_fit(model, data, init, options);
  if (!fit.converged) {
    fail(ErrorCode::NoConvergence, "IRLS did not converge in " + std::to_string(fit.iterations) +
                                       " iterations (score norm " + format_number(fit.score_norm) + ")");
  }

  json predictor = {{"kind", a.predictor == "linear" || a.predictor == "power_plus_linear" ? a.predictor
                                                                                           : "expression"},
                    {"parameters", parameter_names},
                    {"covariates", data.covariate_names}};
  if (predictor["kind"] == "expression") predictor["expression"] = a.predictor;
  const Vector se = fit.k_inv.diagonal().cwiseSqrt();
  json doc = {{"family", std::string(family.name())},
              {"link", std::string(link.name())},
              {"predictor", predictor},
              {"intercept", a.intercept},
              {"beta", vector_json(fit.beta)},
              {"std_errors", vector_json(se)},
              {"bias", vector_json(fit.bias)},
              {"phi", fit.phi},
              {"phi_method", std::string(to_string(fit.phi_method))},
              {"converged", fit.converged},
              {"iterations", fit.iterations},
              {"score_norm", fit.score_norm},
              {"log_likelihood_kernel", log_likelihood_kernel(model, fit.beta, data)},
              {"n", fit.n()},
              {"p", fit.p()},
              {"version", EFNLM_VERSION}};
  const std::string text = doc.dump(2) + "\n";
  if (a.out.empty()) {
    out << text;
  } else {
    write_file_atomic(a.out, text);
    err << "efnlm: fit converged in " << fit.iterations << " iterations; wrote " << a.out << "\n";
  }
  return 0;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, path + ": " + e.what());
  }
}

int run_residuals(const ResidualArgs& a, std::ostream& err) {
  const json doc = read_json(a.model);
  ModelSpec model{FamilySpec::from_name("normal"), LinkSpec::from_name("identity"), PredictorSpec::linear(1)};
  Dataset data;
  Vector beta;
  double phi = 0.0;
  DispersionMethod method = DispersionMethod::Pearson;
  try {
    const FamilySpec family = FamilySpec::from_name(doc.at("family").get<std::string>());
    const LinkSpec link = LinkSpec::from_name(doc.at("link").get<std::string>());
    const json& pred = doc.at("predictor");
    const auto kind = pred.at("kind").get<std::string>();
    const auto parameters = pred.at("parameters").get<std::vector<std::string>>();
    const auto covariates = pred.at("covariates").get<std::vector<std::string>>();
    data = load_dataset(a.data, family);
    if (doc.value("intercept", false)) add_intercept(data);
    if (data.covariate_names != covariates) {
      fail(ErrorCode::ConfigError, "data columns do not match the covariates the model was fitted with");
    }
    std::vector<std::string> ignored;
    const std::string spec = kind == "expression" ? pred.at("expression").get<std::string>() : kind;
    model = ModelSpec{family, link,
                      kind == "expression" ? PredictorSpec::expression(Expression::parse(spec, covariates, parameters))
                                           : make_predictor(spec, "", data, ignored)};
    const auto b = doc.at("beta").get<std::vector<double>>();
    beta = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
    phi = doc.at("phi").get<double>();
    method = dispersion_method_from_name(doc.at("phi_method").get<std::string>());
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, a.model + ": " + e.what());
  }
  if (beta.size() != model.predictor.parameter_dim()) fail(ErrorCode::ConfigError, "beta length mismatch");
  model.predictor.validate_covariates(data.covariates);

  const FitResult fit = evaluate_fit(model, data, beta, phi, method);
  const ResidualReport rr = residual_report(model, fit, data.y);
  const Eigen::Index n = fit.n();
  const Eigen::Index keep = n - rr.truncation;

  std::string csv = "index,pearson,corrected,expected,variance,adjusted,pca,pca_scaled,retained\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    csv += std::to_string(i + 1);
    for (double v : {rr.pearson(i), rr.corrected(i), rr.expected(i), rr.variances(i), rr.adjusted(i), rr.pca(i),
                     rr.pca_scaled(i)}) {
      csv += ',' + format_number(v);
    }
    csv += i < keep ? ",1\n" : ",0\n";
  }
  json errors = json::array();
  for (const auto& e : rr.errors) {
    errors.push_back({{"index", e.index + 1}, {"message", e.message}});
    err << "efnlm: warning: observation " << (e.index + 1) << ": " << e.message << "\n";
  }
  json sidecar = {{"eigenvalues", vector_json(rr.eigenvalues)},
                  {"eigenvectors", matrix_json(rr.eigenvectors)},
                  {"m", rr.truncation},
                  {"correlation", matrix_json(rr.correlation)},
                  {"errors", errors}};
  fs::path sidecar_path(a.out);
  sidecar_path.replace_extension(".json");
  if (sidecar_path == fs::path(a.out)) sidecar_path += ".sidecar.json";
  write_file_atomic(a.out, csv);
  write_file_atomic(sidecar_path, sidecar.dump(2) + "\n");
  return 0;
}

int run_simulate(const SimulateArgs& a, std::ostream& err) {
  const auto formats = parse_formats(a.formats);
  SimulationConfig config = config_from_json(read_json(a.config));
  if (a.seed) config.seed = *a.seed;
  if (a.workers) config.workers = *a.workers;
  err << "efnlm: simulating " << config.replications << " replications of " << config.family << "/" << config.link
      << " (seed " << config.seed << ")\n";
  const SimulationReport report = run_monte_carlo(config);
  emit_report(report, a.out, formats);
  err << "efnlm: " << report.used() << " of " << report.attempted << " replications used; wrote " << a.out << "\n";
  return 0;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::ParseError:
    case ErrorCode::IoError:
    case ErrorCode::UnsupportedFamily:
      return 2;
    default:
      return 1;
  }
}

}  // namespace

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Cli cli;
  try {
    cli.app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << cli.full_help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << cli.full_help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << EFNLM_VERSION << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "efnlm: " << e.what() << "\n\n" << cli.full_help();
    return 2;
  }
  try {
    if (*cli.fit) return run_fit(cli.fit_args, out, err);
    if (*cli.residuals) return run_residuals(cli.residual_args, err);
    return run_simulate(cli.simulate_args, err);
  } catch (const Error& e) {
    err << "efnlm: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "efnlm: internal error: " << e.what() << "\n";
    return 1;
  }
}

int parse_and_dispatch(int argc, const char* const* argv) { return parse_and_dispatch(argc, argv, std::cout, std::cerr); }

std::string help_text() { return Cli().full_help(); }

std::vector<std::string> accepted_flags() {
  Cli cli;
  std::vector<std::string> flags;
  const auto collect = [&](const CLI::App* app, const std::string& prefix) {
    for (const CLI::Option* opt : app->get_options()) {
      for (const auto& name : opt->get_lnames()) flags.push_back(prefix + "--" + name);
    }
  };
  collect(&cli.app, "");
  for (const CLI::App* sub : {cli.fit, cli.residuals, cli.simulate}) collect(sub, sub->get_name() + " ");
  return flags;
}

}  // namespace efnlm
