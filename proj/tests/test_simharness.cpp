#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "efnlm/dataset.hpp"
#include "efnlm/error.hpp"
#include "efnlm/report.hpp"
#include "efnlm/simharness.hpp"

using namespace efnlm;
namespace fs = std::filesystem;

namespace {

SimulationConfig small_config(std::size_t replications = 60) {
  SimulationConfig c;
  c.replications = replications;
  c.workers = 1;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("efnlm_test_" + name);
  fs::remove_all(p);
  return p;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;
}

}  // namespace

TEST_SUITE("simharness") {
  TEST_CASE("configuration parsing and validation") {
    const SimulationConfig d = config_from_json(nlohmann::json::object());
    CHECK(d.family == "gamma");
    CHECK(d.replications == 10000);
    CHECK(d.beta.size() == 3);
    const SimulationConfig back = config_from_json(to_json(d));
    CHECK(to_json(back) == to_json(d));
    using nlohmann::json;
    CHECK(code_of([] { config_from_json(json{{"replcations", 5}}); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { config_from_json(json{{"replications", 0}}); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { config_from_json(json{{"levels", {0.05, 1.5}}}); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { config_from_json(json{{"beta", {1.0, 2.0}}}); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { config_from_json(json{{"n", 3}}); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { config_from_json(json{{"family", "poisson"}}); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { config_from_json(json{{"phi", "four"}}); }) == ErrorCode::ConfigError);
    const SimulationConfig e = config_from_json(
        json{{"predictor", {{"kind", "expression"}, {"expression", "a + exp(b*x1)"}, {"parameters", {"a", "b"}},
                            {"covariates", {"x1"}}}},
             {"beta", {0.5, 1.0}},
             {"covariates", {{"source", "uniform"}, {"dimension", 1}}}});
    CHECK(build_model(e).predictor.parameter_dim() == 2);
  }

  TEST_CASE("covariates are fixed by the seed and can come from a file") {
    const SimulationConfig c = small_config();
    const Matrix a = build_covariates(c);
    CHECK(a == build_covariates(c));
    CHECK(a.rows() == 20);
    CHECK((a.array() > 0.0).all());
    CHECK((a.array() < 1.0).all());
    SimulationConfig other = c;
    other.seed += 1;
    CHECK(a != build_covariates(other));

    const fs::path dir = scratch("covfile");
    fs::create_directories(dir);
    std::ofstream(dir / "x.csv") << "x1,x2\n0.5,0.25\n0.75,0.125\n0.2,0.9\n0.6,0.3\n0.4,0.8\n";
    SimulationConfig f = c;
    f.covariates.source = "file";
    f.covariates.path = (dir / "x.csv").string();
    const Matrix fx = build_covariates(f);
    CHECK(fx.rows() == 5);
    CHECK(fx(1, 1) == 0.125);
  }

  TEST_CASE("per-dataset battery") {
    const std::vector<double> levels = {0.01, 0.05, 0.1};
    const PositionCdf normal = [](Eigen::Index, double x) { return standard_normal_cdf(x); };
    // Quantile midpoints give the smallest attainable statistic: no rejections.
    Matrix ideal(5, 20);
    for (Eigen::Index c = 0; c < 20; ++c) {
      const double u = (static_cast<double>(c) + 0.5) / 20.0;
      double lo = -10, hi = 10;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (standard_normal_cdf(mid) < u ? lo : hi) = mid;
      }
      ideal.col(c).setConstant(lo);
    }
    for (double p : per_dataset_ks_battery(ideal, 20, normal, levels)) CHECK(p == 0.0);

    std::mt19937_64 gen(77);
    Matrix noise(10000, 20);
    for (Eigen::Index r = 0; r < noise.rows(); ++r)
      for (Eigen::Index c = 0; c < 20; ++c) noise(r, c) = std::normal_distribution<double>()(gen);
    const auto props = per_dataset_ks_battery(noise, 20, normal, levels);
    for (std::size_t k = 0; k < levels.size(); ++k) CHECK(std::abs(props[k] - levels[k]) <= 0.01);

    Matrix shifted = noise.array() + 1.0;
    for (double p : per_dataset_ks_battery(shifted, 20, normal, levels)) CHECK(p > 0.5);
    CHECK_THROWS_AS(per_dataset_ks_battery(noise, 21, normal, levels), Error);
  }

  TEST_CASE("report shape and invariants") {
    const SimulationReport r = run_monte_carlo(small_config());
    CHECK(r.attempted == 60);
    CHECK(r.used() + r.failures.size() == 60);
    for (ResidualKind k : kAllResidualKinds) {
      CHECK(r.sample(k).cols() == 20);
      CHECK(r.moment_table(k).size() == 20);
      CHECK(r.ks_one_table(k).size() == 20);
    }
    CHECK(r.ks_two_table(ResidualKind::Corrected).size() == 20);
    CHECK(r.rejection(ResidualKind::Pca).dataset_size == 17);
    CHECK(r.rejection(ResidualKind::Adjusted).dataset_size == 20);
    for (const RejectionRow& row : r.rejections) {
      for (double p : row.proportions) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
      }
    }
    CHECK(r.phi_bar > 0.0);
  }

  TEST_CASE("results do not depend on the worker count") {
    SimulationConfig one = small_config(40);
    SimulationConfig four = one;
    four.workers = 4;
    const SimulationReport a = run_monte_carlo(one);
    const SimulationReport b = run_monte_carlo(four);
    for (ResidualKind k : kAllResidualKinds) CHECK(a.sample(k) == b.sample(k));
    CHECK(a.phi_bar == b.phi_bar);
  }

  TEST_CASE("true residuals do not depend on the fitting path") {
    SimulationConfig fitted = small_config(50);
    SimulationConfig bare = fitted;
    bare.fit = false;
    const SimulationReport a = run_monte_carlo(fitted);
    const SimulationReport b = run_monte_carlo(bare);
    REQUIRE(a.failures.empty());
    CHECK(a.sample(ResidualKind::True) == b.sample(ResidualKind::True));
    CHECK(b.samples.size() == 1);
    CHECK(b.rejections.empty());
  }

  TEST_CASE("too many failed fits abort the study") {
    SimulationConfig c = small_config(20);
    c.predictor.kind = "expression";
    c.predictor.expression = "a + b + c*x1";
    c.predictor.parameters = {"a", "b", "c"};
    c.predictor.covariates = {"x1", "x2"};
    try {
      run_monte_carlo(c);
      FAIL("expected NoConvergence");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoConvergence);
    }
  }

  TEST_CASE("emitted report files") {
    const SimulationReport r = run_monte_carlo(small_config(30));
    const fs::path dir = scratch("report");
    emit_report(r, dir, {ReportFormat::Csv, ReportFormat::Markdown});
    for (const char* name : {"config.json", "covariates.csv", "failures.csv", "rejections.csv", "rejections.md",
                             "ks2_pearson.csv", "ks2_corrected.csv", "theory_pearson.csv"}) {
      CHECK(fs::exists(dir / name));
    }
    for (ResidualKind k : kAllResidualKinds) {
      const std::string name(to_string(k));
      CHECK(fs::exists(dir / ("moments_" + name + ".csv")));
      CHECK(fs::exists(dir / ("ks1_" + name + ".md")));
    }
    const CsvTable moments = read_csv((dir / "moments_pearson.csv").string());
    CHECK(moments.rows.size() == 20);
    CHECK(moments.header == std::vector<std::string>{"position", "mean", "variance", "skewness", "kurtosis",
                                                     "retained"});
    const auto& table = r.moment_table(ResidualKind::Pearson);
    for (std::size_t i = 0; i < 20; ++i) {
      CHECK(moments.rows[i][1] == doctest::Approx(table[i].mean).epsilon(5e-6));
      CHECK(moments.rows[i][2] == doctest::Approx(table[i].variance).epsilon(5e-6));
      CHECK(moments.rows[i][4] == doctest::Approx(table[i].kurtosis).epsilon(5e-6));
    }
    const CsvTable pca = read_csv((dir / "moments_pca.csv").string());
    CHECK(pca.rows[16][5] == 1.0);
    CHECK(pca.rows[17][5] == 0.0);

    // markdown carries the same digits
    const std::string md = slurp(dir / "moments_pearson.md");
    CHECK(md.find("| " + format_number(table[0].variance) + " |") != std::string::npos);

    // byte-identical on rerun
    const fs::path again = scratch("report_again");
    emit_report(run_monte_carlo(small_config(30)), again, {ReportFormat::Csv});
    CHECK(slurp(dir / "moments_corrected.csv") == slurp(again / "moments_corrected.csv"));
    CHECK(slurp(dir / "rejections.csv") == slurp(again / "rejections.csv"));
    CHECK_FALSE(fs::exists(again / "rejections.md"));
  }

  TEST_CASE("report helpers") {
    CHECK(format_number(0.123456789) == "0.123457");
    CHECK(format_number(1e-20) == "1e-20");
    CHECK(format_number(std::nan("")) == "nan");
    CHECK(parse_formats("csv,markdown").size() == 2);
    CHECK(parse_formats("md").contains(ReportFormat::Markdown));
    CHECK_THROWS_AS(parse_formats("csv,xml"), Error);
    CHECK_THROWS_AS(parse_formats(""), Error);
  }
}
