#include "efnlm/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>
#include <vector>

#include "efnlm/error.hpp"

namespace efnlm {

namespace {

namespace fs = std::filesystem;

// Cells are strings so the CSV and markdown renderings share every digit.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string render_csv(const Table& t) {
  std::string out;
  const auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out += ',';
      out += cells[c];
    }
    out += '\n';
  };
  line(t.header);
  for (const auto& row : t.rows) line(row);
  return out;
}

std::string markdown_cell(const std::string& cell, bool p_value_column) {
  if (!p_value_column) return cell;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() && v < 1e-12) return "<1e-12";
  return cell;
}

std::string render_markdown(const std::string& title, const Table& t) {
  std::string out = "# " + title + "\n\n|";
  std::vector<bool> is_p;
  for (const auto& h : t.header) {
    out += ' ' + h + " |";
    is_p.push_back(h == "p_value");
  }
  out += "\n|";
  for (std::size_t c = 0; c < t.header.size(); ++c) out += c == 0 ? " --- |" : " ---: |";
  out += '\n';
  for (const auto& row : t.rows) {
    out += '|';
    for (std::size_t c = 0; c < row.size(); ++c) out += ' ' + markdown_cell(row[c], is_p[c]) + " |";
    out += '\n';
  }
  return out;
}

void emit_table(const fs::path& dir, const std::string& stem, const std::string& title, const Table& t,
                const std::set<ReportFormat>& formats) {
  if (formats.contains(ReportFormat::Csv)) write_file_atomic(dir / (stem + ".csv"), render_csv(t));
  if (formats.contains(ReportFormat::Markdown)) write_file_atomic(dir / (stem + ".md"), render_markdown(title, t));
}

std::string retained_flag(const SimulationReport& report, ResidualKind kind, Eigen::Index pos) {
  const bool truncated = kind == ResidualKind::Pca || kind == ResidualKind::PcaScaled;
  const Eigen::Index p = static_cast<Eigen::Index>(report.config.beta.size());
  return (!truncated || pos < report.true_mu.size() - p) ? "1" : "0";
}

std::string level_label(double level) { return "level_" + format_number(level); }

}  // namespace

std::set<ReportFormat> parse_formats(std::string_view list) {
  std::set<ReportFormat> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    std::size_t comma = list.find(',', start);
    if (comma == std::string_view::npos) comma = list.size();
    const std::string_view item = list.substr(start, comma - start);
    if (item == "csv") {
      out.insert(ReportFormat::Csv);
    } else if (item == "markdown" || item == "md") {
      out.insert(ReportFormat::Markdown);
    } else {
      fail(ErrorCode::ConfigError, "unknown report format '" + std::string(item) + "' (expected csv, markdown)");
    }
    start = comma + 1;
  }
  return out;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) fail(ErrorCode::IoError, "write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorCode::IoError, "cannot rename into '" + path.string() + "'");
  }
}

void emit_report(const SimulationReport& report, const fs::path& directory, const std::set<ReportFormat>& formats) {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec || !fs::is_directory(directory)) {
    fail(ErrorCode::IoError, "cannot create output directory '" + directory.string() + "'");
  }

  nlohmann::json header = to_json(report.config);
  header["attempted"] = report.attempted;
  header["used"] = report.used();
  header["failed"] = report.failures.size();
  header["failed_fits"] = std::count_if(report.failures.begin(), report.failures.end(),
                                        [](const FailedReplication& f) { return f.fit_failed; });
  header["phi_bar"] = report.phi_bar;
  header["version"] = EFNLM_VERSION;
  write_file_atomic(directory / "config.json", header.dump(2) + "\n");

  {
    Table t;
    for (Eigen::Index c = 0; c < report.covariates.cols(); ++c) t.header.push_back("x" + std::to_string(c + 1));
    t.header.push_back("mu");
    for (Eigen::Index i = 0; i < report.covariates.rows(); ++i) {
      std::vector<std::string> row;
      for (Eigen::Index c = 0; c < report.covariates.cols(); ++c) row.push_back(format_number(report.covariates(i, c)));
      row.push_back(format_number(report.true_mu(i)));
      t.rows.push_back(std::move(row));
    }
    emit_table(directory, "covariates", "Covariates and true means", t, {ReportFormat::Csv});
  }
  {
    Table t{{"replication", "stage", "reason"}, {}};
    for (const auto& f : report.failures) {
      std::string reason = f.reason;
      for (char& ch : reason)
        if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
      t.rows.push_back({std::to_string(f.index), f.fit_failed ? "fit" : "residuals", reason});
    }
    emit_table(directory, "failures", "Failed replications", t, {ReportFormat::Csv});
  }

  for (const auto& [kind, table] : report.moments) {
    const std::string name(to_string(kind));
    Table t{{"position", "mean", "variance", "skewness", "kurtosis", "retained"}, {}};
    for (std::size_t i = 0; i < table.size(); ++i) {
      const auto& m = table[i];
      t.rows.push_back({std::to_string(i + 1), format_number(m.mean), format_number(m.variance),
                        format_number(m.skewness), format_number(m.kurtosis),
                        retained_flag(report, kind, static_cast<Eigen::Index>(i))});
    }
    emit_table(directory, "moments_" + name, "Moments: " + name, t, formats);
  }
  for (const auto& [kind, table] : report.ks_one) {
    const std::string name(to_string(kind));
    Table t{{"position", "statistic", "p_value", "n", "retained"}, {}};
    for (std::size_t i = 0; i < table.size(); ++i) {
      const auto& k = table[i];
      t.rows.push_back({std::to_string(i + 1), format_number(k.statistic), format_number(k.p_value),
                        std::to_string(k.n), retained_flag(report, kind, static_cast<Eigen::Index>(i))});
    }
    emit_table(directory, "ks1_" + name, "One-sample K-S: " + name, t, formats);
  }
  for (const auto& [kind, table] : report.ks_two) {
    const std::string name(to_string(kind));
    Table t{{"position", "statistic", "p_value", "n", "n2"}, {}};
    for (std::size_t i = 0; i < table.size(); ++i) {
      const auto& k = table[i];
      t.rows.push_back({std::to_string(i + 1), format_number(k.statistic), format_number(k.p_value),
                        std::to_string(k.n), std::to_string(k.n2)});
    }
    emit_table(directory, "ks2_" + name, "Two-sample K-S vs true residual: " + name, t, formats);
  }
  if (!report.rejections.empty()) {
    Table t{{"residual", "reference", "dataset_size"}, {}};
    for (double level : report.config.levels) t.header.push_back(level_label(level));
    for (const auto& r : report.rejections) {
      std::vector<std::string> row{std::string(to_string(r.kind)), r.reference, std::to_string(r.dataset_size)};
      for (double v : r.proportions) row.push_back(format_number(v));
      t.rows.push_back(std::move(row));
    }
    emit_table(directory, "rejections", "Per-dataset K-S rejection proportions (asymptotic p-values)", t, formats);
  }
  if (report.mean_expected.size() > 0) {
    Table t{{"position", "mean_r", "mean_v"}, {}};
    for (Eigen::Index i = 0; i < report.mean_expected.size(); ++i) {
      t.rows.push_back({std::to_string(i + 1), format_number(report.mean_expected(i)),
                        format_number(report.mean_variance(i))});
    }
    emit_table(directory, "theory_pearson", "Average O(1/n) mean and variance of R", t, formats);
  }
}

}  // namespace efnlm
