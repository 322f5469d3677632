#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>

#include "efnlm/simharness.hpp"

namespace efnlm {

enum class ReportFormat { Csv, Markdown };

/// Parses a comma-separated list such as "csv,markdown". ConfigError on
/// unknown or empty entries.
std::set<ReportFormat> parse_formats(std::string_view list);

/// printf("%.6g") with non-finite values spelled nan/inf/-inf.
std::string format_number(double value);

/// Writes `content` to `path` through a sibling temp file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// One file per table plus config.json, covariates.csv and failures.csv.
/// Creates `directory` if needed. IoError on any write failure.
void emit_report(const SimulationReport& report, const std::filesystem::path& directory,
                 const std::set<ReportFormat>& formats);

}  // namespace efnlm
