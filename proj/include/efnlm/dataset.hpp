#pragma once

#include <optional>
#include <string>
#include <vector>

#include "efnlm/families.hpp"
#include "efnlm/predictor.hpp"

namespace efnlm {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> line_numbers;  // source line of each row
};

/// Numeric CSV with a header row. LF and CRLF line endings are accepted;
/// blank lines are skipped. ParseError names the offending line.
CsvTable read_csv(const std::string& path);

/// Response column "y", every other column a covariate in header order.
/// With a family, responses are checked against its support (DomainError
/// naming the row).
Dataset load_dataset(const std::string& path, const std::optional<FamilySpec>& family = std::nullopt);

/// All columns are covariates.
Dataset load_covariates(const std::string& path);

}  // namespace efnlm
