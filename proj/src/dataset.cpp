#include "efnlm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "efnlm/error.hpp"

namespace efnlm {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& field, const std::string& path, std::size_t line) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (field.empty() || ec != std::errc() || ptr != end) {
    fail(ErrorCode::ParseError, path + ":" + std::to_string(line) + ": '" + field + "' is not a number");
  }
  return value;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (!have_header) {
      table.header = split(line);
      for (const auto& name : table.header) {
        if (name.empty()) fail(ErrorCode::ParseError, path + ":" + std::to_string(line_no) + ": empty column name");
      }
      have_header = true;
      continue;
    }
    const auto fields = split(line);
    if (fields.size() != table.header.size()) {
      fail(ErrorCode::ParseError, path + ":" + std::to_string(line_no) + ": expected " +
                                      std::to_string(table.header.size()) + " fields, found " +
                                      std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_number(f, path, line_no));
    table.rows.push_back(std::move(row));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) fail(ErrorCode::ParseError, path + ": missing header row");
  return table;
}

Dataset load_dataset(const std::string& path, const std::optional<FamilySpec>& family) {
  const CsvTable table = read_csv(path);
  const auto y_col = std::find(table.header.begin(), table.header.end(), "y");
  if (y_col == table.header.end()) fail(ErrorCode::ParseError, path + ": no response column named 'y'");
  const auto y_index = static_cast<std::size_t>(y_col - table.header.begin());

  Dataset data;
  for (std::size_t c = 0; c < table.header.size(); ++c)
    if (c != y_index) data.covariate_names.push_back(table.header[c]);
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const auto q = static_cast<Eigen::Index>(data.covariate_names.size());
  data.covariates.resize(n, q);
  data.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    Eigen::Index col = 0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == y_index) {
        data.y(i) = row[c];
      } else {
        data.covariates(i, col++) = row[c];
      }
    }
    if (family && !family->in_response_support(data.y(i))) {
      fail(ErrorCode::DomainError, path + ":" + std::to_string(table.line_numbers[static_cast<std::size_t>(i)]) +
                                       ": response y = " + std::to_string(data.y(i)) + " (row " +
                                       std::to_string(i + 1) + ") is outside the " + std::string(family->name()) +
                                       " support");
    }
  }
  return data;
}

Dataset load_covariates(const std::string& path) {
  const CsvTable table = read_csv(path);
  Dataset data;
  data.covariate_names = table.header;
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const auto q = static_cast<Eigen::Index>(table.header.size());
  data.covariates.resize(n, q);
  data.y = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < q; ++c) data.covariates(i, c) = table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
  return data;
}

}  // namespace efnlm
