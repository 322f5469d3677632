#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace efnlm {

/// Exit codes: 0 success, 1 domain or model failure, 2 usage or config error.
int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int parse_and_dispatch(int argc, const char* const* argv);

/// Full help for the program and every subcommand.
std::string help_text();

/// Every long flag the dispatcher accepts, as "subcommand --flag"
/// ("--flag" for global ones).
std::vector<std::string> accepted_flags();

}  // namespace efnlm
