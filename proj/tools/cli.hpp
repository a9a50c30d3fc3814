#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ngraph::cli {

/// Exit codes: 0 success, 1 usage error, 2 data or validation error.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kDataError = 2;

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ngraph::cli
