#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace axislab::cli {

/// Runs one axislab invocation. args excludes the program name.
/// Returns 0 on success, 2 on validation or usage errors, 1 on
/// computation errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace axislab::cli
