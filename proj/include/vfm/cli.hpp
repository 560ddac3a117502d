#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vfm {

/// Runs one subcommand. `args` excludes the program name. Returns 0 on success, 1 on a usage
/// error and 2 when the command itself fails.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int dispatch(int argc, char** argv);

} // namespace vfm
