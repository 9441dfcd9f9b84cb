#ifndef FIGP_CLI_HPP
#define FIGP_CLI_HPP

#include <iosfwd>

namespace figp {

/// Command-line entry point. Returns 0 on success, 1 on an operational failure (the failing
/// stage is named on `err`) and 2 on a usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace figp

#endif  // FIGP_CLI_HPP
