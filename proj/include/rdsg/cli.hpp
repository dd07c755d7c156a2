#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rdsg {

/// Subcommands run, reference, kl, validate, rates. args excludes the program name.
/// Returns 0 on success, 2 on configuration/usage errors, 1 on numerical failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rdsg
