#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bpe::cli {

// Parses argv-style arguments (program name excluded) and runs the selected
// subcommand. Exit codes: 0 success, 1 validation error, 2 runtime failure.
int dispatch(std::vector<std::string> args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

}  // namespace bpe::cli
