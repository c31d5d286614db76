#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace surrotune::cli {

/// Runs one subcommand (fit | optimize | predict | contour | validate | synth).
/// `args` excludes the program name. A path of "-" reads from `in`. Returns
/// the process exit status; failures print one line `error: <category>: <detail>`
/// to `err`.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace surrotune::cli
