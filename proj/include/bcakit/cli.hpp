#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bca {

// full command line front end; returns the process exit code.  Streams are
// injected so tests can run the tool in process.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace bca
