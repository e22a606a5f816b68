#pragma once

#include <string>
#include <vector>

namespace avq::cli {

// Runs one command line. Exit codes: 0 ok, 1 usage, 2 I/O, 3 numeric failure.
int run(int argc, const char* const* argv);

// Convenience overload for in-process callers; args excludes argv[0].
int run(const std::vector<std::string>& args);

}  // namespace avq::cli
