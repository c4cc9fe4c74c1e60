#pragma once

#include <iosfwd>

namespace ccseg::cli {

enum ExitCode { kOk = 0, kNotFound = 1, kUsage = 2, kNetwork = 3, kIntegrity = 4 };

/// Entry point behind the ccseg executable; streams are injectable for tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, std::istream& in);

}  // namespace ccseg::cli
