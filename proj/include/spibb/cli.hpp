#pragma once

#include <iosfwd>

namespace spibb::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kOk = 0,
    kUsage = 2,     // bad flags or invalid input
    kIo = 3,        // unreadable input or unwritable output
    kInternal = 4,  // an invariant the library guarantees was broken
};

/// Entry point shared by the `spibb` binary and the CLI tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace spibb::cli
