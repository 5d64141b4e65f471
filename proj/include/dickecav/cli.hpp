// cli.hpp: command-line entry point shared by the executable and the tests

#pragma once

#include <string>
#include <vector>

namespace dickecav::cli {

enum ExitCode : int {
    ok = 0,
    internal_error = 1,
    usage_error = 2,      // unknown subcommand or flag
    invalid_argument = 3, // bad parameters or config
    io_error = 4,
    convergence_error = 5,
    dimension_limit = 6,
    non_unique_steady_state = 7,
    zero_rate = 8,
};

// Runs one subcommand; args excludes the program name. Outputs and manifest.json
// go to --out. Errors are reported on stderr as one JSON object.
int run(const std::vector<std::string>& args);

} // namespace dickecav::cli
