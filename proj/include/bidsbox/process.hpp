#pragma once

#include <chrono>
#include <cstddef>
#include <string>
#include <vector>

namespace bidsbox {

struct ProcessResult {
    int exit_code = -1;      // valid when !timed_out && !launch_failed
    bool timed_out = false;
    bool launch_failed = false; // exec() failed: binary missing or not executable
    std::string output;      // interleaved stdout+stderr, truncated to the cap
    bool truncated = false;
    double wall_s = 0.0;
};

/// Runs argv[0] with the given arguments, capturing stdout and stderr into
/// one buffer capped at `output_cap` bytes. The child runs in its own process
/// group; on timeout the whole group is killed.
ProcessResult run_process(const std::vector<std::string> &argv,
                          std::chrono::milliseconds timeout,
                          std::size_t output_cap = 64 * 1024);

} // namespace bidsbox
