#pragma once

namespace fedsim {

/// Entry point behind the fedsim binary. Subcommands: run, compare,
/// analyze-variance, plot. Returns 0 on success, 2 on invalid
/// configuration/usage, 1 on runtime failure.
int run_cli(int argc, const char* const* argv);

}  // namespace fedsim
