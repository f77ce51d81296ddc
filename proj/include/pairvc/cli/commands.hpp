#pragma once

namespace pairvc::cli {

// Dispatches the subcommands (synth-pairs, train, convert, evaluate,
// inspect-alignment, validate-manifest). Returns the process exit code:
// 0 success, 2 missing config, 1 any other error (single line on stderr).
int run_cli(int argc, char** argv);

}  // namespace pairvc::cli
