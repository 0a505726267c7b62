#pragma once

namespace loster {

// Parses argv and runs one subcommand (cluster, pretrain, eval, synth,
// gradcheck, bench). Returns the process exit code: 0 success, 1 runtime
// failure, 2 usage error. Never calls std::exit, so it is testable in
// process.
int run_cli(int argc, const char* const* argv);

}  // namespace loster
