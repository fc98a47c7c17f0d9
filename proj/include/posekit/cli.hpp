#ifndef POSEKIT_CLI_HPP
#define POSEKIT_CLI_HPP

#include <iosfwd>

namespace posekit {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumerical = 3,
};

/// Runs the command-line tool (subcommands generate, train, predict,
/// evaluate, check-grads, topology, experiment) and returns the exit code.
/// Results go to `out`, progress and errors to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace posekit

#endif  // POSEKIT_CLI_HPP
