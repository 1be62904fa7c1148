#pragma once

namespace parabolica::runner {

/// Full CLI entry point (argument parsing, dispatch, exit codes).
int run_cli(int argc, char** argv);

} // namespace parabolica::runner
