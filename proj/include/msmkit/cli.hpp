#pragma once

namespace msmkit {

// Entry point of the msmkit command line tool (subcommands: simulate,
// analyze, generate). Exit codes: 0 success, 1 estimation-level failure,
// 2 usage or configuration failure.
int run_cli(int argc, const char* const* argv);

}  // namespace msmkit
