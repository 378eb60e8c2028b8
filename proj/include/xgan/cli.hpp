#pragma once
// Command-line front end: gen-data, train, eval, ablate.
//
// stdout carries the paths of produced artifacts, one per line; stderr
// carries diagnostics. Exit codes are listed in ExitCode.

#include <iosfwd>
#include <string>
#include <vector>

namespace xgan {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitIo = 3,
  kExitNumeric = 4,
  kExitCheckpoint = 5,
  kExitAllCellsFailed = 6,
};

/// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace xgan
