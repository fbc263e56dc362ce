#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace transdet::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kMissingInput = 3,
  kMalformedData = 4,
  kUnknownExperiment = 5,
  kGradcheckFailure = 6,
};

/// Runs one command line. `args` excludes the program name. Diagnostics go
/// to `err`, reports to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace transdet::cli
