// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace rpgan::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfigError = 2,
  kNumericalError = 3,
  kVerificationFailure = 4,
};

/// Entry point of the rpgan tool; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rpgan::cli
