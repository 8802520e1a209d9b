// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace vtcas::cli {

enum ExitCode : int { kOk = 0, kFailed = 1, kUsage = 2 };

struct Environment {
  /// Value of VTCAS_SEED, if set.
  std::optional<std::string> seed;
};

Environment process_environment();

/// Runs one command line (without the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Environment& env = {});

}  // namespace vtcas::cli
