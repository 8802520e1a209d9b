// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "vtcas_cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return vtcas::cli::run(args, std::cout, std::cerr, vtcas::cli::process_environment());
}
