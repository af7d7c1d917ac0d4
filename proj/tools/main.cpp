// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "otr/cli.hpp"

int main(int argc, char** argv) {
  return otr::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
