// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace otr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // training diverged, gradient audit failed
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;

// Runs `otr <args...>` (args excludes the program name). Human-readable output
// goes to `out`; failures print a single `error: <kind>: <message>` line to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace otr::cli
