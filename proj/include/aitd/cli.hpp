// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: prepare | train | eval | predict | sweep.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace aitd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;

inline constexpr int kManifestVersion = 1;

/// `args` excludes the program name. Diagnostics go to `err` as one line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace aitd::cli
