// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "aitd/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return aitd::cli::run(args, std::cout, std::cerr);
}
