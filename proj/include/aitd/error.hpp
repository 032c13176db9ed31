// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace aitd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes. The message names both operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid model or run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input data (corpus lines, checkpoint bytes, report files).
class FormatError : public Error {
public:
    using Error::Error;
};

} // namespace aitd
