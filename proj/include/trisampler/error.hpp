// Copyright 2026-present the trisampler project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace trisampler {

/// Root of every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A file does not follow its on-disk layout.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A file parsed, but its contents violate a type invariant
/// (duplicate ids, non-finite values, dangling references).
class DataError : public Error {
public:
    using Error::Error;
};

/// A caller broke a precondition (dimension mismatch, zero vector, bad k).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Open/read/write failure on the filesystem.
class IoError : public Error {
public:
    using Error::Error;
};

/// Numerical failure, e.g. training diverged to a non-finite loss.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration document or override.
class ConfigError : public Error {
public:
    using Error::Error;
};

namespace detail {

[[noreturn]] inline void
contract_failure(const std::string& what) {
    throw ContractError(what);
}

}  // namespace detail

#define TRISAMPLER_EXPECT(cond, msg)                     \
    do {                                                  \
        if (!(cond)) {                                    \
            ::trisampler::detail::contract_failure(msg);  \
        }                                                 \
    } while (0)

}  // namespace trisampler
