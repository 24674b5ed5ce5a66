// Copyright (c) 2026 vqvc authors. All Rights Reserved.
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

#ifndef VQVC_COMMON_H_
#define VQVC_COMMON_H_

#include <sstream>
#include <stdexcept>
#include <string>

namespace vqvc {

// Error taxonomy. The CLI maps these onto process exit codes:
// ConfigError -> 2, DataError -> 3, NumericError -> 4, anything else -> 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition or invariant (bad shapes, bad arguments).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed configuration or incompatible run settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing or corrupt files, malformed manifests or dumps.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required (diverged training etc).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace vqvc

#define VQVC_CHECK(cond, msg)                                       \
  do {                                                              \
    if (!(cond)) {                                                  \
      std::ostringstream vqvc_check_ss_;                            \
      vqvc_check_ss_ << "check failed: " << #cond << ": " << msg;   \
      throw ::vqvc::ContractError(vqvc_check_ss_.str());            \
    }                                                               \
  } while (0)

#endif  // VQVC_COMMON_H_
