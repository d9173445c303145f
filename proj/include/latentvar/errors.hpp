// Copyright 2026 The latentvar Authors
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

#ifndef LATENTVAR_ERRORS_HPP
#define LATENTVAR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace latentvar {

/// Raised when a parameter or model violates the regular-case assumptions
/// (boundary mixing ratios, coincident means, singular Fisher information).
class RegularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Not enough points (or grid entries) to produce the requested estimate.
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace latentvar

#endif  // LATENTVAR_ERRORS_HPP
