// Copyright 2026 The tdirac Authors
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

namespace tdirac {

// Bad argument to a numerical routine (negative z, alpha <= -1, ...).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct UnsupportedOrder : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct IntegrationFailure : std::runtime_error {
    double partial;
    IntegrationFailure(const std::string& what, double partial_value)
        : std::runtime_error(what), partial(partial_value) {}
};

struct ConditioningError : std::runtime_error {
    double estimate;
    ConditioningError(const std::string& what, double cond)
        : std::runtime_error(what), estimate(cond) {}
};

struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Requested quantity needs a chirally broken spectrum (t_c > 1).
struct PhaseError : std::runtime_error {
    double t_c;
    PhaseError(const std::string& what, double tc) : std::runtime_error(what), t_c(tc) {}
};

// Internal cross-check failed, e.g. a result that should be real came out imaginary.
struct ConsistencyError : std::logic_error {
    using std::logic_error::logic_error;
};

// Monte Carlo run rejected, e.g. too many failed decompositions.
struct SamplingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

}  // namespace tdirac
