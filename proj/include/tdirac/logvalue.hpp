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

#include <cmath>
#include <limits>
#include <utility>

namespace tdirac {

// Signed number stored as (log|v|, sign). Zero is (-inf, 0).
struct LogValue {
    double log_mag = -std::numeric_limits<double>::infinity();
    int sign = 0;

    static LogValue zero() { return {}; }
    static LogValue one() { return {0.0, 1}; }

    static LogValue from_log(double log_mag, int sign = 1) {
        if (sign == 0 || log_mag == -std::numeric_limits<double>::infinity()) return {};
        return {log_mag, sign > 0 ? 1 : -1};
    }

    static LogValue from(double v) {
        if (v == 0.0) return {};
        return {std::log(std::fabs(v)), v > 0 ? 1 : -1};
    }

    bool is_zero() const { return sign == 0; }

    double value() const { return sign == 0 ? 0.0 : sign * std::exp(log_mag); }

    LogValue operator-() const { return {log_mag, -sign}; }

    LogValue& operator*=(const LogValue& o) {
        if (sign == 0 || o.sign == 0) return *this = {};
        log_mag += o.log_mag;
        sign *= o.sign;
        return *this;
    }

    LogValue& operator/=(const LogValue& o) {
        if (o.sign == 0) {
            log_mag = std::numeric_limits<double>::infinity();
            sign = sign == 0 ? 1 : sign;
            return *this;
        }
        if (sign == 0) return *this;
        log_mag -= o.log_mag;
        sign *= o.sign;
        return *this;
    }

    // Max-subtraction addition. Opposite signs of nearly equal size lose
    // relative precision; callers that care carry their own estimate.
    LogValue& operator+=(const LogValue& o) {
        if (o.sign == 0) return *this;
        if (sign == 0) return *this = o;
        const LogValue& big = log_mag >= o.log_mag ? *this : o;
        const LogValue& small = log_mag >= o.log_mag ? o : *this;
        double r = std::exp(small.log_mag - big.log_mag);
        LogValue out;
        if (big.sign == small.sign) {
            out = {big.log_mag + std::log1p(r), big.sign};
        } else {
            if (r == 1.0) return *this = {};
            out = {big.log_mag + std::log1p(-r), big.sign};
        }
        return *this = out;
    }

    LogValue& operator-=(const LogValue& o) { return *this += -o; }

    // Negative bases need an integer exponent; otherwise the result is NaN.
    LogValue pow(double p) const {
        if (sign == 0) return {};
        if (sign > 0) return {log_mag * p, 1};
        if (p != std::floor(p)) return {std::numeric_limits<double>::quiet_NaN(), 1};
        return {log_mag * p, std::fmod(p, 2.0) == 0.0 ? 1 : -1};
    }
};

inline LogValue operator*(LogValue a, const LogValue& b) { return a *= b; }
inline LogValue operator/(LogValue a, const LogValue& b) { return a /= b; }
inline LogValue operator+(LogValue a, const LogValue& b) { return a += b; }
inline LogValue operator-(LogValue a, const LogValue& b) { return a -= b; }

}  // namespace tdirac
