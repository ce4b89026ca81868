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

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"

namespace tdirac {

// Squared singular values a_n of the deterministic block, microscopic
// convention (entries O(1)). Raw parameters are N * a_n.
struct TemperatureSpectrum {
    std::vector<double> a;

    std::size_t size() const { return a.size(); }

    void validate() const {
        if (a.empty()) throw DomainError("TemperatureSpectrum: empty");
        for (double v : a)
            if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("TemperatureSpectrum: entries must be positive");
    }

    // Needed wherever a formula divides by a_m - a_k.
    void validate_distinct(double rel_gap = 1e-8) const {
        validate();
        std::vector<double> s = a;
        std::sort(s.begin(), s.end());
        for (std::size_t i = 1; i < s.size(); ++i)
            if (s[i] - s[i - 1] < rel_gap * s[i])
                throw DomainError("TemperatureSpectrum: entries must be pairwise distinct (relative gap 1e-8)");
    }
};

enum class Phase { Broken, Critical, Symmetric };

inline const char* to_string(Phase p) {
    switch (p) {
        case Phase::Broken: return "Broken";
        case Phase::Critical: return "Critical";
        case Phase::Symmetric: return "Symmetric";
    }
    return "?";
}

struct PhaseInfo {
    double t_c = 0.0;
    double xi = 0.0;
    Phase phase = Phase::Symmetric;
};

inline constexpr double kCriticalBand = 1e-12;

inline double critical_value(const TemperatureSpectrum& spec) {
    spec.validate();
    double s = 0.0;
    for (double v : spec.a) s += 1.0 / v;
    return s / spec.size();
}

// h(t) = 1 - mean 1/(a_n + t), strictly increasing in t.
inline double saddle_function(const TemperatureSpectrum& spec, double t) {
    double s = 0.0;
    for (double v : spec.a) s += 1.0 / (v + t);
    return 1.0 - s / spec.size();
}

inline PhaseInfo condensate(const TemperatureSpectrum& spec, double tol = 1e-14) {
    if (!(tol >= 1e-15 && tol <= 1e-6)) throw DomainError("condensate: tol must lie in [1e-15, 1e-6]");
    PhaseInfo info;
    info.t_c = critical_value(spec);
    if (std::fabs(info.t_c - 1.0) <= kCriticalBand) {
        info.phase = Phase::Critical;
        return info;
    }
    if (info.t_c < 1.0) {
        info.phase = Phase::Symmetric;
        return info;
    }
    double lo = 0.0, hi = 1.0;
    while (saddle_function(spec, hi) <= 0.0) {
        lo = hi;
        hi *= 2.0;
    }
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < 400; ++it) {
        mid = 0.5 * (lo + hi);
        double h = saddle_function(spec, mid);
        if (std::fabs(h) <= tol && (hi - lo) <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
        if (h == 0.0 || !(mid > lo && mid < hi)) break;
        if (h < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    info.xi = mid;
    info.phase = Phase::Broken;
    return info;
}

}  // namespace tdirac
