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

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "logvalue.hpp"

namespace tdirac {

struct DetResult {
    LogValue det;
    double condition = 1.0;  // max|u_ii| / min|u_ii| after balancing
};

// Determinant with row and column equilibration followed by a fully pivoted LU.
// The balancing factors are pulled out in log space, so entries spanning many
// orders of magnitude are fine as long as each row/column is finite.
inline DetResult log_det(Eigen::MatrixXd m) {
    const Eigen::Index n = m.rows();
    DetResult out;
    out.det = LogValue::one();
    if (n == 0) return out;

    double log_scale = 0.0;
    for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double s = m.row(i).cwiseAbs().maxCoeff();
            if (s == 0.0 || !std::isfinite(s)) {
                out.det = LogValue::zero();
                out.condition = std::numeric_limits<double>::infinity();
                return out;
            }
            m.row(i) /= s;
            log_scale += std::log(s);
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            double s = m.col(j).cwiseAbs().maxCoeff();
            m.col(j) /= s;
            log_scale += std::log(s);
        }
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    const auto& u = lu.matrixLU();
    double lmax = 0.0, lmin = std::numeric_limits<double>::infinity();
    double lsum = 0.0;
    int sign = static_cast<int>(lu.permutationP().determinant() * lu.permutationQ().determinant());
    for (Eigen::Index i = 0; i < n; ++i) {
        double d = u(i, i);
        if (d == 0.0) {
            out.det = LogValue::zero();
            out.condition = std::numeric_limits<double>::infinity();
            return out;
        }
        if (d < 0) sign = -sign;
        double a = std::fabs(d);
        lmax = std::max(lmax, a);
        lmin = std::min(lmin, a);
        lsum += std::log(a);
    }
    out.det = LogValue::from_log(lsum + log_scale, sign);
    out.condition = lmax / lmin;
    return out;
}

}  // namespace tdirac
