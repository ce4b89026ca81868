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
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <vector>

#include "errors.hpp"
#include "logvalue.hpp"

namespace tdirac {

struct QuadResult {
    double value = 0.0;
    double l1 = 0.0;  // integral of |f|, used for cancellation estimates
};

namespace detail {

struct GkPanel {
    double v = 0.0, e = 0.0, l1 = 0.0;
};

template <class F>
GkPanel gk_panel(F& f, double a, double b) {
    GkPanel p;
    p.v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 0, 0.0, &p.e, &p.l1);
    return p;
}

// Bisect until each panel's error estimate is below tol times its L1 norm.
// Boost's own recursion measures tol against the signed estimate, which never
// terminates on integrands that cancel. Refinement also stops at the noise
// floor: halving no longer helps and the error is already below 1e-8 L1.
// budget bounds the number of splits per call, so pure noise cannot recurse
// through all 2^depth panels.
template <class F>
void gk_bisect(F& f, double a, double b, const GkPanel& p, double tol, unsigned depth, long& budget, GkPanel& acc) {
    if (depth == 0 || budget <= 0 || p.e <= tol * p.l1 || !std::isfinite(p.v)) {
        acc.v += p.v;
        acc.e += p.e;
        acc.l1 += p.l1;
        return;
    }
    --budget;
    const double m = 0.5 * (a + b);
    GkPanel lp = gk_panel(f, a, m), rp = gk_panel(f, m, b);
    if (lp.e + rp.e >= 0.7 * p.e && p.e <= 1e-8 * p.l1) {
        acc.v += lp.v + rp.v;
        acc.e += lp.e + rp.e;
        acc.l1 += lp.l1 + rp.l1;
        return;
    }
    gk_bisect(f, a, m, lp, tol, depth - 1, budget, acc);
    gk_bisect(f, m, b, rp, tol, depth - 1, budget, acc);
}

}  // namespace detail

// Adaptive Gauss-Kronrod (31 points) on a finite panel. Refinement stops when
// the error estimate drops below rel_tol * L1 (or hits the noise floor).
template <class F>
QuadResult integrate_interval(F&& f, double a, double b, double rel_tol = 1e-12, unsigned max_depth = 18,
                              long max_splits = 500) {
    if (!(b > a)) return {};
    detail::GkPanel acc;
    long budget = max_splits;
    detail::gk_bisect(f, a, b, detail::gk_panel(f, a, b), std::max(rel_tol, 1e-15), max_depth, budget, acc);
    const double v = acc.v, err = acc.e, l1 = acc.l1;
    if (!std::isfinite(v)) throw IntegrationFailure("integrate_interval: non-finite integrand", v);
    if (err > 1e-6 * l1 && err > 1e-300) throw IntegrationFailure("integrate_interval: panel did not converge", v);
    return {v, l1};
}

struct HalfLineOptions {
    double rel_tol = 1e-12;
    double abs_tol = 0.0;
    double decay_rate = 1.0;  // |f(t)| <= M exp(-decay_rate t / 2) beyond onset
    double onset = 0.0;       // [0, onset] is integrated panel by panel before doubling starts
    int onset_panels = 1;
    int max_doublings = 60;
};

// Composite adaptive panels on [0, onset], then panels [T, T + W] with W
// doubling, until a panel contributes less than 0.1 (rel_tol |total| + abs_tol).
template <class F>
QuadResult integrate_halfline(F&& f, const HalfLineOptions& o = {}) {
    if (!(o.decay_rate > 0.0)) throw DomainError("integrate_halfline: decay_rate must be positive");
    QuadResult total;
    double T = 0.0;
    if (o.onset > 0.0) {
        const int n = std::max(1, o.onset_panels);
        for (int i = 0; i < n; ++i) {
            double a = o.onset * i / n, b = o.onset * (i + 1) / n;
            QuadResult r = integrate_interval(f, a, b, o.rel_tol);
            total.value += r.value;
            total.l1 += r.l1;
        }
        T = o.onset;
    }
    double width = std::max(o.onset, 2.0 / o.decay_rate);
    for (int k = 0; k < o.max_doublings; ++k) {
        QuadResult r = integrate_interval(f, T, T + width, o.rel_tol);
        total.value += r.value;
        total.l1 += r.l1;
        if (r.l1 <= 0.1 * (o.rel_tol * std::fabs(total.value) + o.abs_tol)) return total;
        T += width;
        width *= 2.0;
    }
    throw IntegrationFailure("integrate_halfline: tail did not decay after 60 doublings", total.value);
}

struct ResidueSumResult {
    double value = 0.0;
    double cancellation = 1.0;  // sum |term| / |sum|
};

struct ResidueOptions {
    // Reject when cancellation * eps exceeds this. Infinity disables the guard.
    double max_relative_error = 1e-6;
};

// (1/2 pi i) \oint du f(u) / prod_n (a_n - u) around all a_n, as
// sum_k -f(a_k) / prod_{m != k} (a_m - a_k). f returns a LogValue.
template <class F>
ResidueSumResult residue_sum(const std::vector<double>& a, F&& f, const ResidueOptions& opt = {}) {
    const std::size_t n = a.size();
    if (n == 0) throw DomainError("residue_sum: empty spectrum");
    std::vector<LogValue> terms(n);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        LogValue den = LogValue::one();
        for (std::size_t m = 0; m < n; ++m) {
            if (m == k) continue;
            double d = a[m] - a[k];
            if (d == 0.0) throw DomainError("residue_sum: spectrum entries must be distinct");
            den *= LogValue::from(d);
        }
        LogValue fk = f(a[k]);
        if (!std::isfinite(fk.log_mag) && !fk.is_zero()) throw DomainError("residue_sum: numerator not finite");
        terms[k] = -(fk / den);
        if (!terms[k].is_zero()) top = std::max(top, terms[k].log_mag);
    }
    ResidueSumResult out;
    if (top == -std::numeric_limits<double>::infinity()) return out;

    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = terms[k].is_zero() ? 0.0 : terms[k].sign * std::exp(terms[k].log_mag - top);
    std::sort(v.begin(), v.end(), [](double x, double y) { return std::fabs(x) > std::fabs(y); });
    double sum = 0.0, comp = 0.0, abs_sum = 0.0;
    for (double t : v) {
        double yk = t - comp;
        double s = sum + yk;
        comp = (s - sum) - yk;
        sum = s;
        abs_sum += std::fabs(t);
    }
    const double eps = std::numeric_limits<double>::epsilon();
    out.cancellation = abs_sum / std::max(std::fabs(sum), eps * abs_sum);
    out.value = sum * std::exp(top);
    if (!std::isfinite(out.value)) throw DomainError("residue_sum: result overflows double");
    if (out.cancellation * eps > opt.max_relative_error)
        throw ConditioningError("residue_sum: ill-conditioned spectrum (cancellation too large)", out.cancellation);
    return out;
}

// Trapezoidal rule on an ellipse around the spectrum with excluded_point kept
// outside. f maps complex u to complex f(u). Returns the real part.
template <class F>
double contour_quadrature(const std::vector<double>& a, double excluded_point, F&& f, int nodes = 256) {
    if (a.empty()) throw DomainError("contour_quadrature: empty spectrum");
    if (!(excluded_point < 0.0)) throw DomainError("contour_quadrature: excluded point must be negative");
    if (nodes < 64) throw DomainError("contour_quadrature: need at least 64 nodes");
    auto [lo_it, hi_it] = std::minmax_element(a.begin(), a.end());
    const double lo = *lo_it, hi = *hi_it;
    const double spread = hi - lo;
    const double scale = spread > 0.0 ? spread : std::fabs(hi);
    const double c0 = 0.5 * (lo + hi);
    const double half = 0.5 * spread;
    const double clear = 0.25 * scale;
    double alpha = std::min(half + clear, (c0 - excluded_point) / 1.25);
    if (alpha <= half + 0.05 * scale)
        throw GeometryError("contour_quadrature: excluded point too close to the spectrum for an enclosing ellipse");
    const double beta = half + clear;

    using cd = std::complex<double>;
    cd acc = 0.0;
    for (int j = 0; j < nodes; ++j) {
        double th = 2.0 * M_PI * j / nodes;
        cd u(c0 + alpha * std::cos(th), beta * std::sin(th));
        cd du(-alpha * std::sin(th), beta * std::cos(th));
        cd den = 1.0;
        for (double ak : a) den *= (ak - u);
        acc += f(u) * du / den;
    }
    cd r = acc / (cd(0.0, 1.0) * double(nodes));
    return r.real();
}

}  // namespace tdirac
