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

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include "errors.hpp"
#include "logvalue.hpp"

namespace tdirac {

struct EvalPolicy {
    double rel_tol = 1e-14;
    int max_terms = 500;

    void validate() const {
        if (!(rel_tol > 0.0 && rel_tol < 1e-6)) throw DomainError("EvalPolicy: rel_tol must lie in (0, 1e-6)");
        if (max_terms < 50) throw DomainError("EvalPolicy: max_terms must be >= 50");
    }
};

inline constexpr int kMaxBesselOrder = 64;
inline constexpr long kMaxLaguerreDegree = 10'000'000;

inline double log_gamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("log_gamma: argument must be positive and finite");
    return boost::math::lgamma(x);
}

namespace detail {

inline void check_order(int order, const char* who) {
    if (order < 0) throw DomainError(std::string(who) + ": negative order");
    if (order > kMaxBesselOrder) throw UnsupportedOrder(std::string(who) + ": order > 64");
}

inline void check_arg(double z, const char* who) {
    if (!std::isfinite(z) || z < 0.0) throw DomainError(std::string(who) + ": argument must be finite and >= 0");
}

// (z/2)^n / n! without overflow for the orders we support.
inline double leading_term(int n, double z) {
    double t = 1.0, h = 0.5 * z;
    for (int k = 1; k <= n; ++k) t *= h / k;
    return t;
}

inline double bessel_j_series(int n, double z, const EvalPolicy& p) {
    const double q = -0.25 * z * z;
    double term = leading_term(n, z);
    double sum = term;
    for (int k = 1; k < p.max_terms; ++k) {
        term *= q / (static_cast<double>(k) * (k + n));
        sum += term;
        if (std::fabs(term) <= 0.1 * p.rel_tol * std::fabs(sum)) return sum;
    }
    throw DomainError("bessel_j: series did not converge within max_terms");
}

// Miller: backward recurrence from a start index well above max(n, z),
// normalized with J_0 + 2 sum J_2k = 1.
inline double bessel_j_miller(int n, double z) {
    const double big = std::max<double>(n, z);
    int m = static_cast<int>(big + 15.0 * std::cbrt(big) + 40.0);
    m += m % 2;
    double fp1 = 0.0, f = 1e-300, fn = 0.0, norm = 0.0;
    for (int k = m; k >= 1; --k) {
        double fm1 = (2.0 * k / z) * f - fp1;
        fp1 = f;
        f = fm1;  // f now holds f_{k-1}
        if (k - 1 == n) fn = f;
        if ((k - 1) % 2 == 0 && k - 1 > 0) norm += 2.0 * f;
        if (std::fabs(f) > 1e250) {
            f *= 1e-250;
            fp1 *= 1e-250;
            fn *= 1e-250;
            norm *= 1e-250;
        }
    }
    norm += f;  // f_0
    return fn / norm;
}

inline double bessel_i_threshold(int n) { return std::max(2000.0, 25.0 * n * n); }

// log I_n(z) from the Hankel expansion; only used far above the series range.
inline double bessel_i_log_asymptotic(int n, double z, const EvalPolicy& p) {
    const double mu = 4.0 * n * n;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < p.max_terms; ++k) {
        double odd = 2.0 * k - 1.0;
        term *= -(mu - odd * odd) / (8.0 * k * z);
        sum += term;
        if (std::fabs(term) <= 0.1 * p.rel_tol * std::fabs(sum)) break;
    }
    return z - 0.5 * std::log(2.0 * M_PI * z) + std::log(sum);
}

// Ascending series summed outward from its largest term, in log-scaled form.
inline double bessel_i_log_series(int n, double z, const EvalPolicy& p) {
    const double q = 0.25 * z * z;
    long kstar = static_cast<long>(std::floor(0.5 * (-n + std::sqrt(double(n) * n + 4.0 * q))));
    if (kstar < 0) kstar = 0;
    // The peak log is a difference of terms of size ~z log z; long double keeps
    // its absolute error near the double rounding of the final result.
    const long double lz = std::log(0.5L * z);
    long double log_peak;
    if (kstar == 0) {
        log_peak = n == 0 ? 0.0L : n * lz - boost::math::lgamma(n + 1.0L);
    } else {
        log_peak = (2.0L * kstar + n) * lz - boost::math::lgamma(kstar + 1.0L) - boost::math::lgamma(kstar + n + 1.0L);
    }
    double sum = 1.0, term = 1.0;
    int used = 1;
    for (long k = kstar + 1;; ++k) {
        term *= q / (static_cast<double>(k) * (k + n));
        sum += term;
        if (++used > p.max_terms) throw DomainError("bessel_i: series exceeded max_terms");
        if (term <= 0.1 * p.rel_tol * sum) break;
    }
    term = 1.0;
    for (long k = kstar; k >= 1; --k) {
        term *= static_cast<double>(k) * (k + n) / q;
        sum += term;
        if (++used > p.max_terms) throw DomainError("bessel_i: series exceeded max_terms");
        if (term <= 0.1 * p.rel_tol * sum) break;
    }
    return static_cast<double>(log_peak + std::log(static_cast<long double>(sum)));
}

}  // namespace detail

inline double bessel_j(int order, double z, const EvalPolicy& policy = {}) {
    detail::check_order(order, "bessel_j");
    detail::check_arg(z, "bessel_j");
    if (z == 0.0) return order == 0 ? 1.0 : 0.0;
    // Series only while its terms decrease from the start; beyond that the
    // alternating sum cancels and the recurrence is the accurate branch.
    if (0.25 * z * z <= order + 1.0) return detail::bessel_j_series(order, z, policy);
    return detail::bessel_j_miller(order, z);
}

inline double bessel_j_signed(int order, double z, const EvalPolicy& policy = {}) {
    if (order < 0) {
        if (-order > kMaxBesselOrder) throw UnsupportedOrder("bessel_j_signed: |order| > 64");
        double v = bessel_j(-order, z, policy);
        return (order % 2 == 0) ? v : -v;
    }
    return bessel_j(order, z, policy);
}

// log I_n(z) with sign (+1, or 0 for I_n(0) with n >= 1). Usable for any z >= 0.
inline LogValue bessel_i_log(int order, double z, const EvalPolicy& policy = {}) {
    detail::check_order(order, "bessel_i");
    detail::check_arg(z, "bessel_i");
    if (z == 0.0) return order == 0 ? LogValue::one() : LogValue::zero();
    if (z > detail::bessel_i_threshold(order))
        return LogValue::from_log(detail::bessel_i_log_asymptotic(order, z, policy));
    return LogValue::from_log(detail::bessel_i_log_series(order, z, policy));
}

// e^{-z} I_n(z).
inline double bessel_i_scaled(int order, double z, const EvalPolicy& policy = {}) {
    LogValue v = bessel_i_log(order, z, policy);
    return v.is_zero() ? 0.0 : std::exp(v.log_mag - z);
}

inline double bessel_i(int order, double z, const EvalPolicy& policy = {}) {
    LogValue v = bessel_i_log(order, z, policy);
    if (v.log_mag > 709.0) throw DomainError("bessel_i: overflow, use bessel_i_log");
    return v.value();
}

// e^{-z} I_n(z) for complex z with Re z >= 0, by series for small |z| and
// backward recurrence normalized with e^z = I_0 + 2 sum I_k otherwise.
inline std::complex<double> bessel_i_scaled(int order, std::complex<double> z) {
    using cd = std::complex<double>;
    detail::check_order(order, "bessel_i");
    const double az = std::abs(z);
    if (az == 0.0) return order == 0 ? cd(1.0) : cd(0.0);
    if (az <= 4.0) {
        cd h = 0.5 * z, q = h * h, term = 1.0;
        for (int k = 1; k <= order; ++k) term *= h / double(k);
        cd sum = term;
        for (int k = 1; k < 200; ++k) {
            term *= q / (double(k) * (k + order));
            sum += term;
            if (std::abs(term) <= 1e-17 * std::abs(sum)) break;
        }
        return sum * std::exp(-z);
    }
    const double big = std::max<double>(order, az);
    int m = static_cast<int>(big + 15.0 * std::cbrt(big) + 40.0);
    cd fp1 = 0.0, f = 1e-300, fn = 0.0, norm = 0.0;
    const cd inv = 2.0 / z;
    for (int k = m; k >= 1; --k) {
        cd fm1 = (double(k) * inv) * f + fp1;
        fp1 = f;
        f = fm1;
        if (k - 1 == order) fn = f;
        if (k - 1 > 0) norm += 2.0 * f;
        if (std::abs(f) > 1e250) {
            f *= 1e-250;
            fp1 *= 1e-250;
            fn *= 1e-250;
            norm *= 1e-250;
        }
    }
    norm += f;
    return fn / norm;
}

// Principal log of phi_nu(w) = sum_k w^k / (k! (k+nu)!), entire in w, so that
// u^{-nu/2} I_nu(2 sqrt(u y)) = y^{nu/2} phi_nu(u y) without branch issues.
inline std::complex<double> log_entire_bessel_i(int nu, std::complex<double> w) {
    using cd = std::complex<double>;
    if (std::abs(w) <= 4.0) {
        cd term = 1.0;
        for (int k = 1; k <= nu; ++k) term /= double(k);
        cd sum = term;
        for (int k = 1; k < 200; ++k) {
            term *= w / (double(k) * (k + nu));
            sum += term;
            if (std::abs(term) <= 1e-17 * std::abs(sum)) break;
        }
        return std::log(sum);
    }
    cd z = 2.0 * std::sqrt(w);
    return z + std::log(bessel_i_scaled(nu, z)) - double(nu) * std::log(0.5 * z);
}

inline double laguerre(long n, double alpha, double x) {
    if (!(alpha > -1.0)) throw DomainError("laguerre: alpha must exceed -1");
    if (n < 0) throw DomainError("laguerre: negative degree");
    if (n > kMaxLaguerreDegree) throw DomainError("laguerre: degree above supported range");
    if (!std::isfinite(x)) throw DomainError("laguerre: non-finite argument");
    if (n == 0) return 1.0;
    // Difference form of the three-term recurrence:
    // (k+1)(L_{k+1} - L_k) = (k+alpha)(L_k - L_{k-1}) - x L_k.
    // Folding x into 2k+1+alpha rounds it away at large k (x ~ z^2/4n).
    double l = 1.0 + alpha - x, d = alpha - x;
    for (long k = 1; k < n; ++k) {
        d = ((k + alpha) * d - x * l) / (k + 1.0);
        l += d;
    }
    return l;
}

// d/dx L_n^alpha(x) = -L_{n-1}^{alpha+1}(x)
inline double laguerre_derivative(long n, double alpha, double x) {
    if (n == 0) return 0.0;
    return -laguerre(n - 1, alpha + 1.0, x);
}

// Monic Laguerre p_n(x) = (-1)^n n! L_n^nu(x), as a LogValue since n! overflows.
inline LogValue monic_laguerre_log(long n, int nu, double x) {
    LogValue v = LogValue::from(laguerre(n, nu, x));
    v *= LogValue::from_log(log_gamma(n + 1.0), n % 2 == 0 ? 1 : -1);
    return v;
}

inline double monic_laguerre(long n, int nu, double x) { return monic_laguerre_log(n, nu, x).value(); }

// h_k = k! Gamma(k + nu + 1), the squared norm of p_k under x^nu e^{-x}.
inline LogValue laguerre_norm(long k, int nu) {
    if (k < 0 || nu < 0) throw DomainError("laguerre_norm: negative index");
    return LogValue::from_log(log_gamma(k + 1.0) + log_gamma(k + nu + 1.0), 1);
}

}  // namespace tdirac
