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
#include <algorithm>
#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "logvalue.hpp"
#include "specfun.hpp"

namespace tdirac {

inline constexpr double kMaxCondition = 1e12;

struct MicroParams {
    int nu = 0;
    std::vector<double> mu;

    int n_flavors() const { return static_cast<int>(mu.size()); }

    void validate() const {
        if (nu < 0 || nu > 16) throw DomainError("MicroParams: nu must lie in [0, 16]");
        if (mu.size() > 8) throw DomainError("MicroParams: at most 8 flavours");
        for (std::size_t i = 0; i < mu.size(); ++i) {
            if (!(mu[i] > 0.0) || !std::isfinite(mu[i])) throw DomainError("MicroParams: masses must be positive");
            for (std::size_t j = 0; j < i; ++j)
                if (std::fabs(mu[i] - mu[j]) < 1e-8 * std::max(mu[i], mu[j]))
                    throw DomainError("MicroParams: masses must be pairwise distinct");
        }
    }
};

namespace detail {

inline void check_positive(double v, const char* who) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(who) + ": arguments must be positive");
}

inline void check_condition(const DetResult& d, const char* who) {
    if (!(d.condition <= kMaxCondition))
        throw ConditioningError(std::string(who) + ": determinant condition estimate above 1e12", d.condition);
}

// int_0^1 J_nu(a sqrt(tau)) J_nu(b sqrt(tau)) dtau
inline double unit_jj(int nu, double a, double b) {
    if (std::fabs(a - b) <= 1e-6 * std::max({a, b, 1e-300})) {
        double m = 0.5 * (a + b);
        if (m == 0.0) return nu == 0 ? 1.0 : 0.0;
        double j = bessel_j(nu, m);
        return j * j - bessel_j_signed(nu - 1, m) * bessel_j(nu + 1, m);
    }
    return 2.0 * (a * bessel_j(nu + 1, a) * bessel_j(nu, b) - b * bessel_j(nu + 1, b) * bessel_j(nu, a)) /
           (a * a - b * b);
}

// int_0^1 I_nu(p sqrt(tau)) J_nu(q sqrt(tau)) dtau, p > 0.
inline LogValue unit_ij_log(int nu, double p, double q) {
    LogValue inu = bessel_i_log(nu, p);
    double ratio = std::exp(bessel_i_log(nu + 1, p).log_mag - inu.log_mag);
    double rest = 2.0 * (p * ratio * bessel_j(nu, q) + q * bessel_j(nu + 1, q)) / (p * p + q * q);
    return inu * LogValue::from(rest);
}

}  // namespace detail

// tbar int_0^1 J_nu(sqrt(4 eta tbar tau)) J_nu(sqrt(4 rho tbar tau)) dtau, closed form.
inline double bessel_integral_jj(int nu, double rho, double eta, double tbar) {
    detail::check_order(nu, "bessel_integral_jj");
    if (rho < 0 || eta < 0 || !(tbar > 0)) throw DomainError("bessel_integral_jj: need rho, eta >= 0 and tbar > 0");
    return tbar * detail::unit_jj(nu, std::sqrt(4.0 * eta * tbar), std::sqrt(4.0 * rho * tbar));
}

// tbar int_0^1 I_nu(sqrt(4 mu^2 tbar tau)) J_nu(sqrt(4 eta tbar tau)) dtau, closed form.
inline double bessel_integral_ij(int nu, double mu, double eta, double tbar) {
    detail::check_order(nu, "bessel_integral_ij");
    if (!(mu > 0) || eta < 0 || !(tbar > 0)) throw DomainError("bessel_integral_ij: need mu > 0, eta >= 0, tbar > 0");
    return tbar * detail::unit_ij_log(nu, 2.0 * mu * std::sqrt(tbar), std::sqrt(4.0 * eta * tbar)).value();
}

// [z J_{nu+1}(z) J_nu(e) - e J_{nu+1}(e) J_nu(z)] / (z^2 - e^2), the Bessel
// kernel without the sqrt(z e) factor. This is the entry used inside determinants.
inline double bessel_kernel_bare(int nu, double z, double e) {
    if (std::fabs(z - e) <= 1e-6 * std::max(z, e)) {
        double m = 0.5 * (z + e);
        double j = bessel_j(nu, m);
        return 0.5 * (j * j - bessel_j_signed(nu - 1, m) * bessel_j(nu + 1, m));
    }
    return (z * bessel_j(nu + 1, z) * bessel_j(nu, e) - e * bessel_j(nu + 1, e) * bessel_j(nu, z)) / (z * z - e * e);
}

inline double b_jj(int nu, double zeta, double eta) {
    detail::check_positive(zeta, "b_jj");
    detail::check_positive(eta, "b_jj");
    return std::sqrt(zeta * eta) * bessel_kernel_bare(nu, zeta, eta);
}

// e^{-mu} b_ij(mu, zeta); mass columns carry a common e^{-mu} so that heavy
// flavours (mu ~ 1e3) stay representable.
inline double b_ij_scaled(int nu, double mu, double zeta) {
    double r = std::exp(bessel_i_log(nu + 1, mu).log_mag - mu);
    double i0 = bessel_i_scaled(nu, mu);
    return (mu * r * bessel_j(nu, zeta) + zeta * bessel_j(nu + 1, zeta) * i0) / (mu * mu + zeta * zeta);
}

inline double b_ij(int nu, double mu, double zeta) {
    detail::check_positive(mu, "b_ij");
    detail::check_positive(zeta, "b_ij");
    double v = b_ij_scaled(nu, mu, zeta);
    return v * std::exp(mu);
}

namespace detail {

// e^{-mu} (-mu)^k I_{nu+k}(mu)
inline double mass_entry(int nu, int k, double mu) {
    double v = bessel_i_scaled(nu + k, mu) * std::pow(mu, k);
    return (k % 2 == 0) ? v : -v;
}

inline double power_j(int nu, int k, double z) {
    // z^k J_{nu+k}(z), k may be -1
    return std::pow(z, k) * bessel_j_signed(nu + k, z);
}

// det[(-mu_f)^{g-1} I_{nu+g-1}(mu_f)] with each column scaled by e^{-mu_f}.
inline DetResult mass_denominator(const MicroParams& m) {
    const int nf = m.n_flavors();
    Eigen::MatrixXd d(nf, nf);
    for (int g = 0; g < nf; ++g)
        for (int f = 0; f < nf; ++f) d(g, f) = mass_entry(m.nu, g, m.mu[f]);
    return log_det(d);
}

}  // namespace detail

inline double kernel_zero_temp(const MicroParams& m, double zeta, double eta) {
    m.validate();
    detail::check_positive(zeta, "kernel_zero_temp");
    detail::check_positive(eta, "kernel_zero_temp");
    if (std::fabs(zeta - eta) < 1e-6 * zeta)
        throw DomainError("kernel_zero_temp: near-diagonal arguments, use density()");
    const int nf = m.n_flavors(), n = nf + 2;
    Eigen::MatrixXd a(n, n);
    for (int k = 0; k < n; ++k) {
        a(0, k) = detail::power_j(m.nu, k, zeta);
        a(1, k) = detail::power_j(m.nu, k, eta);
        for (int f = 0; f < nf; ++f) a(2 + f, k) = detail::mass_entry(m.nu, k, m.mu[f]);
    }
    DetResult num = log_det(a), den = detail::mass_denominator(m);
    detail::check_condition(num, "kernel_zero_temp");
    detail::check_condition(den, "kernel_zero_temp");
    LogValue v = num.det / den.det;
    v *= LogValue::from(std::sqrt(zeta * eta) / (eta * eta - zeta * zeta));
    for (double mu : m.mu) v /= LogValue::from(std::sqrt((zeta * zeta + mu * mu) * (eta * eta + mu * mu)));
    return v.value();
}

inline double density(const MicroParams& m, double zeta) {
    m.validate();
    detail::check_positive(zeta, "density");
    const int nf = m.n_flavors(), n = nf + 2;
    Eigen::MatrixXd a(n, n);
    for (int k = 0; k < n; ++k) {
        a(0, k) = detail::power_j(m.nu, k - 1, zeta);
        a(1, k) = detail::power_j(m.nu, k, zeta);
        for (int f = 0; f < nf; ++f) a(2 + f, k) = detail::mass_entry(m.nu, k, m.mu[f]);
    }
    DetResult num = log_det(a), den = detail::mass_denominator(m);
    detail::check_condition(num, "density");
    detail::check_condition(den, "density");
    LogValue v = num.det / den.det;
    v *= LogValue::from(-0.5 * zeta);
    for (double mu : m.mu) v /= LogValue::from(zeta * zeta + mu * mu);
    return v.value();
}

// Unquenched limiting kernel from the Bessel-I/J block determinant. The
// returned value carries the cocycle prod_f sqrt((eta^2+mu^2)/(zeta^2+mu^2)),
// which makes it coincide pointwise with kernel_zero_temp.
inline double kernel_unquenched(const MicroParams& m, double zeta, double eta) {
    m.validate();
    detail::check_positive(zeta, "kernel_unquenched");
    detail::check_positive(eta, "kernel_unquenched");
    const int nf = m.n_flavors(), n = nf + 1;
    Eigen::MatrixXd a(n, n);
    a(0, 0) = bessel_kernel_bare(m.nu, zeta, eta);
    for (int f = 0; f < nf; ++f) a(0, 1 + f) = b_ij_scaled(m.nu, m.mu[f], eta);
    for (int j = 0; j < nf; ++j) {
        a(1 + j, 0) = detail::power_j(m.nu, j, zeta);
        for (int f = 0; f < nf; ++f) a(1 + j, 1 + f) = detail::mass_entry(m.nu, j, m.mu[f]);
    }
    DetResult num = log_det(a), den = detail::mass_denominator(m);
    detail::check_condition(num, "kernel_unquenched");
    detail::check_condition(den, "kernel_unquenched");
    LogValue v = num.det / den.det;
    double pre = std::sqrt(zeta * eta);
    for (double mu : m.mu) pre *= std::sqrt((eta * eta + mu * mu) / (zeta * zeta + mu * mu));
    return (v * LogValue::from(pre)).value();
}

namespace detail {

using ld = long double;

// I_{nu+k}(mu) stays inside the long double range up to about this mass.
constexpr double kMaxLongDoubleMass = 5000.0;

inline ld j_ld(int n, ld z) {
    ld v = boost::math::cyl_bessel_j(std::abs(n), z);
    return (n < 0 && n % 2 != 0) ? -v : v;
}

inline ld bare_ld(int nu, ld z, ld e) {
    if (std::fabs(z - e) <= 1e-7L * std::max(z, e)) {
        ld mid = 0.5L * (z + e), j = j_ld(nu, mid);
        return 0.5L * (j * j - j_ld(nu - 1, mid) * j_ld(nu + 1, mid));
    }
    return (z * j_ld(nu + 1, z) * j_ld(nu, e) - e * j_ld(nu + 1, e) * j_ld(nu, z)) / (z * z - e * e);
}

// det(B - P M^{-1} Q) in long double; cond receives the condition estimates.
inline ld schur_det_ld(const MicroParams& m, const std::vector<double>& zs, DetResult& cond) {
    using Mat = Eigen::Matrix<ld, Eigen::Dynamic, Eigen::Dynamic>;
    const int k = static_cast<int>(zs.size()), nf = m.n_flavors();
    Mat b(k, k), p(k, nf), q(nf, k), mm(nf, nf);
    for (int r = 0; r < k; ++r) {
        for (int c = 0; c < k; ++c) b(r, c) = bare_ld(m.nu, zs[r], zs[c]);
        for (int j = 0; j < nf; ++j) p(r, j) = std::pow(ld(zs[r]), j) * j_ld(m.nu + j, zs[r]);
    }
    for (int f = 0; f < nf; ++f) {
        const ld mu = m.mu[f], i0 = boost::math::cyl_bessel_i(m.nu, mu), i1 = boost::math::cyl_bessel_i(m.nu + 1, mu);
        for (int c = 0; c < k; ++c) {
            const ld z = zs[c];
            q(f, c) = (mu * i1 * j_ld(m.nu, z) + z * j_ld(m.nu + 1, z) * i0) / (mu * mu + z * z);
        }
        for (int j = 0; j < nf; ++j) mm(f, j) = std::pow(-mu, j) * boost::math::cyl_bessel_i(m.nu + j, mu);
    }
    if (nf > 0) {
        check_condition(mass_denominator(m), "rho_k");
        b -= p * Eigen::FullPivLU<Mat>(mm).solve(q);
    }
    cond = log_det(b.cast<double>());
    return k == 1 ? b(0, 0) : Eigen::FullPivLU<Mat>(b).determinant();
}

// Same reduction in double with e^{-mu}-scaled mass rows, for very heavy flavours.
inline DetResult schur_det_scaled(const MicroParams& m, const std::vector<double>& zs) {
    const int k = static_cast<int>(zs.size()), nf = m.n_flavors();
    Eigen::MatrixXd b(k, k), p(k, nf), q(nf, k), mm(nf, nf);
    for (int r = 0; r < k; ++r) {
        for (int c = 0; c < k; ++c) b(r, c) = bessel_kernel_bare(m.nu, zs[r], zs[c]);
        for (int j = 0; j < nf; ++j) p(r, j) = power_j(m.nu, j, zs[r]);
    }
    for (int f = 0; f < nf; ++f) {
        for (int c = 0; c < k; ++c) q(f, c) = b_ij_scaled(m.nu, m.mu[f], zs[c]);
        for (int j = 0; j < nf; ++j) mm(f, j) = mass_entry(m.nu, j, m.mu[f]);
    }
    if (nf > 0) {
        check_condition(mass_denominator(m), "rho_k");
        b -= p * Eigen::FullPivLU<Eigen::MatrixXd>(mm).solve(q);
    }
    return log_det(b);
}

}  // namespace detail

inline double rho_k(const MicroParams& m, const std::vector<double>& zs) {
    m.validate();
    const int k = static_cast<int>(zs.size());
    if (k < 1 || k > 4) throw DomainError("rho_k: need 1 <= k <= 4");
    for (double z : zs) detail::check_positive(z, "rho_k");
    // repeated points give two equal rows
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < r; ++c)
            if (zs[r] == zs[c]) return 0.0;
    // Block form [[B, P], [Q, M]] with M the transposed mass denominator, so
    // the ratio is det(B - P M^{-1} Q). The Schur entries cancel by ~1e2 and
    // the k x k determinant near the hard edge by up to ~1e6 more, so the
    // block matrix is built and reduced in long double.
    DetResult num;
    LogValue v;
    if (std::all_of(m.mu.begin(), m.mu.end(), [](double mu) { return mu <= detail::kMaxLongDoubleMass; })) {
        const long double d = detail::schur_det_ld(m, zs, num);
        detail::check_condition(num, "rho_k");
        v = LogValue::from(static_cast<double>(d));
    } else {
        num = detail::schur_det_scaled(m, zs);
        detail::check_condition(num, "rho_k");
        v = num.det;
    }
    for (double z : zs) v *= LogValue::from(z);
    return v.value();
}

// ---------------------------------------------------------------------------
// Finite-volume partition functions with real and imaginary masses.

enum class ArgKind { Real, Imag };

// A flavour argument of Z: a real mass mu, or an imaginary mass i*zeta. A
// derivative column must directly follow its base column (doubled argument).
struct FlavourArg {
    double value = 0.0;
    ArgKind kind = ArgKind::Real;
    bool derivative = false;
};

struct PartitionValue {
    LogValue real_factor;  // the value is real_factor * i^{i_power}
    int i_power = 0;
    double condition = 1.0;
};

namespace detail {

// Column entry j = 1..n. Real columns are scaled by e^{-mu}; imaginary columns
// have their common factor i^nu removed.
inline double partition_entry(int nu, int j, const FlavourArg& a) {
    const int n = nu + j - 1;
    if (a.kind == ArgKind::Real) {
        const double mu = a.value;
        if (!a.derivative) return std::pow(mu, j - 1) * bessel_i_scaled(n, mu);
        return std::pow(mu, j - 3) * ((nu + 2.0 * j - 2.0) * bessel_i_scaled(n, mu) + mu * bessel_i_scaled(n + 1, mu)) / 2.0;
    }
    const double z = a.value;
    if (!a.derivative) return ((j - 1) % 2 == 0 ? 1.0 : -1.0) * std::pow(z, j - 1) * bessel_j(n, z);
    return (j % 2 == 0 ? 1.0 : -1.0) * std::pow(z, j - 3) *
           ((nu + 2.0 * j - 2.0) * bessel_j(n, z) - z * bessel_j(n + 1, z)) / 2.0;
}

inline double squared_arg(const FlavourArg& a) {
    return a.kind == ArgKind::Real ? a.value * a.value : -a.value * a.value;
}

}  // namespace detail

// det[M^{j-1} I_{nu+j-1}(M_f)] / Delta({M^2}), with confluent columns for
// doubled arguments. Imaginary masses use I_n(i z) = i^n J_n(z).
inline PartitionValue partition_general(int nu, const std::vector<FlavourArg>& args) {
    const int n = static_cast<int>(args.size());
    PartitionValue out;
    out.real_factor = LogValue::one();
    if (n == 0) return out;
    Eigen::MatrixXd a(n, n);
    double log_shift = 0.0;
    int n_imag = 0;
    for (int f = 0; f < n; ++f) {
        const auto& arg = args[f];
        if (!(arg.value > 0.0)) throw DomainError("partition: flavour arguments must be positive");
        if (arg.derivative) {
            if (f == 0 || args[f - 1].derivative || args[f - 1].kind != arg.kind || args[f - 1].value != arg.value)
                throw DomainError("partition: derivative column must follow its base column");
        }
        for (int j = 1; j <= n; ++j) a(j - 1, f) = detail::partition_entry(nu, j, arg);
        if (arg.kind == ArgKind::Real)
            log_shift += arg.value;
        else
            ++n_imag;
    }
    LogValue vdm = LogValue::one();
    for (int b = 0; b < n; ++b)
        for (int c = 0; c < b; ++c) {
            if (args[b].derivative && c == b - 1) continue;
            vdm *= LogValue::from(detail::squared_arg(args[b]) - detail::squared_arg(args[c]));
        }
    if (vdm.is_zero()) throw DomainError("partition: coinciding flavour arguments without derivative column");
    DetResult d = log_det(a);
    out.condition = d.condition;
    out.real_factor = d.det / vdm * LogValue::from_log(log_shift);
    out.i_power = (nu * n_imag) % 4;
    return out;
}

// Resolves the power of i; throws if the value is not real.
inline LogValue resolve_real(const PartitionValue& p, const char* who) {
    if (p.i_power % 2 != 0)
        throw ConsistencyError(std::string(who) + ": imaginary-mass bookkeeping left an imaginary result");
    if (!(p.condition <= kMaxCondition))
        throw ConditioningError(std::string(who) + ": determinant condition estimate above 1e12", p.condition);
    return p.i_power == 2 ? -p.real_factor : p.real_factor;
}

inline std::vector<FlavourArg> real_args(const MicroParams& m) {
    std::vector<FlavourArg> v;
    for (double mu : m.mu) v.push_back({mu, ArgKind::Real, false});
    return v;
}

inline LogValue partition_micro(const MicroParams& m) {
    m.validate();
    return resolve_real(partition_general(m.nu, real_args(m)), "partition_micro");
}

inline double rho_k_via_partitions(const MicroParams& m, const std::vector<double>& zs) {
    m.validate();
    const int k = static_cast<int>(zs.size());
    if (k < 1 || k > 3) throw DomainError("rho_k_via_partitions: need 1 <= k <= 3");
    if (m.n_flavors() + 2 * k > 8) throw DomainError("rho_k_via_partitions: N_f + 2k must not exceed 8");
    for (double z : zs) detail::check_positive(z, "rho_k_via_partitions");
    auto args = real_args(m);
    for (double z : zs) {
        args.push_back({z, ArgKind::Imag, false});
        args.push_back({z, ArgKind::Imag, true});
    }
    LogValue v = resolve_real(partition_general(m.nu, args), "rho_k_via_partitions") / partition_micro(m);
    if ((k * m.nu) % 2 != 0) v = -v;
    for (int a = 0; a < k; ++a) {
        double z = zs[a];
        double f = z;
        for (double mu : m.mu) f *= z * z + mu * mu;
        v *= LogValue::from(f);
        for (int b = 0; b < a; ++b) v *= LogValue::from(zs[a] * zs[a] - zs[b] * zs[b]).pow(2.0);
    }
    return v.value();
}

// flip_sign is a negative-control hook for the verification suite.
inline double kernel_via_partitions(const MicroParams& m, double zeta, double eta, bool flip_sign = false) {
    m.validate();
    detail::check_positive(zeta, "kernel_via_partitions");
    detail::check_positive(eta, "kernel_via_partitions");
    auto args = real_args(m);
    if (std::fabs(zeta - eta) <= 1e-6 * std::max(1.0, zeta)) {
        // confluent pair at the midpoint
        const double mid = 0.5 * (zeta + eta);
        args.push_back({mid, ArgKind::Imag, false});
        args.push_back({mid, ArgKind::Imag, true});
    } else {
        args.push_back({zeta, ArgKind::Imag, false});
        args.push_back({eta, ArgKind::Imag, false});
    }
    LogValue v = resolve_real(partition_general(m.nu, args), "kernel_via_partitions") / partition_micro(m);
    double pre = std::sqrt(zeta * eta);
    for (double mu : m.mu) pre *= std::sqrt((zeta * zeta + mu * mu) * (eta * eta + mu * mu));
    if (m.nu % 2 != 0) pre = -pre;
    if (flip_sign) pre = -pre;
    return (v * LogValue::from(pre)).value();
}

struct CciResult {
    double lhs = 0.0;
    double rhs = 0.0;
};

inline CciResult consistency_condition_check(const MicroParams& m, const std::vector<double>& xis,
                                             const std::vector<double>& etas) {
    m.validate();
    const int k = static_cast<int>(xis.size());
    if (k < 1 || k > 3 || etas.size() != xis.size()) throw DomainError("consistency_condition_check: need 1 <= k <= 3 pairs");
    if (m.n_flavors() + 2 * k > 8) throw DomainError("consistency_condition_check: N_f + 2k must not exceed 8");
    LogValue z0 = partition_micro(m);
    auto args = real_args(m);
    for (double x : xis) args.push_back({x, ArgKind::Imag, false});
    for (double e : etas) args.push_back({e, ArgKind::Imag, false});
    LogValue lhs = resolve_real(partition_general(m.nu, args), "consistency_condition_check") / z0;
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < a; ++b) {
            lhs *= LogValue::from(xis[a] * xis[a] - xis[b] * xis[b]);
            lhs *= LogValue::from(etas[a] * etas[a] - etas[b] * etas[b]);
        }
    Eigen::MatrixXd r(k, k);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            auto pa = real_args(m);
            pa.push_back({xis[a], ArgKind::Imag, false});
            pa.push_back({etas[b], ArgKind::Imag, false});
            r(a, b) = (resolve_real(partition_general(m.nu, pa), "consistency_condition_check") / z0).value();
        }
    DetResult d = log_det(r);
    return {lhs.value(), d.det.value()};
}

}  // namespace tdirac
