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
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "logvalue.hpp"
#include "microkernel.hpp"
#include "phase.hpp"
#include "quad.hpp"
#include "specfun.hpp"

namespace tdirac {

// Finite-N model. Masses are raw (same scale as the raw eigenvalues x); the
// temperature spectrum is microscopic, raw parameters are N * a_n.
struct FiniteEnsembleParams {
    int N = 1;
    int nu = 0;
    std::vector<double> masses;
    std::optional<TemperatureSpectrum> temperature;

    int n_flavors() const { return static_cast<int>(masses.size()); }

    void validate() const {
        if (N < 1 || N > 256) throw DomainError("FiniteEnsembleParams: N must lie in [1, 256]");
        if (nu < 0 || nu > 16) throw DomainError("FiniteEnsembleParams: nu must lie in [0, 16]");
        MicroParams{nu, masses}.validate();
        if (temperature) {
            temperature->validate();
            if (static_cast<int>(temperature->size()) != N)
                throw DomainError("FiniteEnsembleParams: temperature spectrum must have N entries");
        }
    }

    std::vector<double> raw_spectrum() const {
        std::vector<double> A;
        if (temperature)
            for (double v : temperature->a) A.push_back(N * v);
        std::sort(A.begin(), A.end());
        return A;
    }
};

// Map between raw finite-N eigenvalues and the microscopic variable zeta.
struct ScalingMap {
    int N = 1;
    double xi = 1.0;

    void validate() const {
        if (!(xi > 0.0)) throw PhaseError("ScalingMap: condensate must be positive (broken phase)", 0.0);
    }
    double x_of(double zeta) const { return zeta * zeta / (4.0 * N * xi); }
    double zeta_of(double x) const { return 2.0 * std::sqrt(N * xi * x); }
    double mass_sq_of(double mu) const { return mu * mu / (4.0 * N * xi); }
    double jacobian(double zeta) const { return 2.0 * zeta / (4.0 * N * xi); }
};

// ---------------------------------------------------------------------------
// Zero temperature.

inline LogValue weight_zero_temp(const FiniteEnsembleParams& p, double x) {
    if (x < 0.0) throw DomainError("weight_zero_temp: x must be >= 0");
    if (x == 0.0 && p.nu > 0) return LogValue::zero();
    double l = -x + (p.nu > 0 ? p.nu * std::log(x) : 0.0);
    for (double m : p.masses) l += std::log(x + m * m);
    return LogValue::from_log(l);
}

namespace detail {

inline bool near_equal(double x, double y) {
    return std::fabs(x - y) <= 1e-6 * std::max({1.0, std::fabs(x), std::fabs(y)});
}

// Christoffel-Darboux kernel sum_{j<N} p_j(x) p_j(y) / h_j for x^nu e^{-x}.
inline double cd_kernel(int N, int nu, double x, double y) {
    const double pre = -std::exp(log_gamma(N + 1.0) - log_gamma(N + static_cast<double>(nu)));
    if (near_equal(x, y)) {
        double m = 0.5 * (x + y);
        return pre * (laguerre_derivative(N, nu, m) * laguerre(N - 1, nu, m) -
                      laguerre(N, nu, m) * laguerre_derivative(N - 1, nu, m));
    }
    return pre * (laguerre(N, nu, x) * laguerre(N - 1, nu, y) - laguerre(N, nu, y) * laguerre(N - 1, nu, x)) / (x - y);
}

inline DetResult laguerre_mass_block(const FiniteEnsembleParams& p) {
    const int nf = p.n_flavors();
    Eigen::MatrixXd d(nf, nf);
    for (int i = 0; i < nf; ++i)
        for (int g = 0; g < nf; ++g) d(i, g) = laguerre(p.N + g, p.nu, -p.masses[i] * p.masses[i]);
    return log_det(d);
}

inline void require_zero_temp(const FiniteEnsembleParams& p, const char* who) {
    p.validate();
    if (p.temperature) throw DomainError(std::string(who) + ": needs zero-temperature parameters");
}

}  // namespace detail

inline double cd_kernel_quenched(const FiniteEnsembleParams& p, double x, double y) {
    detail::require_zero_temp(p, "cd_kernel_quenched");
    if (p.n_flavors() != 0) throw DomainError("cd_kernel_quenched: needs N_f = 0");
    return detail::cd_kernel(p.N, p.nu, x, y);
}

// Polynomial part of the massive kernel from the (N_f+2)x(N_f+2) Laguerre
// determinant (mass rows, then x, then y).
inline double massive_kernel_zero_temp(const FiniteEnsembleParams& p, double x, double y) {
    detail::require_zero_temp(p, "massive_kernel_zero_temp");
    const int nf = p.n_flavors(), n = nf + 2;
    if (nf == 0) return detail::cd_kernel(p.N, p.nu, x, y);
    const bool diag = detail::near_equal(x, y);
    const double xr = diag ? 0.5 * (x + y) : x;
    Eigen::MatrixXd a(n, n);
    for (int j = 0; j < n; ++j) {
        const long deg = p.N - 1 + j;
        for (int f = 0; f < nf; ++f) a(f, j) = laguerre(deg, p.nu, -p.masses[f] * p.masses[f]);
        a(nf, j) = laguerre(deg, p.nu, xr);
        a(nf + 1, j) = diag ? laguerre_derivative(deg, p.nu, xr) : laguerre(deg, p.nu, y);
    }
    DetResult num = log_det(a), den = detail::laguerre_mass_block(p);
    detail::check_condition(num, "massive_kernel_zero_temp");
    detail::check_condition(den, "massive_kernel_zero_temp");
    LogValue v = num.det / den.det;
    v *= LogValue::from_log(log_gamma(p.N + nf + 1.0) - log_gamma(p.N + static_cast<double>(p.nu)), -1);
    const double yr = diag ? xr : y;
    for (double m : p.masses) v /= LogValue::from((yr + m * m) * (xr + m * m));
    if (!diag) v /= LogValue::from(y - x);
    return v.value();
}

// Same kernel from the (N_f+1)x(N_f+1) determinant of quenched kernels and
// Laguerre rows.
inline double massive_kernel_alt(const FiniteEnsembleParams& p, double x, double y) {
    detail::require_zero_temp(p, "massive_kernel_alt");
    const int nf = p.n_flavors(), n = nf + 1;
    if (nf == 0) return detail::cd_kernel(p.N, p.nu, x, y);
    Eigen::MatrixXd a(n, n);
    for (int f = 0; f < nf; ++f) a(0, f) = detail::cd_kernel(p.N, p.nu, -p.masses[f] * p.masses[f], y);
    a(0, nf) = detail::cd_kernel(p.N, p.nu, x, y);
    for (int j = 0; j < nf; ++j) {
        for (int f = 0; f < nf; ++f) a(1 + j, f) = laguerre(p.N + j, p.nu, -p.masses[f] * p.masses[f]);
        a(1 + j, nf) = laguerre(p.N + j, p.nu, x);
    }
    DetResult num = log_det(a), den = detail::laguerre_mass_block(p);
    detail::check_condition(num, "massive_kernel_alt");
    detail::check_condition(den, "massive_kernel_alt");
    LogValue v = num.det / den.det;
    if (nf % 2 != 0) v = -v;
    for (double m : p.masses) v /= LogValue::from(x + m * m);
    return v.value();
}

// Z^{(N_f)} / Z^{(0)} including the prod_f m_f^nu factor.
inline LogValue partition_zero_temp(const FiniteEnsembleParams& p) {
    detail::require_zero_temp(p, "partition_zero_temp");
    const int nf = p.n_flavors();
    if (nf == 0) return LogValue::one();
    DetResult d = detail::laguerre_mass_block(p);
    detail::check_condition(d, "partition_zero_temp");
    LogValue v = d.det;
    for (int f = 1; f <= nf; ++f) v *= LogValue::from_log(log_gamma(f + static_cast<double>(p.N)));
    for (double m : p.masses) v *= LogValue::from_log(p.nu * std::log(m));
    for (int i = 0; i < nf; ++i)
        for (int j = 0; j < i; ++j) v /= LogValue::from(p.masses[i] * p.masses[i] - p.masses[j] * p.masses[j]);
    return v;
}

// R_1(x) = w(x) K_N^{(N_f)}(x, x) at zero temperature.
inline double density_zero_temp(const FiniteEnsembleParams& p, double x) {
    LogValue w = weight_zero_temp(p, x);
    if (w.is_zero()) return 0.0;
    return (w * LogValue::from(massive_kernel_zero_temp(p, x, x))).value();
}

// ---------------------------------------------------------------------------
// Non-zero temperature.

inline double gram_entry(int k, int l, const FiniteEnsembleParams& p) {
    p.validate();
    if (!p.temperature) throw DomainError("gram_entry: needs a temperature spectrum");
    if (k < 1 || l < 1 || k > p.N || l > p.N) throw DomainError("gram_entry: indices out of range");
    const double A = p.N * p.temperature->a[l - 1];
    return (LogValue::from_log(log_gamma(k)) * LogValue::from(laguerre(k - 1, p.nu, -A))).value();
}

// Z = N! det G, with the (k-1)! row factors pulled out before the determinant.
inline LogValue partition_quenched_temp(const FiniteEnsembleParams& p) {
    p.validate();
    if (!p.temperature) throw DomainError("partition_quenched_temp: needs a temperature spectrum");
    if (p.n_flavors() != 0) throw DomainError("partition_quenched_temp: needs N_f = 0");
    p.temperature->validate_distinct();
    const int N = p.N;
    Eigen::MatrixXd g(N, N);
    for (int k = 1; k <= N; ++k)
        for (int l = 1; l <= N; ++l) g(k - 1, l - 1) = laguerre(k - 1, p.nu, -N * p.temperature->a[l - 1]);
    DetResult d = log_det(g);
    detail::check_condition(d, "partition_quenched_temp");
    LogValue v = d.det * LogValue::from_log(log_gamma(N + 1.0));
    for (int k = 1; k <= N; ++k) v *= LogValue::from_log(log_gamma(k));
    return v;
}

enum class KernelRoute { Auto, Residue, SaddleContour };

inline const char* to_string(KernelRoute r) {
    switch (r) {
        case KernelRoute::Auto: return "auto";
        case KernelRoute::Residue: return "residue";
        case KernelRoute::SaddleContour: return "saddle-contour";
    }
    return "?";
}

struct TempKernelOptions {
    KernelRoute route = KernelRoute::Auto;
    double rel_tol = 1e-11;
};

struct KernelEval {
    double value = 0.0;
    double condition = 1.0;  // estimated amplification of rounding errors
    KernelRoute route = KernelRoute::Auto;
};

namespace detail {

using cd = std::complex<double>;

// Saddle data of phi(t) = -t + sum log(t + A_n), which peaks at t = s = N Xi in
// the broken phase. w is the Gaussian width there and c the contour crossing.
struct Saddle {
    int N = 0, nu = 0;
    std::vector<double> A;
    double s = 0, w = 1, c = 1, ref = 0, amax = 0;
    bool distinct = true;

    double phi(double t) const {
        double v = -t;
        for (double a : A) v += std::log(t + a);
        return v;
    }
    // log of t^{nu/2} e^{-t} prod(t + A) e^{-ref}
    double log_outer(double t) const {
        if (t == 0.0) return nu == 0 ? phi(0.0) - ref : -std::numeric_limits<double>::infinity();
        return 0.5 * nu * std::log(t) + phi(t) - ref;
    }
};

inline Saddle make_saddle(const FiniteEnsembleParams& p) {
    Saddle g;
    g.N = p.N;
    g.nu = p.nu;
    g.A = p.raw_spectrum();
    g.amax = g.A.back();
    auto sum_inv = [&](double t) {
        double v = 0.0;
        for (double a : g.A) v += 1.0 / (t + a);
        return v;
    };
    if (sum_inv(0.0) > 1.0) {
        double lo = 0.0, hi = 1.0;
        while (sum_inv(hi) > 1.0) {
            lo = hi;
            hi *= 2.0;
        }
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
            double mid = 0.5 * (lo + hi);
            (sum_inv(mid) > 1.0 ? lo : hi) = mid;
        }
        g.s = 0.5 * (lo + hi);
    }
    double q = 0.0;
    for (double a : g.A) q += 1.0 / ((g.s + a) * (g.s + a));
    g.w = 1.0 / std::sqrt(q);
    g.c = std::max(g.s, g.w);
    g.ref = g.phi(g.s);
    for (std::size_t i = 1; i < g.A.size(); ++i)
        if (g.A[i] - g.A[i - 1] <= 1e-8 * g.A[i]) g.distinct = false;
    return g;
}

// t-independent part of the u-integral on a circle through -c, centred at
// max A: nodes u_j and weights such that Psi(t) e^{ref} = Re sum wt_j/(t+u_j).
struct CircleInner {
    std::vector<cd> u, wt;
    double operator()(double t) const {
        cd s = 0.0;
        for (std::size_t j = 0; j < u.size(); ++j) s += wt[j] / (t + u[j]);
        return s.real();
    }
    double abs_sum(double t) const {
        double s = 0.0;
        for (std::size_t j = 0; j < u.size(); ++j) s += std::abs(wt[j] / (t + u[j]));
        return s;
    }
};

// log of -G(u) = e^{-u} u^{-nu/2} I_nu(2 sqrt(u y)), entire in u.
inline cd log_minus_g(int nu, cd u, double y) {
    if (y == 0.0) return nu == 0 ? -u : cd(-std::numeric_limits<double>::infinity(), 0.0);
    return -u + 0.5 * nu * std::log(y) + log_entire_bessel_i(nu, u * y);
}

inline CircleInner circle_inner(const Saddle& g, double c, double y) {
    CircleInner in;
    const double R = g.amax + c;
    const double target = std::max(40.0 * R / g.w, 16.0 * std::sqrt(R * y) + 64.0);
    int M = 256;
    while (M < target && M < (1 << 16)) M *= 2;
    in.u.resize(M);
    in.wt.resize(M);
    for (int j = 0; j < M; ++j) {
        const cd e = std::polar(1.0, 2.0 * M_PI * (j + 0.5) / M);
        const cd u = g.amax + R * e;
        cd l = log_minus_g(g.nu, u, y) + g.ref;
        for (double a : g.A) l -= std::log(a - u);
        in.u[j] = u;
        in.wt[j] = std::isfinite(l.real()) ? -std::exp(l) * R * e / double(M) : cd(0.0);
    }
    return in;
}

// Same inner integral by residues at the A_k (exact, but cancels for large N).
struct ResidueInner {
    std::vector<double> A, ck;
    bool ok = true;
    double operator()(double t) const {
        double s = 0.0;
        for (std::size_t k = 0; k < A.size(); ++k) s += ck[k] / (t + A[k]);
        return s;
    }
    double abs_sum(double t) const {
        double s = 0.0;
        for (std::size_t k = 0; k < A.size(); ++k) s += std::fabs(ck[k] / (t + A[k]));
        return s;
    }
};

inline ResidueInner residue_inner(const Saddle& g, double y) {
    ResidueInner in;
    in.A = g.A;
    in.ck.assign(g.A.size(), 0.0);
    if (!g.distinct) {
        in.ok = false;
        return in;
    }
    for (std::size_t k = 0; k < g.A.size(); ++k) {
        const double a = g.A[k];
        LogValue mg;
        if (y == 0.0)
            mg = g.nu == 0 ? LogValue::from_log(-a) : LogValue::zero();
        else
            mg = bessel_i_log(g.nu, 2.0 * std::sqrt(a * y)) * LogValue::from_log(-a - 0.5 * g.nu * std::log(a));
        LogValue den = LogValue::one();
        for (std::size_t m = 0; m < g.A.size(); ++m)
            if (m != k) den *= LogValue::from(g.A[m] - a);
        LogValue ck = mg / den * LogValue::from_log(g.ref);
        if (!ck.is_zero() && std::fabs(ck.log_mag) > 690.0) {
            in.ok = false;
            return in;
        }
        in.ck[k] = ck.value();
    }
    return in;
}

// Envelope maximum of t^p e^{-t} prod(t+A) [I_nu(2 m sqrt t)] and its width.
struct Peak {
    double t = 0, sigma = 1, log_value = 0;
};

inline double log_envelope(const Saddle& g, double p, double m, double t) {
    if (t <= 0.0) {
        if (p > 0.0 || (m > 0.0 && g.nu > 0)) return -std::numeric_limits<double>::infinity();
        return g.phi(0.0);
    }
    double v = p * std::log(t) + g.phi(t);
    if (m > 0.0) v += bessel_i_log(g.nu, 2.0 * m * std::sqrt(t)).log_mag;
    return v;
}

inline Peak envelope_peak(const Saddle& g, double p, double m) {
    auto dg = [&](double t) {
        double d = p / t - 1.0;
        for (double a : g.A) d += 1.0 / (t + a);
        if (m > 0.0) {
            double z = 2.0 * m * std::sqrt(t);
            double r = std::exp(bessel_i_log(g.nu + 1, z).log_mag - bessel_i_log(g.nu, z).log_mag);
            d += m / std::sqrt(t) * r + 0.5 * g.nu / t;
        }
        return d;
    };
    Peak pk;
    double lo = 1e-12 * std::max(1.0, g.c), hi = std::max(1.0, g.c);
    if (dg(lo) <= 0.0) {
        pk.t = 0.0;
    } else {
        while (dg(hi) > 0.0) {
            lo = hi;
            hi *= 2.0;
        }
        for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
            double mid = 0.5 * (lo + hi);
            (dg(mid) > 0.0 ? lo : hi) = mid;
        }
        pk.t = 0.5 * (lo + hi);
    }
    pk.sigma = g.w;
    if (pk.t > 0.0) {
        double h = 1e-4 * std::max(pk.t, g.w);
        double d2 = (dg(pk.t + h) - dg(std::max(pk.t - h, 0.5 * pk.t))) / (pk.t + h - std::max(pk.t - h, 0.5 * pk.t));
        if (d2 < 0.0 && std::isfinite(d2)) pk.sigma = 1.0 / std::sqrt(-d2);
    }
    pk.log_value = log_envelope(g, p, m, pk.t > 0.0 ? pk.t : 0.0);
    if (!std::isfinite(pk.log_value)) pk.log_value = log_envelope(g, p, m, std::max(pk.t, 1e-300) + pk.sigma);
    return pk;
}

inline int panel_count(double len, double width) {
    if (!(len > 0.0)) return 0;
    return std::clamp(static_cast<int>(std::ceil(len / width)), 1, 400);
}

// Integral of f over [a, b] (b may be +inf), panels sized by the envelope width.
template <class F>
QuadResult integrate_t(F&& f, double a, double b, const Saddle& g, const Peak& pk, double rel_tol) {
    QuadResult out;
    const double width = std::min(g.w, pk.sigma);
    if (std::isfinite(b)) {
        int n = panel_count(b - a, width);
        for (int i = 0; i < n; ++i) {
            QuadResult r = integrate_interval(f, a + (b - a) * i / n, a + (b - a) * (i + 1) / n, rel_tol);
            out.value += r.value;
            out.l1 += r.l1;
        }
        return out;
    }
    HalfLineOptions o;
    o.rel_tol = rel_tol;
    o.onset = std::max(12.0 * g.w, pk.t + 30.0 * pk.sigma - a);
    o.onset_panels = panel_count(o.onset, width);
    o.abs_tol = 1e-300;
    return integrate_halfline([&](double tau) { return f(a + tau); }, o);
}

struct Scaled {
    double value = 0.0;      // true value is value * exp(log_shift)
    double log_shift = 0.0;
    double condition = 1.0;
};

// Generic outer t-integral against the inner u-integral. outer(t) returns the
// t-dependent factor scaled by e^{-ref-shift}; t1 is the residue at u = -t over
// [0, c + w] in closed form (already scaled by e^{-shift}).
template <class Outer>
Scaled integrate_kernel(const Saddle& g, const ResidueInner* res, const CircleInner* near, const CircleInner* far,
                        Outer&& outer, const Peak& pk, double t1, double shift, double rel_tol) {
    Scaled out;
    out.log_shift = shift;
    const double hi2 = g.c + g.w;
    const double lo2 = std::max(0.0, g.c - g.w);
    const double inf = std::numeric_limits<double>::infinity();
    double l1 = 0.0, kappa = 1.0, total = 0.0;
    std::vector<double> probes = {lo2, g.c, hi2, pk.t};
    auto note = [&](auto const& in) {
        for (double t : probes) {
            double v = std::fabs(in(t));
            if (v > 0.0) kappa = std::max(kappa, in.abs_sum(t) / v);
        }
    };
    if (res) {
        note(*res);
        QuadResult r = integrate_t([&](double t) { return outer(t) * (*res)(t); }, 0.0, hi2, g, pk, rel_tol);
        QuadResult r2 = integrate_t([&](double t) { return outer(t) * (*res)(t); }, hi2, inf, g, pk, rel_tol);
        total = r.value + r2.value;
        l1 = r.l1 + r2.l1;
    } else {
        note(*near);
        QuadResult r1 = integrate_t([&](double t) { return outer(t) * (*near)(t); }, 0.0, lo2, g, pk, rel_tol);
        QuadResult r2 = integrate_t([&](double t) { return outer(t) * (*far)(t); }, lo2, hi2, g, pk, rel_tol);
        QuadResult r3 = integrate_t([&](double t) { return outer(t) * (*near)(t); }, hi2, inf, g, pk, rel_tol);
        total = r1.value + r2.value + r3.value + t1;
        l1 = r1.l1 + r2.l1 + r3.l1 + std::fabs(t1);
    }
    out.value = total;
    out.condition = std::fabs(total) > 0.0 ? kappa * l1 / std::fabs(total) : std::numeric_limits<double>::infinity();
    return out;
}

// Inner integrals for a given y: residue route if it is well conditioned,
// otherwise circles through -c and -(c + 2w).
struct InnerSet {
    KernelRoute route = KernelRoute::SaddleContour;
    ResidueInner res;
    CircleInner near, far;
};

inline InnerSet make_inner(const Saddle& g, double y, KernelRoute want) {
    InnerSet s;
    if (want != KernelRoute::SaddleContour) {
        s.res = residue_inner(g, y);
        bool usable = s.res.ok;
        if (usable && want == KernelRoute::Auto) {
            double kappa = 1.0;
            for (double t : {0.0, g.c, g.c + g.w, g.c + 10.0 * g.w}) {
                double v = std::fabs(s.res(t));
                kappa = std::max(kappa, v > 0.0 ? s.res.abs_sum(t) / v : 1.0);
            }
            usable = kappa < 1e6;
        }
        if (want == KernelRoute::Residue && !usable)
            throw ConditioningError("temperature kernel: residue route unavailable (clustered or overflowing terms)",
                                    std::numeric_limits<double>::infinity());
        if (usable) {
            s.route = KernelRoute::Residue;
            return s;
        }
    }
    s.route = KernelRoute::SaddleContour;
    s.near = circle_inner(g, g.c, y);
    s.far = circle_inner(g, g.c + 2.0 * g.w, y);
    return s;
}

inline Scaled quenched_scaled(const Saddle& g, const InnerSet& in, double x, double y, double rel_tol) {
    auto outer = [&](double t) {
        double lo = g.log_outer(t);
        if (!std::isfinite(lo)) return 0.0;
        return bessel_j(g.nu, 2.0 * std::sqrt(t * x)) * std::exp(lo);
    };
    Peak pk;
    pk.t = g.s;
    pk.sigma = g.w;
    const double hi2 = g.c + g.w;
    double t1 = hi2 * unit_jj(g.nu, 2.0 * std::sqrt(hi2 * x), 2.0 * std::sqrt(hi2 * y));
    if (in.route == KernelRoute::Residue)
        return integrate_kernel(g, &in.res, nullptr, nullptr, outer, pk, 0.0, 0.0, rel_tol);
    return integrate_kernel(g, nullptr, &in.near, &in.far, outer, pk, t1, 0.0, rel_tol);
}

// hatK(m, y) with its log scale chosen from the envelope peak of the mass column.
inline Scaled hatk_scaled(const Saddle& g, const InnerSet& in, double m, double y, double rel_tol) {
    Peak pk = envelope_peak(g, 0.5 * g.nu, m);
    const double shift = pk.log_value - g.ref;
    auto outer = [&](double t) {
        if (t <= 0.0) return 0.0 * t + (g.nu == 0 ? std::exp(g.phi(0.0) - g.ref - shift) : 0.0);
        double l = bessel_i_log(g.nu, 2.0 * m * std::sqrt(t)).log_mag + g.log_outer(t) - shift;
        return std::exp(l);
    };
    const double hi2 = g.c + g.w;
    double t1 = 0.0;
    if (in.route != KernelRoute::Residue) {
        LogValue v = unit_ij_log(g.nu, 2.0 * m * std::sqrt(hi2), 2.0 * std::sqrt(hi2 * y)) * LogValue::from(hi2);
        t1 = (v * LogValue::from_log(-shift)).value();
    }
    if (in.route == KernelRoute::Residue)
        return integrate_kernel(g, &in.res, nullptr, nullptr, outer, pk, 0.0, shift, rel_tol);
    return integrate_kernel(g, nullptr, &in.near, &in.far, outer, pk, t1, shift, rel_tol);
}

// int t^{i-1} t^{nu/2} e^{-t} I_nu(2 m sqrt t) prod(t + A) dt, or with the
// centred monomial ((t - c)/w)^{i-1}. Returned with log shift = envelope peak.
inline Scaled b_moment(const Saddle& g, int i, double m, bool centred, double rel_tol) {
    const double p = 0.5 * g.nu + (centred ? 0.0 : i - 1.0);
    Peak pk = envelope_peak(g, p, m);
    auto f = [&](double t) {
        double l = log_envelope(g, p, m, t);
        if (!std::isfinite(l)) return 0.0;
        double v = std::exp(l - pk.log_value);
        if (centred && i > 1) v *= std::pow((t - g.c) / g.w, i - 1);
        return v;
    };
    QuadResult r = integrate_t(f, 0.0, std::numeric_limits<double>::infinity(), g, pk, rel_tol);
    Scaled out;
    out.value = r.value;
    out.log_shift = pk.log_value;
    out.condition = r.value != 0.0 ? r.l1 / std::fabs(r.value) : std::numeric_limits<double>::infinity();
    return out;
}

// Same with J_nu(2 sqrt(x t)); the shift is the envelope peak without the Bessel factor.
inline Scaled bhat_moment(const Saddle& g, int i, double x, bool centred, double rel_tol) {
    const double p = 0.5 * g.nu + (centred ? 0.0 : i - 1.0);
    Peak pk = envelope_peak(g, p, 0.0);
    auto f = [&](double t) {
        double l = log_envelope(g, p, 0.0, t);
        if (!std::isfinite(l)) return 0.0;
        double v = bessel_j(g.nu, 2.0 * std::sqrt(x * t)) * std::exp(l - pk.log_value);
        if (centred && i > 1) v *= std::pow((t - g.c) / g.w, i - 1);
        return v;
    };
    QuadResult r = integrate_t(f, 0.0, std::numeric_limits<double>::infinity(), g, pk, rel_tol);
    Scaled out;
    out.value = r.value;
    out.log_shift = pk.log_value;
    out.condition = r.value != 0.0 ? r.l1 / std::fabs(r.value) : std::numeric_limits<double>::infinity();
    return out;
}

inline void require_temperature(const FiniteEnsembleParams& p, const char* who) {
    p.validate();
    if (!p.temperature) throw DomainError(std::string(who) + ": needs a temperature spectrum");
}

}  // namespace detail

inline LogValue B_integral(int i, double m, const FiniteEnsembleParams& p) {
    detail::require_temperature(p, "B_integral");
    if (i < 1) throw DomainError("B_integral: i must be >= 1");
    if (!(m > 0.0)) throw DomainError("B_integral: mass must be positive");
    detail::Saddle g = detail::make_saddle(p);
    detail::Scaled s = detail::b_moment(g, i, m, false, 1e-12);
    return LogValue::from(s.value) * LogValue::from_log(s.log_shift);
}

inline LogValue Bhat_integral_log(int i, double x, const FiniteEnsembleParams& p) {
    detail::require_temperature(p, "Bhat_integral");
    if (i < 1) throw DomainError("Bhat_integral: i must be >= 1");
    if (x < 0.0) throw DomainError("Bhat_integral: x must be >= 0");
    detail::Saddle g = detail::make_saddle(p);
    detail::Scaled s = detail::bhat_moment(g, i, x, false, 1e-12);
    return LogValue::from(s.value) * LogValue::from_log(s.log_shift);
}

inline double Bhat_integral(int i, double x, const FiniteEnsembleParams& p) {
    LogValue v = Bhat_integral_log(i, x, p);
    if (v.log_mag > 709.0) throw DomainError("Bhat_integral: overflow, use Bhat_integral_log");
    return v.value();
}

// Quenched temperature kernel, canonical form (cocycle (y/x)^{nu/2} e^{x-y}
// dropped). Raw arguments. Never throws on conditioning; see quenched_kernel_temp.
inline KernelEval quenched_kernel_temp_eval(const FiniteEnsembleParams& p, double x, double y,
                                            const TempKernelOptions& opt = {}) {
    detail::require_temperature(p, "quenched_kernel_temp");
    if (p.n_flavors() != 0) throw DomainError("quenched_kernel_temp: needs N_f = 0");
    if (x < 0.0 || y < 0.0) throw DomainError("quenched_kernel_temp: arguments must be >= 0");
    detail::Saddle g = detail::make_saddle(p);
    detail::InnerSet in = detail::make_inner(g, y, opt.route);
    detail::Scaled s;
    bool retry = false;
    try {
        s = detail::quenched_scaled(g, in, x, y, opt.rel_tol);
        retry = in.route == KernelRoute::Residue && opt.route == KernelRoute::Auto && s.condition > 1e6;
    } catch (const IntegrationFailure&) {
        if (in.route != KernelRoute::Residue || opt.route != KernelRoute::Auto) throw;
        retry = true;
    }
    if (retry) {
        in = detail::make_inner(g, y, KernelRoute::SaddleContour);
        s = detail::quenched_scaled(g, in, x, y, opt.rel_tol);
    }
    return {s.value, s.condition, in.route};
}

inline double quenched_kernel_temp(const FiniteEnsembleParams& p, double x, double y, const TempKernelOptions& opt = {}) {
    KernelEval e = quenched_kernel_temp_eval(p, x, y, opt);
    if (!(e.condition <= kMaxCondition))
        throw ConditioningError("quenched_kernel_temp: cancellation estimate above 1e12", e.condition);
    return e.value;
}

// hatK(m^2, y), canonical form.
inline double hatK_temp(const FiniteEnsembleParams& p, double m, double y, const TempKernelOptions& opt = {}) {
    detail::require_temperature(p, "hatK_temp");
    if (!(m > 0.0) || y < 0.0) throw DomainError("hatK_temp: need m > 0 and y >= 0");
    detail::Saddle g = detail::make_saddle(p);
    detail::InnerSet in = detail::make_inner(g, y, opt.route);
    detail::Scaled s;
    bool retry = false;
    try {
        s = detail::hatk_scaled(g, in, m, y, opt.rel_tol);
        retry = in.route == KernelRoute::Residue && opt.route == KernelRoute::Auto && s.condition > 1e6;
    } catch (const IntegrationFailure&) {
        if (in.route != KernelRoute::Residue || opt.route != KernelRoute::Auto) throw;
        retry = true;
    }
    if (retry) {
        in = detail::make_inner(g, y, KernelRoute::SaddleContour);
        s = detail::hatk_scaled(g, in, m, y, opt.rel_tol);
    }
    if (!(s.condition <= kMaxCondition)) throw ConditioningError("hatK_temp: cancellation estimate above 1e12", s.condition);
    return (LogValue::from(s.value) * LogValue::from_log(s.log_shift)).value();
}

// Unquenched temperature kernel from the (N_f+1) block determinant, with the
// mass-ratio prefactor split symmetrically.
inline KernelEval unquenched_kernel_temp_eval(const FiniteEnsembleParams& p, double x, double y,
                                              const TempKernelOptions& opt = {}) {
    detail::require_temperature(p, "unquenched_kernel_temp");
    const int nf = p.n_flavors();
    if (nf < 1) throw DomainError("unquenched_kernel_temp: needs N_f >= 1");
    if (x < 0.0 || y < 0.0) throw DomainError("unquenched_kernel_temp: arguments must be >= 0");
    detail::Saddle g = detail::make_saddle(p);
    detail::InnerSet in = detail::make_inner(g, y, opt.route);

    auto assemble = [&](KernelEval& out) {
        double cond = 1.0;
        detail::Scaled k = detail::quenched_scaled(g, in, x, y, opt.rel_tol);
        cond = std::max(cond, k.condition);
        Eigen::MatrixXd num(nf + 1, nf + 1), den(nf, nf);
        num(0, 0) = k.value;
        for (int f = 0; f < nf; ++f) {
            const double m = p.masses[f];
            detail::Scaled h = detail::hatk_scaled(g, in, m, y, opt.rel_tol);
            cond = std::max(cond, h.condition);
            // column f scaled by e^{-L_f} with L_f the mass envelope peak
            const double lf = h.log_shift + g.ref;
            num(0, 1 + f) = h.value;
            for (int i = 1; i <= nf; ++i) {
                detail::Scaled b = detail::b_moment(g, i, m, true, opt.rel_tol);
                num(i, 1 + f) = b.value * std::exp(b.log_shift - lf);
                den(i - 1, f) = num(i, 1 + f);
            }
        }
        for (int i = 1; i <= nf; ++i) {
            detail::Scaled b = detail::bhat_moment(g, i, x, true, opt.rel_tol);
            num(i, 0) = b.value * std::exp(b.log_shift - g.ref);
        }
        DetResult dn = log_det(num), dd = log_det(den);
        LogValue v = dn.det / dd.det;
        double pre = 1.0;
        for (double m : p.masses) pre *= std::sqrt((y + m * m) / (x + m * m));
        v *= LogValue::from(pre);
        out.value = v.value();
        // Determinant cancellation relative to the largest cofactor path.
        double scale = std::fabs(k.value);
        if (nf > 0 && dd.det.sign != 0) {
            Eigen::MatrixXd absn = num.cwiseAbs();
            scale = std::max(scale, std::exp(log_det(absn).det.log_mag - dd.det.log_mag));
        }
        double vabs = std::fabs(dn.det.value() / dd.det.value());
        double cancel = vabs > 0.0 ? std::max(1.0, scale / vabs) : std::numeric_limits<double>::infinity();
        out.condition = std::max({cond * cancel, dd.condition});
        out.route = in.route;
    };
    KernelEval out;
    bool retry = false;
    try {
        assemble(out);
        retry = in.route == KernelRoute::Residue && opt.route == KernelRoute::Auto && out.condition > 1e6;
    } catch (const IntegrationFailure&) {
        if (in.route != KernelRoute::Residue || opt.route != KernelRoute::Auto) throw;
        retry = true;
    }
    if (retry) {
        in = detail::make_inner(g, y, KernelRoute::SaddleContour);
        assemble(out);
    }
    return out;
}

inline double unquenched_kernel_temp(const FiniteEnsembleParams& p, double x, double y,
                                     const TempKernelOptions& opt = {}) {
    KernelEval e = unquenched_kernel_temp_eval(p, x, y, opt);
    if (!(e.condition <= kMaxCondition))
        throw ConditioningError("unquenched_kernel_temp: cancellation estimate above 1e12", e.condition);
    return e.value;
}

// Kernel whose determinants give the correlation functions, for any params.
inline KernelEval kernel_eval(const FiniteEnsembleParams& p, double x, double y, const TempKernelOptions& opt = {}) {
    if (!p.temperature) {
        p.validate();
        LogValue w = weight_zero_temp(p, x) * weight_zero_temp(p, y);
        double k = massive_kernel_zero_temp(p, x, y);
        return {w.is_zero() ? 0.0 : std::sqrt(std::exp(w.log_mag)) * k, 1.0, KernelRoute::Auto};
    }
    if (p.n_flavors() == 0) return quenched_kernel_temp_eval(p, x, y, opt);
    return unquenched_kernel_temp_eval(p, x, y, opt);
}

inline double finite_kernel(const FiniteEnsembleParams& p, double x, double y, const TempKernelOptions& opt = {}) {
    KernelEval e = kernel_eval(p, x, y, opt);
    if (!(e.condition <= kMaxCondition))
        throw ConditioningError("finite kernel: cancellation estimate above 1e12", e.condition);
    return e.value;
}

// R_1(x) in raw units.
inline double finite_density(const FiniteEnsembleParams& p, double x, const TempKernelOptions& opt = {}) {
    if (!p.temperature) {
        p.validate();
        return density_zero_temp(p, x);
    }
    return finite_kernel(p, x, x, opt);
}

inline double correlation_finite(const FiniteEnsembleParams& p, const std::vector<double>& points,
                                 const TempKernelOptions& opt = {}) {
    const int k = static_cast<int>(points.size());
    if (k < 1 || k > 6) throw DomainError("correlation_finite: need 1 <= k <= 6 points");
    for (double x : points)
        if (x < 0.0) throw DomainError("correlation_finite: points must be >= 0");
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < i; ++j)
            if (points[i] == points[j]) return 0.0;
    Eigen::MatrixXd a(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) a(i, j) = finite_kernel(p, points[i], points[j], opt);
    if (k == 1) return a(0, 0);
    return log_det(a).det.value();
}

namespace detail {

inline ScalingMap micro_map(const FiniteEnsembleParams& p, const PhaseInfo& ph, const char* who) {
    p.validate();
    if (!p.temperature) return {p.N, 1.0};
    if (ph.phase != Phase::Broken)
        throw PhaseError(std::string(who) + ": spectrum is not in the broken phase (t_c = " + std::to_string(ph.t_c) + ")",
                         ph.t_c);
    return {p.N, ph.xi};
}

inline FiniteEnsembleParams raw_masses(const FiniteEnsembleParams& p, const ScalingMap& map) {
    FiniteEnsembleParams raw = p;
    for (double& m : raw.masses) m = std::sqrt(map.mass_sq_of(m));
    return raw;
}

}  // namespace detail

// Finite-N quantities on the microscopic scale. Masses in p are microscopic
// mu_f here and are mapped to raw masses with m^2 = mu^2 / (4 N Xi); the phase
// is ignored at zero temperature (Xi = 1).
inline double micro_density_finite(const FiniteEnsembleParams& p, const PhaseInfo& ph, double zeta,
                                   const TempKernelOptions& opt = {}) {
    ScalingMap map = detail::micro_map(p, ph, "micro_density_finite");
    if (!(zeta > 0.0)) throw DomainError("micro_density_finite: zeta must be positive");
    return map.jacobian(zeta) * finite_density(detail::raw_masses(p, map), map.x_of(zeta), opt);
}

inline KernelEval micro_kernel_finite(const FiniteEnsembleParams& p, const PhaseInfo& ph, double zeta, double eta,
                                      const TempKernelOptions& opt = {}) {
    ScalingMap map = detail::micro_map(p, ph, "micro_kernel_finite");
    if (!(zeta > 0.0) || !(eta > 0.0)) throw DomainError("micro_kernel_finite: arguments must be positive");
    KernelEval e = kernel_eval(detail::raw_masses(p, map), map.x_of(zeta), map.x_of(eta), opt);
    e.value *= std::sqrt(map.jacobian(zeta) * map.jacobian(eta));
    return e;
}

inline double micro_correlation_finite(const FiniteEnsembleParams& p, const PhaseInfo& ph,
                                       const std::vector<double>& zetas, const TempKernelOptions& opt = {}) {
    ScalingMap map = detail::micro_map(p, ph, "micro_correlation_finite");
    std::vector<double> xs;
    double jac = 1.0;
    for (double z : zetas) {
        if (!(z > 0.0)) throw DomainError("micro_correlation_finite: points must be positive");
        xs.push_back(map.x_of(z));
        jac *= map.jacobian(z);
    }
    return jac * correlation_finite(detail::raw_masses(p, map), xs, opt);
}

}  // namespace tdirac
