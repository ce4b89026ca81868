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
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "finitekernel.hpp"
#include "microkernel.hpp"
#include "quad.hpp"
#include "specfun.hpp"

namespace tdirac {

struct VerifyRow {
    std::string name;
    double max_deviation = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string note;  // exception text when the check could not run
};

struct VerifyOptions {
    std::map<std::string, double> tolerances;  // per-identity overrides
    std::optional<double> tol;                 // overrides every tolerance
    bool inject_sign_flip = false;             // negative control on the kernel relation
};

namespace detail {

inline double rel_dev(double a, double b, double floor = 1e-300) {
    return std::fabs(a - b) / std::max(std::fabs(b), floor);
}

// sum of |terms| for a three-term recurrence residual scale
inline double recurrence_residual(double lhs, double rhs, double scale) {
    return std::fabs(lhs - rhs) / std::max(scale, 1e-300);
}

}  // namespace detail

// Identity checks shared by `tdirac verify` and the test suite. Each entry
// returns the largest deviation seen on its fixed grid.
struct VerifyCheck {
    std::string name;
    double tolerance;
    std::function<double(bool flip)> run;
};

inline std::vector<VerifyCheck> verify_checks() {
    std::vector<VerifyCheck> c;

    c.push_back({"bessel_j_recurrence", 1e-12, [](bool) {
                     double worst = 0.0;
                     for (int n = 1; n <= 20; ++n)
                         for (double z : {0.1, 0.7, 2.5, 9.0, 23.0, 60.0, 140.0}) {
                             double a = bessel_j_signed(n - 1, z), b = bessel_j_signed(n, z), d = bessel_j_signed(n + 1, z);
                             worst = std::max(worst, detail::recurrence_residual(z * d, 2.0 * n * b - z * a,
                                                                                 std::fabs(z * d) + std::fabs(2.0 * n * b) + std::fabs(z * a)));
                         }
                     return worst;
                 }});
    c.push_back({"bessel_i_recurrence", 1e-12, [](bool) {
                     double worst = 0.0;
                     for (int n = 1; n <= 20; ++n)
                         for (double z : {0.1, 0.7, 2.5, 9.0, 23.0, 60.0, 140.0}) {
                             double a = bessel_i_scaled(n - 1, z), b = bessel_i_scaled(n, z), d = bessel_i_scaled(n + 1, z);
                             worst = std::max(worst, detail::recurrence_residual(z * a - z * d, 2.0 * n * b,
                                                                                 std::fabs(z * a) + std::fabs(z * d) + std::fabs(2.0 * n * b)));
                         }
                     return worst;
                 }});
    c.push_back({"laguerre_recurrence", 1e-12, [](bool) {
                     double worst = 0.0;
                     for (int nu = 0; nu <= 3; ++nu)
                         for (long n = 1; n <= 60; n += 7)
                             for (double x : {-2.0, 0.3, 4.0, 30.0}) {
                                 double a = laguerre(n - 1, nu, x), b = laguerre(n, nu, x), d = laguerre(n + 1, nu, x);
                                 double l = (n + 1.0) * d, r = (2.0 * n + 1.0 + nu - x) * b - (n + nu) * a;
                                 worst = std::max(worst, detail::recurrence_residual(
                                                             l, r, std::fabs(l) + std::fabs((2.0 * n + 1.0 + nu - x) * b) + std::fabs((n + nu) * a)));
                             }
                     return worst;
                 }});
    c.push_back({"finite_kernel_equivalence", 1e-9, [](bool) {
                     std::mt19937_64 rng(11);
                     std::uniform_real_distribution<double> ux(0.05, 12.0), um(0.2, 3.0);
                     double worst = 0.0;
                     for (int N : {6, 10})
                         for (int nu = 0; nu <= 2; ++nu)
                             for (int nf = 1; nf <= 3; ++nf)
                                 for (int r = 0; r < 5; ++r) {
                                     FiniteEnsembleParams p;
                                     p.N = N;
                                     p.nu = nu;
                                     for (int f = 0; f < nf; ++f) p.masses.push_back(um(rng) + 0.5 * f);
                                     double x = ux(rng), y = ux(rng);
                                     worst = std::max(worst, detail::rel_dev(massive_kernel_zero_temp(p, x, y), massive_kernel_alt(p, x, y)));
                                 }
                     return worst;
                 }});
    c.push_back({"limit_kernel_equivalence", 1e-10, [](bool) {
                     const std::vector<double> grid = {0.3, 1.0, 2.0, 5.0, 9.0};
                     const std::vector<double> mus = {0.5, 1.5, 4.0};
                     double worst = 0.0;
                     for (int nu = 0; nu <= 2; ++nu)
                         for (int nf = 0; nf <= 3; ++nf) {
                             MicroParams m{nu, std::vector<double>(mus.begin(), mus.begin() + nf)};
                             for (double z : grid)
                                 for (double e : grid) {
                                     double ref = z == e ? density(m, z) : kernel_zero_temp(m, z, e);
                                     double v = nf == 0 ? (z == e ? density(m, z) : kernel_zero_temp(m, z, e)) : kernel_unquenched(m, z, e);
                                     worst = std::max(worst, detail::rel_dev(v, ref));
                                 }
                         }
                     return worst;
                 }});
    c.push_back({"rho_k_determinant", 1e-9, [](bool) {
                     double worst = 0.0;
                     const std::vector<double> mus = {0.7, 2.2};
                     for (int nu = 0; nu <= 2; ++nu)
                         for (int nf = 0; nf <= 2; ++nf) {
                             MicroParams m{nu, std::vector<double>(mus.begin(), mus.begin() + nf)};
                             for (double z : {0.6, 2.3, 5.1}) worst = std::max(worst, detail::rel_dev(rho_k(m, {z}), density(m, z)));
                             for (auto [a, b] : std::vector<std::pair<double, double>>{{0.6, 2.3}, {1.4, 4.8}, {3.1, 7.5}}) {
                                 double det = density(m, a) * density(m, b) - kernel_zero_temp(m, a, b) * kernel_zero_temp(m, b, a);
                                 worst = std::max(worst, detail::rel_dev(rho_k(m, {a, b}), det));
                             }
                         }
                     return worst;
                 }});
    c.push_back({"rho_k_partitions", 1e-8, [](bool) {
                     double worst = 0.0;
                     const std::vector<double> mus = {0.7, 2.2};
                     for (int nu = 0; nu <= 2; ++nu)
                         for (int nf = 0; nf <= 2; ++nf) {
                             MicroParams m{nu, std::vector<double>(mus.begin(), mus.begin() + nf)};
                             for (auto pts : std::vector<std::vector<double>>{{0.6}, {3.3}, {0.6, 2.3}, {1.4, 4.8}})
                                 worst = std::max(worst, detail::rel_dev(rho_k_via_partitions(m, pts), rho_k(m, pts)));
                         }
                     return worst;
                 }});
    c.push_back({"consistency_condition", 1e-9, [](bool) {
                     double worst = 0.0;
                     const std::vector<double> mus = {0.7, 2.2};
                     for (int nu = 0; nu <= 2; ++nu)
                         for (int nf = 0; nf <= 2; ++nf) {
                             MicroParams m{nu, std::vector<double>(mus.begin(), mus.begin() + nf)};
                             for (auto [x, e] : std::vector<std::pair<std::vector<double>, std::vector<double>>>{
                                      {{0.9}, {2.7}}, {{0.9, 3.4}, {2.1, 5.6}}}) {
                                 CciResult r = consistency_condition_check(m, x, e);
                                 worst = std::max(worst, detail::rel_dev(r.lhs, r.rhs));
                             }
                         }
                     return worst;
                 }});
    c.push_back({"bessel_integral_closed_forms", 1e-10, [](bool) {
                     std::mt19937_64 rng(5);
                     std::uniform_real_distribution<double> ua(0.2, 6.0), ut(0.3, 2.0);
                     double worst = 0.0;
                     for (int r = 0; r < 10; ++r) {
                         const int nu = r % 3;
                         const double a = ua(rng), b = ua(rng), t = ut(rng);
                         auto fjj = [&](double s) { return bessel_j(nu, 2.0 * std::sqrt(a * s)) * bessel_j(nu, 2.0 * std::sqrt(b * s)); };
                         auto fij = [&](double s) { return bessel_i(nu, 2.0 * a * std::sqrt(s)) * bessel_j(nu, 2.0 * std::sqrt(b * s)); };
                         double qjj = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(fjj, 0.0, t, 15, 1e-14);
                         double qij = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(fij, 0.0, t, 15, 1e-14);
                         worst = std::max(worst, detail::rel_dev(bessel_integral_jj(nu, a, b, t), qjj));
                         worst = std::max(worst, detail::rel_dev(bessel_integral_ij(nu, a, b, t), qij));
                     }
                     return worst;
                 }});
    c.push_back({"kernel_relation", 1e-9, [](bool flip) {
                     double worst = 0.0;
                     const std::vector<double> mus = {0.7, 2.2};
                     for (int nu = 0; nu <= 2; ++nu)
                         for (int nf = 0; nf <= 2; ++nf) {
                             MicroParams m{nu, std::vector<double>(mus.begin(), mus.begin() + nf)};
                             for (auto [a, b] : std::vector<std::pair<double, double>>{{0.8, 0.8}, {0.8, 2.9}, {4.4, 1.3}})
                                 worst = std::max(worst, detail::rel_dev(kernel_via_partitions(m, a, b, flip),
                                                                         a == b ? density(m, a) : kernel_zero_temp(m, a, b)));
                         }
                     return worst;
                 }});
    // Largest negative density relative to the density scale; must be exactly 0.
    c.push_back({"density_positivity", 1e-15, [](bool flip) {
                     double worst = 0.0;
                     const std::vector<double> mus = {0.4, 1.3, 3.0};
                     for (int nu = 0; nu <= 4; ++nu)
                         for (int nf = 0; nf <= 3; ++nf) {
                             MicroParams m{nu, std::vector<double>(mus.begin(), mus.begin() + nf)};
                             for (int i = 1; i <= 40; ++i) {
                                 const double z = 0.25 * i;
                                 const double v = nf <= 1 ? kernel_via_partitions(m, z, z, flip) : density(m, z);
                                 if (v < 0.0) worst = std::max(worst, -v / (1.0 / M_PI));
                             }
                         }
                     return worst;
                 }});
    // Microscopic corrections fall off like 1/mu, so the check sits at mu = 1e5.
    c.push_back({"heavy_flavour_decoupling", 1e-4, [](bool) {
                     double worst = 0.0;
                     for (int nu = 0; nu <= 2; ++nu)
                         for (double z : {0.5, 1.7, 4.0, 8.5})
                             worst = std::max(worst, detail::rel_dev(density(MicroParams{nu, {1e5}}, z), density(MicroParams{nu, {}}, z)));
                     return worst;
                 }});
    c.push_back({"temperature_kernel_n1", 1e-10, [](bool) {
                     double worst = 0.0;
                     for (double al : {0.3, 1.7})
                         for (double x : {0.2, 1.5})
                             for (double y : {0.4, 2.0}) {
                                 FiniteEnsembleParams p;
                                 p.N = 1;
                                 p.temperature = TemperatureSpectrum{{al}};
                                 double ex = std::exp(-x - al) * bessel_i(0, 2.0 * std::sqrt(al * y));
                                 for (auto r : {KernelRoute::Residue, KernelRoute::SaddleContour}) {
                                     TempKernelOptions o;
                                     o.route = r;
                                     worst = std::max(worst, detail::rel_dev(quenched_kernel_temp(p, x, y, o), ex));
                                 }
                             }
                     return worst;
                 }});
    c.push_back({"temperature_continuity", 1e-4, [](bool) {
                     double worst = 0.0;
                     FiniteEnsembleParams z;
                     z.N = 8;
                     z.nu = 1;
                     FiniteEnsembleParams t = z;
                     t.temperature = TemperatureSpectrum{};
                     for (int i = 0; i < 8; ++i) t.temperature->a.push_back(1e-8 * (1.0 + 0.1 * i));
                     for (double x : {0.3, 2.0, 6.0, 15.0}) worst = std::max(worst, detail::rel_dev(finite_density(t, x), density_zero_temp(z, x)));
                     return worst;
                 }});
    c.push_back({"residue_vs_contour", 1e-9, [](bool) {
                     const std::vector<double> a = {0.3, 0.8, 1.1, 1.9};
                     auto f = [](std::complex<double> u) { return std::exp(-u) / (u + 2.0); };
                     auto flog = [](double u) { return LogValue::from(std::exp(-u) / (u + 2.0)); };
                     double r = residue_sum(a, flog).value;
                     double q = contour_quadrature(a, -2.0, f, 256);
                     return detail::rel_dev(q, r);
                 }});
    return c;
}

inline std::vector<VerifyRow> run_verify_suite(const VerifyOptions& opt = {}) {
    std::vector<VerifyRow> rows;
    for (const VerifyCheck& c : verify_checks()) {
        VerifyRow r;
        r.name = c.name;
        r.tolerance = c.tolerance;
        if (auto it = opt.tolerances.find(c.name); it != opt.tolerances.end()) r.tolerance = it->second;
        if (opt.tol) r.tolerance = *opt.tol;
        try {
            r.max_deviation = c.run(opt.inject_sign_flip);
            r.pass = std::isfinite(r.max_deviation) && r.max_deviation <= r.tolerance;
        } catch (const std::exception& e) {
            r.max_deviation = std::numeric_limits<double>::infinity();
            r.pass = false;
            r.note = e.what();
        }
        rows.push_back(r);
    }
    return rows;
}

}  // namespace tdirac
