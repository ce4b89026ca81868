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

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "finitekernel.hpp"
#include "harness.hpp"
#include "microkernel.hpp"
#include "montecarlo.hpp"
#include "phase.hpp"
#include "verify.hpp"

namespace tdirac {

// Verification failures map to their own exit code.
struct VerifyFailure : std::runtime_error {
    ResultTable table;
    VerifyFailure(const std::string& what, ResultTable t) : std::runtime_error(what), table(std::move(t)) {}
};

namespace detail {

// Finite-N columns: model.N_list, or model.N alone when a spectrum is set.
inline std::vector<int> sizes(const RunConfig& cfg) {
    std::vector<int> ns = cfg.n_list();
    if (ns.empty() && cfg.has_spectrum()) ns.push_back(cfg.N());
    return ns;
}

inline std::string join_points(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + format_number(v[i]);
    return s;
}

inline Json maybe(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline int workers(const RunConfig& cfg) { return cfg.doc["mc"]["workers"].get<int>(); }

}  // namespace detail

inline ResultTable cmd_phase(const RunConfig& cfg) {
    ResultTable t;
    const Json& scan = cfg.doc["scan"];
    if (!scan.is_null()) {
        t.columns = {"a", "t_c", "xi", "phase"};
        const double lo = scan["from"].get<double>(), hi = scan["to"].get<double>();
        const int n = scan["points"].get<int>();
        for (int i = 0; i < n; ++i) {
            const double a = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
            PhaseInfo ph = condensate(TemperatureSpectrum{std::vector<double>(cfg.N(), a)}, 1e-14);
            t.rows.push_back({a, ph.t_c, ph.xi, to_string(ph.phase)});
        }
        return t;
    }
    if (!cfg.has_spectrum()) throw ConfigError("phase: model.spectrum is required");
    t.columns = {"t_c", "xi", "phase"};
    PhaseInfo ph = condensate(*cfg.spectrum(cfg.N()), 1e-14);
    t.rows.push_back({ph.t_c, ph.xi, to_string(ph.phase)});
    return t;
}

inline ResultTable cmd_density(const RunConfig& cfg) {
    ResultTable t;
    const std::vector<double> zs = cfg.grid();
    const std::vector<int> ns = detail::sizes(cfg);
    const MicroParams mp{cfg.nu(), cfg.masses()};
    t.columns = {"zeta"};
    for (int n : ns) t.columns.push_back("density_N" + std::to_string(n));
    t.columns.push_back("density_limit");
    std::vector<std::vector<Json>> rows(zs.size());
    std::vector<FiniteEnsembleParams> ps;
    std::vector<PhaseInfo> phs;
    for (int n : ns) {
        ps.push_back(cfg.params(n));
        phs.push_back(cfg.phase(n));
        if (ps.back().temperature && phs.back().phase != Phase::Broken)
            throw PhaseError("density: spectrum at N = " + std::to_string(n) + " is not in the broken phase (t_c = " +
                                 format_number(phs.back().t_c) + ")",
                             phs.back().t_c);
    }
    const TempKernelOptions opt = cfg.kernel_options();
    parallel_for(static_cast<int>(zs.size()), detail::workers(cfg), [&](int i) {
        std::vector<Json> r{zs[i]};
        for (std::size_t k = 0; k < ns.size(); ++k) r.push_back(micro_density_finite(ps[k], phs[k], zs[i], opt));
        r.push_back(density(mp, zs[i]));
        rows[i] = std::move(r);
    });
    t.rows = std::move(rows);
    return t;
}

// sup-norm distance of finite-N densities to the limit on the grid.
inline ResultTable cmd_converge(const RunConfig& cfg) {
    ResultTable t;
    std::vector<int> ns = detail::sizes(cfg);
    if (ns.empty()) ns = {16, 32, 64, 128};
    const std::vector<double> zs = cfg.grid();
    const MicroParams mp{cfg.nu(), cfg.masses()};
    std::vector<double> lim(zs.size());
    for (std::size_t i = 0; i < zs.size(); ++i) lim[i] = density(mp, zs[i]);
    t.columns = {"N", "sup_error", "max_rel_error"};
    const TempKernelOptions opt = cfg.kernel_options();
    bool monotone = true;
    double prev = std::numeric_limits<double>::infinity();
    for (int n : ns) {
        FiniteEnsembleParams p = cfg.params(n);
        PhaseInfo ph = cfg.phase(n);
        std::vector<double> err(zs.size()), rel(zs.size());
        parallel_for(static_cast<int>(zs.size()), detail::workers(cfg), [&](int i) {
            const double v = micro_density_finite(p, ph, zs[i], opt);
            err[i] = std::fabs(v - lim[i]);
            rel[i] = err[i] / std::fabs(lim[i]);
        });
        const double sup = *std::max_element(err.begin(), err.end());
        monotone = monotone && sup < prev;
        prev = sup;
        t.rows.push_back({n, sup, *std::max_element(rel.begin(), rel.end())});
    }
    t.metadata["strictly_decreasing"] = monotone;
    return t;
}

inline ResultTable cmd_correlate(const RunConfig& cfg) {
    ResultTable t;
    std::vector<std::vector<double>> tuples;
    if (cfg.doc["points"].is_null())
        tuples = {{1.0}, {2.0}, {1.0, 2.0}, {1.5, 1.5}, {0.8, 2.5, 4.0}};
    else
        for (const Json& p : cfg.doc["points"]) tuples.push_back(p.get<std::vector<double>>());
    const std::vector<int> ns = detail::sizes(cfg);
    const MicroParams mp{cfg.nu(), cfg.masses()};
    for (auto& tp : tuples) {
        if (tp.size() > 6) throw ConfigError("correlate: at most 6 points per tuple");
        if (tp.size() > 4 && ns.empty()) throw ConfigError("correlate: limiting correlations need k <= 4");
    }
    t.columns = {"k", "points", "R_limit", "R_limit_partitions", "connected_limit"};
    for (int n : ns) t.columns.push_back("R_N" + std::to_string(n));
    const TempKernelOptions opt = cfg.kernel_options();
    std::vector<std::vector<Json>> rows(tuples.size());
    parallel_for(static_cast<int>(tuples.size()), detail::workers(cfg), [&](int i) {
        const auto& tp = tuples[i];
        const int k = static_cast<int>(tp.size());
        std::vector<Json> r{k, detail::join_points(tp)};
        const bool distinct = k < 2 || std::fabs(tp[0] - tp[1]) > 1e-12;
        if (k <= 4) {
            r.push_back(rho_k(mp, tp));
            if (k <= 3 && mp.n_flavors() + 2 * k <= 8 && (k == 1 || distinct))
                r.push_back(rho_k_via_partitions(mp, tp));
            else
                r.push_back(nullptr);
        } else {
            r.push_back(nullptr);
            r.push_back(nullptr);
        }
        if (k == 2)
            r.push_back(rho_k(mp, tp) - density(mp, tp[0]) * density(mp, tp[1]));
        else
            r.push_back(nullptr);
        for (int n : ns) r.push_back(micro_correlation_finite(cfg.params(n), cfg.phase(n), tp, opt));
        rows[i] = std::move(r);
    });
    t.rows = std::move(rows);
    return t;
}

inline ResultTable cmd_kernel_eval(const RunConfig& cfg) {
    ResultTable t;
    std::vector<std::pair<double, double>> pairs;
    if (cfg.doc["points"].is_null()) {
        const std::vector<double> g = {0.3, 1.0, 2.0, 5.0, 9.0};
        for (double a : g)
            for (double b : g) pairs.push_back({a, b});
    } else {
        for (const Json& p : cfg.doc["points"]) {
            auto v = p.get<std::vector<double>>();
            if (v.size() != 2) throw ConfigError("kernel-eval: points must be (zeta, eta) pairs");
            pairs.push_back({v[0], v[1]});
        }
    }
    const std::vector<int> ns = detail::sizes(cfg);
    const MicroParams mp{cfg.nu(), cfg.masses()};
    t.columns = {"zeta", "eta", "kernel_limit", "kernel_unquenched"};
    for (int n : ns) {
        t.columns.push_back("kernel_N" + std::to_string(n));
        t.columns.push_back("condition_N" + std::to_string(n));
        t.columns.push_back("route_N" + std::to_string(n));
    }
    const TempKernelOptions opt = cfg.kernel_options();
    std::vector<std::vector<Json>> rows(pairs.size());
    parallel_for(static_cast<int>(pairs.size()), detail::workers(cfg), [&](int i) {
        auto [z, e] = pairs[i];
        const bool diag = std::fabs(z - e) <= 1e-6 * std::max(1.0, z);
        std::vector<Json> r{z, e};
        r.push_back(diag ? density(mp, z) : kernel_zero_temp(mp, z, e));
        r.push_back(mp.n_flavors() == 0 ? r.back() : Json(kernel_unquenched(mp, z, e)));
        for (int n : ns) {
            KernelEval k = micro_kernel_finite(cfg.params(n), cfg.phase(n), z, e, opt);
            if (!(k.condition <= kMaxCondition))
                throw ConditioningError("kernel-eval: finite-N kernel ill-conditioned at (" + format_number(z) + ", " +
                                            format_number(e) + ")",
                                        k.condition);
            r.push_back(k.value);
            r.push_back(k.condition);
            r.push_back(cfg.has_spectrum() ? to_string(k.route) : "zero-temperature");
        }
        rows[i] = std::move(r);
    });
    t.rows = std::move(rows);
    return t;
}

namespace detail {

// Bin average of a density by 5-point Gauss-Legendre.
template <class F>
double bin_average(F&& f, double lo, double hi) {
    static const double x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640};
    static const double w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                                0.2369268850561891};
    double s = 0.0;
    for (int q = 0; q < 5; ++q) s += w[q] * f(0.5 * (lo + hi) + 0.5 * (hi - lo) * x[q]);
    return 0.5 * s;
}

}  // namespace detail

inline ResultTable cmd_mc(const RunConfig& cfg) {
    const Json& m = cfg.doc["mc"];
    const int N = cfg.N();
    FiniteEnsembleParams micro = cfg.params(N);  // microscopic masses
    PhaseInfo ph = cfg.phase(N);
    const bool use_micro = m["micro"].get<bool>();
    if (use_micro && micro.temperature && ph.phase != Phase::Broken)
        throw PhaseError("mc: microscopic binning needs the broken phase (t_c = " + format_number(ph.t_c) + ")", ph.t_c);
    ScalingMap map{N, micro.temperature ? ph.xi : 1.0};
    SamplerConfig sc;
    sc.params = detail::raw_masses(micro, map);
    sc.n_samples = m["samples"].get<std::uint64_t>();
    sc.seed = m["seed"].get<std::uint64_t>();
    sc.workers = m["workers"].get<int>();
    Binning bin{m["lo"].get<double>(), m["hi"].get<double>(), m["bins"].get<int>()};
    SpectrumHistogram h = use_micro ? density_histogram(sc, bin, MicroScaling{map, ph}) : density_histogram(sc, bin);

    ResultTable t;
    const bool overlay = m["overlay"].get<bool>();
    t.columns = {"bin_lo", "bin_hi", "density", "stderr", "n_eff"};
    if (overlay) {
        t.columns.push_back("analytic");
        t.columns.push_back("z_score");
    }
    std::vector<double> analytic(h.bins(), 0.0);
    if (overlay) {
        const TempKernelOptions opt = cfg.kernel_options();
        parallel_for(h.bins(), sc.workers, [&](int k) {
            analytic[k] = detail::bin_average(
                [&](double u) {
                    return use_micro ? micro_density_finite(micro, ph, u, opt) : finite_density(sc.params, u, opt);
                },
                h.edges[k], h.edges[k + 1]);
        });
    }
    int within = 0;
    for (int k = 0; k < h.bins(); ++k) {
        std::vector<Json> r{h.edges[k], h.edges[k + 1], h.density(k), h.stderr_[k], h.n_eff[k]};
        if (overlay) {
            const double d = h.density(k) - analytic[k];
            const double z = h.stderr_[k] > 0.0 ? d / h.stderr_[k] : (d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
            if (std::fabs(z) <= 3.0) ++within;
            r.push_back(analytic[k]);
            r.push_back(detail::maybe(z));
        }
        t.rows.push_back(std::move(r));
    }
    t.metadata["samples"] = h.samples;
    t.metadata["discarded"] = h.discarded;
    t.metadata["discard_rate"] = static_cast<double>(h.discarded) / static_cast<double>(sc.n_samples);
    t.metadata["out_of_range_per_sample"] = h.out_of_range;
    t.metadata["histogram_mass"] = h.mass();
    t.metadata["jackknife_blocks"] = h.blocks;
    if (overlay) t.metadata["fraction_within_3sigma"] = static_cast<double>(within) / h.bins();
    return t;
}

inline ResultTable cmd_verify(const RunConfig& cfg) {
    VerifyOptions o;
    for (auto& [k, v] : cfg.doc["verify"]["tolerances"].items()) o.tolerances[k] = v.get<double>();
    if (!cfg.doc["tol"].is_null()) o.tol = cfg.doc["tol"].get<double>();
    o.inject_sign_flip = cfg.doc["verify"]["inject_sign_flip"].get<bool>();
    ResultTable t;
    t.columns = {"identity", "max_deviation", "tolerance", "pass", "note"};
    int failed = 0;
    for (const VerifyRow& r : run_verify_suite(o)) {
        t.rows.push_back({r.name, detail::maybe(r.max_deviation), r.tolerance, r.pass, r.note});
        if (!r.pass) ++failed;
    }
    t.metadata["failed"] = failed;
    if (failed) throw VerifyFailure("verify: " + std::to_string(failed) + " identity check(s) failed", t);
    return t;
}

inline ResultTable run_command(const RunConfig& cfg) {
    cfg.validate();
    const std::string c = cfg.doc["command"].get<std::string>();
    if (c == "phase") return cmd_phase(cfg);
    if (c == "density") return cmd_density(cfg);
    if (c == "converge") return cmd_converge(cfg);
    if (c == "correlate") return cmd_correlate(cfg);
    if (c == "kernel-eval") return cmd_kernel_eval(cfg);
    if (c == "mc") return cmd_mc(cfg);
    return cmd_verify(cfg);
}

}  // namespace tdirac
