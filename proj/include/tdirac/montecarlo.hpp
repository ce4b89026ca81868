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
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include "errors.hpp"
#include "finitekernel.hpp"
#include "logvalue.hpp"
#include "phase.hpp"

namespace tdirac {

struct SamplerConfig {
    FiniteEnsembleParams params;
    std::uint64_t n_samples = 1000;
    std::uint64_t seed = 1;
    int workers = 1;

    void validate() const {
        params.validate();
        if (params.N > 64) throw DomainError("SamplerConfig: N must be <= 64 for Monte Carlo runs");
        if (n_samples < 1 || n_samples > 100000000ULL) throw DomainError("SamplerConfig: n_samples must lie in [1, 1e8]");
        if (workers < 1) throw DomainError("SamplerConfig: workers must be positive");
    }
};

struct Binning {
    double lo = 0.0;
    double hi = 12.0;
    int bins = 60;

    void validate() const {
        if (!(hi > lo) || bins < 1) throw DomainError("Binning: need hi > lo and bins >= 1");
    }
    double width() const { return (hi - lo) / bins; }
    static Binning micro_default() { return {0.0, 12.0, 60}; }
};

// Microscopic map for histograms: zeta = 2 sqrt(N Xi x_raw).
struct MicroScaling {
    ScalingMap map;
    PhaseInfo phase;
};

struct SpectrumHistogram {
    std::vector<double> edges;
    std::vector<double> weighted_counts;
    double weight_total = 0.0;
    std::vector<double> stderr_;  // jackknife standard error of density()
    std::vector<double> n_eff;    // Kish effective sample size per bin
    double out_of_range = 0.0;    // weighted eigenvalues per sample outside the edges
    std::uint64_t samples = 0;
    std::uint64_t discarded = 0;
    int blocks = 0;

    int bins() const { return static_cast<int>(weighted_counts.size()); }
    double density(int i) const { return weighted_counts[i] / (weight_total * (edges[i + 1] - edges[i])); }
    double mass() const {
        double s = 0.0;
        for (double c : weighted_counts) s += c;
        return s / weight_total;
    }
};

namespace detail {

inline std::mt19937_64 sample_engine(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace detail

// Eigenvalues of W'W'^dagger for sample `index`, ascending. Empty on solver failure.
inline std::vector<double> sample_eigenvalues(const SamplerConfig& cfg, std::uint64_t index) {
    const int N = cfg.params.N, M = cfg.params.N + cfg.params.nu;
    auto eng = detail::sample_engine(cfg.seed, index);
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
    Eigen::MatrixXcd w(N, M);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < M; ++j) {
            double re = gauss(eng);
            double im = gauss(eng);
            w(i, j) = {re, im};
        }
    if (cfg.params.temperature)
        for (int n = 0; n < N; ++n) w(n, n) += std::sqrt(N * cfg.params.temperature->a[n]);
    Eigen::MatrixXcd h = w * w.adjoint();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) return {};
    std::vector<double> x(N);
    for (int i = 0; i < N; ++i) x[i] = std::max(0.0, es.eigenvalues()(i));
    return x;
}

// Visits samples in index order on the calling thread; returns the discard count.
inline std::uint64_t sample_spectrum(const SamplerConfig& cfg,
                                     const std::function<void(std::uint64_t, const std::vector<double>&)>& visit) {
    cfg.validate();
    std::uint64_t bad = 0;
    for (std::uint64_t i = 0; i < cfg.n_samples; ++i) {
        std::vector<double> x = sample_eigenvalues(cfg, i);
        if (x.empty())
            ++bad;
        else
            visit(i, x);
    }
    return bad;
}

// prod_f prod_j (x_j + m_f^2), raw masses; m^nu factors omitted.
inline LogValue reweight(const std::vector<double>& x, const std::vector<double>& masses, int nu) {
    (void)nu;
    double l = 0.0;
    for (double m : masses)
        for (double v : x) l += std::log(v + m * m);
    return LogValue::from_log(l);
}

namespace detail {

// Per-block sums relative to a block-local log reference.
struct BlockAcc {
    double ref = -std::numeric_limits<double>::infinity();
    double w = 0.0, out = 0.0;
    std::vector<double> c, c2;
    std::uint64_t n = 0, bad = 0;

    void rescale(double new_ref) {
        const double f = std::exp(ref - new_ref);
        w *= f;
        out *= f;
        for (double& v : c) v *= f;
        for (double& v : c2) v *= f * f;
        ref = new_ref;
    }
};

}  // namespace detail

// Weighted histogram of eigenvalues (or their zeta images) with jackknife errors.
// Samples are split into fixed contiguous blocks; each block is filled by one
// worker in index order and blocks are merged in order, so the result does not
// depend on the worker count.
inline SpectrumHistogram density_histogram(const SamplerConfig& cfg, const Binning& bin,
                                           const std::optional<MicroScaling>& scaling = std::nullopt) {
    cfg.validate();
    bin.validate();
    if (scaling) {
        if (scaling->phase.phase != Phase::Broken)
            throw PhaseError("density_histogram: microscopic scaling needs the broken phase", scaling->phase.t_c);
        scaling->map.validate();
    }
    const int nb = bin.bins;
    const int blocks = static_cast<int>(std::min<std::uint64_t>(100, cfg.n_samples));
    std::vector<detail::BlockAcc> acc(blocks);
    for (auto& a : acc) {
        a.c.assign(nb, 0.0);
        a.c2.assign(nb, 0.0);
    }
    auto block_range = [&](int b) {
        return std::pair<std::uint64_t, std::uint64_t>{cfg.n_samples * b / blocks, cfg.n_samples * (b + 1) / blocks};
    };
    auto run_block = [&](int b) {
        detail::BlockAcc& a = acc[b];
        auto [i0, i1] = block_range(b);
        std::vector<int> hits(nb);
        for (std::uint64_t i = i0; i < i1; ++i) {
            std::vector<double> x = sample_eigenvalues(cfg, i);
            if (x.empty()) {
                ++a.bad;
                continue;
            }
            ++a.n;
            double lw = reweight(x, cfg.params.masses, cfg.params.nu).log_mag;
            if (!(lw <= a.ref + 300.0)) a.rescale(lw);
            const double w = std::exp(lw - a.ref);
            std::fill(hits.begin(), hits.end(), 0);
            int outside = 0;
            for (double v : x) {
                const double u = scaling ? scaling->map.zeta_of(v) : v;
                const double k = std::floor((u - bin.lo) / bin.width());
                if (u < bin.lo || u >= bin.hi || k < 0 || k >= nb)
                    ++outside;
                else
                    ++hits[static_cast<int>(k)];
            }
            a.w += w;
            a.out += w * outside;
            for (int k = 0; k < nb; ++k)
                if (hits[k]) {
                    a.c[k] += w * hits[k];
                    a.c2[k] += w * w;
                }
        }
    };
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int b = next++; b < blocks; b = next++) run_block(b);
    };
    const int nthreads = std::min(cfg.workers, blocks);
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    double gref = -std::numeric_limits<double>::infinity();
    for (auto& a : acc)
        if (a.n > 0) gref = std::max(gref, a.ref);
    SpectrumHistogram h;
    h.blocks = blocks;
    h.edges.resize(nb + 1);
    for (int k = 0; k <= nb; ++k) h.edges[k] = bin.lo + (bin.hi - bin.lo) * k / nb;
    h.weighted_counts.assign(nb, 0.0);
    std::vector<double> c2(nb, 0.0);
    for (auto& a : acc) {
        h.discarded += a.bad;
        h.samples += a.n;
        if (a.n == 0) continue;
        a.rescale(gref);
        h.weight_total += a.w;
        h.out_of_range += a.out;
        for (int k = 0; k < nb; ++k) {
            h.weighted_counts[k] += a.c[k];
            c2[k] += a.c2[k];
        }
    }
    if (h.samples == 0 || !(h.weight_total > 0.0)) throw SamplingError("density_histogram: no usable samples");
    if (static_cast<double>(h.discarded) > 1e-6 * static_cast<double>(cfg.n_samples))
        throw SamplingError("density_histogram: decomposition failure rate above 1e-6");
    h.out_of_range /= h.weight_total;

    h.n_eff.assign(nb, 0.0);
    for (int k = 0; k < nb; ++k) {
        // Kish: (sum of weights)^2 / sum of squared weights, per sample hitting the bin
        if (c2[k] > 0.0) h.n_eff[k] = h.weighted_counts[k] * h.weighted_counts[k] / c2[k];
    }
    h.stderr_.assign(nb, 0.0);
    int used = 0;
    std::vector<std::vector<double>> loo;
    for (auto& a : acc) {
        if (a.n == 0) continue;
        const double wl = h.weight_total - a.w;
        if (!(wl > 0.0)) continue;
        std::vector<double> d(nb);
        for (int k = 0; k < nb; ++k) d[k] = (h.weighted_counts[k] - a.c[k]) / (wl * bin.width());
        loo.push_back(std::move(d));
        ++used;
    }
    if (used > 1) {
        for (int k = 0; k < nb; ++k) {
            double mean = 0.0;
            for (auto& d : loo) mean += d[k];
            mean /= used;
            double ss = 0.0;
            for (auto& d : loo) ss += (d[k] - mean) * (d[k] - mean);
            h.stderr_[k] = std::sqrt(ss * (used - 1) / used);
        }
    }
    return h;
}

// Raw-unit binning over [0, mean + 6 spread], from a 200-sample pilot run.
inline Binning raw_default_binning(const SamplerConfig& cfg, int bins = 60) {
    SamplerConfig pilot = cfg;
    pilot.n_samples = std::min<std::uint64_t>(200, cfg.n_samples);
    double s = 0.0, s2 = 0.0;
    std::uint64_t n = 0;
    sample_spectrum(pilot, [&](std::uint64_t, const std::vector<double>& x) {
        for (double v : x) {
            s += v;
            s2 += v * v;
            ++n;
        }
    });
    const double mean = s / n, sd = std::sqrt(std::max(0.0, s2 / n - mean * mean));
    return {0.0, mean + 6.0 * sd, bins};
}

}  // namespace tdirac
