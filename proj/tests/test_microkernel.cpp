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


#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tdirac/finitekernel.hpp"
#include "tdirac/microkernel.hpp"

using namespace tdirac;

namespace {

double std_j(int n, double z) { return std::cyl_bessel_j(double(n), z); }
double std_i(int n, double z) { return std::cyl_bessel_i(double(n), z); }

double rel(double a, double b) { return std::fabs(a - b) / std::fabs(b); }

// sqrt(z)/2 [J_nu^2 - J_{nu-1} J_{nu+1}] * z, built from the std library.
double rho_quenched(int nu, double z) {
    double jm = nu == 0 ? -std_j(1, z) : std_j(nu - 1, z);
    return 0.5 * z * (std_j(nu, z) * std_j(nu, z) - jm * std_j(nu + 1, z));
}

MicroParams flavours(int nu, int nf) {
    static const double pool[] = {0.7, 1.9, 3.4, 5.2};
    MicroParams m{nu, {}};
    for (int f = 0; f < nf; ++f) m.mu.push_back(pool[f]);
    return m;
}

}  // namespace

TEST(BesselKernel, Diagonal) {
    EXPECT_NEAR(b_jj(0, 2.0, 2.0), std_j(0, 2) * std_j(0, 2) + std_j(1, 2) * std_j(1, 2), 1e-14);
    for (int nu = 1; nu <= 3; ++nu) EXPECT_LT(std::fabs(b_jj(nu, 1e-4, 1e-4)), 1e-8);
    {
        // near-diagonal branch against the off-diagonal form in long double
        const long double z = 3.0L, e = 3.0L + 1e-7L;
        long double ref = std::sqrt(z * e) *
                          (z * std::cyl_bessel_jl(2.0L, z) * std::cyl_bessel_jl(1.0L, e) -
                           e * std::cyl_bessel_jl(2.0L, e) * std::cyl_bessel_jl(1.0L, z)) /
                          (z * z - e * e);
        EXPECT_NEAR(b_jj(1, 3.0, 3.0 + 1e-7), (double)ref, 1e-11);
    }
    EXPECT_THROW(b_jj(0, 0.0, 1.0), DomainError);
}

TEST(BesselKernel, Plateau) {
    double s = 0.0;
    int n = 0;
    for (double z = 50.0; z <= 60.0; z += 0.01, ++n) s += density(MicroParams{0, {}}, z);
    EXPECT_LT(std::fabs(s / n - 1.0 / M_PI), 5e-3);
}

TEST(MixedKernel, SmallMassAndQuadrature) {
    for (double z : {0.5, 2.0, 7.0}) EXPECT_NEAR(b_ij(0, 1e-9, z), std_j(1, z) / z, 1e-12);
    // b_ij(mu, z) = (1/2) int_0^1 I_nu(mu sqrt t) J_nu(z sqrt t) dt
    for (int nu : {0, 1, 3})
        for (auto [mu, z] : {std::pair{0.4, 1.1}, std::pair{2.5, 0.3}, std::pair{3.0, 6.0}}) {
            auto f = [&](double t) { return 0.5 * std_i(nu, mu * std::sqrt(t)) * std_j(nu, z * std::sqrt(t)); };
            double q = integrate_interval(f, 0.0, 1.0, 1e-14).value;
            EXPECT_NEAR(b_ij(nu, mu, z), q, 1e-12 * std::max(1.0, std::fabs(q)));
        }
    EXPECT_NE(b_ij(0, 1.0, 2.0), b_ij(0, 2.0, 1.0));
    EXPECT_THROW(b_ij(0, -1.0, 1.0), DomainError);
}

TEST(BesselIntegrals, ClosedFormsAgainstQuadrature) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.05, 5.0);
    std::uniform_int_distribution<int> un(0, 3);
    for (int r = 0; r < 25; ++r) {
        int nu = un(rng);
        double rho = u(rng), eta = u(rng), tb = u(rng), mu = u(rng);
        auto fjj = [&](double t) { return tb * std_j(nu, std::sqrt(4 * eta * tb * t)) * std_j(nu, std::sqrt(4 * rho * tb * t)); };
        auto fij = [&](double t) { return tb * std_i(nu, std::sqrt(4 * mu * mu * tb * t)) * std_j(nu, std::sqrt(4 * eta * tb * t)); };
        double qjj = integrate_interval(fjj, 0.0, 1.0, 1e-14).value, qij = integrate_interval(fij, 0.0, 1.0, 1e-14).value;
        EXPECT_LE(std::fabs(bessel_integral_jj(nu, rho, eta, tb) - qjj), 1e-10 * std::max(1.0, std::fabs(qjj)));
        EXPECT_LE(std::fabs(bessel_integral_ij(nu, mu, eta, tb) - qij), 1e-10 * std::max(1.0, std::fabs(qij)));
    }
}

TEST(Partition, SmallFlavourCounts) {
    EXPECT_DOUBLE_EQ(partition_micro({1, {}}).value(), 1.0);
    for (int nu : {0, 2}) EXPECT_LT(rel(partition_micro({nu, {1.7}}).value(), std_i(nu, 1.7)), 1e-13);
    EXPECT_NEAR(partition_micro({0, {1e-8}}).value(), 1.0, 1e-14);
    const double a = 0.8, b = 2.3;
    double two = (std_i(0, a) * b * std_i(1, b) - std_i(0, b) * a * std_i(1, a)) / (b * b - a * a);
    EXPECT_LT(rel(partition_micro({0, {a, b}}).value(), two), 1e-12);
}

TEST(Partition, FiniteNRatio) {
    // Z_N(m1)/Z_N(m2) with m^2 = mu^2/(4N) tends to I_nu(mu1)/I_nu(mu2), O(1/N).
    const int N = 256;
    for (int nu : {0, 1}) {
        auto z = [&](double mu) {
            FiniteEnsembleParams p;
            p.N = N;
            p.nu = nu;
            p.masses = {mu / std::sqrt(4.0 * N)};
            return partition_zero_temp(p);
        };
        double ratio = (z(1.2) / z(3.0)).value();
        EXPECT_LT(rel(ratio, std_i(nu, 1.2) / std_i(nu, 3.0)), 1e-2);
    }
}

TEST(LimitKernel, Reductions) {
    for (int nu : {0, 2}) {
        EXPECT_NEAR(kernel_unquenched({nu, {}}, 1.3, 4.0), b_jj(nu, 1.3, 4.0), 1e-15);
        EXPECT_NEAR(kernel_zero_temp({nu, {}}, 1.3, 4.0), b_jj(nu, 1.3, 4.0), 1e-14);
        for (double z : {0.3, 2.0, 9.0}) EXPECT_NEAR(density({nu, {}}, z), rho_quenched(nu, z), 1e-13);
    }
    EXPECT_NEAR(density({0, {}}, 1e-3) / 5e-4, 1.0, 1e-6);
    EXPECT_THROW(kernel_zero_temp({0, {}}, 2.0, 2.0), DomainError);
}

TEST(LimitKernel, DeterminantSizesAgree) {
    const double g[] = {0.3, 1.0, 2.0, 5.0, 9.0};
    for (int nu = 0; nu <= 2; ++nu)
        for (int nf = 0; nf <= 3; ++nf) {
            MicroParams m = flavours(nu, nf);
            for (double z : g)
                for (double e : g) {
                    double a = kernel_unquenched(m, z, e);
                    double b = z == e ? density(m, z) : kernel_zero_temp(m, z, e);
                    EXPECT_LE(std::fabs(a - b), 1e-10 * std::fabs(b)) << nu << " " << nf << " " << z << " " << e;
                }
            EXPECT_NEAR(kernel_zero_temp(m, 1.1, 3.6), kernel_zero_temp(m, 3.6, 1.1), 1e-14);
        }
}

TEST(LimitKernel, HeavyFlavourDecouplesAtOrderOneOverMu) {
    // The first correction is O(1/mu): at mu = 1e5 it is below 1e-4, and it
    // drops tenfold per decade.
    for (int nu = 0; nu <= 2; ++nu)
        for (double z : {0.5, 2.0, 6.0}) {
            double q = density({nu, {}}, z);
            EXPECT_LT(rel(density({nu, {1e5}}, z), q), 1e-4);
            double d3 = std::fabs(density({nu, {1e3}}, z) - q), d4 = std::fabs(density({nu, {1e4}}, z) - q);
            EXPECT_NEAR(d3 / d4, 10.0, 0.5);
        }
}

TEST(LimitKernel, PositivityAndFlavourPermutation) {
    for (int nu = 0; nu <= 4; ++nu)
        for (int nf = 0; nf <= 3; ++nf) {
            MicroParams m = flavours(nu, nf);
            for (double z = 0.1; z <= 100.0; z += 0.1) ASSERT_GE(density(m, z), 0.0) << nu << " " << nf << " " << z;
        }
    MicroParams a{1, {0.7, 1.9, 3.4}}, b{1, {3.4, 0.7, 1.9}};
    EXPECT_NEAR(density(a, 2.2), density(b, 2.2), 1e-12 * density(a, 2.2));
    EXPECT_NEAR(kernel_zero_temp(a, 0.8, 2.2), kernel_zero_temp(b, 0.8, 2.2), 1e-12);
    EXPECT_NEAR(partition_micro(a).value(), partition_micro(b).value(), 1e-12 * partition_micro(a).value());
}

TEST(KPoint, Identities) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.2, 8.0);
    for (int nu = 0; nu <= 2; ++nu)
        for (int nf = 0; nf <= 2; ++nf) {
            MicroParams m = flavours(nu, nf);
            for (int r = 0; r < 5; ++r) {
                double z1 = u(rng), z2 = u(rng);
                EXPECT_LT(rel(rho_k(m, {z1}), density(m, z1)), 1e-10);
                double k12 = kernel_zero_temp(m, z1, z2);
                double det = density(m, z1) * density(m, z2) - k12 * kernel_zero_temp(m, z2, z1);
                double r2 = rho_k(m, {z1, z2});
                // det cancels when z1 and z2 are both near the hard edge
                EXPECT_LE(std::fabs(r2 - det), 1e-9 * density(m, z1) * density(m, z2));
                EXPECT_LE(std::fabs(rho_k_via_partitions(m, {z1}) - density(m, z1)), 1e-8 * density(m, z1));
                EXPECT_LE(std::fabs(rho_k_via_partitions(m, {z1, z2}) - r2), 1e-8 * std::fabs(r2));
                EXPECT_LE(std::fabs(kernel_via_partitions(m, z1, z2) - k12), 1e-9 * std::max(std::fabs(k12), 1e-3));
            }
        }
    const double z = 1.7;
    EXPECT_NEAR(rho_k_via_partitions({0, {}}, {z}), 0.5 * z * (std_j(0, z) * std_j(0, z) + std_j(1, z) * std_j(1, z)), 1e-13);
    EXPECT_NEAR(kernel_via_partitions({0, {}}, 1.2, 3.1), b_jj(0, 1.2, 3.1), 1e-13);
    EXPECT_GT(kernel_via_partitions({1, {0.9}}, 2.0, 2.0), 0.0);
    EXPECT_THROW(rho_k({0, {}}, {1, 2, 3, 4, 5}), DomainError);
}

TEST(Consistency, DeterminantOfPairs) {
    CciResult one = consistency_condition_check({1, {0.8}}, {1.3}, {2.9});
    EXPECT_NEAR(one.lhs, one.rhs, 1e-13 * std::fabs(one.lhs));
    for (auto m : {MicroParams{0, {}}, MicroParams{1, {0.8}}, MicroParams{2, {0.6, 2.1}}}) {
        CciResult c = consistency_condition_check(m, {0.7, 2.4}, {1.5, 3.8});
        EXPECT_LE(std::fabs(c.lhs - c.rhs), 1e-9 * std::fabs(c.lhs)) << m.nu;
    }
}

TEST(MicroParamsType, Invariants) {
    EXPECT_THROW((MicroParams{0, {1.0, 1.0}}.validate()), DomainError);
    EXPECT_THROW((MicroParams{17, {}}.validate()), DomainError);
    EXPECT_THROW((MicroParams{0, {-1.0}}.validate()), DomainError);
}
