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

#include "tdirac/phase.hpp"

using namespace tdirac;

TEST(CriticalValue, ConstantAndPair) {
    EXPECT_DOUBLE_EQ(critical_value({std::vector<double>(7, 0.5)}), 2.0);
    EXPECT_DOUBLE_EQ(critical_value({std::vector<double>(3, 2.0)}), 0.5);
    EXPECT_DOUBLE_EQ(critical_value({{0.2, 0.4}}), 3.75);
}

TEST(CriticalValue, RejectsNonPositive) {
    EXPECT_THROW(critical_value({{0.2, 0.0}}), DomainError);
    EXPECT_THROW(critical_value({{}}), DomainError);
}

TEST(Condensate, ConstantSpectra) {
    PhaseInfo b = condensate({std::vector<double>(5, 0.5)});
    EXPECT_EQ(b.phase, Phase::Broken);
    EXPECT_NEAR(b.xi, 0.5, 1e-14);

    PhaseInfo s = condensate({std::vector<double>(5, 2.0)});
    EXPECT_EQ(s.phase, Phase::Symmetric);
    EXPECT_EQ(s.xi, 0.0);

    PhaseInfo c = condensate({std::vector<double>(4, 1.0)});
    EXPECT_EQ(c.phase, Phase::Critical);
    EXPECT_EQ(c.xi, 0.0);

    for (double a : {0.01, 0.3, 0.9}) EXPECT_NEAR(condensate({{a, a, a}}).xi, 1.0 - a, 1e-13);
}

TEST(Condensate, PairRoot) {
    // 1 = (1/(0.2+t) + 1/(0.4+t))/2  <=>  t^2 - 0.4 t - 0.22 = 0.
    PhaseInfo p = condensate({{0.2, 0.4}});
    EXPECT_EQ(p.phase, Phase::Broken);
    EXPECT_NEAR(p.xi, 0.2 + std::sqrt(0.26), 1e-14);
    EXPECT_LE(std::fabs(saddle_function({{0.2, 0.4}}, p.xi)), 1e-12);
}

TEST(Condensate, SaddleResidualAndMonotone) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.02, 1.2);
    for (int r = 0; r < 50; ++r) {
        TemperatureSpectrum s;
        for (int n = 0; n < 12; ++n) s.a.push_back(u(rng));
        PhaseInfo p = condensate(s);
        if (p.phase != Phase::Broken) continue;
        EXPECT_GT(p.t_c, 1.0);
        EXPECT_GT(p.xi, 0.0);
        EXPECT_LE(std::fabs(saddle_function(s, p.xi)), 1e-12);
        for (double t = 0.0; t < 3.0; t += 0.37) EXPECT_LT(saddle_function(s, t), saddle_function(s, t + 0.1));
    }
}

TEST(Condensate, ShiftRelation) {
    TemperatureSpectrum s{{0.05, 0.1, 0.2, 0.3}};
    PhaseInfo p = condensate(s);
    ASSERT_EQ(p.phase, Phase::Broken);
    const double c = 0.02;
    ASSERT_GT(p.xi, c);
    TemperatureSpectrum t = s;
    for (double& v : t.a) v += c;
    EXPECT_NEAR(condensate(t).xi, p.xi - c, 1e-12);
}

TEST(Condensate, ToleranceRange) {
    EXPECT_THROW(condensate({{0.5}}, 1e-5), DomainError);
    EXPECT_THROW(condensate({{0.5}}, 1e-16), DomainError);
    EXPECT_NEAR(condensate({{0.2, 0.4}}, 1e-8).xi, 0.2 + std::sqrt(0.26), 1e-8);
}

TEST(Spectrum, Distinctness) {
    EXPECT_THROW((TemperatureSpectrum{{0.3, 0.3}}.validate_distinct()), DomainError);
    EXPECT_NO_THROW((TemperatureSpectrum{{0.3, 0.31}}.validate_distinct()));
}
