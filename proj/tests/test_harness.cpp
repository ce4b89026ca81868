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
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "tdirac/commands.hpp"

using namespace tdirac;

namespace {

RunConfig make(Json user) {
    RunConfig c = RunConfig::from_json(user);
    c.validate();
    return c;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string tmp(const std::string& name) { return ::testing::TempDir() + "tdirac_" + name; }

int cli(const std::string& args) {
    std::string cmd = std::string(TDIRAC_CLI) + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::vector<std::string> data_lines(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line))
        if (!line.empty() && line[0] != '#') out.push_back(line);
    return out;
}

}  // namespace

TEST(Presets, Shapes) {
    auto u = spectrum_from_preset("uniform(0.5)", 3);
    EXPECT_EQ(u.a, std::vector<double>(3, 0.5));
    auto l = spectrum_from_preset("linspace(0.1, 0.5)", 5);
    EXPECT_NEAR(l.a[2], 0.3, 1e-15);
    auto g = spectrum_from_preset("logspace(0.1,0.4)", 3);
    EXPECT_NEAR(g.a[1], 0.2, 1e-15);
    EXPECT_DOUBLE_EQ(g.a[2], 0.4);
    auto m = spectrum_from_preset("matsubara(0.1)", 2);
    EXPECT_NEAR(m.a[0], M_PI * M_PI * 0.01, 1e-16);
    EXPECT_EQ(spectrum_from_preset("0.2, 0.4", 2).a, (std::vector<double>{0.2, 0.4}));
    EXPECT_THROW(spectrum_from_preset("0.2,0.4", 3), ConfigError);
    EXPECT_THROW(spectrum_from_preset("uniform(0)", 3), ConfigError);
    EXPECT_THROW(spectrum_from_preset("cosine(1)", 3), ConfigError);
    EXPECT_THROW(spectrum_from_preset("logspace(1)", 3), ConfigError);
}

TEST(Config, NullMeansDefault) {
    RunConfig c = make({{"command", "density"}, {"scan", nullptr}, {"model", {{"nu", nullptr}, {"N", 8}}}});
    EXPECT_TRUE(c.doc["scan"].is_null());
    EXPECT_EQ(c.nu(), 0);
    EXPECT_EQ(c.N(), 8);
}

TEST(Config, AggregatesAllProblems) {
    RunConfig c = RunConfig::from_json({{"command", "density"},
                                        {"model", {{"N", 0}, {"nu", -1}, {"masses", {1.0, 1.0}}}},
                                        {"route", "sideways"},
                                        {"output", {{"format", "xml"}}}});
    try {
        c.validate();
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        std::string m = e.what();
        for (const char* key : {"model.N", "model.nu", "model.masses", "route", "output.format"})
            EXPECT_NE(m.find(key), std::string::npos) << key;
    }
    EXPECT_THROW(make({{"command", "density"}, {"model", {{"N", "sixteen"}}}}), ConfigError);
    EXPECT_THROW(make({{"command", "nope"}}), ConfigError);
}

TEST(Output, NumbersRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, 2.718281828459045, 1e-300, 6.02214076e23}) EXPECT_EQ(std::stod(format_number(v)), v);
    EXPECT_EQ(format_number(0.1), "0.10000000000000001");
}

TEST(Output, CsvAndJsonLayout) {
    RunConfig c = make({{"command", "phase"}, {"model", {{"N", 4}, {"spectrum", "uniform(0.5)"}}}});
    ResultTable t = run_command(c);
    std::string csv = render(t, c, 1.5);
    EXPECT_EQ(csv.rfind("# tdirac ", 0), 0u);
    EXPECT_NE(csv.find("# config: {"), std::string::npos);
    EXPECT_NE(csv.find("# wall_time_s: 1.5"), std::string::npos);
    EXPECT_EQ(data_lines(csv), (std::vector<std::string>{"t_c,xi,phase", "2,0.5,Broken"}));

    c.doc["output"]["format"] = "json";
    Json j = Json::parse(render(t, c, std::nullopt));
    EXPECT_EQ(j["columns"], Json({"t_c", "xi", "phase"}));
    EXPECT_EQ(j["rows"][0][2], "Broken");
    EXPECT_EQ(j["metadata"]["config"]["model"]["N"], 4);
    EXPECT_FALSE(j["metadata"].contains("wall_time_s"));
}

TEST(Commands, PhaseScanCrossesTransition) {
    RunConfig c = make({{"command", "phase"},
                        {"model", {{"N", 8}}},
                        {"scan", {{"variable", "a"}, {"from", 0.4}, {"to", 2.0}, {"points", 17}}}});
    ResultTable t = run_command(c);
    ASSERT_EQ(t.rows.size(), 17u);
    for (auto& r : t.rows) {
        const double a = r[0].get<double>(), xi = r[2].get<double>();
        if (a < 1.0 - 1e-12) {
            EXPECT_EQ(r[3], "Broken");
            EXPECT_NEAR(xi, 1.0 - a, 1e-12);
        } else if (a > 1.0 + 1e-12) {
            EXPECT_EQ(r[3], "Symmetric");
            EXPECT_EQ(xi, 0.0);
        } else {
            EXPECT_EQ(r[3], "Critical");
        }
    }
    ResultTable p = run_command(make({{"command", "phase"}, {"model", {{"N", 2}, {"spectrum", "0.2,0.4"}}}}));
    EXPECT_NEAR(p.rows[0][1].get<double>(), 0.2 + std::sqrt(0.26), 1e-14);
}

TEST(Commands, DensityColumns) {
    RunConfig c = make({{"command", "density"},
                        {"model", {{"N", 16}, {"spectrum", "logspace(0.1,0.5)"}}},
                        {"grid", {{"from", 2.0}, {"to", 2.0}, {"points", 1}}}});
    ResultTable t = run_command(c);
    EXPECT_EQ(t.columns, (std::vector<std::string>{"zeta", "density_N16", "density_limit"}));
    const double j0 = std::cyl_bessel_j(0.0, 2.0), j1 = std::cyl_bessel_j(1.0, 2.0);
    EXPECT_NEAR(t.rows[0][2].get<double>(), j0 * j0 + j1 * j1, 1e-14);
    EXPECT_NEAR(t.rows[0][1].get<double>(), t.rows[0][2].get<double>(), 0.01);

    RunConfig v = make({{"command", "density"},
                        {"model", {{"N", 16}, {"nu", 1}, {"spectrum", "logspace(0.1,0.5)"}}},
                        {"grid", {{"from", 1e-3}, {"to", 1e-3}, {"points", 1}}}});
    ResultTable tv = run_command(v);
    EXPECT_LT(std::fabs(tv.rows[0][1].get<double>()), 1e-5);
    EXPECT_LT(std::fabs(tv.rows[0][2].get<double>()), 1e-5);

    RunConfig s = make({{"command", "density"}, {"model", {{"N", 4}, {"spectrum", "uniform(2)"}}}});
    EXPECT_THROW(run_command(s), PhaseError);
}

TEST(Commands, CorrelateConsistency) {
    RunConfig c = make({{"command", "correlate"},
                        {"model", {{"N", 8}, {"spectrum", "logspace(0.1,0.5)"}}},
                        {"points", {{1.5}, {1.5, 1.5}, {0.8, 2.6}}}});
    ResultTable t = run_command(c);
    auto col = [&](const std::string& n) { return std::find(t.columns.begin(), t.columns.end(), n) - t.columns.begin(); };
    EXPECT_NEAR(t.rows[1][col("R_limit")].get<double>(), 0.0, 1e-14);
    EXPECT_NEAR(t.rows[1][col("R_N8")].get<double>(), 0.0, 1e-12);
    RunConfig d = make({{"command", "density"},
                        {"model", {{"N", 8}, {"spectrum", "logspace(0.1,0.5)"}}},
                        {"grid", {{"from", 1.5}, {"to", 1.5}, {"points", 1}}}});
    ResultTable td = run_command(d);
    EXPECT_DOUBLE_EQ(t.rows[0][col("R_limit")].get<double>(), td.rows[0][2].get<double>());
    EXPECT_NEAR(t.rows[0][col("R_N8")].get<double>(), td.rows[0][1].get<double>(), 1e-14);
    const double r2 = t.rows[2][col("R_limit")].get<double>(), r2p = t.rows[2][col("R_limit_partitions")].get<double>();
    EXPECT_NEAR(r2, r2p, 1e-8 * std::fabs(r2));
    EXPECT_THROW(make({{"command", "correlate"}, {"points", {{1, 2, 3, 4, 5, 6, 7}}}}), ConfigError);
}

TEST(Commands, VerifySuite) {
    ResultTable t = run_command(make({{"command", "verify"}}));
    for (auto& r : t.rows) EXPECT_EQ(r[3], true) << r[0];
    EXPECT_THROW(run_command(make({{"command", "verify"}, {"verify", {{"inject_sign_flip", true}}}})), VerifyFailure);
    ResultTable o = run_command(make({{"command", "verify"}, {"verify", {{"tolerances", {{"bessel_j_recurrence", 1e-3}}}}}}));
    for (auto& r : o.rows)
        if (r[0] == "bessel_j_recurrence") EXPECT_EQ(r[2].get<double>(), 1e-3);
}

TEST(Pool, LowestIndexErrorWins) {
    std::vector<int> hit(10, 0);
    try {
        parallel_for(10, 3, [&](int i) {
            hit[i] = 1;
            if (i == 4 || i == 7) throw std::runtime_error(std::to_string(i));
        });
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_STREQ(e.what(), "4");
    }
    EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 10);
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(cli("phase --spectrum 'uniform(0.5)' --N 4"), 0);
    EXPECT_EQ(cli("density --nu -3"), 1);
    EXPECT_EQ(cli("density --N 4 --spectrum 'uniform(2)'"), 1);
    EXPECT_EQ(cli("kernel-eval --N 64 --spectrum 'logspace(0.1,0.5)' --points 1,2 --route residue"), 2);
    EXPECT_EQ(cli("verify"), 0);
    EXPECT_EQ(cli("verify --inject-sign-flip"), 3);
    EXPECT_EQ(cli("bogus"), 1);
}

TEST(Cli, ReplayIsByteIdentical) {
    const std::string a = tmp("kernel_a.csv"), b = tmp("kernel_b.csv");
    ASSERT_EQ(cli("kernel-eval --N 8,16 --spectrum 'logspace(0.1,0.5)' --masses 1.5 --deterministic --out " + a), 0);
    ASSERT_EQ(cli("kernel-eval --config " + a + " --out " + b), 0);
    EXPECT_EQ(slurp(a), slurp(b));

    const std::string j = tmp("phase.json"), k = tmp("phase_replay.json");
    ASSERT_EQ(cli("phase --spectrum 0.2,0.4 --N 2 --format json --deterministic --out " + j), 0);
    ASSERT_EQ(cli("phase --config " + j + " --out " + k), 0);
    EXPECT_EQ(slurp(j), slurp(k));
}

TEST(Cli, MonteCarloReproducible) {
    const std::string a = tmp("mc_a.csv"), b = tmp("mc_b.csv"), c = tmp("mc_c.csv");
    const std::string base = "mc --N 6 --spectrum 'logspace(0.1,0.5)' --samples 4000 --bins 12 --deterministic --seed 9";
    ASSERT_EQ(cli(base + " --out " + a), 0);
    ASSERT_EQ(cli(base + " --out " + b), 0);
    EXPECT_EQ(slurp(a), slurp(b));
    ASSERT_EQ(cli(base + " --workers 3 --out " + c), 0);
    EXPECT_EQ(data_lines(slurp(a)), data_lines(slurp(c)));
    EXPECT_NE(slurp(a).find("# discard_rate: 0"), std::string::npos);
}
