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


#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "tdirac/commands.hpp"

namespace {

std::vector<double> parse_list(const std::string& s, const char* what) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            v.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw tdirac::ConfigError(std::string(what) + ": cannot parse '" + tok + "'");
        }
    }
    return v;
}

struct Flags {
    std::string config, out, format, masses, spectrum, n_list, grid, points, route;
    std::optional<std::uint64_t> seed, samples;
    std::optional<int> workers, nu, bins;
    std::optional<double> tol;
    bool deterministic = false, sign_flip = false, raw = false;
};

void add_flags(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "config file (JSON) or an earlier output to replay");
    sub->add_option("--out", f.out, "output path (default stdout)");
    sub->add_option("--format", f.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--seed", f.seed, "Monte Carlo seed");
    sub->add_option("--workers", f.workers, "worker threads");
    sub->add_option("--tol", f.tol, "tolerance override (verify)");
    sub->add_option("--N", f.n_list, "matrix size, or a comma-separated list of sizes");
    sub->add_option("--nu", f.nu, "topological index");
    sub->add_option("--masses", f.masses, "comma-separated microscopic masses");
    sub->add_option("--spectrum", f.spectrum, "uniform(a) | logspace(lo,hi) | linspace(lo,hi) | matsubara(T) | a1,a2,...");
    sub->add_option("--grid", f.grid, "from:to:points for the zeta grid (append :log for log spacing)");
    sub->add_option("--points", f.points, "point tuples, e.g. '1,2;0.5' (correlate) or '1,2;3,3' (kernel-eval)");
    sub->add_option("--samples", f.samples, "Monte Carlo samples");
    sub->add_option("--bins", f.bins, "Monte Carlo histogram bins");
    sub->add_option("--route", f.route, "temperature kernel route: auto, residue or contour");
    sub->add_flag("--raw", f.raw, "mc: bin raw eigenvalues instead of zeta");
    sub->add_flag("--deterministic", f.deterministic, "omit wall time so reruns are byte-identical");
    sub->add_flag("--inject-sign-flip", f.sign_flip, "verify: flip the sign of the partition-function kernel relation");
}

tdirac::Json build_config(const std::string& command, const Flags& f) {
    using tdirac::Json;
    Json j = f.config.empty() ? Json::object() : tdirac::load_config_file(f.config);
    j["command"] = command;
    if (!f.format.empty()) j["output"]["format"] = f.format;
    if (!f.out.empty()) j["output"]["path"] = f.out;
    if (f.seed) j["mc"]["seed"] = *f.seed;
    if (f.workers) j["mc"]["workers"] = *f.workers;
    if (f.samples) j["mc"]["samples"] = *f.samples;
    if (f.bins) j["mc"]["bins"] = *f.bins;
    if (f.raw) j["mc"]["micro"] = false;
    if (f.tol) j["tol"] = *f.tol;
    if (f.nu) j["model"]["nu"] = *f.nu;
    if (!f.masses.empty()) j["model"]["masses"] = parse_list(f.masses, "--masses");
    if (!f.spectrum.empty()) j["model"]["spectrum"] = f.spectrum;
    if (!f.route.empty()) j["route"] = f.route;
    if (!f.n_list.empty()) {
        std::vector<int> ns;
        for (double v : parse_list(f.n_list, "--N")) {
            if (v != std::floor(v)) throw tdirac::ConfigError("--N: sizes must be integers");
            ns.push_back(static_cast<int>(v));
        }
        if (ns.empty()) throw tdirac::ConfigError("--N: empty list");
        j["model"]["N"] = ns.front();
        j["model"]["N_list"] = ns;
    }
    if (!f.grid.empty()) {
        std::stringstream ss(f.grid);
        std::string a, b, c, d;
        std::getline(ss, a, ':');
        std::getline(ss, b, ':');
        std::getline(ss, c, ':');
        std::getline(ss, d, ':');
        try {
            j["grid"]["from"] = std::stod(a);
            j["grid"]["to"] = std::stod(b);
            j["grid"]["points"] = std::stoi(c);
        } catch (const std::exception&) {
            throw tdirac::ConfigError("--grid: expected from:to:points");
        }
        j["grid"]["log"] = d == "log";
    }
    if (!f.points.empty()) {
        Json pts = Json::array();
        std::stringstream ss(f.points);
        std::string tup;
        while (std::getline(ss, tup, ';')) pts.push_back(parse_list(tup, "--points"));
        j["points"] = pts;
    }
    if (f.deterministic) j["deterministic"] = true;
    if (f.sign_flip) j["verify"]["inject_sign_flip"] = true;
    return j;
}

void emit(const std::string& text, const tdirac::RunConfig& cfg) {
    const tdirac::Json& path = cfg.doc["output"]["path"];
    if (path.is_null()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path.get<std::string>(), std::ios::binary);
    if (!out) throw tdirac::ConfigError("cannot write output file '" + path.get<std::string>() + "'");
    out << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tdirac: Dirac spectra of chiral random matrices at non-zero temperature"};
    app.require_subcommand(1);
    Flags flags;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"phase", "critical value, condensate and phase of a spectrum (or a uniform scan)"},
        {"density", "finite-N and limiting microscopic densities on a zeta grid"},
        {"correlate", "k-point correlation functions at point tuples"},
        {"kernel-eval", "kernels at (zeta, eta) pairs"},
        {"mc", "Monte Carlo histogram with optional analytic overlay"},
        {"verify", "identity and special-function verification suite"},
        {"converge", "sup-norm convergence of finite-N densities to the limit"},
    };
    for (auto& [name, help] : commands) add_flags(app.add_subcommand(name, help), flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    tdirac::RunConfig cfg;
    try {
        cfg = tdirac::RunConfig::from_json(build_config(command, flags));
        cfg.validate();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    const bool deterministic = cfg.doc["deterministic"].get<bool>();
    const auto t0 = std::chrono::steady_clock::now();
    auto wall = [&]() -> std::optional<double> {
        if (deterministic) return std::nullopt;
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    try {
        tdirac::ResultTable table = tdirac::run_command(cfg);
        emit(tdirac::render(table, cfg, wall()), cfg);
        return 0;
    } catch (const tdirac::VerifyFailure& e) {
        emit(tdirac::render(e.table, cfg, wall()), cfg);
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const tdirac::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const tdirac::PhaseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const tdirac::DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const tdirac::ConditioningError& e) {
        std::cerr << "error: " << e.what() << " (estimate " << e.estimate << ")\n";
        return 2;
    } catch (const tdirac::IntegrationFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const tdirac::GeometryError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const tdirac::SamplingError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
