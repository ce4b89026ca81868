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

// CLI-side plumbing: spectrum presets, run configuration, result tables and
// their CSV/JSON writers. Needs nlohmann/json on the include path.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <atomic>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "finitekernel.hpp"
#include "phase.hpp"

namespace tdirac {

inline constexpr const char* kVersion = "0.1.0";

using Json = nlohmann::json;

// "uniform(a)", "logspace(lo,hi)", "linspace(lo,hi)", "matsubara(T)" or a
// comma-separated list of values.
inline TemperatureSpectrum spectrum_from_preset(const std::string& text, int N) {
    if (N < 1) throw ConfigError("spectrum preset: N must be positive");
    static const std::regex call(R"(\s*(uniform|logspace|linspace|matsubara)\s*\(([^)]*)\)\s*)");
    std::smatch m;
    auto numbers = [](const std::string& s) {
        std::vector<double> v;
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(tok, &used));
                if (tok.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw ConfigError("spectrum: cannot parse number '" + tok + "'");
            }
        }
        return v;
    };
    TemperatureSpectrum spec;
    if (std::regex_match(text, m, call)) {
        const std::string kind = m[1];
        std::vector<double> args = numbers(m[2]);
        const std::size_t want = (kind == "uniform" || kind == "matsubara") ? 1 : 2;
        if (args.size() != want) throw ConfigError("spectrum: " + kind + " takes " + std::to_string(want) + " argument(s)");
        for (int i = 0; i < N; ++i) {
            const double f = N == 1 ? 0.0 : static_cast<double>(i) / (N - 1);
            if (kind == "uniform")
                spec.a.push_back(args[0]);
            else if (kind == "matsubara")
                spec.a.push_back(M_PI * M_PI * args[0] * args[0]);
            else if (kind == "linspace")
                spec.a.push_back(args[0] + (args[1] - args[0]) * f);
            else {
                if (!(args[0] > 0.0 && args[1] > 0.0)) throw ConfigError("spectrum: logspace bounds must be positive");
                spec.a.push_back(args[0] * std::pow(args[1] / args[0], f));
            }
        }
    } else {
        spec.a = numbers(text);
        if (static_cast<int>(spec.a.size()) != N)
            throw ConfigError("spectrum: explicit list has " + std::to_string(spec.a.size()) + " entries, N = " +
                              std::to_string(N));
    }
    try {
        spec.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("spectrum: ") + e.what());
    }
    return spec;
}

// Resolved run configuration. Missing keys take the defaults below; the
// resolved document is echoed into every output so a run can be replayed.
struct RunConfig {
    Json doc;

    static Json defaults() {
        return Json{
            {"command", ""},
            {"model", {{"N", 16}, {"N_list", Json::array()}, {"nu", 0}, {"masses", Json::array()}, {"spectrum", nullptr}}},
            {"grid", {{"from", 0.5}, {"to", 8.0}, {"points", 31}, {"log", false}}},
            {"scan", nullptr},
            {"points", nullptr},
            {"mc",
             {{"samples", 200000}, {"seed", 1}, {"workers", 1}, {"bins", 60}, {"lo", 0.0}, {"hi", 12.0},
              {"micro", true}, {"overlay", true}}},
            {"verify", {{"tolerances", Json::object()}, {"inject_sign_flip", false}}},
            {"tol", nullptr},
            {"route", "auto"},
            {"deterministic", false},
            {"output", {{"format", "csv"}, {"path", nullptr}}},
        };
    }

    // A null in the user document means "use the default": merge_patch would
    // delete the key, so deleted keys are restored afterwards.
    static RunConfig from_json(const Json& user) {
        RunConfig c;
        const Json def = defaults();
        c.doc = def;
        c.doc.merge_patch(user);
        restore_missing(c.doc, def);
        return c;
    }

    static void restore_missing(Json& doc, const Json& def) {
        if (!doc.is_object() || !def.is_object()) return;
        for (auto it = def.begin(); it != def.end(); ++it) {
            if (!doc.contains(it.key()))
                doc[it.key()] = it.value();
            else
                restore_missing(doc[it.key()], it.value());
        }
    }

    const Json& model() const { return doc["model"]; }
    int N() const { return doc["model"]["N"].get<int>(); }
    int nu() const { return doc["model"]["nu"].get<int>(); }
    std::vector<double> masses() const { return doc["model"]["masses"].get<std::vector<double>>(); }
    std::vector<int> n_list() const { return doc["model"]["N_list"].get<std::vector<int>>(); }
    bool has_spectrum() const { return !doc["model"]["spectrum"].is_null(); }
    std::string spectrum_text() const {
        const Json& s = doc["model"]["spectrum"];
        if (s.is_string()) return s.get<std::string>();
        std::string out;
        for (std::size_t i = 0; i < s.size(); ++i) {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", s[i].get<double>());
            out += (i ? "," : "") + std::string(buf);
        }
        return out;
    }
    std::optional<TemperatureSpectrum> spectrum(int N) const {
        if (!has_spectrum()) return std::nullopt;
        return spectrum_from_preset(spectrum_text(), N);
    }
    // Model at size N with microscopic masses.
    FiniteEnsembleParams params(int N) const {
        FiniteEnsembleParams p;
        p.N = N;
        p.nu = nu();
        p.masses = masses();
        p.temperature = spectrum(N);
        return p;
    }
    PhaseInfo phase(int N) const {
        auto s = spectrum(N);
        if (!s) return {std::numeric_limits<double>::infinity(), 1.0, Phase::Broken};
        return condensate(*s, 1e-14);
    }
    TempKernelOptions kernel_options() const {
        TempKernelOptions o;
        const std::string r = doc["route"].get<std::string>();
        o.route = r == "residue" ? KernelRoute::Residue : r == "contour" ? KernelRoute::SaddleContour : KernelRoute::Auto;
        return o;
    }
    std::vector<double> grid() const {
        const Json& g = doc["grid"];
        const double lo = g["from"].get<double>(), hi = g["to"].get<double>();
        const int n = g["points"].get<int>();
        const bool lg = g["log"].get<bool>();
        std::vector<double> v;
        for (int i = 0; i < n; ++i) {
            const double f = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
            v.push_back(lg ? lo * std::pow(hi / lo, f) : lo + (hi - lo) * f);
        }
        return v;
    }

    // Checks every field and throws one ConfigError listing all problems.
    void validate() const {
        std::vector<std::string> errs;
        auto check = [&](bool ok, const std::string& msg) {
            if (!ok) errs.push_back(msg);
        };
        auto guarded = [&](const std::string& what, const std::function<void()>& fn) {
            try {
                fn();
            } catch (const nlohmann::json::exception& e) {
                errs.push_back(what + ": wrong type (" + e.what() + ")");
            } catch (const std::exception& e) {
                errs.push_back(what + ": " + e.what());
            }
        };
        static const std::vector<std::string> commands = {"phase", "density", "correlate", "kernel-eval",
                                                          "mc",    "verify",  "converge"};
        check(std::find(commands.begin(), commands.end(), doc["command"].get<std::string>()) != commands.end(),
              "command: unknown '" + doc["command"].get<std::string>() + "'");
        guarded("model.N", [&] { check(N() >= 1 && N() <= 256, "model.N: must lie in [1, 256]"); });
        guarded("model.N_list", [&] {
            for (int n : n_list()) check(n >= 1 && n <= 256, "model.N_list: entries must lie in [1, 256]");
        });
        guarded("model.nu", [&] { check(nu() >= 0 && nu() <= 16, "model.nu: must lie in [0, 16]"); });
        guarded("model.masses", [&] { MicroParams{std::min(std::max(nu(), 0), 16), masses()}.validate(); });
        guarded("model.spectrum", [&] {
            if (!has_spectrum()) return;
            spectrum(N());
            for (int n : n_list()) spectrum(n);
        });
        guarded("grid", [&] {
            const Json& g = doc["grid"];
            check(g["points"].get<int>() >= 1 && g["points"].get<int>() <= 100000, "grid.points: must lie in [1, 1e5]");
            check(g["to"].get<double>() >= g["from"].get<double>(), "grid: 'to' must be >= 'from'");
            check(g["from"].get<double>() > 0.0, "grid.from: must be positive");
        });
        guarded("mc", [&] {
            const Json& m = doc["mc"];
            check(m["samples"].get<long long>() >= 1 && m["samples"].get<long long>() <= 100000000LL,
                  "mc.samples: must lie in [1, 1e8]");
            check(m["workers"].get<int>() >= 1, "mc.workers: must be positive");
            check(m["bins"].get<int>() >= 1, "mc.bins: must be positive");
            check(m["hi"].get<double>() > m["lo"].get<double>(), "mc: hi must exceed lo");
            (void)m["seed"].get<std::uint64_t>();
            (void)m["micro"].get<bool>();
            (void)m["overlay"].get<bool>();
        });
        guarded("scan", [&] {
            const Json& s = doc["scan"];
            if (s.is_null()) return;
            check(s.value("variable", "") == "a", "scan.variable: only 'a' (uniform spectrum scale) is supported");
            check(s["points"].get<int>() >= 1, "scan.points: must be positive");
            check(s["from"].get<double>() > 0.0 && s["to"].get<double>() >= s["from"].get<double>(),
                  "scan: need 0 < from <= to");
        });
        guarded("points", [&] {
            const Json& p = doc["points"];
            if (p.is_null()) return;
            for (const Json& t : p) {
                auto v = t.get<std::vector<double>>();
                check(!v.empty() && v.size() <= 6, "points: each tuple needs 1..6 entries");
                for (double z : v) check(z > 0.0, "points: entries must be positive");
            }
        });
        guarded("tol", [&] {
            if (!doc["tol"].is_null()) check(doc["tol"].get<double>() > 0.0, "tol: must be positive");
        });
        guarded("verify", [&] {
            for (auto& [k, v] : doc["verify"]["tolerances"].items()) check(v.get<double>() > 0.0, "verify.tolerances." + k + ": must be positive");
            (void)doc["verify"]["inject_sign_flip"].get<bool>();
        });
        guarded("route", [&] {
            const std::string r = doc["route"].get<std::string>();
            check(r == "auto" || r == "residue" || r == "contour", "route: must be auto, residue or contour");
        });
        guarded("output.format", [&] {
            const std::string f = doc["output"]["format"].get<std::string>();
            check(f == "csv" || f == "json", "output.format: must be csv or json");
        });
        if (!errs.empty()) {
            std::string msg = "invalid configuration:";
            for (auto& e : errs) msg += "\n  - " + e;
            throw ConfigError(msg);
        }
    }
};

// Reads a config document, or the metadata of an earlier output file (CSV or JSON).
inline Json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    const std::string tag = "# config: ";
    if (auto pos = text.find(tag); pos != std::string::npos && text.find_first_not_of(" \t\r\n") == text.find('#')) {
        auto end = text.find('\n', pos);
        try {
            return Json::parse(text.substr(pos + tag.size(), end - pos - tag.size()));
        } catch (const Json::exception& e) {
            throw ConfigError("config line in '" + path + "' is not valid JSON: " + e.what());
        }
    }
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::exception& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    if (j.contains("metadata") && j["metadata"].contains("config")) return j["metadata"]["config"];
    return j;
}

struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::vector<Json>> rows;  // numbers, strings or null (empty cell)
    Json metadata = Json::object();       // extra run facts (besides config)
};

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_cell(const Json& v) {
    if (v.is_null()) return "";
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) return format_number(v.get<double>());
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

// Resolved config as echoed into output. The output path is dropped so that a
// replay written elsewhere is byte-identical.
inline Json echoed_config(const RunConfig& cfg) {
    Json j = cfg.doc;
    j["output"]["path"] = nullptr;
    return j;
}

inline std::string render(const ResultTable& t, const RunConfig& cfg, std::optional<double> wall_time) {
    const std::string fmt = cfg.doc["output"]["format"].get<std::string>();
    if (fmt == "json") {
        Json meta = t.metadata;
        meta["version"] = kVersion;
        meta["config"] = echoed_config(cfg);
        if (wall_time) meta["wall_time_s"] = *wall_time;
        Json rows = Json::array();
        for (auto& r : t.rows) rows.push_back(r);
        return Json{{"metadata", meta}, {"columns", t.columns}, {"rows", rows}}.dump(2) + "\n";
    }
    std::string out = "# tdirac " + std::string(kVersion) + "\n";
    out += "# config: " + echoed_config(cfg).dump() + "\n";
    for (auto& [k, v] : t.metadata.items()) out += "# " + k + ": " + format_cell(v) + "\n";
    if (wall_time) out += "# wall_time_s: " + format_number(*wall_time) + "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
    out += "\n";
    for (auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + format_cell(r[i]);
        out += "\n";
    }
    return out;
}

// Runs fn(i) for i in [0, n) on a bounded pool; fn writes to slot i only.
// The first exception (lowest index) is rethrown after all workers stop.
inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    std::vector<std::exception_ptr> errs(n);
    std::atomic<int> next{0};
    auto work = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errs[i] = std::current_exception();
            }
        }
    };
    const int k = std::max(1, std::min(workers, n));
    if (k == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < k; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

}  // namespace tdirac
