// wrlab command-line front end.
//
// Settings come from three layers: built-in defaults (--print-defaults), an
// optional `key = value` file (--config; keys may carry the command as a
// section, e.g. `harnack.samples = 10`), then --set key=value and the named
// flags. Every run writes report.json (+ CSVs) and manifest.json into a fresh
// directory under $WRLAB_OUT (or --out, default ./wrlab_out).
//
// Exit codes: 0 all checks pass, 1 some check failed, 2 usage or config
// error, 3 numerical failure.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "wrlab/ball_calculus.hpp"
#include "wrlab/config.hpp"
#include "wrlab/covering.hpp"
#include "wrlab/experiments.hpp"
#include "wrlab/geometry.hpp"
#include "wrlab/pde.hpp"
#include "wrlab/suite.hpp"

namespace fs = std::filesystem;
using namespace wrlab;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Output {
    fs::path dir;
    std::vector<std::string> files;
};

struct RunResult {
    Report report;
    std::vector<std::string> lines;  ///< printed on stdout
};

// ---------------------------------------------------------------------------
// settings

struct Command {
    std::string name;      ///< e.g. "weights ap"
    std::string section;   ///< key prefix accepted in config files
    Config defaults;
    std::function<RunResult(const Config&, const Output&)> run;
};

Config make_defaults(std::initializer_list<std::pair<const char*, std::string>> kv) {
    Config c;
    for (const auto& [k, v] : kv) c.set(k, v);
    return c;
}

/// defaults < file < overrides; unknown keys are rejected.
Config merge(const Command& cmd, const std::string& file, const std::vector<std::pair<std::string, std::string>>& over) {
    Config out = cmd.defaults;
    auto put = [&](const std::string& key, const std::string& value, const std::string& where) {
        if (!cmd.defaults.has(key)) {
            throw DomainError("unknown setting '" + key + "' for '" + cmd.name + "' (" + where + ")");
        }
        out.set(key, value);
    };
    if (!file.empty()) {
        const Config f = Config::load(file);
        const std::string prefix = cmd.section + ".";
        for (const auto& [k, v] : f.values()) {
            if (k.rfind(prefix, 0) == 0) {
                put(k.substr(prefix.size()), v, file);
            } else if (k.find('.') == std::string::npos) {
                put(k, v, file);
            }
            // other sections belong to other commands
        }
    }
    for (const auto& [k, v] : over) put(k, v, "command line");
    return out;
}

int get_n(const Config& c) {
    const long n = c.get_int("n", 2);
    check_dim(static_cast<int>(n));
    return static_cast<int>(n);
}

BallFamily family_of(const Config& c, int n) {
    const double R = c.get_double("radius", 1.0);
    if (!(R > 0.0)) throw DomainError("radius must be positive");
    return BallFamily::lattice(n, Ball{{0.0, 0.0, 0.0}, R}, c.get_double("spacing", 0.25) * R,
                               c.get_double("r_min", 0.125) * R);
}

std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!cur.empty() || !out.empty()) out.push_back(cur);
    for (auto& x : out) {
        const auto b = x.find_first_not_of(" \t");
        const auto e = x.find_last_not_of(" \t");
        x = b == std::string::npos ? "" : x.substr(b, e - b + 1);
    }
    out.erase(std::remove(out.begin(), out.end(), ""), out.end());
    return out;
}

/// "upper=4; lower=0.5; band=0.5,2"
std::vector<TruncationMode> parse_levels(const std::string& s) {
    std::vector<TruncationMode> out;
    for (const auto& item : split_list(s, ';')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw DomainError("truncation level '" + item + "' is not kind=value");
        const std::string kind = item.substr(0, eq);
        Config tmp;
        tmp.set("v", item.substr(eq + 1));
        const auto v = tmp.get_doubles("v", {});
        if (kind == "upper" && v.size() == 1) {
            out.push_back(TruncationMode::upper_at(v[0]));
        } else if (kind == "lower" && v.size() == 1) {
            out.push_back(TruncationMode::lower_at(v[0]));
        } else if (kind == "band" && v.size() == 2) {
            out.push_back(TruncationMode::band(v[0], v[1]));
        } else {
            throw DomainError("truncation level '" + item + "' not understood");
        }
    }
    return out;
}

/// Printed values keep a decimal point (1.0, not 1).
std::string fmt(double v) {
    std::string s = format_double(v);
    if (std::isfinite(v) && s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
}

// ---------------------------------------------------------------------------
// commands

RunResult weights_ap(const Config& c, const Output& out) {
    const int n = get_n(c);
    const double p = c.get_double("p", 1.5);
    if (!(p > 1.0)) throw DomainError("p must exceed 1");
    const Weight w = parse_weight(c.get_string("weight", ""), n);
    const BallFamily F = family_of(c, n);
    const auto est = ap_characteristic(w, p, F);
    RunResult r;
    r.report.name = "weights ap";
    r.report.summary["A_p"] = est.value;
    r.report.summary["balls"] = F.balls.size();
    r.report.summary["argmax_radius"] = F.balls[est.argmax].radius;
    r.report.summary["lower_bound_only"] = est.is_lower_bound;
    write_ball_csv((out.dir / "balls.csv").string(), est);
    r.lines.push_back(fmt(est.value));
    return r;
}

RunResult weights_bmo(const Config& c, const Output& out) {
    const int n = get_n(c);
    const double q = c.get_double("q", 1.0);
    const Weight w = parse_weight(c.get_string("weight", ""), n);
    const BallFamily F = family_of(c, n);
    const auto est = bmo_q(w, q, F.domain, F);
    RunResult r;
    r.report.name = "weights bmo";
    r.report.summary["bmo_q"] = est.value;
    r.report.summary["balls"] = F.balls.size();
    write_ball_csv((out.dir / "balls.csv").string(), est);
    r.lines.push_back(fmt(est.value));
    return r;
}

RunResult weights_stability(const Config& c, const Output&) {
    const int n = get_n(c);
    const double p = c.get_double("p", 1.0 + 1.0 / n);
    const Weight w = parse_weight(c.get_string("weight", ""), n);
    const BallFamily F = family_of(c, n);
    RunResult r;
    r.report.name = "weights stability";
    const auto levels = parse_levels(c.get_string("levels", ""));
    if (!levels.empty()) r.report.children.push_back(verify_truncation_bounds(w, p, levels, F, {}, 0.02));
    const auto eps = c.get_doubles("eps", {});
    const double R0 = c.get_double("R0", 1.0);
    if (!eps.empty()) r.report.children.push_back(verify_mollification_bounds(w, p, eps, R0, F, {}, 0.05));
    BmoStabilityLevels bl;
    for (const auto& m : parse_levels(c.get_string("bmo_levels", ""))) {
        switch (m.kind) {
            case TruncationMode::Kind::upper: bl.upper.push_back(m.upper); break;
            case TruncationMode::Kind::lower: bl.lower.push_back(m.lower); break;
            case TruncationMode::Kind::band: bl.band.emplace_back(m.lower, m.upper); break;
        }
    }
    r.report.children.push_back(verify_bmo_truncation_stability(w, R0, bl, F, {}, 0.02, 0.20));
    for (const auto& ch : r.report.children) {
        r.lines.push_back(ch.name + ": " + (ch.passed() ? "pass" : "FAIL") + " (" + std::to_string(ch.violations()) +
                          " violations)");
    }
    return r;
}

RunResult covering_run(const Config& c, const Output& out) {
    const int n = get_n(c);
    if (n != 2) throw DomainError("covering runs in n = 2");
    const Weight w = parse_weight(c.get_string("weight", ""), n);
    const auto L = CellLattice::build(make_cylinder(w, {0.0, 0.0, 0.0}, 0.0, 1.0, CylinderKind::C),
                                      static_cast<int>(c.get_int("cells", 64)),
                                      static_cast<int>(c.get_int("time_cells", 128)), 3);
    const auto cands = candidate_lattice(L);
    const CellSet gamma = random_gamma(L, cands, static_cast<int>(c.get_int("count", 10)), c.get_seed("seed", 1));
    const auto res = run_covering(gamma, c.get_double("q", 0.5), c.get_double("eta", 0.9), c.get_double("l", 3.0), cands);
    RunResult r;
    r.report = verify_covering(gamma, res, c.get_double("K0", 2.0), 0.02);
    r.report.name = "covering run";
    write_covering_csv(out.dir.string(), gamma, res);
    r.lines.push_back("w(Gamma) = " + fmt(res.w_gamma) + ", w(tildeE) = " + fmt(res.w_tildeE) +
                      ", w(hatE) = " + fmt(res.w_hatE) + ", selected " + std::to_string(res.selected.size()));
    return r;
}

RunResult covering_constants(const Config& c, const Output&) {
    const auto k = derived_constants(static_cast<int>(c.get_int("n", 2)), c.get_double("K0", 1.0), c.get_double("q0", 0.5));
    RunResult r;
    r.report.name = "covering constants";
    r.report.summary["xi0"] = k.xi0;
    r.report.summary["l0"] = k.l0;
    r.report.summary["xi1"] = k.xi1;
    r.report.check_le("xi0 xi1 = (1 + xi0)/2", k.identity_residual, 1e-12);
    r.lines.push_back("xi0 = " + fmt(k.xi0));
    r.lines.push_back("l0  = " + fmt(k.l0));
    r.lines.push_back("xi1 = " + fmt(k.xi1));
    r.lines.push_back("identity residual = " + fmt(k.identity_residual));
    return r;
}

/// Quadratic manufactured solution, or forcing f = w with zero data, on
/// C_{r,w}(0, 0).
RunResult solve_cmd(const Config& c, const Output& out) {
    const int n = get_n(c);
    const Weight w = parse_weight(c.get_string("weight", ""), n);
    const double r = c.get_double("r", 1.0), h = c.get_double("step", 1.0 / 16);
    const auto cyl = make_cylinder(w, {0.0, 0.0, 0.0}, 0.0, r, CylinderKind::C);
    const Grid g = cylinder_grid(cyl, h, c.get_double("tau_factor", 1.0) * h * h);
    const auto dom = cylinder_domain(cyl, g);
    const auto nw = node_weights(g, w);
    const std::string field = c.get_string("field", "identity");
    CoefficientField a = CoefficientField::identity(n);
    if (field == "dominant") {
        a = CoefficientField::sample_dominant(n, g.lower, r / 2.0, 4, g.t0, cyl.duration() / 4.0, 4,
                                              c.get_seed("seed", 1));
    } else if (field != "identity") {
        throw DomainError("field must be 'identity' or 'dominant'");
    }
    const std::string problem = c.get_string("problem", "quadratic");
    RunResult res;
    res.report.name = "solve";
    if (problem == "quadratic") {
        auto ex = [&](int k, std::size_t i) {
            const Point x = g.node(i);
            return dot(x, x, n) + 2.0 * n * g.time(k);
        };
        auto f = [&](int k, std::size_t i) {
            const Mat& m = a.at(g.node(i), g.time(k));
            double tr = 0.0;
            for (int d = 0; d < n; ++d) tr += entry(m, d, d);
            return 2.0 * n - nw[i] * 2.0 * tr;
        };
        const auto [u, st] = solve_dirichlet(dom, nw, a, f, ex, c.get_double("tol", 1e-10));
        double err = 0.0;
        for (int k = 0; k < g.nt; ++k) {
            for (std::size_t i = 0; i < g.spatial(); ++i) {
                if (dom.is(k, i, NodeKind::interior)) err = std::max(err, std::abs(u.at(k, i) - ex(k, i)));
            }
        }
        res.report.summary["max_residual"] = st.max_residual;
        res.report.summary["factorizations"] = st.factorizations;
        res.report.check_le("quadratic solution reproduced", err, 1e-9);
        write_grid_function_csv((out.dir / "solution.csv").string(), u);
        res.lines.push_back("max nodal error " + fmt(err) + ", residual " + fmt(st.max_residual));
    } else if (problem == "forcing") {
        const auto [u, st] = solve_dirichlet(
            dom, nw, a, [&](int, std::size_t i) { return nw[i]; }, [](int, std::size_t) { return 0.0; },
            c.get_double("tol", 1e-10));
        double lo = 0.0, top = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) {
            if (dom.kind[j] != NodeKind::outside) lo = std::min(lo, u.values[j]);
        }
        for (std::size_t i = 0; i < g.spatial(); ++i) top = std::max(top, u.at(dom.last_level, i));
        res.report.summary["max_residual"] = st.max_residual;
        res.report.summary["max_top"] = top;
        res.report.check_ge("nonnegative forcing gives a nonnegative solution", lo, 0.0);
        write_grid_function_csv((out.dir / "solution.csv").string(), u);
        res.lines.push_back("max u at the top " + fmt(top) + ", residual " + fmt(st.max_residual));
    } else {
        throw DomainError("problem must be 'quadratic' or 'forcing'");
    }
    return res;
}

RunResult experiment_cmd(const std::string& name, const Config& c, const Output& out) {
    const auto cfg = ExperimentConfig::from_config(name, c);
    const auto result = run_experiment(cfg);
    write_experiment(out.dir.string(), result);
    RunResult r;
    r.report = result.report;
    for (const auto& f : r.report.fitted) {
        r.lines.push_back(f.name + " = " + fmt(f.value) + " (spread " + fmt(f.refinement_spread) + ")");
    }
    for (const auto& ch : r.report.children) {
        for (const auto& f : ch.fitted) {
            r.lines.push_back(ch.name + ": " + f.name + " = " + fmt(f.value) + " (spread " +
                              fmt(f.refinement_spread) + ")");
        }
    }
    return r;
}

RunResult suite_all(const Config& c, const Output&) {
    const std::uint64_t seed = c.get_seed("seed", 1);
    std::vector<int> ids;
    for (double v : c.get_doubles("criteria", {})) ids.push_back(static_cast<int>(v));
    const auto outcomes = run_suite(seed, ids, [](const SuiteOutcome& o) {
        std::printf("criterion %2d  %-40s %s  (%.1f s)\n", o.id, criterion_title(o.id).c_str(),
                    o.report.passed() ? "PASS" : "FAIL", o.seconds);
        std::fflush(stdout);
    });
    RunResult r;
    r.report = suite_report(outcomes, seed);
    return r;
}

std::vector<Command> commands() {
    std::vector<Command> cs;
    cs.push_back({"weights ap", "ap",
                  make_defaults({{"weight", "constant(c=1)"}, {"n", "2"}, {"p", "1.5"}, {"radius", "1"},
                                 {"spacing", "0.25"}, {"r_min", "0.125"}}),
                  weights_ap});
    cs.push_back({"weights bmo", "bmo",
                  make_defaults({{"weight", "constant(c=1)"}, {"n", "2"}, {"q", "1"}, {"radius", "1"},
                                 {"spacing", "0.25"}, {"r_min", "0.125"}}),
                  weights_bmo});
    cs.push_back({"weights stability", "stability",
                  make_defaults({{"weight", "power(alpha=0.3)"}, {"n", "2"}, {"p", "1.5"}, {"radius", "1"},
                                 {"spacing", "0.5"}, {"r_min", "0.25"}, {"levels", "upper=0.5; lower=0.5; band=0.3,0.8"},
                                 {"eps", "0.1"}, {"R0", "1"}, {"bmo_levels", "upper=0.5; lower=0.5; band=0.3,0.8"}}),
                  weights_stability});
    cs.push_back({"covering run", "covering",
                  make_defaults({{"weight", "constant(c=1)"}, {"n", "2"}, {"cells", "64"}, {"time_cells", "128"},
                                 {"count", "10"}, {"seed", "1"}, {"q", "0.5"}, {"eta", "0.9"}, {"l", "3"},
                                 {"K0", "2"}}),
                  covering_run});
    cs.push_back({"covering constants", "constants", make_defaults({{"n", "2"}, {"K0", "1"}, {"q0", "0.5"}}),
                  covering_constants});
    cs.push_back({"solve", "solve",
                  make_defaults({{"weight", "constant(c=1)"}, {"n", "2"}, {"r", "1"}, {"step", "0.0625"},
                                 {"tau_factor", "1"}, {"field", "identity"}, {"seed", "1"}, {"problem", "quadratic"},
                                 {"tol", "1e-10"}}),
                  solve_cmd});
    cs.push_back({"verify abp", "abp", ExperimentConfig::defaults("abp").to_config(),
                  [](const Config& c, const Output& o) { return experiment_cmd("abp", c, o); }});
    for (const auto& name : experiment_names()) {
        if (name == "abp") continue;
        cs.push_back({"experiment " + name, name, ExperimentConfig::defaults(name).to_config(),
                      [name](const Config& c, const Output& o) { return experiment_cmd(name, c, o); }});
    }
    cs.push_back({"suite all", "suite", make_defaults({{"seed", "1"}, {"criteria", ""}}), suite_all});
    return cs;
}

// ---------------------------------------------------------------------------

fs::path fresh_dir(const fs::path& root, const std::string& command) {
    std::string stem = command;
    std::replace(stem.begin(), stem.end(), ' ', '-');
    fs::create_directories(root);
    for (int i = 1;; ++i) {
        const fs::path p = root / (stem + "-" + std::to_string(i));
        if (fs::create_directory(p)) return p;
    }
}

void write_manifest(const fs::path& dir, const std::string& command, const std::string& config_path,
                    const Config& settings, double seconds, int code, const std::string& error) {
    Json m;
    m["schema"] = 1;
    m["command"] = command;
    m["config_path"] = config_path;
    m["seed"] = settings.get_string("seed", "");
    m["output_dir"] = dir.string();
    m["tool_version"] = kVersion;
    m["wall_time_s"] = seconds;
    m["exit_code"] = code;
    m["error"] = error;
    Json s = Json::object();
    for (const auto& [k, v] : settings.values()) s[k] = v;
    m["settings"] = s;
    std::ofstream(dir / "manifest.json") << m.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wrlab: weighted parabolic estimates laboratory"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    std::string config_path, out_root;
    std::vector<std::string> sets;
    int threads = 1;
    bool print_defaults = false;
    app.add_option("--config", config_path, "key = value settings file");
    app.add_option("--out", out_root, "output root (overrides WRLAB_OUT)");
    app.add_option("--threads", threads, "worker cap")->check(CLI::PositiveNumber);
    app.add_option("--set", sets, "override a setting, key=value (repeatable)");
    app.add_flag("--print-defaults", print_defaults, "print the command's default settings and exit");

    auto cmds = commands();
    std::map<std::string, CLI::App*> groups;
    std::vector<std::pair<CLI::App*, const Command*>> leaves;
    // named flags for the common settings; --set covers the rest
    std::map<const Command*, std::map<std::string, std::string>> flag_values;
    for (const auto& cmd : cmds) {
        const auto space = cmd.name.find(' ');
        CLI::App* parent = &app;
        std::string leaf = cmd.name;
        if (space != std::string::npos) {
            const std::string group = cmd.name.substr(0, space);
            leaf = cmd.name.substr(space + 1);
            if (!groups.count(group)) {
                groups[group] = app.add_subcommand(group);
                groups[group]->require_subcommand(1);
            }
            parent = groups[group];
        }
        CLI::App* sub = parent->add_subcommand(leaf, cmd.name);
        auto& fv = flag_values[&cmd];
        for (const auto& [k, v] : cmd.defaults.values()) {
            (void)v;
            sub->add_option("--" + k, fv[k], "setting '" + k + "'");
        }
        sub->add_option("--config", config_path, "key = value settings file");
        sub->add_option("--out", out_root, "output root");
        sub->add_option("--threads", threads, "worker cap")->check(CLI::PositiveNumber);
        sub->add_option("--set", sets, "override a setting, key=value (repeatable)");
        sub->add_flag("--print-defaults", print_defaults, "print default settings and exit");
        leaves.emplace_back(sub, &cmd);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const Command* cmd = nullptr;
    for (const auto& [sub, c] : leaves) {
        if (sub->parsed()) cmd = c;
    }
    if (!cmd) {
        std::cerr << "no command given\n";
        return 2;
    }
    if (print_defaults) {
        std::cout << cmd->defaults.dump();
        return 0;
    }

    const auto t0 = std::chrono::steady_clock::now();
    fs::path root = out_root;
    if (root.empty()) {
        const char* env = std::getenv("WRLAB_OUT");
        root = env && *env ? fs::path(env) : fs::path("wrlab_out");
    }
    Output out;
    try {
        out.dir = fresh_dir(root, cmd->name);
    } catch (const std::exception& e) {
        std::cerr << "cannot create output directory under " << root << ": " << e.what() << "\n";
        return 2;
    }

    Config settings;
    int code = 0;
    std::string error;
    try {
        std::vector<std::pair<std::string, std::string>> over;
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw DomainError("--set expects key=value, got '" + s + "'");
            over.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
        for (const auto& [k, v] : flag_values[cmd]) {
            if (!v.empty()) over.emplace_back(k, v);
        }
        settings = merge(*cmd, config_path, over);
        set_thread_count(threads);
        RunResult r = cmd->run(settings, out);
        Json j = r.report.to_json();
        std::ofstream(out.dir / "report.json") << j.dump(2) << "\n";
        for (const auto& line : r.lines) std::cout << line << "\n";
        code = r.report.passed() ? 0 : 1;
        std::cout << (code == 0 ? "all checks pass" : std::to_string(r.report.violations()) + " check(s) failed")
                  << "; output in " << out.dir.string() << "\n";
    } catch (const DomainError& e) {
        code = 2;
        error = e.what();
    } catch (const NumericalError& e) {
        code = 3;
        error = e.what();
    } catch (const std::exception& e) {
        code = 3;
        error = e.what();
    }
    if (!error.empty()) std::cerr << "error: " << error << "\n";
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(out.dir, cmd->name, config_path, settings, secs, code, error);
    return code;
}
