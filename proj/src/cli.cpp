#include "meha/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "meha/moreau.hpp"

#ifndef MEHA_VERSION
#define MEHA_VERSION "unknown"
#endif

namespace meha::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double sin_a = 2.0;
constexpr double sin_c = 2.0;
constexpr std::size_t group_lasso_n_each = 100;

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "problem", "dim",      "gamma", "c_lower", "p",    "alpha0",     "beta0",     "eta0",     "step_mode",
        "q",       "max_iters", "tol",  "stop_rule", "seed", "diag_every", "train_csv", "val_csv", "test_csv",
    };
    return keys;
}

std::size_t default_dim(const std::string& problem) {
    if (problem == "strong_convex_toy") return 1000;
    if (problem == "merely_convex") return 100;
    if (problem == "sin_nonconvex") return 1;
    if (problem == "lasso_toy") return 100;
    if (problem == "group_lasso") return 600;
    throw ConfigError("key 'problem': unknown problem '" + problem + "'");
}

std::size_t group_count(std::size_t m) { return m == 600 ? 30 : 300; }

// The bundle before any config overrides.
ProblemBundle base_bundle(const RunConfig& cfg) {
    const std::size_t n = cfg.dim;
    try {
        if (cfg.problem == "strong_convex_toy") return make_strong_convex_toy(n);
        if (cfg.problem == "merely_convex") return make_merely_convex(n);
        if (cfg.problem == "sin_nonconvex")
            return make_sin_nonconvex(n, sin_a, Vector::Constant(static_cast<Eigen::Index>(n), sin_c));
        if (cfg.problem == "lasso_toy") return make_lasso_toy(n);
        if (cfg.problem == "group_lasso") {
            const int given = cfg.train_csv.has_value() + cfg.val_csv.has_value() + cfg.test_csv.has_value();
            if (given != 0 && given != 3) throw ConfigError("keys 'train_csv', 'val_csv', 'test_csv' must be given together");
            Dataset data;
            if (given == 3) {
                data = load_csv_dataset(*cfg.train_csv, *cfg.val_csv, *cfg.test_csv);
                if (data.m() != n)
                    throw ConfigError("key 'dim': " + std::to_string(n) + " does not match the " +
                                      std::to_string(data.m()) + " feature columns in the CSV files");
            } else {
                data = generate_group_lasso_data(group_lasso_n_each, n, cfg.solver.seed);
            }
            return make_group_lasso(data, group_count(n));
        }
    } catch (const ArgumentError& e) {
        throw ConfigError("key 'dim': " + std::string(e.what()));
    } catch (const CsvError& e) {
        throw ConfigError(e.what());
    }
    throw ConfigError("key 'problem': unknown problem '" + cfg.problem + "'");
}

double number_at(const json& obj, const std::string& key) {
    const json& v = obj.at(key);
    if (!v.is_number()) throw ConfigError("key '" + key + "': expected a number, got " + std::string(v.type_name()));
    return v.get<double>();
}

std::size_t count_at(const json& obj, const std::string& key) {
    const json& v = obj.at(key);
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::size_t>(v.get<long long>());
    throw ConfigError("key '" + key + "': expected a non-negative integer, got " + v.dump());
}

std::string string_at(const json& obj, const std::string& key) {
    const json& v = obj.at(key);
    if (!v.is_string()) throw ConfigError("key '" + key + "': expected a string, got " + std::string(v.type_name()));
    return v.get<std::string>();
}

RunConfig config_from_json(const json& doc, const std::string& source) {
    if (!doc.is_object()) throw ConfigError(source + ": config must be a JSON object");
    const json& obj = doc.contains("config") && doc.at("config").is_object() ? doc.at("config") : doc;
    for (const auto& [key, value] : obj.items())
        if (!known_keys().count(key)) throw ConfigError(source + ": unknown key '" + key + "'");
    if (!obj.contains("problem")) throw ConfigError(source + ": missing key 'problem'");

    RunConfig cfg;
    cfg.problem = string_at(obj, "problem");
    cfg.dim = obj.contains("dim") ? count_at(obj, "dim") : default_dim(cfg.problem);
    if (obj.contains("seed")) cfg.solver.seed = count_at(obj, "seed");
    if (obj.contains("train_csv")) cfg.train_csv = string_at(obj, "train_csv");
    if (obj.contains("val_csv")) cfg.val_csv = string_at(obj, "val_csv");
    if (obj.contains("test_csv")) cfg.test_csv = string_at(obj, "test_csv");

    const ProblemBundle bundle = base_bundle(cfg);
    const std::uint64_t seed = cfg.solver.seed;
    cfg.solver = bundle.default_config;
    cfg.solver.seed = seed;
    cfg.diag_every = bundle.trace.diag_every;

    SolverConfig& s = cfg.solver;
    if (obj.contains("gamma")) s.gamma = number_at(obj, "gamma");
    if (obj.contains("c_lower")) s.c_lower = number_at(obj, "c_lower");
    if (obj.contains("p")) s.p = number_at(obj, "p");
    if (obj.contains("alpha0")) s.alpha0 = number_at(obj, "alpha0");
    if (obj.contains("beta0")) s.beta0 = number_at(obj, "beta0");
    if (obj.contains("eta0")) s.eta0 = number_at(obj, "eta0");
    if (obj.contains("q")) s.step_mode.q = number_at(obj, "q");
    if (obj.contains("max_iters")) s.max_iters = count_at(obj, "max_iters");
    if (obj.contains("tol")) s.stop_rule.tol = number_at(obj, "tol");
    if (obj.contains("diag_every")) cfg.diag_every = count_at(obj, "diag_every");
    try {
        if (obj.contains("step_mode")) s.step_mode.kind = step_mode_from_string(string_at(obj, "step_mode"));
    } catch (const ArgumentError& e) {
        throw ConfigError("key 'step_mode': " + std::string(e.what()));
    }
    try {
        if (obj.contains("stop_rule")) s.stop_rule.kind = stop_kind_from_string(string_at(obj, "stop_rule"));
    } catch (const ArgumentError& e) {
        throw ConfigError("key 'stop_rule': " + std::string(e.what()));
    }
    try {
        validate_config(s, bundle.constants);
    } catch (const ArgumentError& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return cfg;
}

json config_json(const RunConfig& cfg) {
    json j;
    j["problem"] = cfg.problem;
    j["dim"] = cfg.dim;
    j["gamma"] = cfg.solver.gamma;
    j["c_lower"] = cfg.solver.c_lower;
    j["p"] = cfg.solver.p;
    j["alpha0"] = cfg.solver.alpha0;
    j["beta0"] = cfg.solver.beta0;
    j["eta0"] = cfg.solver.eta0;
    j["step_mode"] = to_string(cfg.solver.step_mode.kind);
    j["q"] = cfg.solver.step_mode.q;
    j["max_iters"] = cfg.solver.max_iters;
    j["tol"] = cfg.solver.stop_rule.tol;
    j["stop_rule"] = to_string(cfg.solver.stop_rule.kind);
    j["seed"] = cfg.solver.seed;
    j["diag_every"] = cfg.diag_every;
    if (cfg.train_csv) j["train_csv"] = *cfg.train_csv;
    if (cfg.val_csv) j["val_csv"] = *cfg.val_csv;
    if (cfg.test_csv) j["test_csv"] = *cfg.test_csv;
    return j;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path.string() + ": cannot read file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void put(std::string& row, const std::optional<double>& v) {
    row += ',';
    if (v) row += format_double(*v);
}

std::optional<double> cell(const std::string& s, const fs::path& path, std::size_t line) {
    if (s.empty()) return std::nullopt;
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size()) throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": bad cell '" + s + "'");
    return v;
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::map<std::string, std::string> problem_parameters(const RunConfig& cfg) {
    std::map<std::string, std::string> out;
    if (cfg.problem == "sin_nonconvex") {
        out["a"] = format_double(sin_a);
        out["c"] = format_double(sin_c) + " (every component)";
    } else if (cfg.problem == "group_lasso") {
        out["groups"] = std::to_string(group_count(cfg.dim));
        if (!cfg.train_csv) {
            out["samples_per_split"] = std::to_string(group_lasso_n_each);
            out["snr"] = "2";
        }
        out["stop_rule_note"] =
            "the published rule |x^k - x^(k-1)|/|x^k| <= 0.2 is loose; tests additionally compare test error "
            "against the unregularized fit";
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    out << text;
    if (!out) throw std::runtime_error(path.string() + ": write failed");
}

int exit_code_for(const RunManifest& m) {
    return m.stop_reason == to_string(StopReason::numerical_failure) ? exit_numerical_failure : exit_ok;
}

}  // namespace

std::vector<std::string> problem_names() {
    return {"strong_convex_toy", "merely_convex", "sin_nonconvex", "lasso_toy", "group_lasso"};
}

RunConfig parse_config_text(const std::string& text, const std::string& source) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(source + ": malformed JSON: " + e.what());
    }
    return config_from_json(doc, source);
}

RunConfig parse_config(const fs::path& path) { return parse_config_text(read_file(path), path.string()); }

ProblemBundle make_bundle(const RunConfig& cfg) {
    ProblemBundle b = base_bundle(cfg);
    b.default_config = cfg.solver;
    b.trace.diag_every = cfg.diag_every;
    if (b.constants.L_f && b.trace.merit_weight) b.trace.merit_weight = default_merit_weight(b.constants, cfg.solver.gamma);
    return b;
}

std::string config_to_json(const RunConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

void write_trace_csv(const std::vector<TraceRecord>& trace, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    out << trace_header << '\n';
    std::string row;
    for (const TraceRecord& r : trace) {
        row = std::to_string(r.k);
        put(row, r.c_k);
        put(row, r.alpha_k);
        put(row, r.beta_k);
        put(row, r.F_val);
        put(row, r.gap);
        put(row, r.residual_surrogate);
        put(row, r.merit);
        put(row, r.err_x_rel);
        put(row, r.err_y_rel);
        put(row, r.theta_inner_residual);
        put(row, r.elapsed);
        out << row << '\n';
    }
    if (!out) throw std::runtime_error(path.string() + ": write failed");
}

std::vector<TraceRecord> read_trace_csv(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path.string() + ": cannot open");
    std::string line;
    if (!std::getline(in, line) || line != trace_header)
        throw std::runtime_error(path.string() + ": missing or unexpected header");
    std::vector<TraceRecord> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (cells.size() != 12)
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 12 cells");
        auto required = [&](std::size_t i) {
            const auto v = cell(cells[i], path, lineno);
            if (!v) throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": empty required cell");
            return *v;
        };
        TraceRecord r;
        r.k = static_cast<std::size_t>(required(0));
        r.c_k = required(1);
        r.alpha_k = required(2);
        r.beta_k = required(3);
        r.F_val = required(4);
        r.gap = cell(cells[5], path, lineno);
        r.residual_surrogate = cell(cells[6], path, lineno);
        r.merit = cell(cells[7], path, lineno);
        r.err_x_rel = cell(cells[8], path, lineno);
        r.err_y_rel = cell(cells[9], path, lineno);
        r.theta_inner_residual = cell(cells[10], path, lineno);
        r.elapsed = cell(cells[11], path, lineno);
        out.push_back(r);
    }
    return out;
}

std::string manifest_to_json(const RunManifest& m) {
    json j;
    j["config"] = config_json(m.config);
    j["problem_parameters"] = m.problem_parameters;
    j["code_version"] = m.code_version;
    j["started_at"] = m.started_at;
    j["stop_reason"] = m.stop_reason;
    j["iterations"] = m.iterations;
    json metrics = json::object();
    for (const auto& [k, v] : m.final_metrics) metrics[k] = std::isfinite(v) ? json(v) : json(nullptr);
    j["final_metrics"] = metrics;
    j["wall_time_s"] = m.wall_time;
    if (!m.failure_message.empty()) j["failure_message"] = m.failure_message;
    j["warnings"] = m.warnings;
    return j.dump(2) + "\n";
}

RunManifest execute(const RunConfig& cfg, const fs::path& out_dir, const RunOptions& opts) {
    RunManifest manifest;
    manifest.config = cfg;
    manifest.problem_parameters = problem_parameters(cfg);
    manifest.code_version = MEHA_VERSION;
    manifest.started_at = utc_now();

    ProblemBundle bundle = make_bundle(cfg);
    manifest.warnings = validate_config(cfg.solver, bundle.constants);
    bundle.trace.record_timing = opts.record_timing;

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error(out_dir.string() + ": cannot create directory: " + ec.message());

    const RunResult result = run(bundle.spec, cfg.solver, bundle.init, bundle.solution, bundle.trace);
    manifest.stop_reason = to_string(result.stop_reason);
    manifest.iterations = result.final.k;
    manifest.wall_time = result.wall_time;
    manifest.failure_message = result.failure_message;
    if (!result.trace.empty()) {
        const TraceRecord& last = result.trace.back();
        manifest.final_metrics["F_val"] = last.F_val;
        if (last.err_x_rel) manifest.final_metrics["err_x_rel"] = *last.err_x_rel;
        if (last.err_y_rel) manifest.final_metrics["err_y_rel"] = *last.err_y_rel;
        if (last.gap) manifest.final_metrics["gap"] = *last.gap;
        if (last.residual_surrogate) manifest.final_metrics["residual_surrogate"] = *last.residual_surrogate;
    }
    if (bundle.metrics && result.stop_reason != StopReason::numerical_failure)
        for (const auto& [k, v] : bundle.metrics(result.final)) manifest.final_metrics[k] = v;

    write_trace_csv(result.trace, out_dir / "trace.csv");
    write_text(out_dir / "manifest.json", manifest_to_json(manifest));
    return manifest;
}

int cmd_run(const fs::path& config, const fs::path& out_dir, const RunOptions& opts) {
    try {
        const RunConfig cfg = parse_config(config);
        const RunManifest m = execute(cfg, out_dir, opts);
        std::cout << cfg.problem << ": " << m.stop_reason << " after " << m.iterations << " iterations";
        if (m.final_metrics.count("err_x_rel")) std::cout << ", err_x_rel " << m.final_metrics.at("err_x_rel");
        std::cout << '\n';
        if (!m.failure_message.empty()) std::cerr << "error: " << m.failure_message << '\n';
        return exit_code_for(m);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_io_error;
    }
}

int cmd_sweep(const fs::path& config, const fs::path& out_dir, std::size_t jobs, const RunOptions& opts) {
    if (jobs == 0) {
        std::cerr << "error: --jobs must be positive\n";
        return exit_io_error;
    }
    json doc;
    try {
        doc = json::parse(read_file(config));
    } catch (const std::exception& e) {
        std::cerr << "error: " << config.string() << ": " << e.what() << '\n';
        return exit_io_error;
    }
    if (!doc.is_object()) {
        std::cerr << "error: " << config.string() << ": sweep config must be a JSON object\n";
        return exit_io_error;
    }

    // Axes in key order (json objects iterate sorted); the last axis varies fastest.
    std::vector<std::string> axes;
    for (const auto& [key, value] : doc.items())
        if (value.is_array()) {
            if (value.empty()) {
                std::cerr << "error: key '" << key << "': empty value list\n";
                return exit_io_error;
            }
            axes.push_back(key);
        }
    std::vector<json> points{doc};
    for (const std::string& key : axes) {
        std::vector<json> next;
        for (const json& base : points)
            for (const json& v : doc.at(key)) {
                json p = base;
                p[key] = v;
                next.push_back(std::move(p));
            }
        points = std::move(next);
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        std::cerr << "error: " << out_dir.string() << ": " << ec.message() << '\n';
        return exit_io_error;
    }

    struct Outcome {
        int code = exit_ok;
        std::string stop_reason;
        std::size_t iterations = 0;
        double wall_time = 0.0;
        std::map<std::string, double> metrics;
        std::string error;
    };
    std::vector<Outcome> outcomes(points.size());
    auto run_dir = [&](std::size_t i) {
        char name[32];
        std::snprintf(name, sizeof name, "run_%03zu", i);
        return out_dir / name;
    };

    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&]() {
        for (std::size_t i = next++; i < points.size(); i = next++) {
            Outcome& o = outcomes[i];
            try {
                const fs::path dir = run_dir(i);
                fs::create_directories(dir);
                write_text(dir / "config.json", points[i].dump(2) + "\n");
                const RunManifest m = execute(config_from_json(points[i], run_dir(i).string()), dir, opts);
                o.stop_reason = m.stop_reason;
                o.iterations = m.iterations;
                o.wall_time = m.wall_time;
                o.metrics = m.final_metrics;
                o.code = exit_code_for(m);
                if (!m.failure_message.empty()) o.error = m.failure_message;
            } catch (const std::exception& e) {
                o.code = exit_io_error;
                o.stop_reason = "error";
                o.error = e.what();
            }
            std::lock_guard<std::mutex> lock(log_mutex);
            std::cout << run_dir(i).filename().string() << ": " << o.stop_reason << " after " << o.iterations
                      << " iterations\n";
            if (!o.error.empty()) std::cerr << run_dir(i).filename().string() << ": " << o.error << '\n';
        }
    };
    std::vector<std::thread> pool;
    const std::size_t n_threads = std::min(jobs, points.size());
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    std::string summary = "run";
    for (const std::string& key : axes) summary += "," + key;
    summary += ",stop_reason,iterations,err_x_rel,F_val,wall_time_s\n";
    int code = exit_ok;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Outcome& o = outcomes[i];
        summary += run_dir(i).filename().string();
        for (const std::string& key : axes) {
            const json& v = points[i].at(key);
            summary += "," + (v.is_string() ? v.get<std::string>() : v.is_number_float() ? format_double(v.get<double>()) : v.dump());
        }
        summary += "," + o.stop_reason + "," + std::to_string(o.iterations) + ",";
        if (o.metrics.count("err_x_rel")) summary += format_double(o.metrics.at("err_x_rel"));
        summary += ",";
        if (o.metrics.count("F_val")) summary += format_double(o.metrics.at("F_val"));
        summary += "," + format_double(o.wall_time) + "\n";
        code = std::max(code, o.code);
    }
    try {
        write_text(out_dir / "sweep_summary.csv", summary);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_io_error;
    }
    // Numerical failures rank above configuration errors in the exit code.
    return code;
}

// ---------------------------------------------------------------------------
// Self-check battery.

bool CheckReport::ok() const {
    return std::all_of(items.begin(), items.end(), [](const CheckItem& c) { return c.passed; });
}

std::vector<ProblemBundle> check_bundles() {
    std::vector<ProblemBundle> out;
    out.push_back(make_strong_convex_toy(20));
    out.push_back(make_merely_convex(20));
    out.push_back(make_sin_nonconvex(5, sin_a, Vector::Constant(5, sin_c)));
    out.push_back(make_lasso_toy(20));
    out.push_back(make_group_lasso(generate_group_lasso_data(30, 150, 7), 15));
    return out;
}

namespace {

Vector concat(const Vector& a, const Vector& b) {
    Vector z(a.size() + b.size());
    z << a, b;
    return z;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

}  // namespace

CheckReport run_check_battery(const std::vector<ProblemBundle>& bundles) {
    CheckReport report;
    DiagnosticsReport& diag = report.diagnostics;
    std::mt19937_64 rng(20240613);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto add = [&](std::string name, bool passed, std::string detail) {
        report.items.push_back({std::move(name), passed, std::move(detail)});
    };

    // Closed-form prox maps against a grid search. Group shrinkage reduces to a
    // scalar problem along theta^(j)/|theta^(j)|.
    {
        constexpr int resolution = 20000;
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            const double theta = 3.0 * normal(rng);
            const double w = 2.0 * unif(rng);
            const double s = 0.1 + unif(rng);
            const double halfwidth = std::abs(theta) + s * w + 1.0;
            const double h = 2.0 * halfwidth / resolution;
            const double oracle =
                prox_bruteforce_oracle([w](double u) { return w * std::abs(u); }, s, theta, halfwidth, resolution);
            const double closed = soft_threshold(Vector::Constant(1, theta), s * w)[0];
            worst = std::max(worst, std::abs(closed - oracle) / h);

            Vector block(4);
            for (Eigen::Index i = 0; i < 4; ++i) block[i] = normal(rng);
            const double r = block.norm();
            const double hw = r + s * w + 1.0;
            const double radial =
                prox_bruteforce_oracle([w](double u) { return w * std::abs(u); }, s, r, hw, resolution);
            const GroupPartition one_group({{0, 1, 2, 3}}, 4);
            const Vector shrunk = group_soft_threshold(block, one_group, Vector::Constant(1, s * w));
            worst = std::max(worst, (shrunk - radial * block / r).norm() / (2.0 * hw / resolution));
        }
        diag.prox_oracle_max_error = worst;
        add("prox maps match grid oracle", worst <= 2.0, "max error " + fmt(worst) + " grid spacings (limit 2)");
    }

    // Gradient callbacks against central differences at random feasible points.
    double worst_fd = 0.0;
    for (const ProblemBundle& b : bundles) {
        const ProblemSpec& p = b.spec;
        const auto n = static_cast<Eigen::Index>(p.n);
        const auto m = static_cast<Eigen::Index>(p.m);
        std::vector<Vector> points;
        for (int i = 0; i < 20; ++i) {
            Vector x(n), y(m);
            for (Eigen::Index j = 0; j < n; ++j) x[j] = 0.1 + 0.8 * unif(rng);
            for (Eigen::Index j = 0; j < m; ++j) y[j] = normal(rng);
            points.push_back(concat(p.proj_X(x), y));
        }
        auto split = [n, m](const Vector& z) { return std::pair<Vector, Vector>(z.head(n), z.tail(m)); };
        double err = finite_diff_check(
            [&](const Vector& z) { auto [x, y] = split(z); return p.eval_F(x, y); },
            [&](const Vector& z) { auto [x, y] = split(z); const auto g = p.grad_F(x, y); return concat(g.x, g.y); },
            points, 1e-6);
        err = std::max(err, finite_diff_check(
            [&](const Vector& z) { auto [x, y] = split(z); return p.eval_f(x, y); },
            [&](const Vector& z) { auto [x, y] = split(z); const auto g = p.grad_f(x, y); return concat(g.x, g.y); },
            points, 1e-6));
        if (!p.smooth_only) {
            for (const Vector& z : points) {
                const Vector y = z.tail(m);
                err = std::max(err, finite_diff_check([&](const Vector& x) { return p.eval_g(x, y); },
                                                      [&](const Vector& x) { return p.grad_x_g(x, y); },
                                                      {Vector(z.head(n))}, 1e-6));
            }
        }
        worst_fd = std::max(worst_fd, err);
        add(b.name + ": gradients match finite differences", err <= 1e-5, "max relative error " + fmt(err));
    }

    // Envelope gradient against central differences of the envelope value.
    for (const ProblemBundle& b : bundles) {
        if (b.name != "merely_convex" && b.name != "lasso_toy") continue;
        const ProblemSpec& p = b.spec;
        const auto n = static_cast<Eigen::Index>(p.n);
        const auto m = static_cast<Eigen::Index>(p.m);
        const double gamma = b.default_config.gamma;
        const double eta = 0.5 / (b.constants.L_f.value_or(1.0) + 1.0 / gamma);
        auto envelope = [&](const Vector& z) {
            return solve_theta_star(p, z.head(n), z.tail(m), eta, gamma, 1e-12, 200000);
        };
        std::vector<Vector> points;
        for (int i = 0; i < 5; ++i) {
            Vector x(n), y(m);
            for (Eigen::Index j = 0; j < n; ++j) x[j] = 0.1 + 0.8 * unif(rng);
            for (Eigen::Index j = 0; j < m; ++j) y[j] = normal(rng);
            points.push_back(concat(x, y));
        }
        const double err = finite_diff_check(
            [&](const Vector& z) { return envelope(z).value; },
            [&](const Vector& z) {
                const MoreauEval e = envelope(z);
                return concat(e.grad_x, e.grad_y);
            },
            points, 1e-5);
        worst_fd = std::max(worst_fd, err);
        add(b.name + ": envelope gradient matches finite differences", err <= 1e-5, "max relative error " + fmt(err));
    }
    diag.max_grad_fd_error = worst_fd;

    // Contraction of the theta update on a random convex quadratic lower level.
    {
        constexpr Eigen::Index m = 8;
        Matrix B(m, m);
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j) B(i, j) = normal(rng) / std::sqrt(static_cast<double>(m));
        const Matrix A = B.transpose() * B;
        const double L = Eigen::SelfAdjointEigenSolver<Matrix>(A).eigenvalues().maxCoeff();
        ProblemSpec q;
        q.n = static_cast<std::size_t>(m);
        q.m = static_cast<std::size_t>(m);
        q.smooth_only = true;
        q.eval_F = [](const Vector& x, const Vector& y) { return 0.5 * (x.squaredNorm() + y.squaredNorm()); };
        q.grad_F = [](const Vector& x, const Vector& y) { return BlockGradient{x, y}; };
        q.eval_f = [A](const Vector& x, const Vector& y) { return 0.5 * y.dot(A * y) - x.dot(y); };
        q.grad_f = [A](const Vector& x, const Vector& y) { return BlockGradient{-y, A * y - x}; };
        q.proj_X = [](const Vector& z) { return z; };
        q.proj_Y = [](const Vector& z) { return z; };

        const double gamma = 2.0;
        const double eta = 1.0 / (L + 1.0 / gamma);
        const double sigma = contraction_factor(eta, gamma, 0.0, 0.0);
        double worst = 0.0;
        std::size_t violations = 0;
        for (int trial = 0; trial < 100; ++trial) {
            Vector x(m), y(m), theta(m);
            for (Eigen::Index j = 0; j < m; ++j) {
                x[j] = normal(rng);
                y[j] = normal(rng);
                theta[j] = 5.0 * normal(rng);
            }
            const Matrix H = A + Matrix::Identity(m, m) / gamma;
            const Vector star = H.ldlt().solve(x + y / gamma);
            const double before = (theta - star).norm();
            const double ratio = (theta_step(q, x, y, theta, eta, gamma) - star).norm() / before;
            worst = std::max(worst, ratio);
            if (ratio > sigma + 1e-9) ++violations;
        }
        diag.max_contraction_ratio = worst;
        diag.contraction_bound = sigma;
        diag.contraction_violations = violations;
        add("theta update contracts at the predicted rate", violations == 0,
            "max ratio " + fmt(worst) + " vs sigma " + fmt(sigma));
    }

    // Stored solutions satisfy the lower-level optimality condition.
    for (const ProblemBundle& b : bundles) {
        if (!b.solution || !b.solution->x_star || !b.solution->y_star || !b.ll_optimality) continue;
        const double r = b.ll_optimality(*b.solution->x_star, *b.solution->y_star);
        add(b.name + ": solution is lower-level stationary", r <= 1e-9, "residual " + fmt(r));
    }
    return report;
}

void print_check_report(const CheckReport& report, std::ostream& out) {
    for (const CheckItem& c : report.items)
        out << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
    const DiagnosticsReport& d = report.diagnostics;
    out << "max_grad_fd_error " << fmt(d.max_grad_fd_error) << "\n"
        << "prox_oracle_max_error " << fmt(d.prox_oracle_max_error) << " grid spacings\n"
        << "contraction_violations " << d.contraction_violations << "\n"
        << "max_contraction_ratio " << fmt(d.max_contraction_ratio) << "\n"
        << "contraction_bound " << fmt(d.contraction_bound) << "\n";
    const auto failed = std::count_if(report.items.begin(), report.items.end(), [](const CheckItem& c) { return !c.passed; });
    out << (failed == 0 ? "all checks passed" : std::to_string(failed) + " check(s) failed") << "\n";
}

int cmd_check(std::ostream& out, const std::vector<ProblemBundle>& bundles) {
    try {
        const CheckReport report = run_check_battery(bundles);
        print_check_report(report, out);
        return report.ok() ? exit_ok : exit_io_error;
    } catch (const std::exception& e) {
        out << "FAIL self-check aborted: " << e.what() << "\n";
        return exit_io_error;
    }
}

int cmd_check(std::ostream& out) { return cmd_check(out, check_bundles()); }

}  // namespace meha::cli
