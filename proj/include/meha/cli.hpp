#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "meha/core.hpp"
#include "meha/diagnostics.hpp"
#include "meha/problems.hpp"
#include "meha/solver.hpp"

namespace meha::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_io_error = 1;
inline constexpr int exit_numerical_failure = 2;

/// Bad config content or an unreadable config file. The message names the key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Effective configuration of one run after problem defaults have been applied.
struct RunConfig {
    std::string problem;
    std::size_t dim = 0;
    SolverConfig solver;
    std::size_t diag_every = 0;
    std::optional<std::string> train_csv;
    std::optional<std::string> val_csv;
    std::optional<std::string> test_csv;
};

std::vector<std::string> problem_names();

/// Reads a flat JSON object (or a manifest.json, whose "config" member is used).
/// Missing keys take the problem's published defaults.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text, const std::string& source = "<config>");

/// Builds the benchmark named by cfg.problem with cfg.dim and applies the
/// solver / trace settings from cfg.
ProblemBundle make_bundle(const RunConfig& cfg);

/// Every key of cfg written out explicitly, so parse_config on it is lossless.
std::string config_to_json(const RunConfig& cfg);

void write_trace_csv(const std::vector<TraceRecord>& trace, const std::filesystem::path& path);
std::vector<TraceRecord> read_trace_csv(const std::filesystem::path& path);
inline constexpr const char* trace_header =
    "k,c_k,alpha_k,beta_k,F_val,gap,residual,merit,err_x_rel,err_y_rel,theta_inner_residual,elapsed_s";

struct RunManifest {
    RunConfig config;
    /// Fixed problem parameters that are not config keys (e.g. a, c of the sine problem).
    std::map<std::string, std::string> problem_parameters;
    std::string code_version;
    std::string started_at;
    std::string stop_reason;
    std::size_t iterations = 0;
    std::map<std::string, double> final_metrics;
    double wall_time = 0.0;
    std::string failure_message;
    std::vector<std::string> warnings;
};

std::string manifest_to_json(const RunManifest& manifest);

struct RunOptions {
    bool record_timing = false;
};

/// Runs one configuration and writes trace.csv + manifest.json into out_dir.
/// Returns the manifest; throws std::runtime_error on I/O failure.
RunManifest execute(const RunConfig& cfg, const std::filesystem::path& out_dir, const RunOptions& opts = {});

int cmd_run(const std::filesystem::path& config, const std::filesystem::path& out_dir, const RunOptions& opts = {});
int cmd_sweep(const std::filesystem::path& config, const std::filesystem::path& out_dir, std::size_t jobs,
              const RunOptions& opts = {});

struct CheckItem {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct CheckReport {
    std::vector<CheckItem> items;
    DiagnosticsReport diagnostics;
    bool ok() const;
};

/// Small instances of every benchmark, used by the self-check.
std::vector<ProblemBundle> check_bundles();
CheckReport run_check_battery(const std::vector<ProblemBundle>& bundles);
void print_check_report(const CheckReport& report, std::ostream& out);
int cmd_check(std::ostream& out);
int cmd_check(std::ostream& out, const std::vector<ProblemBundle>& bundles);

}  // namespace meha::cli
