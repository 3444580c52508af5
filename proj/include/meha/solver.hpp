#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "meha/core.hpp"
#include "meha/diagnostics.hpp"

namespace meha {

/// Penalty and step-size schedules: c_k = c_lower (k+1)^p, and alpha/beta either
/// fixed or annealed as alpha0/(1+k)^q. eta never changes.
struct Schedule {
    double c_lower = 1.0;
    double p = 0.0;
    double alpha0 = 0.0;
    double beta0 = 0.0;
    double eta0 = 0.0;
    StepMode step_mode;

    static Schedule from(const SolverConfig& cfg);
};

struct StepSizes {
    double alpha;
    double beta;
    double eta;
};

double penalty_at(const Schedule& sched, std::size_t k);
StepSizes stepsize_at(const Schedule& sched, std::size_t k);

/// (1/c) grad_x F(x,y) + grad_x (f+g)(x,y) - grad_x (f+g)(x,theta_next).
Vector direction_x(const ProblemSpec& prob, const IterateState& state, const Vector& theta_next, double c_k);

/// (1/c) grad_y F(x_next,y) + grad_y f(x_next,y) - (y - theta_next)/gamma.
Vector direction_y(const ProblemSpec& prob, const Vector& x_next, const Vector& y, const Vector& theta_next,
                   double c_k, double gamma);

struct StepReport {
    IterateState state;
    Vector dx;
    Vector dy;
};

/// One iteration: theta, then x (with theta^{k+1} and (x^k, y^k)), then y (at x^{k+1}).
StepReport meha_step_detailed(const ProblemSpec& prob, const IterateState& state, const SolverConfig& cfg);
IterateState meha_step(const ProblemSpec& prob, const IterateState& state, const SolverConfig& cfg);

enum class StopReason { tol_met, max_iters, numerical_failure };
std::string to_string(StopReason reason);

struct TraceOptions {
    /// Oracle-backed fields (gap, residual, merit) every diag_every records; 0 = last record only.
    std::size_t diag_every = 10;
    bool track_merit = true;
    std::optional<double> merit_weight;
    std::optional<double> F_lower;
    double residual_step = 1.0;
    std::size_t oracle_max_inner = 100000;
    /// Fill the elapsed column every 10 records. Off keeps traces byte-reproducible.
    bool record_timing = false;
};

struct RunResult {
    IterateState final;
    std::vector<TraceRecord> trace;
    StopReason stop_reason = StopReason::max_iters;
    double wall_time = 0.0;
    std::string failure_message;
};

/// Runs the single-loop iteration from init until the stop rule fires or max_iters.
/// Numerical failures end the run with a partial trace instead of throwing.
RunResult run(const ProblemSpec& prob, const SolverConfig& cfg, const IterateState& init,
              const std::optional<AnalyticSolution>& solution = std::nullopt, const TraceOptions& opts = {});

}  // namespace meha
