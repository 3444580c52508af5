#include "meha/solver.hpp"

#include <chrono>
#include <cmath>

#include "meha/moreau.hpp"

namespace meha {

Schedule Schedule::from(const SolverConfig& cfg) {
    return Schedule{cfg.c_lower, cfg.p, cfg.alpha0, cfg.beta0, cfg.eta0, cfg.step_mode};
}

double penalty_at(const Schedule& sched, std::size_t k) {
    return sched.c_lower * std::pow(static_cast<double>(k) + 1.0, sched.p);
}

StepSizes stepsize_at(const Schedule& sched, std::size_t k) {
    if (sched.step_mode.kind == StepMode::Kind::fixed) return {sched.alpha0, sched.beta0, sched.eta0};
    const double decay = std::pow(static_cast<double>(k) + 1.0, sched.step_mode.q);
    return {sched.alpha0 / decay, sched.beta0 / decay, sched.eta0};
}

Vector direction_x(const ProblemSpec& prob, const IterateState& state, const Vector& theta_next, double c_k) {
    const BlockGradient gF = prob.grad_F(state.x, state.y);
    const BlockGradient gf_y = prob.grad_f(state.x, state.y);
    const BlockGradient gf_theta = prob.grad_f(state.x, theta_next);
    Vector d = gF.x / c_k + gf_y.x - gf_theta.x;
    if (!prob.smooth_only) d += prob.grad_x_g(state.x, state.y) - prob.grad_x_g(state.x, theta_next);
    if (!d.allFinite()) throw NumericalFailure("direction_x is not finite");
    return d;
}

Vector direction_y(const ProblemSpec& prob, const Vector& x_next, const Vector& y, const Vector& theta_next,
                   double c_k, double gamma) {
    const BlockGradient gF = prob.grad_F(x_next, y);
    const BlockGradient gf = prob.grad_f(x_next, y);
    Vector d = gF.y / c_k + gf.y - (y - theta_next) / gamma;
    if (!d.allFinite()) throw NumericalFailure("direction_y is not finite");
    return d;
}

StepReport meha_step_detailed(const ProblemSpec& prob, const IterateState& state, const SolverConfig& cfg) {
    const Schedule sched = Schedule::from(cfg);
    const double c = penalty_at(sched, state.k);
    const StepSizes steps = stepsize_at(sched, state.k);
    const auto k = static_cast<std::int64_t>(state.k);

    try {
        StepReport out;
        out.state.theta = theta_step(prob, state.x, state.y, state.theta, steps.eta, cfg.gamma);
        out.dx = direction_x(prob, state, out.state.theta, c);
        out.state.x = prob.proj_X(state.x - steps.alpha * out.dx);
        out.dy = direction_y(prob, out.state.x, state.y, out.state.theta, c, cfg.gamma);
        out.state.y = prob.prox(out.state.x, steps.beta, state.y - steps.beta * out.dy);
        if (!out.state.x.allFinite() || !out.state.y.allFinite()) throw NumericalFailure("iterate is not finite");
        out.state.k = state.k + 1;
        return out;
    } catch (const NumericalFailure& e) {
        throw NumericalFailure(e.detail(), k);
    }
}

IterateState meha_step(const ProblemSpec& prob, const IterateState& state, const SolverConfig& cfg) {
    return meha_step_detailed(prob, state, cfg).state;
}

std::string to_string(StopReason reason) {
    switch (reason) {
        case StopReason::tol_met: return "tol_met";
        case StopReason::max_iters: return "max_iters";
        case StopReason::numerical_failure: return "numerical_failure";
    }
    return "unknown";
}

namespace {

std::optional<double> relative_error(const Vector& v, const std::optional<Vector>& ref) {
    if (!ref || ref->size() != v.size()) return std::nullopt;
    const double scale = ref->norm();
    const double err = (v - *ref).norm();
    return scale > 0.0 ? err / scale : err;
}

class TraceBuilder {
public:
    TraceBuilder(const ProblemSpec& prob, const SolverConfig& cfg, const std::optional<AnalyticSolution>& solution,
                 const TraceOptions& opts)
        : prob_(prob), cfg_(cfg), sched_(Schedule::from(cfg)), opts_(opts),
          start_(std::chrono::steady_clock::now()) {
        if (solution) {
            x_star_ = solution->x_star;
            y_star_ = solution->y_star;
        }
        oracle_ = {cfg.eta0, cfg.inner_oracle_tol, opts.oracle_max_inner};
    }

    void append(const IterateState& s) {
        TraceRecord rec;
        rec.k = s.k;
        rec.c_k = penalty_at(sched_, s.k);
        const StepSizes steps = stepsize_at(sched_, s.k);
        rec.alpha_k = steps.alpha;
        rec.beta_k = steps.beta;
        rec.F_val = prob_.eval_F(s.x, s.y);
        rec.err_x_rel = relative_error(s.x, x_star_);
        rec.err_y_rel = relative_error(s.y, y_star_);
        if (opts_.record_timing && s.k % 10 == 0) rec.elapsed = seconds();
        trace_.push_back(rec);
        if (opts_.diag_every > 0 && s.k % opts_.diag_every == 0) fill_diagnostics(trace_.back(), s);
    }

    /// Makes sure the last record carries oracle diagnostics and a timestamp.
    void finish(const IterateState& s) {
        if (trace_.empty()) return;
        TraceRecord& last = trace_.back();
        if (!last.gap) fill_diagnostics(last, s);
        if (opts_.record_timing && !last.elapsed) last.elapsed = seconds();
    }

    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

    std::vector<TraceRecord> take() { return std::move(trace_); }

private:
    void fill_diagnostics(TraceRecord& rec, const IterateState& s) {
        const MoreauEval env =
            solve_theta_star(prob_, s.x, s.y, oracle_.eta, cfg_.gamma, oracle_.tol, oracle_.max_inner, s.theta);
        const double gap = feasibility_gap(prob_, s.x, s.y, env);
        rec.gap = gap;
        rec.residual_surrogate = stationarity_residual(prob_, s.x, s.y, rec.c_k, cfg_.gamma, opts_.residual_step, env);
        rec.theta_inner_residual = env.inner_residual;
        if (opts_.track_merit && opts_.merit_weight && opts_.F_lower) {
            const double penalized = (rec.F_val - *opts_.F_lower) / rec.c_k + gap;
            rec.merit = penalized + *opts_.merit_weight * (s.theta - env.theta_star).squaredNorm();
        }
    }

    const ProblemSpec& prob_;
    const SolverConfig& cfg_;
    Schedule sched_;
    TraceOptions opts_;
    OracleSettings oracle_;
    std::optional<Vector> x_star_;
    std::optional<Vector> y_star_;
    std::chrono::steady_clock::time_point start_;
    std::vector<TraceRecord> trace_;
};

bool stop_rule_met(const StopRule& rule, const StepReport& step, const Vector& x_prev,
                   const std::optional<Vector>& x_star) {
    switch (rule.kind) {
        case StopKind::max_iters_only: return false;
        case StopKind::direction_norm: return step.dx.norm() <= rule.tol;
        case StopKind::rel_error_to_solution: {
            const auto err = relative_error(step.state.x, x_star);
            return err && *err <= rule.tol;
        }
        case StopKind::rel_change_x: {
            const double nx = step.state.x.norm();
            return nx > 0.0 && (step.state.x - x_prev).norm() / nx <= rule.tol;
        }
    }
    return false;
}

}  // namespace

RunResult run(const ProblemSpec& prob, const SolverConfig& cfg, const IterateState& init,
              const std::optional<AnalyticSolution>& solution, const TraceOptions& opts) {
    prob.check();
    const auto n = static_cast<Eigen::Index>(prob.n);
    const auto m = static_cast<Eigen::Index>(prob.m);
    if (init.x.size() != n || init.y.size() != m || init.theta.size() != m)
        throw ArgumentError("run: initial state dimensions do not match the problem");
    std::optional<Vector> x_star = solution ? solution->x_star : std::nullopt;
    if (cfg.stop_rule.kind == StopKind::rel_error_to_solution && !x_star)
        throw ArgumentError("run: rel_error_to_solution needs an analytic x*");

    TraceBuilder trace(prob, cfg, solution, opts);
    RunResult result;
    IterateState state = init;
    result.stop_reason = StopReason::max_iters;

    try {
        trace.append(state);
        for (std::size_t it = 0; it < cfg.max_iters; ++it) {
            StepReport step = meha_step_detailed(prob, state, cfg);
            const bool done = stop_rule_met(cfg.stop_rule, step, state.x, x_star);
            state = std::move(step.state);
            trace.append(state);
            if (done) {
                result.stop_reason = StopReason::tol_met;
                break;
            }
        }
        trace.finish(state);
    } catch (const NumericalFailure& e) {
        result.stop_reason = StopReason::numerical_failure;
        result.failure_message = e.what();
    }

    result.final = std::move(state);
    result.wall_time = trace.seconds();
    result.trace = trace.take();
    return result;
}

}  // namespace meha
