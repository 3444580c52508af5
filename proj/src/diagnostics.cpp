#include "meha/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace meha {

namespace {

MoreauEval envelope_at(const ProblemSpec& prob, const Vector& x, const Vector& y, double gamma,
                       const OracleSettings& oracle, const std::optional<Vector>& theta0 = std::nullopt) {
    if (!(oracle.tol > 0.0)) throw ArgumentError("oracle tolerance must be positive");
    return solve_theta_star(prob, x, y, oracle.eta, gamma, oracle.tol, oracle.max_inner, theta0);
}

}  // namespace

double stationarity_residual(const ProblemSpec& prob, const Vector& x, const Vector& y, double c_k, double /*gamma*/,
                             double ref_step, const MoreauEval& envelope) {
    if (!(ref_step > 0.0)) throw ArgumentError("stationarity_residual: ref_step must be positive");
    if (!(c_k > 0.0)) throw ArgumentError("stationarity_residual: c_k must be positive");

    const BlockGradient gF = prob.grad_F(x, y);
    const BlockGradient gf = prob.grad_f(x, y);
    const Vector Gx = gF.x / c_k + gf.x + prob.gx(x, y) - envelope.grad_x;
    const Vector Gy = gF.y / c_k + gf.y - envelope.grad_y;

    const Vector x_map = (x - prob.proj_X(x - ref_step * Gx)) / ref_step;
    const Vector y_map = (y - prob.prox(x, ref_step, y - ref_step * Gy)) / ref_step;
    return x_map.norm() + y_map.norm();
}

Measured stationarity_residual(const ProblemSpec& prob, const Vector& x, const Vector& y, double c_k, double gamma,
                               double ref_step, const OracleSettings& oracle) {
    const MoreauEval env = envelope_at(prob, x, y, gamma, oracle);
    return {stationarity_residual(prob, x, y, c_k, gamma, ref_step, env), env.converged};
}

double feasibility_gap(const ProblemSpec& prob, const Vector& x, const Vector& y, const MoreauEval& envelope) {
    return std::max(0.0, prob.phi(x, y) - envelope.value);
}

Measured feasibility_gap(const ProblemSpec& prob, const Vector& x, const Vector& y, double gamma,
                         const OracleSettings& oracle) {
    const MoreauEval env = envelope_at(prob, x, y, gamma, oracle);
    const double raw = prob.phi(x, y) - env.value;
    return {std::max(0.0, raw), env.converged && raw >= -1e-9};
}

double default_merit_weight(const ProblemConstants& consts, double gamma) {
    if (!consts.L_f) throw ArgumentError("merit weight needs L_f (or an explicit C_V)");
    const double L = *consts.L_f + consts.L_g.value_or(0.0);
    return L * L + 1.0 / (gamma * gamma);
}

Measured merit_value(const ProblemSpec& prob, const IterateState& state, double c_k, double gamma,
                     double merit_weight, double F_lower, const OracleSettings& oracle) {
    if (!(merit_weight > 0.0)) throw ArgumentError("merit_value: C_V must be positive");
    if (!(c_k > 0.0)) throw ArgumentError("merit_value: c_k must be positive");
    const MoreauEval env = envelope_at(prob, state.x, state.y, gamma, oracle);
    const double penalized = (prob.eval_F(state.x, state.y) - F_lower) / c_k + prob.phi(state.x, state.y) - env.value;
    const double tracking = merit_weight * (state.theta - env.theta_star).squaredNorm();
    return {penalized + tracking, env.converged};
}

Vector hypergradient_quadratic(const Matrix& Q_yy, const Matrix& Q_xy, const ProblemSpec& prob, const Vector& x,
                               const std::function<Vector(const Vector&)>& ll_solver) {
    const auto m = static_cast<Eigen::Index>(prob.m);
    const auto n = static_cast<Eigen::Index>(prob.n);
    if (Q_yy.rows() != m || Q_yy.cols() != m || Q_xy.rows() != n || Q_xy.cols() != m)
        throw ArgumentError("hypergradient_quadratic: Hessian block shapes do not match (n, m)");
    Eigen::LLT<Matrix> llt(Q_yy);
    if (llt.info() != Eigen::Success) throw ArgumentError("hypergradient_quadratic: Q_yy is not positive definite");

    const Vector y_star = ll_solver(x);
    const BlockGradient gF = prob.grad_F(x, y_star);
    return gF.x - Q_xy * llt.solve(gF.y);
}

double finite_diff_check(const std::function<double(const Vector&)>& fn,
                         const std::function<Vector(const Vector&)>& grad, const std::vector<Vector>& points,
                         double h) {
    if (!(h > 0.0)) throw ArgumentError("finite_diff_check: h must be positive");
    double worst = 0.0;
    for (const Vector& z : points) {
        const Vector g = grad(z);
        Vector fd(z.size());
        Vector probe = z;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            probe[i] = z[i] + h;
            const double up = fn(probe);
            probe[i] = z[i] - h;
            const double down = fn(probe);
            probe[i] = z[i];
            fd[i] = (up - down) / (2.0 * h);
        }
        const double scale = std::max(g.norm(), fd.norm());
        const double err = (g - fd).norm();
        worst = std::max(worst, scale > 1e-300 ? err / scale : err);
    }
    return worst;
}

double rate_fit(std::span<const double> ks, std::span<const double> values, double k_lo, double k_hi) {
    if (ks.size() != values.size()) throw ArgumentError("rate_fit: ks and values differ in length");
    std::vector<double> lx, ly;
    double running = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const bool in_window = ks[i] >= k_lo && ks[i] <= k_hi;
        if (in_window && !(values[i] > 0.0))
            throw ArgumentError("rate_fit: nonpositive value at k = " + std::to_string(ks[i]));
        running = std::min(running, values[i]);
        if (in_window) {
            if (!(ks[i] > 0.0)) throw ArgumentError("rate_fit: window must exclude k = 0");
            lx.push_back(std::log(ks[i]));
            ly.push_back(std::log(running));
        }
    }
    if (lx.size() < 10) throw ArgumentError("rate_fit: window needs at least 10 samples");

    const double n = static_cast<double>(lx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    if (sxx == 0.0) throw ArgumentError("rate_fit: window spans a single k");
    return sxy / sxx;
}

double rate_fit(const std::vector<TraceRecord>& trace, TraceField field, std::size_t k_lo, std::size_t k_hi) {
    std::vector<double> ks, values;
    for (const auto& rec : trace) {
        const auto& v = field == TraceField::gap ? rec.gap : rec.residual_surrogate;
        if (!v) continue;
        ks.push_back(static_cast<double>(rec.k));
        values.push_back(*v);
    }
    return rate_fit(ks, values, static_cast<double>(k_lo), static_cast<double>(k_hi));
}

}  // namespace meha
