#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "meha/core.hpp"
#include "meha/moreau.hpp"

namespace meha {

/// Settings for the near-exact inner solve used by every diagnostic.
struct OracleSettings {
    double eta = 1e-2;
    double tol = 1e-12;
    std::size_t max_inner = 100000;
};

/// A diagnostic value together with whether the inner oracle behind it converged.
struct Measured {
    double value = 0.0;
    bool oracle_converged = true;
};

/// One row of the per-iteration trace. Fields that need the inner oracle are
/// only filled on diagnostic iterations (and always on the last record).
struct TraceRecord {
    std::size_t k = 0;
    double c_k = 0.0;
    double alpha_k = 0.0;
    double beta_k = 0.0;
    double F_val = 0.0;
    std::optional<double> gap;
    std::optional<double> residual_surrogate;
    std::optional<double> merit;
    std::optional<double> err_x_rel;
    std::optional<double> err_y_rel;
    std::optional<double> theta_inner_residual;
    std::optional<double> elapsed;
};

struct DiagnosticsReport {
    double max_grad_fd_error = 0.0;
    double prox_oracle_max_error = 0.0;
    std::size_t contraction_violations = 0;
    double max_contraction_ratio = 0.0;
    double contraction_bound = 0.0;
    std::optional<double> fitted_rate_exponent;
};

/// Norm of the prox-gradient mapping of psi_{c_k}/c_k with reference step s:
///   |(x - Proj_X(x - s G_x)) / s| + |(y - Prox_{s g~(x,.)}(y - s G_y)) / s|
/// where G_x = grad_x psi / c and G_y = grad_y (psi - c g) / c use the envelope
/// gradient at the oracle's theta*. Zero exactly at stationary points of psi_{c_k}.
Measured stationarity_residual(const ProblemSpec& prob, const Vector& x, const Vector& y, double c_k, double gamma,
                               double ref_step, const OracleSettings& oracle);

/// Same quantity from an already computed envelope evaluation at (x, y).
double stationarity_residual(const ProblemSpec& prob, const Vector& x, const Vector& y, double c_k, double gamma,
                             double ref_step, const MoreauEval& envelope);

/// (F - F_lower)/c_k + phi - v_gamma + C_V |theta - theta*|^2 at the given state.
Measured merit_value(const ProblemSpec& prob, const IterateState& state, double c_k, double gamma,
                     double merit_weight, double F_lower, const OracleSettings& oracle);

/// C_V = (L_f + L_g)^2 + 1/gamma^2. Needs L_f; a missing L_g counts as zero.
double default_merit_weight(const ProblemConstants& consts, double gamma);

/// phi(x, y) - v_gamma(x, y), clipped at zero. Values below -1e-9 mean the
/// oracle did not find the envelope minimizer and are reported as non-converged.
Measured feasibility_gap(const ProblemSpec& prob, const Vector& x, const Vector& y, double gamma,
                         const OracleSettings& oracle);
double feasibility_gap(const ProblemSpec& prob, const Vector& x, const Vector& y, const MoreauEval& envelope);

/// Implicit-function hypergradient for a lower level that is quadratic in y:
///   grad_x F(x, y*) - Q_xy Q_yy^{-1} grad_y F(x, y*)
/// with y* = ll_solver(x), Q_yy = Hessian of f in y (m x m, positive definite) and
/// Q_xy the n x m mixed second derivative.
Vector hypergradient_quadratic(const Matrix& Q_yy, const Matrix& Q_xy, const ProblemSpec& prob, const Vector& x,
                               const std::function<Vector(const Vector&)>& ll_solver);

/// Largest relative error between grad and central differences with step h
/// over the sample points. Relative to max(|grad|, |fd|); absolute when both vanish.
double finite_diff_check(const std::function<double(const Vector&)>& fn,
                         const std::function<Vector(const Vector&)>& grad, const std::vector<Vector>& points,
                         double h);

enum class TraceField { residual_surrogate, gap };

/// Least-squares slope of log(min-so-far value) against log(k) for k in [k_lo, k_hi].
/// The running minimum starts at the first sample. Needs at least 10 samples in the window.
double rate_fit(std::span<const double> ks, std::span<const double> values, double k_lo, double k_hi);
double rate_fit(const std::vector<TraceRecord>& trace, TraceField field, std::size_t k_lo, std::size_t k_hi);

}  // namespace meha
