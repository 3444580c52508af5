#pragma once

#include <cstddef>
#include <optional>

#include "meha/core.hpp"

namespace meha {

/// Approximate evaluation of the Moreau envelope
///   v_gamma(x, y) = min_{theta in Y} f(x, theta) + g(x, theta) + |theta - y|^2 / (2 gamma)
/// together with its gradient at the computed minimizer.
struct MoreauEval {
    Vector theta_star;
    double value = 0.0;
    Vector grad_x;
    Vector grad_y;
    std::size_t inner_iters = 0;
    double inner_residual = 0.0;
    bool converged = false;
};

/// One proximal-gradient step on the envelope subproblem:
///   Prox_{eta g~(x,.)}( theta - eta (grad_y f(x, theta) + (theta - y)/gamma) ).
Vector theta_step(const ProblemSpec& prob, const Vector& x, const Vector& y, const Vector& theta, double eta,
                  double gamma);

/// Repeats theta_step until |theta+ - theta| <= tol * max(1, |theta|) or max_inner steps.
/// Starts from theta0 when given, otherwise from y. Not used by the main loop.
MoreauEval solve_theta_star(const ProblemSpec& prob, const Vector& x, const Vector& y, double eta, double gamma,
                            double tol, std::size_t max_inner, const std::optional<Vector>& theta0 = std::nullopt);

/// f(x, theta) + g(x, theta) + |theta - y|^2 / (2 gamma).
double moreau_value(const ProblemSpec& prob, const Vector& x, const Vector& y, const Vector& theta_star,
                    double gamma);

/// (grad_x f(x, theta) + grad_x g(x, theta), (y - theta) / gamma).
BlockGradient moreau_gradient(const ProblemSpec& prob, const Vector& x, const Vector& y, const Vector& theta_star,
                              double gamma);

/// sqrt(1 - eta (1/gamma - rho_f2)) / (1 - eta rho_g2), the per-step contraction of
/// theta_step towards theta*.
double contraction_factor(double eta, double gamma, double rho_f2, double rho_g2);

}  // namespace meha
