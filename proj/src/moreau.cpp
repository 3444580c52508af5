#include "meha/moreau.hpp"

#include <algorithm>
#include <cmath>

namespace meha {

Vector theta_step(const ProblemSpec& prob, const Vector& x, const Vector& y, const Vector& theta, double eta,
                  double gamma) {
    if (!(eta > 0.0) || !(gamma > 0.0)) throw ArgumentError("theta_step: eta and gamma must be positive");
    const BlockGradient gf = prob.grad_f(x, theta);
    const Vector shifted = theta - eta * (gf.y + (theta - y) / gamma);
    if (!shifted.allFinite()) throw NumericalFailure("theta_step: non-finite gradient step");
    Vector next = prob.prox(x, eta, shifted);
    if (!next.allFinite()) throw NumericalFailure("theta_step: non-finite prox output");
    return next;
}

double moreau_value(const ProblemSpec& prob, const Vector& x, const Vector& y, const Vector& theta_star,
                    double gamma) {
    return prob.eval_f(x, theta_star) + prob.g(x, theta_star) + (theta_star - y).squaredNorm() / (2.0 * gamma);
}

BlockGradient moreau_gradient(const ProblemSpec& prob, const Vector& x, const Vector& y, const Vector& theta_star,
                              double gamma) {
    BlockGradient out;
    out.x = prob.grad_f(x, theta_star).x + prob.gx(x, theta_star);
    out.y = (y - theta_star) / gamma;
    return out;
}

MoreauEval solve_theta_star(const ProblemSpec& prob, const Vector& x, const Vector& y, double eta, double gamma,
                            double tol, std::size_t max_inner, const std::optional<Vector>& theta0) {
    if (!(tol > 0.0)) throw ArgumentError("solve_theta_star: tol must be positive");
    if (max_inner == 0) throw ArgumentError("solve_theta_star: max_inner must be positive");

    MoreauEval out;
    Vector theta = theta0 ? *theta0 : y;
    for (std::size_t it = 0; it < max_inner; ++it) {
        Vector next = theta_step(prob, x, y, theta, eta, gamma);
        const double step = (next - theta).norm();
        theta = std::move(next);
        out.inner_iters = it + 1;
        out.inner_residual = step;
        if (step <= tol * std::max(1.0, theta.norm())) {
            out.converged = true;
            break;
        }
    }
    out.value = moreau_value(prob, x, y, theta, gamma);
    BlockGradient grad = moreau_gradient(prob, x, y, theta, gamma);
    out.grad_x = std::move(grad.x);
    out.grad_y = std::move(grad.y);
    out.theta_star = std::move(theta);
    return out;
}

double contraction_factor(double eta, double gamma, double rho_f2, double rho_g2) {
    if (!(eta > 0.0) || !(gamma > 0.0) || rho_f2 < 0.0 || rho_g2 < 0.0)
        throw ArgumentError("contraction_factor: eta, gamma must be positive and moduli nonnegative");
    const double shrink = eta * (1.0 / gamma - rho_f2);
    if (!(shrink < 1.0)) throw ArgumentError("contraction_factor: requires eta (1/gamma - rho_f2) < 1");
    if (!(eta * rho_g2 < 1.0)) throw ArgumentError("contraction_factor: requires eta rho_g2 < 1");
    return std::sqrt(1.0 - shrink) / (1.0 - eta * rho_g2);
}

}  // namespace meha
