#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace meha {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thrown when a caller violates an operation's preconditions.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when an iterate or direction stops being finite.
class NumericalFailure : public std::runtime_error {
public:
    explicit NumericalFailure(const std::string& what, std::int64_t iteration = -1)
        : std::runtime_error(iteration < 0 ? what : what + " (iteration " + std::to_string(iteration) + ")"),
          detail_(what),
          iteration_(iteration) {}

    std::int64_t iteration() const noexcept { return iteration_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string detail_;
    std::int64_t iteration_;
};

/// Gradient split into the upper-level (x) and lower-level (y) blocks.
struct BlockGradient {
    Vector x;
    Vector y;
};

using ScalarFn = std::function<double(const Vector& x, const Vector& y)>;
using BlockGradientFn = std::function<BlockGradient(const Vector& x, const Vector& y)>;
using PartialFn = std::function<Vector(const Vector& x, const Vector& y)>;
/// prox(x, s, theta) = argmin_u { s * g(x, u) + delta_Y(u) + 0.5 * |u - theta|^2 }.
using ProxFn = std::function<Vector(const Vector& x, double s, const Vector& theta)>;
using ProjectionFn = std::function<Vector(const Vector& z)>;

/**
 * A bilevel instance
 *
 *     min_{x in X, y in Y} F(x, y)   s.t.  y in argmin_{y in Y} f(x, y) + g(x, y)
 *
 * described entirely through callbacks. g may be nonsmooth in y; its
 * x-gradient and its proximal map in y are supplied separately. When
 * smooth_only is set, g is identically zero and eval_g / grad_x_g / prox_g
 * may be left empty: the helper accessors below fall back to zero and proj_Y.
 */
struct ProblemSpec {
    std::size_t n = 0;
    std::size_t m = 0;

    ScalarFn eval_F;
    BlockGradientFn grad_F;
    ScalarFn eval_f;
    BlockGradientFn grad_f;
    ScalarFn eval_g;
    PartialFn grad_x_g;
    ProxFn prox_g;
    ProjectionFn proj_X;
    ProjectionFn proj_Y;
    bool smooth_only = false;

    double g(const Vector& x, const Vector& y) const;
    Vector gx(const Vector& x, const Vector& y) const;
    /// Prox of s * (g(x, .) + delta_Y); reduces to proj_Y on the smooth path.
    Vector prox(const Vector& x, double s, const Vector& theta) const;
    /// Lower-level objective f + g.
    double phi(const Vector& x, const Vector& y) const { return eval_f(x, y) + g(x, y); }

    /// Throws ArgumentError if a required callback is missing or n, m are zero.
    void check() const;
};

/// Regularity constants. Every field is optional; present values are finite and >= 0.
struct ProblemConstants {
    std::optional<double> L_F;
    std::optional<double> L_f;
    std::optional<double> L_g;
    std::optional<double> rho_f2;
    std::optional<double> rho_g1;
    std::optional<double> rho_g2;
    std::optional<double> mu;

    void check() const;
};

struct AnalyticSolution {
    std::optional<Vector> x_star;
    std::optional<Vector> y_star;
    std::optional<double> F_star;
};

enum class StopKind { max_iters_only, direction_norm, rel_error_to_solution, rel_change_x };

struct StopRule {
    StopKind kind = StopKind::max_iters_only;
    double tol = 1e-8;
};

struct StepMode {
    enum class Kind { fixed, inverse_power };
    Kind kind = Kind::fixed;
    double q = 0.5;  // annealing exponent, only read for inverse_power
};

struct SolverConfig {
    double gamma = 1.0;
    double c_lower = 1.0;
    double p = 0.0;
    double alpha0 = 1e-2;
    double beta0 = 1e-2;
    double eta0 = 1e-2;
    StepMode step_mode;
    std::size_t max_iters = 1000;
    double inner_oracle_tol = 1e-12;
    std::uint64_t seed = 0;
    StopRule stop_rule;
};

struct IterateState {
    Vector x;
    Vector y;
    Vector theta;
    std::size_t k = 0;
};

std::string to_string(StopKind kind);
StopKind stop_kind_from_string(const std::string& name);
std::string to_string(StepMode::Kind kind);
StepMode::Kind step_mode_from_string(const std::string& name);

// ---------------------------------------------------------------------------
// Proximal maps and projections.

/// Componentwise [|theta_i| - tau]_+ sgn(theta_i), the prox of tau * |.|_1.
Vector soft_threshold(const Vector& theta, double tau);
/// Per-coordinate thresholds; the prox of sum_i tau_i |u_i|.
Vector soft_threshold(const Vector& theta, const Vector& tau);

/// A partition of {0, ..., m-1} into disjoint, non-empty index groups.
class GroupPartition {
public:
    GroupPartition(std::vector<std::vector<std::size_t>> groups, std::size_t m);

    /// J contiguous blocks of equal size; m must be divisible by J.
    static GroupPartition contiguous(std::size_t m, std::size_t J);

    std::size_t size() const noexcept { return groups_.size(); }
    std::size_t dimension() const noexcept { return m_; }
    const std::vector<std::size_t>& operator[](std::size_t j) const { return groups_[j]; }

    /// Euclidean norm of every group of v.
    Vector group_norms(const Vector& v) const;

private:
    std::vector<std::vector<std::size_t>> groups_;
    std::size_t m_;
};

/// Block shrinkage: group j is zeroed when |theta^(j)| <= w_j, otherwise scaled
/// by (|theta^(j)| - w_j) / |theta^(j)|.
Vector group_soft_threshold(const Vector& theta, const GroupPartition& groups, const Vector& weights);

/// Componentwise clamp to [lo, hi]; infinite bounds are allowed.
Vector project_box(const Vector& z, const Vector& lo, const Vector& hi);
Vector project_box(const Vector& z, double lo, double hi);

/// Grid argmin of s * phi(u) + 0.5 (u - theta_i)^2 on [theta_i - halfwidth, theta_i + halfwidth]
/// using resolution + 1 equally spaced points. Test oracle for separable prox maps.
double prox_bruteforce_oracle(const std::function<double(double)>& phi, double s, double theta_i,
                              double halfwidth, int resolution);

/// Throws ArgumentError on hard violations (p outside [0, 1/2), nonpositive step
/// sizes, ...). Returns warnings when known constants put gamma or eta outside
/// the ranges the convergence theory covers.
std::vector<std::string> validate_config(const SolverConfig& cfg, const ProblemConstants& consts);

}  // namespace meha
