#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "helpers.hpp"
#include "meha/diagnostics.hpp"
#include "meha/moreau.hpp"
#include "meha/problems.hpp"

using namespace meha;
using meha::testing::concat;
using meha::testing::quadratic_ll;
using meha::testing::random_vector;
using meha::testing::uniform_vector;

TEST_CASE("theta_step on the quadratic lower level") {
    const ProblemSpec p = quadratic_ll(4);
    std::mt19937_64 rng(1);
    const Vector x = random_vector(rng, 4);
    const Vector y = random_vector(rng, 4);
    const double eta = 0.3, gamma = 2.0;

    // theta = y: the proximal term vanishes and the step is y - eta (y - x).
    const Vector step = theta_step(p, x, y, y, eta, gamma);
    CHECK((step - (y - eta * (y - x))).norm() <= 1e-15);

    const Vector fixed = (gamma * x + y) / (gamma + 1.0);
    CHECK((theta_step(p, x, y, fixed, eta, gamma) - fixed).norm() <= 1e-14);
}

TEST_CASE("theta_step on the lasso at x = 0 is a plain gradient step") {
    const ProblemBundle b = make_lasso_toy(6);
    const Vector x = Vector::Zero(6);
    std::mt19937_64 rng(2);
    const Vector y = random_vector(rng, 6);
    const Vector theta = random_vector(rng, 6);
    const double eta = 0.1, gamma = 10.0;
    const Vector a = (Vector(6) << 1, 1, 1, -1, -1, -1).finished() / 6.0;
    const Vector expected = theta - eta * ((theta - a) + (theta - y) / gamma);
    CHECK((theta_step(b.spec, x, y, theta, eta, gamma) - expected).norm() <= 1e-15);
}

TEST_CASE("theta_step rejects non-finite values") {
    ProblemSpec p = quadratic_ll(2);
    const Vector x = Vector::Constant(2, std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(theta_step(p, x, Vector::Zero(2), Vector::Zero(2), 0.1, 1.0), NumericalFailure);
}

TEST_CASE("solve_theta_star closed forms") {
    const ProblemSpec p = quadratic_ll(5);
    std::mt19937_64 rng(4);
    const Vector x = random_vector(rng, 5);
    const Vector y = random_vector(rng, 5);
    const double gamma = 3.0;
    const MoreauEval e = solve_theta_star(p, x, y, 0.5, gamma, 1e-13, 10000);
    const Vector closed = (gamma * x + y) / (gamma + 1.0);
    CHECK(e.converged);
    CHECK((e.theta_star - closed).norm() <= 1e-11);
    CHECK(e.value == doctest::Approx(0.5 * closed.squaredNorm() - x.dot(closed) +
                                     (closed - y).squaredNorm() / (2.0 * gamma)).epsilon(1e-12));
    CHECK((e.grad_x + e.theta_star).norm() == 0.0);
    CHECK((e.grad_y - (y - e.theta_star) / gamma).norm() == 0.0);

    // y already solves the lower level: theta* = y and v = phi.
    const MoreauEval at_opt = solve_theta_star(p, x, x, 0.5, gamma, 1e-13, 10000);
    CHECK((at_opt.theta_star - x).norm() <= 1e-14);
    CHECK(at_opt.value == doctest::Approx(p.phi(x, x)).epsilon(1e-14));
    CHECK(at_opt.grad_y.norm() <= 1e-14);
}

TEST_CASE("solve_theta_star flags non-convergence") {
    const ProblemSpec p = quadratic_ll(3);
    const Vector x = Vector::Ones(3);
    const MoreauEval e = solve_theta_star(p, x, Vector::Zero(3), 1e-4, 1.0, 1e-14, 5);
    CHECK_FALSE(e.converged);
    CHECK(e.inner_iters == 5);
    CHECK(e.inner_residual > 1e-14);
    CHECK_THROWS_AS(solve_theta_star(p, x, x, 0.1, 1.0, 0.0, 10), ArgumentError);
}

TEST_CASE("envelope on the lasso matches a per-coordinate grid oracle") {
    // y = a: theta_i* = argmin w|u| + (u - a_i)^2/2 + (u - a_i)^2/(2 gamma), which is
    // the prox of s w|.| at a_i with s = 1/(1 + 1/gamma).
    const std::size_t n = 8;
    const ProblemBundle b = make_lasso_toy(n);
    const Vector a = (Vector(8) << 1, 1, 1, 1, -1, -1, -1, -1).finished() / 8.0;
    const double gamma = 10.0;
    const double s = 1.0 / (1.0 + 1.0 / gamma);
    const int resolution = 20000;
    const double hw = 1.0;
    for (double w : {1.0, 0.05}) {
        const MoreauEval e = solve_theta_star(b.spec, Vector::Constant(8, w), a, 0.5, gamma, 1e-13, 100000);
        REQUIRE(e.converged);
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            const double u = prox_bruteforce_oracle([w](double v) { return w * std::abs(v); }, s, a[i], hw, resolution);
            CHECK(std::abs(e.theta_star[i] - u) <= 2.0 * hw / resolution);
        }
    }
}

TEST_CASE("moreau_value and moreau_gradient at supplied points") {
    const ProblemSpec p = quadratic_ll(3);
    std::mt19937_64 rng(6);
    const Vector x = random_vector(rng, 3);
    const Vector y = random_vector(rng, 3);
    CHECK(moreau_value(p, x, y, y, 2.0) == p.phi(x, y));
    const BlockGradient g = moreau_gradient(p, x, y, y, 2.0);
    CHECK(g.y.norm() == 0.0);
    CHECK((g.x + y).norm() == 0.0);
}

TEST_CASE("envelope never exceeds the lower-level objective") {
    std::mt19937_64 rng(7);
    const ProblemBundle lasso = make_lasso_toy(10);
    const ProblemBundle mc = make_merely_convex(5);
    for (int i = 0; i < 30; ++i) {
        const Vector x = uniform_vector(rng, 10, 0.0, 1.0);
        const Vector y = random_vector(rng, 10);
        const MoreauEval e = solve_theta_star(lasso.spec, x, y, 0.1, 10.0, 1e-12, 100000);
        CHECK(e.value <= lasso.spec.phi(x, y) + 1e-12);

        const Vector x2 = random_vector(rng, 5);
        const Vector y2 = random_vector(rng, 10);
        const MoreauEval e2 = solve_theta_star(mc.spec, x2, y2, 0.3, 5.0, 1e-12, 100000);
        CHECK(e2.value <= mc.spec.phi(x2, y2) + 1e-12);
    }
}

TEST_CASE("envelope gradient matches finite differences") {
    std::mt19937_64 rng(8);
    for (const ProblemBundle& b : {make_merely_convex(4), make_lasso_toy(6)}) {
        const auto n = static_cast<Eigen::Index>(b.spec.n);
        const auto m = static_cast<Eigen::Index>(b.spec.m);
        const double gamma = b.default_config.gamma;
        auto env = [&](const Vector& z) {
            return solve_theta_star(b.spec, z.head(n), z.tail(m), 0.1, gamma, 1e-12, 500000);
        };
        std::vector<Vector> pts;
        for (int i = 0; i < 10; ++i) pts.push_back(concat(uniform_vector(rng, n, 0.1, 0.9), random_vector(rng, m)));
        const double err = finite_diff_check([&](const Vector& z) { return env(z).value; },
                                             [&](const Vector& z) {
                                                 const MoreauEval e = env(z);
                                                 return concat(e.grad_x, e.grad_y);
                                             },
                                             pts, 1e-5);
        CHECK(err <= 1e-5);
    }
}

TEST_CASE("inner minimiser does not depend on the starting point") {
    const ProblemBundle b = make_lasso_toy(10);
    std::mt19937_64 rng(9);
    const double tol = 1e-12;
    for (int i = 0; i < 10; ++i) {
        const Vector x = uniform_vector(rng, 10, 0.0, 1.0);
        const Vector y = random_vector(rng, 10);
        const MoreauEval a = solve_theta_star(b.spec, x, y, 0.1, 10.0, tol, 200000, random_vector(rng, 10, 5.0));
        const MoreauEval c = solve_theta_star(b.spec, x, y, 0.1, 10.0, tol, 200000, random_vector(rng, 10, 5.0));
        // Stopping on a step of size tol leaves each run within tol / (1 - sigma) of theta*.
        const double sigma = contraction_factor(0.1, 10.0, 0.0, 0.0);
        CHECK((a.theta_star - c.theta_star).norm() <= 2.0 * tol * std::max(1.0, a.theta_star.norm()) / (1.0 - sigma));
    }
}

TEST_CASE("contraction_factor") {
    CHECK(contraction_factor(0.1, 0.25, 1.0, 0.0) == doctest::Approx(0.83666002653407555).epsilon(1e-15));
    CHECK(contraction_factor(1e-12, 0.25, 1.0, 0.0) == doctest::Approx(1.0).epsilon(1e-11));

    // eta at its upper bound (1/gamma - rho)/(L_f + 1/gamma)^2 keeps sigma below one.
    const double gamma = 0.25, L_f = 2.0, rho = 1.0;
    const double eta = (1.0 / gamma - rho) / ((L_f + 1.0 / gamma) * (L_f + 1.0 / gamma));
    CHECK(contraction_factor(eta, gamma, rho, 0.0) < 1.0);

    CHECK(contraction_factor(0.1, 1.0, 0.0, 2.0) == doctest::Approx(std::sqrt(0.9) / 0.8).epsilon(1e-15));
    CHECK_THROWS_AS(contraction_factor(2.0, 0.25, 0.0, 0.0), ArgumentError);   // eta (1/gamma) >= 1
    CHECK_THROWS_AS(contraction_factor(0.1, 1.0, 0.0, 10.0), ArgumentError);   // eta rho_g2 >= 1
    CHECK_THROWS_AS(contraction_factor(0.0, 1.0, 0.0, 0.0), ArgumentError);
}

TEST_CASE("measured contraction stays below sigma on random quadratics") {
    std::mt19937_64 rng(10);
    const Eigen::Index m = 6;
    const Matrix B = Matrix::NullaryExpr(m, m, [&]() { return std::normal_distribution<double>(0.0, 0.5)(rng); });
    const Matrix A = B.transpose() * B;
    const double L = Eigen::SelfAdjointEigenSolver<Matrix>(A).eigenvalues().maxCoeff();
    ProblemSpec p = quadratic_ll(static_cast<std::size_t>(m));
    p.eval_f = [A](const Vector& x, const Vector& y) { return 0.5 * y.dot(A * y) - x.dot(y); };
    p.grad_f = [A](const Vector& x, const Vector& y) { return BlockGradient{-y, A * y - x}; };
    const double gamma = 1.5;
    const double eta = (1.0 / gamma) / ((L + 1.0 / gamma) * (L + 1.0 / gamma));
    const double sigma = contraction_factor(eta, gamma, 0.0, 0.0);
    const Matrix H = A + Matrix::Identity(m, m) / gamma;
    for (int i = 0; i < 100; ++i) {
        const Vector x = random_vector(rng, m), y = random_vector(rng, m), theta = random_vector(rng, m, 4.0);
        const Vector star = H.ldlt().solve(x + y / gamma);
        const double ratio = (theta_step(p, x, y, theta, eta, gamma) - star).norm() / (theta - star).norm();
        CHECK(ratio <= sigma + 1e-9);
    }
}
