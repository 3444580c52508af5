#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "helpers.hpp"
#include "meha/core.hpp"

using namespace meha;
using meha::testing::random_vector;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

double abs_penalty(double u) { return std::abs(u); }

}  // namespace

TEST_CASE("soft_threshold closed form") {
    const Vector out = soft_threshold(vec({1.2, -0.3, 0.0}), 0.5);
    CHECK(out[0] == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(out[1] == 0.0);
    CHECK(out[2] == 0.0);

    const Vector theta = vec({-2.0, 0.1, 3.5});
    CHECK(soft_threshold(theta, 0.0) == theta);
    CHECK_THROWS_AS(soft_threshold(theta, -0.1), ArgumentError);
    CHECK_THROWS_AS(soft_threshold(theta, vec({0.1, -1.0, 0.0})), ArgumentError);
    CHECK_THROWS_AS(soft_threshold(theta, vec({0.1, 0.2})), ArgumentError);
}

TEST_CASE("soft_threshold agrees with the grid oracle") {
    // prox of 0.37|u| at 0.83, by grid search over [0.83 - 2, 0.83 + 2].
    const int resolution = 40000;
    const double spacing = 4.0 / resolution;
    const double oracle = prox_bruteforce_oracle(abs_penalty, 0.37, 0.83, 2.0, resolution);
    CHECK(std::abs(soft_threshold(vec({0.83}), 0.37)[0] - oracle) <= spacing);
    CHECK(std::abs(oracle - 0.46) <= spacing);

    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal(0.0, 2.0);
    std::uniform_real_distribution<double> unif(0.0, 1.5);
    for (int i = 0; i < 100; ++i) {
        const double theta = normal(rng);
        const double tau = unif(rng);
        const double hw = std::abs(theta) + 2.0;
        const double h = 2.0 * hw / 10000;
        const double u = prox_bruteforce_oracle(abs_penalty, tau, theta, hw, 10000);
        CHECK(std::abs(soft_threshold(vec({theta}), tau)[0] - u) <= 2.0 * h);
    }
}

TEST_CASE("group_soft_threshold closed form") {
    const GroupPartition one({{0, 1}}, 2);
    const Vector out = group_soft_threshold(vec({3.0, 4.0}), one, vec({2.5}));
    CHECK(out[0] == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(group_soft_threshold(vec({0.1, -0.2}), one, vec({1.0})) == Vector::Zero(2));

    std::mt19937_64 rng(3);
    const Vector theta = random_vector(rng, 12);
    const GroupPartition blocks = GroupPartition::contiguous(12, 4);
    CHECK(group_soft_threshold(theta, blocks, Vector::Zero(4)) == theta);
}

TEST_CASE("group_soft_threshold with singleton groups equals soft_threshold exactly") {
    std::mt19937_64 rng(5);
    const Vector theta = random_vector(rng, 9);
    const Vector w = random_vector(rng, 9).cwiseAbs();
    const GroupPartition singletons = GroupPartition::contiguous(9, 9);
    CHECK(group_soft_threshold(theta, singletons, w) == soft_threshold(theta, w));
}

TEST_CASE("group partition validation") {
    CHECK_THROWS_AS(GroupPartition({{0, 1}, {1, 2}}, 3), ArgumentError);  // overlap
    CHECK_THROWS_AS(GroupPartition({{0, 3}}, 3), ArgumentError);          // out of range
    CHECK_THROWS_AS(GroupPartition({{0, 1}}, 3), ArgumentError);          // index 2 uncovered
    CHECK_THROWS_AS(GroupPartition({{0, 1, 2}, {}}, 3), ArgumentError);   // empty group
    CHECK_THROWS_AS(GroupPartition::contiguous(10, 3), ArgumentError);
    CHECK_THROWS_AS(GroupPartition::contiguous(10, 0), ArgumentError);

    const GroupPartition g = GroupPartition::contiguous(6, 3);
    CHECK(g.size() == 3);
    CHECK(g.dimension() == 6);
    CHECK(g[1] == std::vector<std::size_t>{2, 3});
    const Vector norms = g.group_norms(vec({3, 4, 0, 0, 1, 0}));
    CHECK(norms[0] == 5.0);
    CHECK(norms[1] == 0.0);
    CHECK(norms[2] == 1.0);

    CHECK_THROWS_AS(group_soft_threshold(vec({1, 2, 3}), g, vec({1, 1, 1})), ArgumentError);
    CHECK_THROWS_AS(group_soft_threshold(Vector::Ones(6), g, vec({1, -1, 1})), ArgumentError);
}

TEST_CASE("prox maps are nonexpansive") {
    std::mt19937_64 rng(17);
    const GroupPartition g = GroupPartition::contiguous(10, 5);
    for (int i = 0; i < 200; ++i) {
        const Vector a = random_vector(rng, 10, 2.0);
        const Vector b = random_vector(rng, 10, 2.0);
        const Vector w = random_vector(rng, 5).cwiseAbs();
        const double tau = std::abs(random_vector(rng, 1)[0]);
        CHECK((soft_threshold(a, tau) - soft_threshold(b, tau)).norm() <= (a - b).norm() + 1e-14);
        CHECK((group_soft_threshold(a, g, w) - group_soft_threshold(b, g, w)).norm() <= (a - b).norm() + 1e-14);
    }
}

TEST_CASE("project_box") {
    const Vector out = project_box(vec({1.5, -0.2}), 0.0, 1.0);
    CHECK(out == vec({1.0, 0.0}));
    const double inf = std::numeric_limits<double>::infinity();
    const Vector z = vec({-1e300, 3.0, 1e300});
    CHECK(project_box(z, -inf, inf) == z);
    CHECK(project_box(vec({0.4}), 0.0, 1.0) == vec({0.4}));
    CHECK_THROWS_AS(project_box(z, 1.0, 0.0), ArgumentError);
    CHECK_THROWS_AS(project_box(vec({0.0, 0.0}), vec({0.0, 2.0}), vec({1.0, 1.0})), ArgumentError);
    CHECK(project_box(vec({5.0, -5.0}), vec({0.0, -1.0}), vec({1.0, inf})) == vec({1.0, -1.0}));

    std::mt19937_64 rng(23);
    for (int i = 0; i < 100; ++i) {
        const Vector a = random_vector(rng, 6, 2.0);
        const Vector b = random_vector(rng, 6, 2.0);
        const Vector pa = project_box(a, -0.5, 1.0);
        CHECK(project_box(pa, -0.5, 1.0) == pa);
        CHECK((pa - project_box(b, -0.5, 1.0)).norm() <= (a - b).norm() + 1e-15);
    }
}

TEST_CASE("prox_bruteforce_oracle") {
    const double spacing = 6.0 / 6000;
    CHECK(std::abs(prox_bruteforce_oracle(abs_penalty, 0.5, 1.2, 3.0, 6000) - 0.7) <= spacing);
    CHECK(prox_bruteforce_oracle([](double) { return 0.0; }, 0.5, 1.2, 3.0, 6000) == doctest::Approx(1.2));

    // MCP penalty (lambda = 1, a = 3) is weakly convex; its prox at 0.4 with s = 0.5 is
    // (0.4 - 0.5) / (1 - 0.5/3) clipped at 0, i.e. 0.
    auto mcp = [](double u) {
        const double t = std::abs(u);
        return t <= 3.0 ? t - t * t / 6.0 : 1.5;
    };
    CHECK(std::abs(prox_bruteforce_oracle(mcp, 0.5, 0.4, 2.0, 4000)) <= 1e-3);
    CHECK(prox_bruteforce_oracle(mcp, 0.5, 2.0, 2.0, 4000) == doctest::Approx(1.8).epsilon(1e-3));

    CHECK_THROWS_AS(prox_bruteforce_oracle(abs_penalty, 0.5, 1.0, 1.0, 999), ArgumentError);
    CHECK_THROWS_AS(prox_bruteforce_oracle(abs_penalty, 0.0, 1.0, 1.0, 1000), ArgumentError);
    CHECK_THROWS_AS(prox_bruteforce_oracle(abs_penalty, 0.5, 1.0, -1.0, 1000), ArgumentError);
}

TEST_CASE("validate_config") {
    SolverConfig cfg;
    cfg.gamma = 10.0;
    cfg.eta0 = 1e-3;
    cfg.p = 0.49;

    SUBCASE("no constants, nothing to warn about") { CHECK(validate_config(cfg, ProblemConstants{}).empty()); }

    SUBCASE("gamma above the theory bound warns") {
        ProblemConstants c;
        c.rho_f2 = 1.0;
        c.rho_g2 = 0.0;
        const auto w = validate_config(cfg, c);
        REQUIRE(w.size() == 1);
        CHECK(w[0].find("gamma") != std::string::npos);
    }

    SUBCASE("eta above the step bound warns") {
        ProblemConstants c;
        c.L_f = 1.0;
        c.rho_f2 = 0.0;
        cfg.eta0 = 0.5;
        const auto w = validate_config(cfg, c);
        REQUIRE(w.size() == 1);
        CHECK(w[0].find("eta0") != std::string::npos);
    }

    SUBCASE("eta above 1/rho_g2 warns") {
        ProblemConstants c;
        c.rho_g2 = 2000.0;
        const auto w = validate_config(cfg, c);
        REQUIRE(w.size() == 1);
        CHECK(w[0].find("rho_g2") != std::string::npos);
    }

    SUBCASE("hard errors") {
        cfg.p = 0.6;
        CHECK_THROWS_AS(validate_config(cfg, {}), ArgumentError);
        cfg.p = 0.5;
        CHECK_THROWS_AS(validate_config(cfg, {}), ArgumentError);
        cfg.p = -0.1;
        CHECK_THROWS_AS(validate_config(cfg, {}), ArgumentError);
        cfg.p = 0.0;
        CHECK_NOTHROW(validate_config(cfg, {}));
        cfg.alpha0 = 0.0;
        CHECK_THROWS_AS(validate_config(cfg, {}), ArgumentError);
        cfg.alpha0 = 0.1;
        cfg.beta0 = -1.0;
        CHECK_THROWS_AS(validate_config(cfg, {}), ArgumentError);
        cfg.beta0 = 0.1;
        cfg.stop_rule.tol = 0.0;
        CHECK_NOTHROW(validate_config(cfg, {}));  // ignored by max_iters_only
        cfg.stop_rule.kind = StopKind::rel_error_to_solution;
        CHECK_THROWS_AS(validate_config(cfg, {}), ArgumentError);
    }
}

TEST_CASE("constants and ProblemSpec validation") {
    ProblemConstants c;
    c.L_f = -1.0;
    CHECK_THROWS_AS(c.check(), ArgumentError);
    c.L_f = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(c.check(), ArgumentError);
    c.L_f = 2.0;
    CHECK_NOTHROW(c.check());

    ProblemSpec p = meha::testing::quadratic_ll(3);
    CHECK_NOTHROW(p.check());
    p.smooth_only = false;
    CHECK_THROWS_AS(p.check(), ArgumentError);  // nonsmooth path needs g callbacks
    p = meha::testing::quadratic_ll(3);
    p.grad_F = nullptr;
    CHECK_THROWS_AS(p.check(), ArgumentError);
    p = meha::testing::quadratic_ll(3);
    p.n = 0;
    CHECK_THROWS_AS(p.check(), ArgumentError);
}

TEST_CASE("smooth ProblemSpec falls back to projection") {
    ProblemSpec p = meha::testing::quadratic_ll(2);
    p.proj_Y = [](const Vector& z) { return project_box(z, 0.0, 1.0); };
    CHECK(p.g(vec({1, 1}), vec({1, 1})) == 0.0);
    CHECK(p.gx(vec({1, 1}), vec({1, 1})) == Vector::Zero(2));
    CHECK(p.prox(vec({1, 1}), 0.3, vec({2.0, -1.0})) == vec({1.0, 0.0}));
}

TEST_CASE("enum names round trip") {
    for (StopKind k : {StopKind::max_iters_only, StopKind::direction_norm, StopKind::rel_error_to_solution,
                       StopKind::rel_change_x})
        CHECK(stop_kind_from_string(to_string(k)) == k);
    for (StepMode::Kind k : {StepMode::Kind::fixed, StepMode::Kind::inverse_power})
        CHECK(step_mode_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(stop_kind_from_string("sometimes"), ArgumentError);
    CHECK_THROWS_AS(step_mode_from_string("cosine"), ArgumentError);
}

TEST_CASE("numerical failure carries the iteration") {
    const NumericalFailure e("direction_x is not finite", 42);
    CHECK(e.iteration() == 42);
    CHECK(e.detail() == "direction_x is not finite");
    CHECK(std::string(e.what()).find("42") != std::string::npos);
}
