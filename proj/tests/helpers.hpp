#pragma once

#include <random>

#include "meha/core.hpp"

namespace meha::testing {

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
}

inline Vector uniform_vector(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
    std::uniform_real_distribution<double> unif(lo, hi);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = unif(rng);
    return v;
}

inline Vector concat(const Vector& a, const Vector& b) {
    Vector z(a.size() + b.size());
    z << a, b;
    return z;
}

// f(x, y) = |y|^2/2 - x'y with g = 0 and X = Y = R^n.
inline ProblemSpec quadratic_ll(std::size_t n) {
    ProblemSpec p;
    p.n = n;
    p.m = n;
    p.smooth_only = true;
    p.eval_F = [](const Vector& x, const Vector& y) { return 0.5 * (x.array() - 1.0).matrix().squaredNorm() + 0.5 * y.squaredNorm(); };
    p.grad_F = [](const Vector& x, const Vector& y) { return BlockGradient{(x.array() - 1.0).matrix(), y}; };
    p.eval_f = [](const Vector& x, const Vector& y) { return 0.5 * y.squaredNorm() - x.dot(y); };
    p.grad_f = [](const Vector& x, const Vector& y) { return BlockGradient{-y, y - x}; };
    p.proj_X = [](const Vector& z) { return z; };
    p.proj_Y = [](const Vector& z) { return z; };
    return p;
}

}  // namespace meha::testing
