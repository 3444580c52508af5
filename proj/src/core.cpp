#include "meha/core.hpp"

#include <algorithm>
#include <cmath>

namespace meha {

double ProblemSpec::g(const Vector& x, const Vector& y) const {
    return smooth_only ? 0.0 : eval_g(x, y);
}

Vector ProblemSpec::gx(const Vector& x, const Vector& y) const {
    if (smooth_only) return Vector::Zero(static_cast<Eigen::Index>(n));
    return grad_x_g(x, y);
}

Vector ProblemSpec::prox(const Vector& x, double s, const Vector& theta) const {
    if (smooth_only) return proj_Y(theta);
    return prox_g(x, s, theta);
}

void ProblemSpec::check() const {
    if (n == 0 || m == 0) throw ArgumentError("problem dimensions must be positive");
    if (!eval_F || !grad_F || !eval_f || !grad_f || !proj_X || !proj_Y)
        throw ArgumentError("problem is missing F, f or projection callbacks");
    if (!smooth_only && (!eval_g || !grad_x_g || !prox_g))
        throw ArgumentError("nonsmooth problem is missing g callbacks");
}

void ProblemConstants::check() const {
    for (const auto& c : {L_F, L_f, L_g, rho_f2, rho_g1, rho_g2, mu}) {
        if (c && (!std::isfinite(*c) || *c < 0.0))
            throw ArgumentError("problem constants must be finite and nonnegative");
    }
}

std::string to_string(StopKind kind) {
    switch (kind) {
        case StopKind::max_iters_only: return "max_iters_only";
        case StopKind::direction_norm: return "direction_norm";
        case StopKind::rel_error_to_solution: return "rel_error_to_solution";
        case StopKind::rel_change_x: return "rel_change_x";
    }
    return "unknown";
}

StopKind stop_kind_from_string(const std::string& name) {
    for (auto k : {StopKind::max_iters_only, StopKind::direction_norm, StopKind::rel_error_to_solution,
                   StopKind::rel_change_x}) {
        if (to_string(k) == name) return k;
    }
    throw ArgumentError("unknown stop rule '" + name + "'");
}

std::string to_string(StepMode::Kind kind) {
    return kind == StepMode::Kind::fixed ? "fixed" : "inverse_power";
}

StepMode::Kind step_mode_from_string(const std::string& name) {
    if (name == "fixed") return StepMode::Kind::fixed;
    if (name == "inverse_power") return StepMode::Kind::inverse_power;
    throw ArgumentError("unknown step mode '" + name + "'");
}

Vector soft_threshold(const Vector& theta, double tau) {
    if (!(tau >= 0.0)) throw ArgumentError("soft_threshold: threshold must be nonnegative");
    return theta.unaryExpr([tau](double t) { return std::copysign(std::max(std::abs(t) - tau, 0.0), t); });
}

Vector soft_threshold(const Vector& theta, const Vector& tau) {
    if (tau.size() != theta.size()) throw ArgumentError("soft_threshold: threshold size mismatch");
    if ((tau.array() < 0.0).any() || tau.hasNaN())
        throw ArgumentError("soft_threshold: thresholds must be nonnegative");
    Vector out(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i)
        out[i] = std::copysign(std::max(std::abs(theta[i]) - tau[i], 0.0), theta[i]);
    return out;
}

GroupPartition::GroupPartition(std::vector<std::vector<std::size_t>> groups, std::size_t m)
    : groups_(std::move(groups)), m_(m) {
    std::vector<char> seen(m, 0);
    std::size_t covered = 0;
    for (const auto& g : groups_) {
        if (g.empty()) throw ArgumentError("group partition: empty group");
        for (auto i : g) {
            if (i >= m) throw ArgumentError("group partition: index " + std::to_string(i) + " outside [0, m)");
            if (seen[i]) throw ArgumentError("group partition: index " + std::to_string(i) + " in two groups");
            seen[i] = 1;
            ++covered;
        }
    }
    if (covered != m) throw ArgumentError("group partition: groups do not cover every index");
}

GroupPartition GroupPartition::contiguous(std::size_t m, std::size_t J) {
    if (J == 0 || m % J != 0)
        throw ArgumentError("cannot split " + std::to_string(m) + " coordinates into " + std::to_string(J) +
                            " equal groups");
    const std::size_t size = m / J;
    std::vector<std::vector<std::size_t>> groups(J);
    for (std::size_t j = 0; j < J; ++j) {
        groups[j].resize(size);
        for (std::size_t t = 0; t < size; ++t) groups[j][t] = j * size + t;
    }
    return GroupPartition(std::move(groups), m);
}

Vector GroupPartition::group_norms(const Vector& v) const {
    Vector norms(static_cast<Eigen::Index>(groups_.size()));
    for (std::size_t j = 0; j < groups_.size(); ++j) {
        double s = 0.0;
        for (auto i : groups_[j]) s += v[static_cast<Eigen::Index>(i)] * v[static_cast<Eigen::Index>(i)];
        norms[static_cast<Eigen::Index>(j)] = std::sqrt(s);
    }
    return norms;
}

Vector group_soft_threshold(const Vector& theta, const GroupPartition& groups, const Vector& weights) {
    if (static_cast<std::size_t>(theta.size()) != groups.dimension())
        throw ArgumentError("group_soft_threshold: vector size does not match partition");
    if (static_cast<std::size_t>(weights.size()) != groups.size())
        throw ArgumentError("group_soft_threshold: one weight per group required");
    if ((weights.array() < 0.0).any() || weights.hasNaN())
        throw ArgumentError("group_soft_threshold: weights must be nonnegative");

    const Vector norms = groups.group_norms(theta);
    Vector out = theta;
    for (std::size_t j = 0; j < groups.size(); ++j) {
        const double nrm = norms[static_cast<Eigen::Index>(j)];
        const double w = weights[static_cast<Eigen::Index>(j)];
        if (w == 0.0) continue;
        const double scale = nrm <= w ? 0.0 : (nrm - w) / nrm;
        for (auto i : groups[j]) out[static_cast<Eigen::Index>(i)] *= scale;
    }
    return out;
}

Vector project_box(const Vector& z, const Vector& lo, const Vector& hi) {
    if (lo.size() != z.size() || hi.size() != z.size()) throw ArgumentError("project_box: bound size mismatch");
    if ((lo.array() > hi.array()).any()) throw ArgumentError("project_box: lower bound exceeds upper bound");
    return z.cwiseMax(lo).cwiseMin(hi);
}

Vector project_box(const Vector& z, double lo, double hi) {
    if (lo > hi) throw ArgumentError("project_box: lower bound exceeds upper bound");
    return z.cwiseMax(lo).cwiseMin(hi);
}

double prox_bruteforce_oracle(const std::function<double(double)>& phi, double s, double theta_i,
                              double halfwidth, int resolution) {
    if (!(s > 0.0)) throw ArgumentError("prox oracle: s must be positive");
    if (!(halfwidth > 0.0)) throw ArgumentError("prox oracle: halfwidth must be positive");
    if (resolution < 1000) throw ArgumentError("prox oracle: resolution must be at least 1000");

    const double lo = theta_i - halfwidth;
    const double h = 2.0 * halfwidth / resolution;
    double best_u = theta_i;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j <= resolution; ++j) {
        const double u = lo + h * j;
        const double val = s * phi(u) + 0.5 * (u - theta_i) * (u - theta_i);
        if (val < best) {
            best = val;
            best_u = u;
        }
    }
    return best_u;
}

std::vector<std::string> validate_config(const SolverConfig& cfg, const ProblemConstants& consts) {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ArgumentError(std::string(name) + " must be positive and finite");
    };
    if (!(cfg.p >= 0.0 && cfg.p < 0.5)) throw ArgumentError("p must lie in [0, 0.5)");
    positive(cfg.gamma, "gamma");
    positive(cfg.c_lower, "c_lower");
    positive(cfg.alpha0, "alpha0");
    positive(cfg.beta0, "beta0");
    positive(cfg.eta0, "eta0");
    positive(cfg.inner_oracle_tol, "inner_oracle_tol");
    if (cfg.step_mode.kind == StepMode::Kind::inverse_power) positive(cfg.step_mode.q, "q");
    if (cfg.stop_rule.kind != StopKind::max_iters_only) positive(cfg.stop_rule.tol, "stop tolerance");
    consts.check();

    std::vector<std::string> warnings;
    if (consts.rho_f2 && consts.rho_g2) {
        const double denom = 2.0 * *consts.rho_f2 + 2.0 * *consts.rho_g2;
        if (denom > 0.0 && cfg.gamma >= 1.0 / denom)
            warnings.push_back("gamma = " + std::to_string(cfg.gamma) + " is not below 1/(2 rho_f2 + 2 rho_g2) = " +
                               std::to_string(1.0 / denom));
    }
    if (consts.rho_f2 && consts.L_f) {
        const double inv_gamma = 1.0 / cfg.gamma;
        const double bound = (inv_gamma - *consts.rho_f2) / ((*consts.L_f + inv_gamma) * (*consts.L_f + inv_gamma));
        if (cfg.eta0 > bound)
            warnings.push_back("eta0 = " + std::to_string(cfg.eta0) + " exceeds (1/gamma - rho_f2)/(L_f + 1/gamma)^2 = " +
                               std::to_string(bound));
    }
    if (consts.rho_g2 && *consts.rho_g2 > 0.0 && cfg.eta0 >= 1.0 / *consts.rho_g2)
        warnings.push_back("eta0 = " + std::to_string(cfg.eta0) + " is not below 1/rho_g2");
    return warnings;
}

}  // namespace meha
