#include "meha/problems.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

namespace meha {

namespace {

Vector identity(const Vector& z) { return z; }

Vector ones(std::size_t n) { return Vector::Ones(static_cast<Eigen::Index>(n)); }
Vector zeros(std::size_t n) { return Vector::Zero(static_cast<Eigen::Index>(n)); }

IterateState start_at(Vector x, Vector y) {
    IterateState s;
    s.x = std::move(x);
    s.theta = y;
    s.y = std::move(y);
    return s;
}

double largest_gram_eigenvalue(const Matrix& A) {
    // lambda_max(A'A) = lambda_max(A A'), and A has fewer rows than columns here.
    const Matrix gram = A.rows() <= A.cols() ? Matrix(A * A.transpose()) : Matrix(A.transpose() * A);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().maxCoeff();
}

}  // namespace

void Dataset::check() const {
    const auto m = train.features.cols();
    for (const DataSplit* s : {&train, &val, &test}) {
        if (s->features.rows() == 0) throw ArgumentError("dataset split has no rows");
        if (s->features.cols() != m) throw ArgumentError("dataset splits disagree on the feature count");
        if (s->targets.size() != s->features.rows()) throw ArgumentError("dataset split has mismatched targets");
    }
    if (m == 0) throw ArgumentError("dataset has no feature columns");
}

ProblemBundle make_strong_convex_toy(std::size_t n) {
    if (n == 0) throw ArgumentError("make_strong_convex_toy: n must be positive");
    ProblemBundle b;
    b.name = "strong_convex_toy";
    ProblemSpec& p = b.spec;
    p.n = n;
    p.m = n;
    p.smooth_only = true;
    const Vector e = ones(n);
    p.eval_F = [e](const Vector& x, const Vector& y) { return 0.5 * (x - e).squaredNorm() + 0.5 * y.squaredNorm(); };
    p.grad_F = [e](const Vector& x, const Vector& y) { return BlockGradient{x - e, y}; };
    p.eval_f = [](const Vector& x, const Vector& y) { return 0.5 * y.squaredNorm() - x.dot(y); };
    p.grad_f = [](const Vector& x, const Vector& y) { return BlockGradient{-y, y - x}; };
    p.proj_X = identity;
    p.proj_Y = identity;

    b.constants.L_F = 1.0;
    b.constants.L_f = 1.0;
    b.constants.L_g = 0.0;
    b.constants.mu = 1.0;
    b.constants.rho_f2 = 0.0;
    b.constants.rho_g2 = 0.0;

    b.solution = AnalyticSolution{0.5 * e, 0.5 * e, 0.25 * static_cast<double>(n)};

    SolverConfig& c = b.default_config;
    c.alpha0 = 1.5;
    c.beta0 = 0.8;
    c.eta0 = 0.8;
    c.gamma = 10.0;
    c.c_lower = 33.3;
    c.p = 0.49;
    c.max_iters = 50000;
    c.stop_rule = {StopKind::max_iters_only, 1e-3};

    b.init = start_at(zeros(n), zeros(n));
    b.F_lower = 0.0;
    b.trace.diag_every = 100;
    b.trace.F_lower = 0.0;
    b.trace.merit_weight = default_merit_weight(b.constants, c.gamma);
    b.ll_optimality = [](const Vector& x, const Vector& y) { return (y - x).norm(); };
    b.metrics = [e](const IterateState& s) {
        return std::map<std::string, double>{{"hypergradient_norm", (2.0 * s.x - e).norm()}};
    };
    return b;
}

ProblemBundle make_merely_convex(std::size_t n) {
    if (n == 0) throw ArgumentError("make_merely_convex: n must be positive");
    const auto N = static_cast<Eigen::Index>(n);
    ProblemBundle b;
    b.name = "merely_convex";
    ProblemSpec& p = b.spec;
    p.n = n;
    p.m = 2 * n;
    p.smooth_only = true;
    const Vector e = ones(n);
    p.eval_F = [e, N](const Vector& x, const Vector& y) {
        return 0.5 * (x - y.tail(N)).squaredNorm() + 0.5 * (y.head(N) - e).squaredNorm();
    };
    p.grad_F = [e, N](const Vector& x, const Vector& y) {
        BlockGradient g{x - y.tail(N), Vector(2 * N)};
        g.y << y.head(N) - e, y.tail(N) - x;
        return g;
    };
    p.eval_f = [N](const Vector& x, const Vector& y) { return 0.5 * y.head(N).squaredNorm() - x.dot(y.head(N)); };
    p.grad_f = [N](const Vector& x, const Vector& y) {
        BlockGradient g{-y.head(N), Vector::Zero(2 * N)};
        g.y.head(N) = y.head(N) - x;
        return g;
    };
    p.proj_X = identity;
    p.proj_Y = identity;

    b.constants.L_F = 2.0;
    b.constants.L_f = (1.0 + std::sqrt(5.0)) / 2.0;
    b.constants.L_g = 0.0;
    b.constants.rho_f2 = 0.0;
    b.constants.rho_g2 = 0.0;

    Vector y_star(2 * N);
    y_star << e, e;
    b.solution = AnalyticSolution{e, y_star, 0.0};

    SolverConfig& c = b.default_config;
    c.alpha0 = 0.012;
    c.beta0 = 0.1;
    c.eta0 = 0.009;
    c.gamma = 5.0;
    c.c_lower = 0.167;
    c.p = 0.49;
    // The exponent itself is not published; 0.23 keeps beta_k below eta soon
    // enough for the y2 block to stay stable without stalling x.
    c.step_mode = {StepMode::Kind::inverse_power, 0.23};
    c.max_iters = 100000;
    c.stop_rule = {StopKind::rel_error_to_solution, 1e-3};

    b.init = start_at(zeros(n), zeros(2 * n));
    b.F_lower = 0.0;
    b.trace.diag_every = 100;
    b.trace.F_lower = 0.0;
    b.trace.merit_weight = default_merit_weight(b.constants, c.gamma);
    b.ll_optimality = [N](const Vector& x, const Vector& y) { return (y.head(N) - x).norm(); };
    return b;
}

ProblemBundle make_sin_nonconvex(std::size_t n, double a, const Vector& cvec) {
    if (n == 0) throw ArgumentError("make_sin_nonconvex: n must be positive");
    if (static_cast<std::size_t>(cvec.size()) != n) throw ArgumentError("make_sin_nonconvex: c must have length n");
    ProblemBundle b;
    b.name = "sin_nonconvex";
    ProblemSpec& p = b.spec;
    p.n = 1;
    p.m = n;
    p.smooth_only = true;
    const Vector shift = Vector::Constant(cvec.size(), a) + cvec;
    p.eval_F = [a, shift](const Vector& x, const Vector& y) {
        return (x[0] - a) * (x[0] - a) + (y - shift).squaredNorm();
    };
    p.grad_F = [a, shift](const Vector& x, const Vector& y) {
        return BlockGradient{Vector::Constant(1, 2.0 * (x[0] - a)), 2.0 * (y - shift)};
    };
    p.eval_f = [cvec](const Vector& x, const Vector& y) {
        return (y.array() + x[0] - cvec.array()).sin().sum();
    };
    p.grad_f = [cvec](const Vector& x, const Vector& y) {
        Vector cosines = (y.array() + x[0] - cvec.array()).cos().matrix();
        return BlockGradient{Vector::Constant(1, cosines.sum()), cosines};
    };
    p.proj_X = identity;
    p.proj_Y = identity;

    b.constants.L_F = 2.0;
    b.constants.L_f = static_cast<double>(n) + 1.0;
    b.constants.L_g = 0.0;
    b.constants.rho_f2 = 1.0;
    b.constants.rho_g2 = 0.0;

    // C is the point of {-pi/2 + 2 k pi} closest to 2a.
    constexpr double pi = std::numbers::pi;
    const double k = std::round((2.0 * a + pi / 2.0) / (2.0 * pi));
    const double C = -pi / 2.0 + 2.0 * pi * k;
    const double nn = static_cast<double>(n);
    const double x_star = ((1.0 - nn) * a + nn * C) / (1.0 + nn);
    const Vector y_star = (Vector::Constant(cvec.size(), C - x_star) + cvec).eval();
    b.solution = AnalyticSolution{Vector::Constant(1, x_star), y_star, nn * (C - 2.0 * a) * (C - 2.0 * a) / (1.0 + nn)};

    SolverConfig& c = b.default_config;
    c.alpha0 = 5e-4;
    c.beta0 = 5e-4;
    c.eta0 = 0.001;
    c.gamma = 200.0;
    c.c_lower = 0.02;
    c.p = 0.49;
    c.max_iters = 800;
    c.stop_rule = {StopKind::direction_norm, n == 1 ? 1e-8 : 1e-3};

    b.init = start_at(Vector::Constant(1, -6.0), zeros(n));
    b.F_lower = 0.0;
    b.trace.diag_every = 10;
    b.trace.oracle_max_inner = 20000;
    b.trace.F_lower = 0.0;
    b.trace.merit_weight = default_merit_weight(b.constants, c.gamma);
    b.ll_optimality = [cvec](const Vector& x, const Vector& y) {
        return (y.array() + x[0] - cvec.array()).cos().matrix().norm();
    };
    return b;
}

ProblemBundle make_lasso_toy(std::size_t n) {
    if (n == 0 || n % 2 != 0) throw ArgumentError("make_lasso_toy: n must be positive and even");
    const auto N = static_cast<Eigen::Index>(n);
    const double inv_n = 1.0 / static_cast<double>(n);
    ProblemBundle b;
    b.name = "lasso_toy";
    ProblemSpec& p = b.spec;
    p.n = n;
    p.m = n;
    Vector a(N);
    a.head(N / 2).setConstant(inv_n);
    a.tail(N / 2).setConstant(-inv_n);

    p.eval_F = [](const Vector&, const Vector& y) { return y.sum(); };
    p.grad_F = [N](const Vector&, const Vector&) { return BlockGradient{Vector::Zero(N), Vector::Ones(N)}; };
    p.eval_f = [a](const Vector&, const Vector& y) { return 0.5 * (y - a).squaredNorm(); };
    p.grad_f = [a, N](const Vector&, const Vector& y) { return BlockGradient{Vector::Zero(N), y - a}; };
    p.eval_g = [](const Vector& x, const Vector& y) { return x.dot(y.cwiseAbs()); };
    p.grad_x_g = [](const Vector&, const Vector& y) { return Vector(y.cwiseAbs()); };
    p.prox_g = [](const Vector& x, double s, const Vector& theta) { return soft_threshold(theta, Vector(s * x)); };
    p.proj_X = [](const Vector& z) { return project_box(z, 0.0, 1.0); };
    p.proj_Y = identity;

    b.constants.L_F = 0.0;
    b.constants.L_f = 1.0;
    b.constants.L_g = 1.0;
    b.constants.rho_f2 = 0.0;
    b.constants.rho_g2 = 0.0;

    // x* is the set [1/n, 1] on the first half; 1/n stands in for it.
    Vector x_star = Vector::Zero(N);
    x_star.head(N / 2).setConstant(inv_n);
    Vector y_star = Vector::Zero(N);
    y_star.tail(N / 2).setConstant(-inv_n);
    b.solution = AnalyticSolution{x_star, y_star, -0.5};

    SolverConfig& c = b.default_config;
    c.alpha0 = 0.1;
    c.beta0 = 1e-5;
    c.eta0 = 0.1;
    c.gamma = 10.0;
    c.c_lower = 2.0;
    c.p = 0.49;
    c.max_iters = 1000000;
    c.stop_rule = {StopKind::rel_error_to_solution, 1e-3};

    b.init = start_at(zeros(n), zeros(n));
    b.trace.diag_every = 10000;
    b.ll_optimality = [a](const Vector& x, const Vector& y) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double r = y[i] - a[i];
            const double d = y[i] != 0.0 ? std::abs(r + x[i] * (y[i] > 0.0 ? 1.0 : -1.0))
                                         : std::max(0.0, std::abs(r) - x[i]);
            s += d * d;
        }
        return std::sqrt(s);
    };
    return b;
}

double split_loss(const DataSplit& split, const Vector& y) {
    return (split.features * y - split.targets).squaredNorm() / (2.0 * static_cast<double>(split.features.rows()));
}

Vector unregularized_fit(const Dataset& data) {
    return data.train.features.completeOrthogonalDecomposition().solve(data.train.targets);
}

ProblemBundle make_group_lasso(const Dataset& data, std::size_t J) {
    data.check();
    const std::size_t m = data.m();
    auto groups = std::make_shared<const GroupPartition>(GroupPartition::contiguous(m, J));
    auto shared = std::make_shared<const Dataset>(data);
    const auto JJ = static_cast<Eigen::Index>(J);

    ProblemBundle b;
    b.name = "group_lasso";
    ProblemSpec& p = b.spec;
    p.n = J;
    p.m = m;

    auto loss_grad = [](const DataSplit& s, const Vector& y) {
        return Vector(s.features.transpose() * (s.features * y - s.targets) /
                      static_cast<double>(s.features.rows()));
    };
    p.eval_F = [shared](const Vector&, const Vector& y) { return split_loss(shared->val, y); };
    p.grad_F = [shared, loss_grad, JJ](const Vector&, const Vector& y) {
        return BlockGradient{Vector::Zero(JJ), loss_grad(shared->val, y)};
    };
    p.eval_f = [shared](const Vector&, const Vector& y) { return split_loss(shared->train, y); };
    p.grad_f = [shared, loss_grad, JJ](const Vector&, const Vector& y) {
        return BlockGradient{Vector::Zero(JJ), loss_grad(shared->train, y)};
    };
    p.eval_g = [groups](const Vector& x, const Vector& y) { return x.dot(groups->group_norms(y)); };
    p.grad_x_g = [groups](const Vector&, const Vector& y) { return groups->group_norms(y); };
    p.prox_g = [groups](const Vector& x, double s, const Vector& theta) {
        return group_soft_threshold(theta, *groups, Vector(s * x));
    };
    p.proj_X = [](const Vector& z) { return Vector(z.cwiseMax(0.0)); };
    p.proj_Y = identity;

    b.constants.L_F = largest_gram_eigenvalue(data.val.features) / static_cast<double>(data.val.features.rows());
    b.constants.L_f = largest_gram_eigenvalue(data.train.features) / static_cast<double>(data.train.features.rows());
    b.constants.L_g = 1.0;
    b.constants.rho_f2 = 0.0;
    b.constants.rho_g2 = 0.0;

    SolverConfig& c = b.default_config;
    c.alpha0 = 0.01;
    c.beta0 = 0.05;
    c.eta0 = 0.05;
    c.gamma = 100.0;
    c.c_lower = 20.0;
    c.p = 0.48;
    c.max_iters = 5000;
    c.stop_rule = {StopKind::rel_change_x, 0.2};

    // Start on the lower-level solution set: x = 0 and y the unregularized fit.
    b.init = start_at(zeros(J), unregularized_fit(data));
    b.F_lower = 0.0;
    b.trace.diag_every = 10;
    b.trace.F_lower = 0.0;
    b.trace.merit_weight = default_merit_weight(b.constants, c.gamma);
    b.ll_optimality = [shared, groups, loss_grad](const Vector& x, const Vector& y) {
        const Vector grad = loss_grad(shared->train, y);
        double s = 0.0;
        for (std::size_t j = 0; j < groups->size(); ++j) {
            Vector gj(static_cast<Eigen::Index>((*groups)[j].size()));
            Vector yj(gj.size());
            for (std::size_t t = 0; t < (*groups)[j].size(); ++t) {
                gj[static_cast<Eigen::Index>(t)] = grad[static_cast<Eigen::Index>((*groups)[j][t])];
                yj[static_cast<Eigen::Index>(t)] = y[static_cast<Eigen::Index>((*groups)[j][t])];
            }
            const double w = x[static_cast<Eigen::Index>(j)];
            const double ny = yj.norm();
            const double d = ny > 0.0 ? (gj + w * yj / ny).norm() : std::max(0.0, gj.norm() - w);
            s += d * d;
        }
        return std::sqrt(s);
    };
    b.metrics = [shared, groups](const IterateState& s) {
        const Vector norms = groups->group_norms(s.y);
        return std::map<std::string, double>{
            {"train_error", split_loss(shared->train, s.y)},
            {"val_error", split_loss(shared->val, s.y)},
            {"test_error", split_loss(shared->test, s.y)},
            {"active_groups", static_cast<double>((norms.array() > 0.0).count())},
        };
    };
    return b;
}

Vector group_lasso_truth(std::size_t m) {
    if (m < 150) throw ArgumentError("group lasso data needs m >= 150 (three blocks of 50 ones)");
    const std::size_t block = m / 3;
    Vector v = Vector::Zero(static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < 3; ++j)
        v.segment(static_cast<Eigen::Index>(j * block), 50).setOnes();
    return v;
}

Dataset generate_group_lasso_data(const GroupLassoDataOptions& opts) {
    if (opts.n_each == 0) throw ArgumentError("generate_group_lasso_data: n_each must be positive");
    if (!(opts.snr > 0.0)) throw ArgumentError("generate_group_lasso_data: snr must be positive");
    const Vector v = group_lasso_truth(opts.m);
    const double sigma = std::isinf(opts.snr) ? 0.0 : v.norm() / opts.snr;

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto rows = static_cast<Eigen::Index>(opts.n_each);
    const auto cols = static_cast<Eigen::Index>(opts.m);
    auto draw = [&]() {
        DataSplit s;
        s.features.resize(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) s.features(i, j) = normal(rng);
        s.targets = s.features * v;
        for (Eigen::Index i = 0; i < rows; ++i) s.targets[i] += sigma * normal(rng);
        return s;
    };
    Dataset d;
    d.train = draw();
    d.val = draw();
    d.test = draw();
    return d;
}

Dataset generate_group_lasso_data(std::size_t n_each, std::size_t m, std::uint64_t seed) {
    return generate_group_lasso_data(GroupLassoDataOptions{n_each, m, seed, 2.0});
}

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_number(std::string_view cell, double& out) {
    if (cell.empty()) return false;
    if (cell.front() == '+') cell.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return ec == std::errc() && ptr == cell.data() + cell.size() && std::isfinite(out);
}

DataSplit read_split(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CsvError(path + ": cannot open file");

    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<std::string_view> cells;
        std::vector<std::size_t> columns;
        std::string_view rest(line);
        std::size_t col = 1;
        while (true) {
            const auto comma = rest.find(',');
            cells.push_back(trim(rest.substr(0, comma)));
            columns.push_back(col);
            if (comma == std::string_view::npos) break;
            col += comma + 1;
            rest.remove_prefix(comma + 1);
        }

        std::vector<double> values(cells.size());
        std::optional<std::size_t> bad;
        for (std::size_t i = 0; i < cells.size() && !bad; ++i)
            if (!parse_number(cells[i], values[i])) bad = i;

        if (bad) {
            // A non-numeric first row is a header.
            if (rows.empty() && width == 0) {
                width = cells.size();
                continue;
            }
            throw CsvError(path + ":" + std::to_string(lineno) + ":" + std::to_string(columns[*bad]) +
                           ": non-numeric cell '" + std::string(cells[*bad]) + "'");
        }
        if (width == 0) width = cells.size();
        if (cells.size() != width)
            throw CsvError(path + ":" + std::to_string(lineno) + ":1: expected " + std::to_string(width) +
                           " columns, found " + std::to_string(cells.size()));
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw CsvError(path + ": no data rows");
    if (width < 2) throw CsvError(path + ": need at least one feature column and a target column");

    DataSplit s;
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto m = static_cast<Eigen::Index>(width - 1);
    s.features.resize(n, m);
    s.targets.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < m; ++j) s.features(i, j) = r[static_cast<std::size_t>(j)];
        s.targets[i] = r.back();
    }
    return s;
}

}  // namespace

Dataset load_csv_dataset(const std::string& path_train, const std::string& path_val, const std::string& path_test) {
    Dataset d{read_split(path_train), read_split(path_val), read_split(path_test)};
    if (d.val.features.cols() != d.train.features.cols() || d.test.features.cols() != d.train.features.cols())
        throw CsvError("train/val/test files disagree on the number of feature columns");
    return d;
}

}  // namespace meha
