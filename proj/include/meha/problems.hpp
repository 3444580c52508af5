#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "meha/core.hpp"
#include "meha/solver.hpp"

namespace meha {

struct DataSplit {
    Matrix features;  // rows = samples, cols = m
    Vector targets;
};

struct Dataset {
    DataSplit train;
    DataSplit val;
    DataSplit test;

    std::size_t m() const { return static_cast<std::size_t>(train.features.cols()); }
    /// Throws ArgumentError unless every split is non-empty and all agree on m.
    void check() const;
};

/// A ready-to-run benchmark: the problem, what is known about it, and the
/// hyper-parameters it was published with.
struct ProblemBundle {
    std::string name;
    ProblemSpec spec;
    ProblemConstants constants;
    std::optional<AnalyticSolution> solution;
    SolverConfig default_config;
    IterateState init;
    TraceOptions trace;
    /// Lower bound of F over X x Y, when finite.
    std::optional<double> F_lower;
    /// Distance from 0 to grad_y f + d_y g + N_Y at (x, y), in closed form.
    std::function<double(const Vector& x, const Vector& y)> ll_optimality;
    /// Problem-specific numbers for run summaries (e.g. test error).
    std::function<std::map<std::string, double>(const IterateState&)> metrics;
};

/// F = |x - e|^2/2 + |y|^2/2, f = |y|^2/2 - x'y, g = 0. Solution x* = y* = e/2.
ProblemBundle make_strong_convex_toy(std::size_t n);

/// F = |x - y2|^2/2 + |y1 - e|^2/2, f = |y1|^2/2 - x'y1, g = 0, y = (y1, y2).
/// The lower level ignores y2. Solution (e, e, e).
ProblemBundle make_merely_convex(std::size_t n);

/// F = (x - a)^2 + |y - a e - c|^2 with scalar x, lower level min_y sum_i sin(x + y_i - c_i).
ProblemBundle make_sin_nonconvex(std::size_t n, double a, const Vector& c);

/// X = [0,1]^n, F = sum_i y_i, f = |y - a|^2/2, g = sum_i x_i |y_i|, a = (1/n, ..., -1/n, ...).
ProblemBundle make_lasso_toy(std::size_t n);

/// Group lasso hyper-parameter selection: F = validation loss, f = training loss,
/// g = sum_j x_j |y^(j)|_2 over J contiguous groups, X = R^J_+. Losses are
/// |A y - b|^2 / (2 N) on each split.
ProblemBundle make_group_lasso(const Dataset& data, std::size_t J);

/// |A y - b|^2 / (2 N) on one split.
double split_loss(const DataSplit& split, const Vector& y);

/// Minimum-norm least-squares fit to the training split (the x = 0 lower-level solution).
Vector unregularized_fit(const Dataset& data);

struct GroupLassoDataOptions {
    std::size_t n_each = 100;
    std::size_t m = 600;
    std::uint64_t seed = 0;
    /// Amplitude ratio std(v'a) / std(noise); infinity gives noiseless targets.
    double snr = 2.0;
};

/// Synthetic regression data: features i.i.d. N(0, 1), b = v'a + sigma eps with v
/// holding 50 ones at the start of each of three equal blocks.
Dataset generate_group_lasso_data(const GroupLassoDataOptions& opts);
Dataset generate_group_lasso_data(std::size_t n_each, std::size_t m, std::uint64_t seed);

/// The coefficient vector used by generate_group_lasso_data for dimension m.
Vector group_lasso_truth(std::size_t m);

/// Reads three comma-separated files (last column = target, optional header row).
Dataset load_csv_dataset(const std::string& path_train, const std::string& path_val, const std::string& path_test);

/// Parse error carrying the offending file, 1-based line and column.
class CsvError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace meha
