#pragma once

#include <Eigen/Core>

#include <functional>
#include <string_view>
#include <vector>

namespace skelrefine::optim {

using Eigen::VectorXd;

/// Returns f(x) and writes the gradient into grad.
using Objective = std::function<double(const VectorXd& x, VectorXd& grad)>;

struct LbfgsOptions {
    int history = 10;
    int max_iterations = 200;
    double gradient_tolerance = 1e-10;  // on ||g|| / max(1, ||x||)
    double function_tolerance = 1e-12;  // on relative decrease per iteration
    double armijo = 1e-4;               // sufficient decrease constant
    double curvature = 0.9;             // strong Wolfe curvature constant
    int max_line_search_evaluations = 25;
};

struct GradientDescentOptions {
    int max_iterations = 500;
    double step = 1e-3;
    double decay = 0.5;        // step multiplier applied every decay_every iterations
    int decay_every = 100;
    int max_backtracks = 20;   // halvings allowed when a step fails to decrease f
    double gradient_tolerance = 1e-10;
};

enum class Status {
    Converged,
    FunctionToleranceReached,
    MaxIterations,
    LineSearchFailed,
    StoppedByCallback,
};

std::string_view status_name(Status s);

struct IterationRecord {
    int iteration = 0;
    double value = 0.0;
    double gradient_norm = 0.0;
    double step = 0.0;
    int evaluations = 0;  // cumulative
};

/// Called after every accepted step; returning false stops the run.
using IterationCallback = std::function<bool(const IterationRecord&, const VectorXd& x)>;

struct MinimizeResult {
    VectorXd x;
    double value = 0.0;
    int iterations = 0;
    int evaluations = 0;
    Status status = Status::MaxIterations;
    std::vector<IterationRecord> trace;
};

/// Limited-memory BFGS with a strong Wolfe line search. Accepted steps never increase f.
MinimizeResult minimize_lbfgs(const Objective& f, VectorXd x0, const LbfgsOptions& opts = {},
                              const IterationCallback& callback = {});

/// Gradient descent with a decaying step and backtracking on failed decrease.
MinimizeResult minimize_gradient_descent(const Objective& f, VectorXd x0, const GradientDescentOptions& opts = {},
                                         const IterationCallback& callback = {});

}  // namespace skelrefine::optim
