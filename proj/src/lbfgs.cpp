#include "skelrefine/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace skelrefine::optim {

namespace {

struct Point {
    double alpha = 0.0;
    double value = 0.0;
    double slope = 0.0;  // directional derivative
    VectorXd grad;
};

// Minimizer of the cubic matching values and slopes at a and b, kept inside the
// middle 80% of the bracket; falls back to bisection when the fit is unusable.
double safeguarded_cubic(const Point& a, const Point& b) {
    const double lo = std::min(a.alpha, b.alpha);
    const double hi = std::max(a.alpha, b.alpha);
    const double margin = 0.1 * (hi - lo);
    const double d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.alpha - b.alpha);
    const double disc = d1 * d1 - a.slope * b.slope;
    double alpha = 0.5 * (lo + hi);
    if (disc >= 0.0) {
        const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
        const double denom = b.slope - a.slope + 2.0 * d2;
        if (denom != 0.0) {
            const double cand = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
            if (std::isfinite(cand)) alpha = cand;
        }
    }
    return std::clamp(alpha, lo + margin, hi - margin);
}

struct LineSearchOutcome {
    bool ok = false;
    Point point;
    int evaluations = 0;
};

// Strong Wolfe search along d from x (bracketing phase, then zoom). When the budget runs
// out, the best point satisfying sufficient decrease is returned if one was seen.
LineSearchOutcome wolfe_search(const Objective& f, const VectorXd& x, const VectorXd& d, double f0, double slope0,
                               double alpha0, const LbfgsOptions& o) {
    LineSearchOutcome out;
    auto eval = [&](double alpha) {
        Point p;
        p.alpha = alpha;
        p.grad.resize(x.size());
        p.value = f(x + alpha * d, p.grad);
        p.slope = std::isfinite(p.value) ? p.grad.dot(d) : std::numeric_limits<double>::quiet_NaN();
        ++out.evaluations;
        return p;
    };
    auto armijo_ok = [&](const Point& p) {
        return std::isfinite(p.value) && p.value <= f0 + o.armijo * p.alpha * slope0;
    };
    auto curvature_ok = [&](const Point& p) { return std::abs(p.slope) <= -o.curvature * slope0; };

    Point origin;
    origin.value = f0;
    origin.slope = slope0;
    Point best = origin;  // lowest Armijo-acceptable point so far (alpha 0 = none)

    auto zoom = [&](Point lo, Point hi) -> LineSearchOutcome {
        while (out.evaluations < o.max_line_search_evaluations) {
            if (std::abs(hi.alpha - lo.alpha) <= 1e-14 * std::max(1.0, lo.alpha)) break;
            const Point p = eval(safeguarded_cubic(lo, hi));
            if (!armijo_ok(p) || p.value >= lo.value) {
                hi = p;
            } else {
                if (p.value < best.value) best = p;
                if (curvature_ok(p)) {
                    out.ok = true;
                    out.point = p;
                    return out;
                }
                if (p.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
                lo = p;
            }
        }
        return out;
    };

    Point prev = origin;
    double alpha = alpha0;
    bool first = true;
    while (out.evaluations < o.max_line_search_evaluations) {
        Point p = eval(alpha);
        if (!std::isfinite(p.value)) {
            // Overflow: shrink toward the last finite point.
            alpha = prev.alpha + 0.1 * (alpha - prev.alpha);
            continue;
        }
        if (!armijo_ok(p) || (!first && p.value >= prev.value)) {
            zoom(prev, p);
            break;
        }
        if (p.value < best.value) best = p;
        if (curvature_ok(p)) {
            out.ok = true;
            out.point = p;
            return out;
        }
        if (p.slope >= 0.0) {
            zoom(p, prev);
            break;
        }
        prev = std::move(p);
        alpha *= 2.0;
        first = false;
    }
    if (!out.ok && best.alpha > 0.0) {
        out.ok = true;
        out.point = best;
    }
    return out;
}

VectorXd two_loop(const VectorXd& g, const std::deque<VectorXd>& s, const std::deque<VectorXd>& y,
                  const std::deque<double>& rho) {
    VectorXd q = -g;
    std::vector<double> a(s.size());
    for (std::size_t i = s.size(); i-- > 0;) {
        a[i] = rho[i] * s[i].dot(q);
        q -= a[i] * y[i];
    }
    if (!s.empty()) q *= s.back().dot(y.back()) / y.back().squaredNorm();
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double beta = rho[i] * y[i].dot(q);
        q += (a[i] - beta) * s[i];
    }
    return q;
}

bool gradient_small(const VectorXd& g, const VectorXd& x, double tol) {
    return g.norm() <= tol * std::max(1.0, x.norm());
}

}  // namespace

std::string_view status_name(Status s) {
    switch (s) {
        case Status::Converged: return "converged";
        case Status::FunctionToleranceReached: return "function_tolerance";
        case Status::MaxIterations: return "max_iterations";
        case Status::LineSearchFailed: return "line_search_failed";
        case Status::StoppedByCallback: return "stopped_by_callback";
    }
    return "unknown";
}

MinimizeResult minimize_lbfgs(const Objective& f, VectorXd x, const LbfgsOptions& o, const IterationCallback& cb) {
    MinimizeResult res;
    VectorXd g(x.size());
    double fx = f(x, g);
    res.evaluations = 1;

    std::deque<VectorXd> s_hist, y_hist;
    std::deque<double> rho;
    res.status = Status::MaxIterations;
    if (gradient_small(g, x, o.gradient_tolerance)) res.status = Status::Converged;

    while (res.status == Status::MaxIterations && res.iterations < o.max_iterations) {
        VectorXd d = two_loop(g, s_hist, y_hist, rho);
        double slope = g.dot(d);
        if (!(slope < 0.0)) {
            s_hist.clear();
            y_hist.clear();
            rho.clear();
            d = -g;
            slope = -g.squaredNorm();
        }
        double alpha0 = s_hist.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;
        auto ls = wolfe_search(f, x, d, fx, slope, alpha0, o);
        res.evaluations += ls.evaluations;
        if (!ls.ok && !s_hist.empty()) {
            // Drop curvature history and retry along steepest descent.
            s_hist.clear();
            y_hist.clear();
            rho.clear();
            d = -g;
            slope = -g.squaredNorm();
            ls = wolfe_search(f, x, d, fx, slope, std::min(1.0, 1.0 / g.norm()), o);
            res.evaluations += ls.evaluations;
        }
        if (!ls.ok) {
            res.status = Status::LineSearchFailed;
            break;
        }

        VectorXd step = ls.point.alpha * d;
        VectorXd dy = ls.point.grad - g;
        const double sy = step.dot(dy);
        if (sy > 1e-10 * dy.squaredNorm()) {
            s_hist.push_back(step);
            y_hist.push_back(std::move(dy));
            rho.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > o.history) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho.pop_front();
            }
        }
        const double decrease = fx - ls.point.value;
        x += step;
        fx = ls.point.value;
        g = std::move(ls.point.grad);
        ++res.iterations;

        IterationRecord rec{res.iterations, fx, g.norm(), ls.point.alpha, res.evaluations};
        res.trace.push_back(rec);
        if (gradient_small(g, x, o.gradient_tolerance))
            res.status = Status::Converged;
        else if (decrease <= o.function_tolerance * std::max(1.0, std::abs(fx)))
            res.status = Status::FunctionToleranceReached;
        if (cb && !cb(rec, x) && res.status == Status::MaxIterations) res.status = Status::StoppedByCallback;
    }
    res.x = std::move(x);
    res.value = fx;
    return res;
}

MinimizeResult minimize_gradient_descent(const Objective& f, VectorXd x, const GradientDescentOptions& o,
                                         const IterationCallback& cb) {
    MinimizeResult res;
    VectorXd g(x.size());
    VectorXd g_new(x.size());
    double fx = f(x, g);
    res.evaluations = 1;
    res.status = gradient_small(g, x, o.gradient_tolerance) ? Status::Converged : Status::MaxIterations;

    while (res.status == Status::MaxIterations && res.iterations < o.max_iterations) {
        double step = o.step * std::pow(o.decay, res.iterations / std::max(1, o.decay_every));
        bool accepted = false;
        VectorXd candidate;
        double f_new = 0.0;
        for (int b = 0; b <= o.max_backtracks; ++b, step *= 0.5) {
            candidate = x - step * g;
            f_new = f(candidate, g_new);
            ++res.evaluations;
            if (std::isfinite(f_new) && f_new < fx) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            res.status = Status::LineSearchFailed;
            break;
        }
        x = std::move(candidate);
        fx = f_new;
        g.swap(g_new);
        ++res.iterations;
        IterationRecord rec{res.iterations, fx, g.norm(), step, res.evaluations};
        res.trace.push_back(rec);
        if (gradient_small(g, x, o.gradient_tolerance)) res.status = Status::Converged;
        if (cb && !cb(rec, x) && res.status == Status::MaxIterations) res.status = Status::StoppedByCallback;
    }
    res.x = std::move(x);
    res.value = fx;
    return res;
}

}  // namespace skelrefine::optim
