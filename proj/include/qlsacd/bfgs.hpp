#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace qlsacd::optim {

struct BfgsOptions {
    std::size_t max_iterations = 1000;
    double gradient_tolerance = 1e-5;  // on the max-norm of the gradient
    std::size_t max_backtracks = 60;
};

struct BfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd gradient;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    bool converged = false;
    std::string message;
    std::vector<double> trace;  // objective at each accepted iterate, starting point first
};

// Minimizes f with an inverse-Hessian BFGS update and a backtracking line search.
// fg(x, grad) returns f(x) and fills grad; a non-finite value (or an exception
// caught by the caller's fg) marks x as infeasible and shrinks the step.
template <class FG>
BfgsResult minimize_bfgs(FG&& fg, Eigen::VectorXd x0, const BfgsOptions& opt = {}) {
    const Eigen::Index n = x0.size();
    BfgsResult res;
    res.x = std::move(x0);
    res.gradient.resize(n);
    res.value = fg(res.x, res.gradient);
    ++res.evaluations;
    if (!std::isfinite(res.value) || !res.gradient.allFinite()) {
        res.message = "objective not finite at the starting point";
        return res;
    }
    res.trace.push_back(res.value);

    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
    bool fresh = true;  // h is a (scaled) identity
    double gamma = 1.0;  // identity scaling from the latest curvature pair
    Eigen::VectorXd g_new(n), x_new(n);
    int fallback = 0;  // 0: none tried, 1: Newton reset tried, 2: identity reset tried

    // Inverse of a central-difference Hessian of the gradient; used to recover when the
    // quasi-Newton model is too poor for the line search to make progress.
    auto newton_inverse = [&](Eigen::MatrixXd& out) {
        Eigen::MatrixXd hess(n, n);
        Eigen::VectorXd xp = res.x, gp(n), gm(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = 1e-5 * std::max(1.0, std::fabs(res.x[i]));
            xp[i] = res.x[i] + d;
            const double fp = fg(xp, gp);
            xp[i] = res.x[i] - d;
            const double fm = fg(xp, gm);
            xp[i] = res.x[i];
            res.evaluations += 2;
            if (!std::isfinite(fp) || !std::isfinite(fm)) return false;
            hess.col(i) = (gp - gm) / (2.0 * d);
        }
        const Eigen::MatrixXd sym = 0.5 * (hess + hess.transpose());
        const Eigen::LLT<Eigen::MatrixXd> llt(sym);
        if (llt.info() != Eigen::Success || !sym.allFinite()) return false;
        out = llt.solve(Eigen::MatrixXd::Identity(n, n));
        return out.allFinite();
    };

    for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
        const double gnorm = res.gradient.lpNorm<Eigen::Infinity>();
        if (gnorm <= opt.gradient_tolerance) {
            res.converged = true;
            res.message = "gradient tolerance reached";
            return res;
        }
        Eigen::VectorXd dir = -h * res.gradient;
        double slope = res.gradient.dot(dir);
        // Reset when the quasi-Newton direction is not a usable descent direction.
        if (!(slope < -1e-10 * res.gradient.norm() * dir.norm())) {
            h = gamma * Eigen::MatrixXd::Identity(n, n);
            fresh = true;
            dir = -h * res.gradient;
            slope = res.gradient.dot(dir);
        }
        // Before any curvature information, cap the first trial step at unit length.
        double step = gamma == 1.0 && fresh ? std::min(1.0, 1.0 / std::max(1e-300, dir.lpNorm<Eigen::Infinity>())) : 1.0;

        bool accepted = false;
        double f_new = 0.0;
        for (std::size_t k = 0; k < opt.max_backtracks; ++k) {
            x_new = res.x + step * dir;
            f_new = fg(x_new, g_new);
            ++res.evaluations;
            if (std::isfinite(f_new) && g_new.allFinite()) {
                const bool armijo = f_new < res.value && f_new <= res.value + 1e-4 * step * slope;
                // Near the optimum the decrease drowns in rounding; a step that does not
                // increase f and clearly shrinks the gradient is still progress.
                const bool flat = f_new <= res.value && g_new.lpNorm<Eigen::Infinity>() < 0.9 * gnorm;
                if (armijo || flat) {
                    accepted = true;
                    break;
                }
                const double denom = 2.0 * (f_new - res.value - step * slope);
                const double trial = denom > 0.0 ? -slope * step * step / denom : 0.5 * step;
                step = std::clamp(trial, 0.1 * step, 0.5 * step);
            } else {
                step *= 0.25;
            }
        }
        if (!accepted) {
            if (fallback == 0) {
                fallback = 1;
                Eigen::MatrixXd inv;
                if (newton_inverse(inv)) {
                    h = std::move(inv);
                    fresh = false;
                    continue;
                }
            }
            if (fallback == 1 && !fresh) {
                fallback = 2;
                h = gamma * Eigen::MatrixXd::Identity(n, n);
                fresh = true;
                continue;
            }
            res.message = "line search failed to find an acceptable step";
            return res;
        }
        fallback = 0;

        const Eigen::VectorXd s = x_new - res.x;
        const Eigen::VectorXd y = g_new - res.gradient;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (fresh) {
                gamma = sy / y.squaredNorm();
                h = gamma * Eigen::MatrixXd::Identity(n, n);
            }
            fresh = false;
            const double rho = 1.0 / sy;
            const Eigen::VectorXd hy = h * y;
            h += ((sy + y.dot(hy)) * rho * rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
        }
        res.x = x_new;
        res.value = f_new;
        res.gradient = g_new;
        res.trace.push_back(f_new);
    }
    res.converged = res.gradient.lpNorm<Eigen::Infinity>() <= opt.gradient_tolerance;
    res.message = res.converged ? "gradient tolerance reached" : "iteration limit reached";
    return res;
}

}  // namespace qlsacd::optim
