#pragma once

#include "qlsacd/acd.hpp"
#include "qlsacd/bfgs.hpp"
#include "qlsacd/errors.hpp"
#include "qlsacd/parallel.hpp"
#include "qlsacd/stats.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace qlsacd {

struct FitOptions {
    std::size_t max_iterations = 1000;
    double gradient_tolerance = 1e-5;
    // Candidate shape values (one inner vector per candidate); empty selects the family default.
    std::vector<std::vector<double>> profile_grid;
    bool use_analytic_score = true;
    std::uint64_t seed = 0;
    std::size_t max_restarts = 3;
    bool compute_standard_errors = true;
    std::optional<AcdParams> start;
    std::optional<Presample> presample;
    std::size_t workers = 1;  // for profile and q-grid evaluation
};

struct InformationCriteria {
    double aic = 0.0;
    double bic = 0.0;
    double caic = 0.0;  // consistent AIC, -2l + p (log n + 1)
    double hqic = 0.0;
    double aicc = 0.0;  // small-sample corrected AIC; infinite when n <= p + 1
};

struct ConvergenceRecord {
    bool converged = false;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    std::size_t restarts = 0;
    double gradient_max_norm = 0.0;  // in the (log phi, omega, alpha, beta) coordinates
    std::string message;
    std::vector<double> loglik_trace;  // accepted iterates of the final run
};

struct ProfilePoint {
    std::vector<double> extra;
    std::optional<double> loglik_full;
    bool converged = false;
    std::string error;
};

struct FittedModel {
    AcdModelSpec spec;
    AcdParams params;
    std::vector<double> theta_extra;
    std::size_t n = 0;
    double loglik_kernel = 0.0;
    double loglik_full = 0.0;
    std::optional<std::vector<double>> se;  // absent when the negated Hessian is not positive definite
    std::string se_diagnostic;
    Eigen::MatrixXd hessian;  // of the log-likelihood in (phi, omega, alpha, beta)
    std::size_t n_free = 0;
    InformationCriteria criteria;
    std::vector<double> psi_path;
    double psi_next = 0.0;
    Presample presample;
    ConvergenceRecord convergence;
    std::vector<ProfilePoint> profile;
};

inline InformationCriteria information_criteria(double loglik_full, std::size_t p, std::size_t n) {
    const double nn = static_cast<double>(n), pp = static_cast<double>(p);
    if (!(nn > std::exp(1.0))) throw DomainError("information criteria need n > e (log log n undefined)");
    InformationCriteria c;
    c.aic = -2.0 * loglik_full + 2.0 * pp;
    c.bic = -2.0 * loglik_full + pp * std::log(nn);
    c.caic = -2.0 * loglik_full + pp * (std::log(nn) + 1.0);
    c.hqic = -2.0 * loglik_full + 2.0 * pp * std::log(std::log(nn));
    c.aicc = nn > pp + 1.0 ? c.aic + 2.0 * pp * (pp + 1.0) / (nn - pp - 1.0) : std::numeric_limits<double>::infinity();
    return c;
}

inline InformationCriteria information_criteria(const FittedModel& m) {
    return information_criteria(m.loglik_full, m.n_free, m.n);
}

inline AcdParams starting_values(const AcdModelSpec& spec, std::span<const double> x) {
    spec.validate();
    const std::size_t need = 10 * (spec.r + spec.s + 2);
    if (x.size() <= need)
        throw InputError("need more than " + std::to_string(need) + " durations to fit order (" +
                         std::to_string(spec.r) + "," + std::to_string(spec.s) + ")");
    for (double v : x)
        if (!(v > 0.0) || !std::isfinite(v)) throw InputError("durations must be positive and finite");
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }))
        throw InputError("degenerate durations: all values are equal");
    AcdParams p;
    p.alpha.assign(spec.r, 0.5 / static_cast<double>(spec.r));
    p.beta.assign(spec.s, 0.1 / static_cast<double>(spec.s));
    const double sa = spec.r > 0 ? 0.5 : 0.0;
    p.omega = (1.0 - sa) * std::log(stats::quantile(x, spec.q));
    std::vector<double> lx(x.size());
    std::transform(x.begin(), x.end(), lx.begin(), [](double v) { return std::log(v); });
    p.phi = stats::variance(lx);
    return p;
}

// Jacobian of grad by central differences with h_i = max(1e-5, 1e-4 |theta_i|), symmetrized.
template <class Grad>
Eigen::MatrixXd numerical_hessian(Grad&& grad, const std::vector<double>& theta) {
    const auto k = static_cast<Eigen::Index>(theta.size());
    Eigen::MatrixXd h(k, k);
    std::vector<double> v = theta;
    for (Eigen::Index i = 0; i < k; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        const double step = std::max(1e-5, 1e-4 * std::fabs(theta[iu]));
        v[iu] = theta[iu] + step;
        const std::vector<double> gp = grad(v);
        v[iu] = theta[iu] - step;
        const std::vector<double> gm = grad(v);
        v[iu] = theta[iu];
        for (Eigen::Index j = 0; j < k; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            h(j, i) = (gp[ju] - gm[ju]) / (2.0 * step);
        }
    }
    return 0.5 * (h + h.transpose());
}

struct StandardErrorResult {
    std::optional<std::vector<double>> se;
    std::string diagnostic;
};

// Square roots of diag((-H)^{-1}) for a log-likelihood Hessian H.
inline StandardErrorResult standard_errors_from_hessian(const Eigen::MatrixXd& hessian) {
    StandardErrorResult out;
    if (!hessian.allFinite()) {
        out.diagnostic = "Hessian has non-finite entries";
        return out;
    }
    const Eigen::MatrixXd info = -hessian;
    const Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success) {
        out.diagnostic = "negated Hessian is not positive definite";
        return out;
    }
    const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
    std::vector<double> se(static_cast<std::size_t>(cov.rows()));
    for (Eigen::Index i = 0; i < cov.rows(); ++i) {
        if (!(cov(i, i) > 0.0)) {
            out.diagnostic = "non-positive variance on the diagonal";
            return out;
        }
        se[static_cast<std::size_t>(i)] = std::sqrt(cov(i, i));
    }
    out.se = std::move(se);
    return out;
}

inline std::vector<std::vector<double>> default_profile_grid(Family f) {
    std::vector<std::vector<double>> grid;
    auto range = [](double lo, double hi, double step) {
        std::vector<double> v;
        const auto count = static_cast<int>(std::llround((hi - lo) / step));
        for (int i = 0; i <= count; ++i) v.push_back(lo + step * i);
        return v;
    };
    const std::vector<double> ebs_scale{0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
    switch (f) {
        case Family::LogNormal: break;
        case Family::LogStudentT:
            for (double nu : range(1, 30, 1)) grid.push_back({nu});
            break;
        case Family::LogPowerExponential:
            for (double t : range(-0.9, 1.0, 0.1)) grid.push_back({std::round(t * 10.0) / 10.0});
            break;
        case Family::LogHyperbolic:
        case Family::LogSlash:
            for (double t : range(0.5, 10.0, 0.5)) grid.push_back({t});
            break;
        case Family::LogContaminatedNormal:
            for (double a : range(0.1, 0.9, 0.1))
                for (double b : range(0.1, 0.9, 0.1)) grid.push_back({std::round(a * 10) / 10, std::round(b * 10) / 10});
            break;
        case Family::ExtendedBS:
            for (double t : ebs_scale) grid.push_back({t});
            break;
        case Family::ExtendedBSt:
            for (double t : ebs_scale)
                for (double nu : range(1, 30, 1)) grid.push_back({t, nu});
            break;
    }
    return grid;
}

namespace detail {

// Optimization coordinates: (log phi, omega, alpha, beta).
inline Eigen::VectorXd to_internal(const AcdParams& p) {
    const auto v = p.to_vector();
    Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    u[0] = std::log(p.phi);
    return u;
}

inline AcdParams from_internal(const AcdModelSpec& spec, const Eigen::VectorXd& u) {
    std::vector<double> v(u.data(), u.data() + u.size());
    v[0] = std::exp(u[0]);
    return AcdParams::from_vector(spec, v);
}

inline AcdParams jitter(const AcdParams& p, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    AcdParams j = p;
    j.phi *= std::exp(0.3 * nd(rng));
    j.omega += 0.2 * nd(rng);
    for (double& a : j.alpha) a = std::clamp(a + 0.1 * nd(rng), -0.95, 0.95);
    for (double& b : j.beta) b = std::clamp(b + 0.05 * nd(rng), -0.5, 0.5);
    return j;
}

}  // namespace detail

// Maximum likelihood with the shape parameters fixed at spec.gen.extra.
inline FittedModel fit(const AcdModelSpec& spec, std::span<const double> x, const FitOptions& opt = {}) {
    if (!(opt.gradient_tolerance > 0.0)) throw DomainError("gradient tolerance must be positive");
    const AcdModel model(spec);
    const AcdParams start0 = opt.start ? *opt.start : starting_values(spec, x);
    start0.validate(spec);
    const Presample pre = opt.presample ? *opt.presample : default_presample(spec, x);
    const std::size_t k = spec.n_params();

    auto objective = [&](const Eigen::VectorXd& u, Eigen::VectorXd& grad) -> double {
        try {
            const AcdParams p = detail::from_internal(spec, u);
            if (opt.use_analytic_score) {
                const auto lg = model.loglik_and_score(p, x, pre);
                if (!std::isfinite(lg.loglik)) return std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < k; ++i) grad[static_cast<Eigen::Index>(i)] = -lg.gradient[i];
                grad[0] *= p.phi;
                return -lg.loglik;
            }
            const double f = -model.loglik(p, x, pre);
            if (!std::isfinite(f)) return std::numeric_limits<double>::infinity();
            Eigen::VectorXd w = u;
            for (Eigen::Index i = 0; i < u.size(); ++i) {
                const double h = 1e-6 * std::max(1.0, std::fabs(u[i]));
                w[i] = u[i] + h;
                const double fp = -model.loglik(detail::from_internal(spec, w), x, pre);
                w[i] = u[i] - h;
                const double fm = -model.loglik(detail::from_internal(spec, w), x, pre);
                w[i] = u[i];
                grad[i] = (fp - fm) / (2.0 * h);
            }
            return f;
        } catch (const NumericalError&) {
            return std::numeric_limits<double>::infinity();
        } catch (const DomainError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    optim::BfgsOptions bo;
    bo.max_iterations = opt.max_iterations;
    bo.gradient_tolerance = opt.gradient_tolerance;

    std::optional<optim::BfgsResult> best;
    std::size_t attempts = 0;
    std::mt19937_64 rng(derive_seed(opt.seed, 0x5eed));
    AcdParams start = start0;
    for (; attempts <= opt.max_restarts; ++attempts) {
        if (attempts > 0) start = detail::jitter(start0, rng);
        auto res = optim::minimize_bfgs(objective, detail::to_internal(start), bo);
        const bool better = !best || (res.converged && !best->converged) ||
                            (res.converged == best->converged && res.value < best->value);
        if (!res.trace.empty() && better) best = std::move(res);
        if (best && best->converged) break;
    }
    if (!best) throw NumericalError("fit failed: the likelihood is not finite at any starting point");

    FittedModel fm;
    fm.spec = spec;
    fm.params = detail::from_internal(spec, best->x);
    fm.theta_extra = spec.gen.extra;
    fm.n = x.size();
    fm.presample = pre;
    fm.loglik_kernel = -best->value;
    fm.loglik_full = fm.loglik_kernel + model.full_constant(x);
    fm.n_free = k + spec.gen.extra.size();
    fm.criteria = information_criteria(fm.loglik_full, fm.n_free, fm.n);
    const auto f = model.filter(fm.params, x, pre);
    fm.psi_path = f.psi;
    fm.psi_next = std::exp(f.eta_next);
    fm.convergence.converged = best->converged;
    fm.convergence.iterations = best->iterations;
    fm.convergence.evaluations = best->evaluations;
    fm.convergence.restarts = std::min(attempts, opt.max_restarts);
    fm.convergence.gradient_max_norm = best->gradient.lpNorm<Eigen::Infinity>();
    fm.convergence.message = best->message;
    fm.convergence.loglik_trace.resize(best->trace.size());
    std::transform(best->trace.begin(), best->trace.end(), fm.convergence.loglik_trace.begin(),
                   [](double v) { return -v; });

    if (opt.compute_standard_errors) {
        auto grad = [&](const std::vector<double>& v) -> std::vector<double> {
            try {
                return model.loglik_and_score(AcdParams::from_vector(spec, v), x, pre).gradient;
            } catch (const std::exception&) {
                return std::vector<double>(v.size(), std::numeric_limits<double>::quiet_NaN());
            }
        };
        fm.hessian = numerical_hessian(grad, fm.params.to_vector());
        auto se = standard_errors_from_hessian(fm.hessian);
        fm.se = std::move(se.se);
        fm.se_diagnostic = std::move(se.diagnostic);
    }
    return fm;
}

inline FittedModel profile_fit(const AcdModelSpec& spec, std::span<const double> x, const FitOptions& opt = {}) {
    if (extra_count(spec.gen.family) == 0) return fit(spec, x, opt);
    const auto grid = opt.profile_grid.empty() ? default_profile_grid(spec.gen.family) : opt.profile_grid;
    std::vector<std::optional<FittedModel>> fits(grid.size());
    std::vector<ProfilePoint> points(grid.size());
    parallel_for(
        grid.size(),
        [&](std::size_t i) {
            points[i].extra = grid[i];
            try {
                AcdModelSpec s = spec;
                s.gen.extra = grid[i];
                FitOptions o = opt;
                o.seed = derive_seed(opt.seed, i);
                o.compute_standard_errors = false;
                fits[i] = fit(s, x, o);
                points[i].loglik_full = fits[i]->loglik_full;
                points[i].converged = fits[i]->convergence.converged;
            } catch (const std::exception& e) {
                points[i].error = e.what();
            }
        },
        opt.workers);

    // The full log-likelihood is used because the normalizing constant varies with the shape.
    std::optional<std::size_t> pick;
    for (bool need_converged : {true, false}) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (!fits[i] || (need_converged && !fits[i]->convergence.converged)) continue;
            if (!pick || fits[i]->loglik_full > fits[*pick]->loglik_full) pick = i;
        }
        if (pick) break;
    }
    if (!pick) {
        std::string msg = "profile fit failed at every grid point:";
        for (const auto& p : points) {
            msg += " [";
            for (std::size_t j = 0; j < p.extra.size(); ++j) msg += (j ? "," : "") + std::to_string(p.extra[j]);
            msg += "] " + p.error + ";";
        }
        throw NumericalError(msg);
    }
    FittedModel best;
    if (opt.compute_standard_errors) {
        AcdModelSpec s = spec;
        s.gen.extra = grid[*pick];
        FitOptions o = opt;
        o.seed = derive_seed(opt.seed, *pick);
        o.start = fits[*pick]->params;
        o.max_restarts = 0;
        FittedModel refit = fit(s, x, o);
        // Restarting at the optimum keeps the same iterate; guard against any drift.
        if (refit.loglik_full >= fits[*pick]->loglik_full) {
            best = std::move(refit);
        } else {
            best = std::move(*fits[*pick]);
            best.hessian = refit.hessian;
            best.se = refit.se;
            best.se_diagnostic = refit.se_diagnostic;
        }
    } else {
        best = std::move(*fits[*pick]);
    }
    best.profile = std::move(points);
    return best;
}

// Shapes are profiled unless the spec fixes them and no grid is given.
inline FittedModel fit_model(const AcdModelSpec& spec, std::span<const double> x, const FitOptions& opt = {}) {
    const bool profile = extra_count(spec.gen.family) > 0 && (spec.gen.extra.empty() || !opt.profile_grid.empty());
    return profile ? profile_fit(spec, x, opt) : fit(spec, x, opt);
}

struct QGridRow {
    double q = 0.0;
    std::optional<FittedModel> fit;
    std::string error;
};

struct QGridScan {
    std::vector<QGridRow> rows;
    std::size_t n_converged = 0;
    std::optional<InformationCriteria> averages;  // over converged fits
};

inline QGridScan q_grid_scan(const AcdModelSpec& spec_template, std::span<const double> x,
                             std::span<const double> q_values, const FitOptions& opt = {}) {
    if (q_values.empty()) throw InputError("q grid is empty");
    for (double q : q_values)
        if (!(q > 0.0 && q < 1.0)) throw InputError("q grid values must lie in (0,1)");
    QGridScan out;
    out.rows.resize(q_values.size());
    FitOptions inner = opt;
    inner.workers = 1;
    parallel_for(
        q_values.size(),
        [&](std::size_t i) {
            QGridRow& row = out.rows[i];
            row.q = q_values[i];
            try {
                AcdModelSpec s = spec_template;
                s.q = q_values[i];
                FitOptions o = inner;
                o.seed = derive_seed(opt.seed, i);
                row.fit = fit_model(s, x, o);
            } catch (const std::exception& e) {
                row.error = e.what();
            }
        },
        opt.workers);
    InformationCriteria sum;
    for (const auto& row : out.rows) {
        if (!row.fit || !row.fit->convergence.converged) continue;
        ++out.n_converged;
        sum.aic += row.fit->criteria.aic;
        sum.bic += row.fit->criteria.bic;
        sum.caic += row.fit->criteria.caic;
        sum.hqic += row.fit->criteria.hqic;
        sum.aicc += row.fit->criteria.aicc;
    }
    if (out.n_converged > 0) {
        const auto c = static_cast<double>(out.n_converged);
        out.averages = InformationCriteria{sum.aic / c, sum.bic / c, sum.caic / c, sum.hqic / c, sum.aicc / c};
    }
    return out;
}

}  // namespace qlsacd
