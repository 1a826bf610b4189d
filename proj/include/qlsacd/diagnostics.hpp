#pragma once

#include "qlsacd/acd.hpp"
#include "qlsacd/errors.hpp"
#include "qlsacd/estimate.hpp"
#include "qlsacd/parallel.hpp"
#include "qlsacd/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qlsacd {

// -log of the smallest positive normal double, roughly.
inline constexpr double kResidualCap = 690.0;

struct ResidualSummary {
    double mean = 0.0;
    double median = 0.0;
    double sd = 0.0;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;

    std::array<double, 5> as_array() const { return {mean, median, sd, skewness, excess_kurtosis}; }
};

inline constexpr std::array<const char*, 5> kSummaryNames{"mean", "median", "sd", "skewness", "excess_kurtosis"};

// EXP(1) values as the simulation study states them; the exact median is log 2.
inline constexpr std::array<double, 5> kExpTargets{1.0, 0.69, 1.0, 2.0, 6.0};

struct ResidualSeries {
    std::vector<double> r_gcs;
    std::vector<std::uint8_t> capped;  // 1 where the survival underflowed
    std::size_t n_capped = 0;
    ResidualSummary summary;
};

inline ResidualSummary summarize_residuals(std::span<const double> r) {
    const auto m = stats::moments(r);
    return ResidualSummary{m.mean, stats::median(r), m.sd, m.skewness, m.excess_kurtosis};
}

inline ResidualSeries gcs_residuals(const AcdModelSpec& spec, const AcdParams& params, std::span<const double> psi,
                                    std::span<const double> x) {
    if (psi.size() != x.size()) throw DomainError("residuals: psi path and durations differ in length");
    if (x.empty()) throw DomainError("residuals: empty series");
    const AcdModel model(spec);
    ResidualSeries out;
    out.r_gcs.resize(x.size());
    out.capped.assign(x.size(), 0);
    for (std::size_t t = 0; t < x.size(); ++t) {
        const double r = -model.conditional(psi[t], params.phi).log_survival(x[t]);
        if (!(r <= kResidualCap)) {
            out.r_gcs[t] = kResidualCap;
            out.capped[t] = 1;
            ++out.n_capped;
        } else {
            out.r_gcs[t] = std::max(0.0, r);
        }
    }
    out.summary = summarize_residuals(out.r_gcs);
    return out;
}

inline ResidualSeries gcs_residuals(const FittedModel& fm, std::span<const double> x) {
    return gcs_residuals(fm.spec, fm.params, fm.psi_path, x);
}

struct ReferenceTolerances {
    std::array<double, 5> tol{0.05, 0.05, 0.10, 0.4, 2.0};
    double ks_alpha = 0.01;
};

struct ReferenceItem {
    std::string name;
    double value = 0.0;
    double target = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct ReferenceCheck {
    std::array<ReferenceItem, 5> items;
    double ks_statistic = 0.0;
    double ks_pvalue = 0.0;
    bool ks_pass = false;
    bool summary_pass = false;
    bool pass = false;
};

inline ReferenceCheck residual_reference_check(const ResidualSummary& s, std::span<const double> r,
                                               const ReferenceTolerances& tol = {}) {
    if (r.empty()) throw DomainError("reference check: empty residual series");
    ReferenceCheck out;
    const auto v = s.as_array();
    out.summary_pass = true;
    for (std::size_t i = 0; i < 5; ++i) {
        auto& it = out.items[i];
        it.name = kSummaryNames[i];
        it.value = v[i];
        it.target = kExpTargets[i];
        it.tolerance = tol.tol[i];
        it.pass = std::fabs(v[i] - kExpTargets[i]) <= tol.tol[i];
        out.summary_pass = out.summary_pass && it.pass;
    }
    out.ks_statistic = stats::ks_statistic(r, [](double u) { return u > 0.0 ? -std::expm1(-u) : 0.0; });
    out.ks_pvalue = stats::ks_pvalue(out.ks_statistic, r.size());
    out.ks_pass = out.ks_pvalue >= tol.ks_alpha;
    out.pass = out.summary_pass && out.ks_pass;
    return out;
}

inline ReferenceCheck residual_reference_check(const ResidualSeries& res, const ReferenceTolerances& tol = {}) {
    return residual_reference_check(res.summary, res.r_gcs, tol);
}

// ---------------------------------------------------------------------------
// QQ envelope

struct EnvelopeOptions {
    std::size_t n_sim = 100;
    double level = 0.95;
    bool refit = false;  // fast mode reuses the fitted parameters
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    FitOptions fit_options{};  // refit mode only
};

struct Envelope {
    std::vector<double> theoretical;  // EXP(1) quantiles at (i - 0.5) / n
    std::vector<double> observed;     // sorted observed residuals
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<double> center;  // pointwise median across simulations
    std::size_t n_sim_requested = 0;
    std::size_t n_sim_effective = 0;
    std::vector<std::string> failures;
    double fraction_inside = 0.0;
};

// Pointwise bands over simulated residual order statistics. Each simulated path
// is filtered with the same presample convention as the observed series.
inline Envelope envelope(const FittedModel& fm, std::span<const double> x, const EnvelopeOptions& opt = {}) {
    if (opt.n_sim < 1) throw DomainError("envelope: n_sim must be at least 1");
    if (!(opt.level > 0.0 && opt.level < 1.0)) throw DomainError("envelope: level must lie in (0,1)");
    if (fm.psi_path.size() != x.size()) throw DomainError("envelope: fitted path and durations differ in length");
    const std::size_t n = x.size();
    const AcdModel model(fm.spec);

    Envelope env;
    env.n_sim_requested = opt.n_sim;
    env.observed = gcs_residuals(fm, x).r_gcs;
    std::sort(env.observed.begin(), env.observed.end());
    env.theoretical.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        env.theoretical[i] = -std::log1p(-(static_cast<double>(i) + 0.5) / static_cast<double>(n));

    std::vector<std::optional<std::vector<double>>> sims(opt.n_sim);
    std::vector<std::string> errors(opt.n_sim);
    parallel_for(
        opt.n_sim,
        [&](std::size_t k) {
            try {
                const auto path = model.simulate(fm.params, n, derive_seed(opt.seed, k));
                std::vector<double> r;
                if (opt.refit) {
                    FitOptions fo = opt.fit_options;
                    fo.seed = derive_seed(opt.seed, k, 1);
                    fo.compute_standard_errors = false;
                    fo.workers = 1;
                    const auto refit = fit(fm.spec, path.x, fo);
                    if (!refit.convergence.converged) throw NumericalError("refit did not converge");
                    r = gcs_residuals(refit, path.x).r_gcs;
                } else {
                    const auto f = model.filter(fm.params, path.x);
                    r = gcs_residuals(fm.spec, fm.params, f.psi, path.x).r_gcs;
                }
                std::sort(r.begin(), r.end());
                sims[k] = std::move(r);
            } catch (const std::exception& e) {
                errors[k] = e.what();
            }
        },
        opt.workers);

    std::vector<const std::vector<double>*> ok;
    for (std::size_t k = 0; k < opt.n_sim; ++k) {
        if (sims[k]) ok.push_back(&*sims[k]);
        else env.failures.push_back("simulation " + std::to_string(k) + ": " + errors[k]);
    }
    env.n_sim_effective = ok.size();
    if (ok.empty()) throw NumericalError("envelope: every simulation failed");

    env.lower.resize(n);
    env.upper.resize(n);
    env.center.resize(n);
    const double a = 0.5 * (1.0 - opt.level);
    std::vector<double> col(ok.size());
    std::size_t inside = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < ok.size(); ++k) col[k] = (*ok[k])[i];
        std::sort(col.begin(), col.end());
        env.lower[i] = stats::quantile_sorted(col, a);
        env.upper[i] = stats::quantile_sorted(col, 1.0 - a);
        env.center[i] = stats::quantile_sorted(col, 0.5);
        if (env.observed[i] >= env.lower[i] && env.observed[i] <= env.upper[i]) ++inside;
    }
    env.fraction_inside = static_cast<double>(inside) / static_cast<double>(n);
    return env;
}

// ---------------------------------------------------------------------------
// Monte Carlo study

inline std::vector<std::string> parameter_names(const AcdModelSpec& spec) {
    std::vector<std::string> names{"phi", "omega"};
    for (std::size_t j = 1; j <= spec.r; ++j) names.push_back("alpha" + std::to_string(j));
    for (std::size_t j = 1; j <= spec.s; ++j) names.push_back("beta" + std::to_string(j));
    return names;
}

struct Accuracy {
    double mean_estimate = 0.0;
    double rb = 0.0;    // |mean - truth| / |truth|; NaN when truth is zero
    double rmse = 0.0;  // sqrt(mean((est - truth)^2))
};

inline Accuracy accuracy(std::span<const double> estimates, double truth) {
    if (estimates.empty()) throw DomainError("accuracy: no estimates");
    Accuracy a;
    stats::CompensatedSum sum, sq;
    for (double e : estimates) {
        sum.add(e);
        sq.add((e - truth) * (e - truth));
    }
    const auto n = static_cast<double>(estimates.size());
    a.mean_estimate = sum.value() / n;
    a.rb = truth != 0.0 ? std::fabs((a.mean_estimate - truth) / truth) : std::numeric_limits<double>::quiet_NaN();
    a.rmse = std::sqrt(sq.value() / n);
    return a;
}

struct McConfig {
    AcdModelSpec spec;  // spec.q is replaced by each entry of q_values
    AcdParams true_params;
    std::vector<std::size_t> sample_sizes{200, 1000, 2000};
    std::size_t replications = 500;
    std::vector<double> q_values{0.05, 0.25, 0.5, 0.75, 0.95};
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    FitOptions fit_options{};
    bool keep_replications = true;

    static McConfig study_design() {
        McConfig c;
        c.spec.gen = GeneratorSpec{Family::LogNormal, {}};
        c.true_params = AcdParams{0.25, 0.20, {0.70}, {0.10}};
        return c;
    }

    void validate() const {
        spec.validate();
        true_params.validate(spec);
        if (replications < 1) throw InputError("Monte Carlo: replications must be at least 1");
        if (sample_sizes.empty()) throw InputError("Monte Carlo: no sample sizes");
        if (q_values.empty()) throw InputError("Monte Carlo: no q values");
        const std::size_t need = 10 * (spec.r + spec.s + 2);
        for (std::size_t n : sample_sizes)
            if (n < need) throw InputError("Monte Carlo: sample size " + std::to_string(n) + " is below 10(r+s+2) = " +
                                           std::to_string(need));
        for (double q : q_values)
            if (!(q > 0.0 && q < 1.0)) throw InputError("Monte Carlo: q values must lie in (0,1)");
    }
};

struct McReplication {
    double q = 0.0;
    std::size_t n = 0;
    std::size_t rep = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::vector<double> estimate;
    std::optional<std::vector<double>> se;
    ResidualSummary residuals;
    std::string error;
};

struct McParameterRow {
    std::string parameter;
    double truth = 0.0;
    Accuracy acc;
};

struct McCell {
    double q = 0.0;
    std::size_t n = 0;
    std::size_t n_success = 0;
    std::size_t n_failed = 0;
    std::vector<McParameterRow> parameters;
    ResidualSummary residual_means;  // average of the per-run summaries
};

struct McReport {
    std::vector<std::string> parameter_names;
    std::vector<double> truth;
    std::vector<McCell> cells;  // q-major, then n
    std::vector<McReplication> replications;
};

// Aggregates already computed replications. Only successful runs enter RB, RMSE
// and the residual averages; order of `reps` does not matter.
inline McCell aggregate_cell(double q, std::size_t n, std::span<const McReplication> reps,
                             const std::vector<std::string>& names, const std::vector<double>& truth) {
    McCell cell;
    cell.q = q;
    cell.n = n;
    std::vector<const McReplication*> good;
    for (const auto& r : reps) {
        if (r.q != q || r.n != n) continue;
        if (r.ok) good.push_back(&r);
        else ++cell.n_failed;
    }
    // Sorting by replication index makes floating-point sums independent of input order.
    std::sort(good.begin(), good.end(), [](auto* a, auto* b) { return a->rep < b->rep; });
    cell.n_success = good.size();
    if (good.empty()) return cell;
    std::vector<double> est(good.size());
    for (std::size_t k = 0; k < names.size(); ++k) {
        for (std::size_t i = 0; i < good.size(); ++i) est[i] = good[i]->estimate[k];
        cell.parameters.push_back(McParameterRow{names[k], truth[k], accuracy(est, truth[k])});
    }
    std::array<double, 5> acc{};
    for (const auto* r : good) {
        const auto v = r->residuals.as_array();
        for (std::size_t j = 0; j < 5; ++j) acc[j] += v[j];
    }
    const auto g = static_cast<double>(good.size());
    cell.residual_means = ResidualSummary{acc[0] / g, acc[1] / g, acc[2] / g, acc[3] / g, acc[4] / g};
    return cell;
}

inline McReplication run_mc_replication(const McConfig& cfg, std::size_t qi, std::size_t ni, std::size_t rep) {
    McReplication r;
    r.q = cfg.q_values[qi];
    r.n = cfg.sample_sizes[ni];
    r.rep = rep;
    r.seed = derive_seed(cfg.seed, qi, ni, rep);
    try {
        AcdModelSpec spec = cfg.spec;
        spec.q = r.q;
        const AcdModel model(spec);
        const auto path = model.simulate(cfg.true_params, r.n, r.seed);
        FitOptions fo = cfg.fit_options;
        fo.seed = derive_seed(r.seed, 1);
        fo.workers = 1;
        const auto fm = fit(spec, path.x, fo);
        if (!fm.convergence.converged) throw NumericalError("fit did not converge: " + fm.convergence.message);
        r.estimate = fm.params.to_vector();
        r.se = fm.se;
        r.residuals = gcs_residuals(fm, path.x).summary;
        r.ok = true;
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    return r;
}

inline McReport run_mc_study(const McConfig& cfg) {
    cfg.validate();
    const std::size_t nq = cfg.q_values.size(), nn = cfg.sample_sizes.size(), nr = cfg.replications;
    std::vector<McReplication> reps(nq * nn * nr);
    parallel_for(
        reps.size(),
        [&](std::size_t i) {
            const std::size_t rep = i % nr, ni = (i / nr) % nn, qi = i / (nr * nn);
            reps[i] = run_mc_replication(cfg, qi, ni, rep);
        },
        cfg.workers);

    McReport out;
    out.parameter_names = parameter_names(cfg.spec);
    out.truth = cfg.true_params.to_vector();
    for (std::size_t qi = 0; qi < nq; ++qi)
        for (std::size_t ni = 0; ni < nn; ++ni) {
            const std::span<const McReplication> block(reps.data() + (qi * nn + ni) * nr, nr);
            out.cells.push_back(
                aggregate_cell(cfg.q_values[qi], cfg.sample_sizes[ni], block, out.parameter_names, out.truth));
        }
    if (cfg.keep_replications) out.replications = std::move(reps);
    return out;
}

}  // namespace qlsacd
