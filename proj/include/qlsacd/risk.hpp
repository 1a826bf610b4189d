#pragma once

#include "qlsacd/acd.hpp"
#include "qlsacd/errors.hpp"
#include "qlsacd/estimate.hpp"
#include "qlsacd/ingest.hpp"
#include "qlsacd/parallel.hpp"
#include "qlsacd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace qlsacd {

// Psi_{q,n+1} from the history, started from the fitted model's presample.
inline double forecast_quantile(const AcdModelSpec& spec, const AcdParams& params, const Presample& pre,
                                std::span<const double> x_history) {
    if (x_history.size() < spec.lags())
        throw DomainError("forecast: history shorter than max(r,s) = " + std::to_string(spec.lags()));
    return std::exp(AcdModel(spec).filter(params, x_history, pre).eta_next);
}

inline double forecast_quantile(const FittedModel& fm, std::span<const double> x_history) {
    return forecast_quantile(fm.spec, fm.params, fm.presample, x_history);
}

enum class RollingMode { Fast, Refit };

inline RollingMode parse_rolling_mode(std::string_view s) {
    if (s == "fast") return RollingMode::Fast;
    if (s == "refit") return RollingMode::Refit;
    throw InputError("unknown mode '" + std::string(s) + "'; valid: fast, refit");
}

struct RollingOptions {
    RollingMode mode = RollingMode::Fast;
    FitOptions fit{};
    std::size_t workers = 1;  // refit mode only
};

struct IntervalStep {
    std::size_t index = 0;
    double x = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    bool inside = false;
    bool ok = false;
    std::string error;
};

struct PredictionIntervals {
    double q_lo = 0.0;
    double q_hi = 0.0;
    std::size_t window = 0;
    std::vector<IntervalStep> steps;
    std::size_t n_ok = 0;
    std::size_t n_inside = 0;
    double coverage = 0.0;  // over successful steps
};

namespace detail {

inline void check_window(std::size_t n, std::size_t window, const AcdModelSpec& spec) {
    if (window < 1) throw InputError("window must be at least 1");
    if (window > n) throw InputError("window " + std::to_string(window) + " exceeds the sample size " + std::to_string(n));
    const std::size_t need = 10 * (spec.r + spec.s + 2);
    if (n - window <= need)
        throw InputError("only " + std::to_string(n - window) + " observations precede the window; more than " +
                         std::to_string(need) + " are needed to fit");
}

// Conditional quantile path for all of x with parameters fitted on the pre-window sample.
inline std::vector<double> fast_quantile_path(const AcdModelSpec& spec, std::span<const double> x, std::size_t window,
                                              const FitOptions& fo) {
    const auto fm = fit_model(spec, x.first(x.size() - window), fo);
    if (!fm.convergence.converged) throw NumericalError("pre-window fit did not converge: " + fm.convergence.message);
    AcdModelSpec s = spec;
    s.gen.extra = fm.theta_extra;
    return AcdModel(s).filter(fm.params, x, fm.presample).psi;
}

}  // namespace detail

// One-step-ahead intervals [Psi_{q_lo,t}, Psi_{q_hi,t}] for the last `window`
// observations; each bound uses only observations before t.
inline PredictionIntervals prediction_interval(std::span<const double> x, const AcdModelSpec& spec_template, double q_lo,
                                               double q_hi, std::size_t window, const RollingOptions& opt = {}) {
    if (!(q_lo > 0.0 && q_hi < 1.0 && q_lo <= q_hi)) throw InputError("need 0 < q_lo <= q_hi < 1");
    const std::size_t n = x.size();
    detail::check_window(n, window, spec_template);
    PredictionIntervals out;
    out.q_lo = q_lo;
    out.q_hi = q_hi;
    out.window = window;
    out.steps.resize(window);
    const std::size_t first = n - window;
    AcdModelSpec lo_spec = spec_template, hi_spec = spec_template;
    lo_spec.q = q_lo;
    hi_spec.q = q_hi;

    if (opt.mode == RollingMode::Fast) {
        FitOptions fo = opt.fit;
        const auto lo = detail::fast_quantile_path(lo_spec, x, window, fo);
        fo.seed = derive_seed(opt.fit.seed, 1);
        const auto hi = q_hi == q_lo ? lo : detail::fast_quantile_path(hi_spec, x, window, fo);
        for (std::size_t k = 0; k < window; ++k) {
            auto& st = out.steps[k];
            st.index = first + k;
            st.x = x[st.index];
            st.lower = lo[st.index];
            st.upper = hi[st.index];
            st.ok = true;
        }
    } else {
        parallel_for(
            window,
            [&](std::size_t k) {
                auto& st = out.steps[k];
                st.index = first + k;
                st.x = x[st.index];
                try {
                    const auto past = x.first(st.index);
                    FitOptions fo = opt.fit;
                    fo.workers = 1;
                    fo.compute_standard_errors = false;
                    fo.seed = derive_seed(opt.fit.seed, st.index, 0);
                    const auto flo = fit_model(lo_spec, past, fo);
                    if (!flo.convergence.converged) throw NumericalError("fit at q_lo did not converge");
                    st.lower = flo.psi_next;
                    if (q_hi == q_lo) {
                        st.upper = st.lower;
                    } else {
                        fo.seed = derive_seed(opt.fit.seed, st.index, 1);
                        const auto fhi = fit_model(hi_spec, past, fo);
                        if (!fhi.convergence.converged) throw NumericalError("fit at q_hi did not converge");
                        st.upper = fhi.psi_next;
                    }
                    st.ok = true;
                } catch (const std::exception& e) {
                    st.error = e.what();
                }
            },
            opt.workers);
    }
    for (auto& st : out.steps) {
        if (!st.ok) continue;
        st.inside = st.x >= st.lower && st.x <= st.upper;
        ++out.n_ok;
        if (st.inside) ++out.n_inside;
    }
    out.coverage = out.n_ok ? static_cast<double>(out.n_inside) / static_cast<double>(out.n_ok) : 0.0;
    return out;
}

struct Volatility {
    double value = 0.0;
    bool saturated = false;  // hazard hit the survival-underflow clamp
};

// sigma^2 = h * (kappa / p)^2 / varpi.
inline double volatility_formula(double hazard, double kappa, double price, double seasonal) {
    const double k = kappa / price;
    return hazard * k * k / seasonal;
}

namespace detail {

inline Volatility plug_in_volatility(const AcdModel& model, double phi, double x, double psi, double kappa,
                                     double price, double seasonal) {
    const auto h = model.conditional(psi, phi).hazard(x);
    return Volatility{volatility_formula(h.value, kappa, price, seasonal), h.saturated};
}

// In-sample sigma^2 for durations [0, m): hazard at (x_t, Psi_t), price and
// seasonal factor of the previous event. The first duration has no previous
// factor and uses its own.
inline std::vector<Volatility> in_sample_volatility(const AcdModel& model, double phi, std::span<const double> psi,
                                                    const DurationSeries& d, std::size_t m) {
    std::vector<Volatility> out(m);
    for (std::size_t t = 0; t < m; ++t)
        out[t] = plug_in_volatility(model, phi, d.adjusted[t], psi[t], d.kappa, d.mid_prices[t],
                                    d.seasonal[t == 0 ? 0 : t - 1]);
    return out;
}

}  // namespace detail

inline void check_series_for(const FittedModel& fm, const DurationSeries& d) {
    d.validate();
    if (!(d.kappa > 0.0)) throw InputError("duration series carries no positive kappa");
    if (fm.psi_path.size() != d.size())
        throw DomainError("fitted path has " + std::to_string(fm.psi_path.size()) + " entries, series has " +
                          std::to_string(d.size()));
}

inline Volatility instantaneous_volatility(const FittedModel& fm, const DurationSeries& d, std::size_t t) {
    check_series_for(fm, d);
    if (t >= d.size()) throw DomainError("volatility index outside the sample");
    const AcdModel model(fm.spec);
    return detail::plug_in_volatility(model, fm.params.phi, d.adjusted[t], fm.psi_path[t], d.kappa, d.mid_prices[t],
                                      d.seasonal[t == 0 ? 0 : t - 1]);
}

inline std::vector<Volatility> instantaneous_volatility(const FittedModel& fm, const DurationSeries& d) {
    check_series_for(fm, d);
    return detail::in_sample_volatility(AcdModel(fm.spec), fm.params.phi, fm.psi_path, d, d.size());
}

// Hazard argument for the forecast step: as written (last duration under the last
// in-sample quantile) or under the forecast quantile.
enum class ForecastHazard { LastQuantile, NextQuantile };

struct IvarForecast {
    double psi_next = 0.0;
    double sigma2_next = 0.0;
    bool sigma2_saturated = false;
    double ivar = 0.0;
    double var_level = 0.0;
    double q_level = 0.0;
    double q_alpha = 0.0;        // empirical var_level-quantile of the standardized returns
    std::size_t n_used = 0;      // standardized returns entering q_alpha
    std::size_t n_excluded = 0;  // in-sample sigma^2 = 0
};

inline double ivar_threshold(double q_alpha, double sigma2_next) { return q_alpha * std::sqrt(sigma2_next); }

namespace detail {

inline double standardized_quantile(std::span<const Volatility> vol, std::span<const double> returns, double level,
                                    std::size_t& used, std::size_t& excluded) {
    std::vector<double> eps;
    eps.reserve(vol.size());
    excluded = 0;
    for (std::size_t t = 0; t < vol.size(); ++t) {
        if (vol[t].value > 0.0 && std::isfinite(vol[t].value)) eps.push_back(returns[t] / std::sqrt(vol[t].value));
        else ++excluded;
    }
    used = eps.size();
    if (eps.empty()) throw NumericalError("every in-sample volatility is zero");
    std::sort(eps.begin(), eps.end());
    return stats::quantile_sorted(eps, level);
}

// Forecast for the return of duration m from durations [0, m).
inline IvarForecast ivar_step(const AcdModel& model, double phi, std::span<const double> psi, double psi_next,
                              std::span<const Volatility> vol, const DurationSeries& d, std::size_t m, double var_level,
                              ForecastHazard which) {
    IvarForecast f;
    f.var_level = var_level;
    f.q_level = model.spec().q;
    f.psi_next = psi_next;
    const std::size_t last = m - 1;
    const auto v = plug_in_volatility(model, phi, d.adjusted[last],
                                      which == ForecastHazard::LastQuantile ? psi[last] : psi_next, d.kappa,
                                      d.mid_prices[m], d.seasonal[last]);
    f.sigma2_next = v.value;
    f.sigma2_saturated = v.saturated;
    f.q_alpha = standardized_quantile(vol.first(m), std::span<const double>(d.returns).first(m), var_level, f.n_used,
                                      f.n_excluded);
    f.ivar = ivar_threshold(f.q_alpha, f.sigma2_next);
    return f;
}

inline void check_var_level(double var_level) {
    if (!(var_level > 0.0 && var_level < 0.5)) throw InputError("var_level must lie in (0, 0.5)");
}

}  // namespace detail

inline IvarForecast ivar_forecast(const FittedModel& fm, const DurationSeries& d, double var_level,
                                  ForecastHazard which = ForecastHazard::LastQuantile) {
    detail::check_var_level(var_level);
    check_series_for(fm, d);
    const AcdModel model(fm.spec);
    const auto vol = detail::in_sample_volatility(model, fm.params.phi, fm.psi_path, d, d.size());
    return detail::ivar_step(model, fm.params.phi, fm.psi_path, fm.psi_next, vol, d, d.size(), var_level, which);
}

inline double hit_rate(std::span<const double> returns, std::span<const double> ivar) {
    if (returns.size() != ivar.size())
        throw DomainError("hit rate: " + std::to_string(returns.size()) + " returns but " + std::to_string(ivar.size()) +
                          " thresholds");
    if (returns.empty()) throw DomainError("hit rate: empty series");
    std::size_t hits = 0;
    for (std::size_t t = 0; t < returns.size(); ++t)
        if (returns[t] < ivar[t]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(returns.size());
}

struct IvarStep {
    std::size_t index = 0;
    double ret = 0.0;
    double ivar = 0.0;
    double psi = 0.0;
    bool hit = false;
    bool ok = false;
    std::string error;
};

struct IvarBacktest {
    double var_level = 0.0;
    std::size_t window = 0;
    std::vector<IvarStep> steps;
    std::size_t n_ok = 0;
    std::size_t hits = 0;
    double hit_rate = 0.0;
    std::size_t band_lo = 0;  // central 95% binomial acceptance region for the hit count
    std::size_t band_hi = 0;
    bool calibrated = false;
};

// Rolling one-step IVaR over the last `window` durations of the series.
inline IvarBacktest ivar_backtest(const DurationSeries& d, const AcdModelSpec& spec, double var_level,
                                  std::size_t window, const RollingOptions& opt = {},
                                  ForecastHazard which = ForecastHazard::LastQuantile) {
    detail::check_var_level(var_level);
    d.validate();
    if (!(d.kappa > 0.0)) throw InputError("duration series carries no positive kappa");
    const std::size_t n = d.size();
    detail::check_window(n, window, spec);
    IvarBacktest out;
    out.var_level = var_level;
    out.window = window;
    out.steps.resize(window);
    const std::size_t first = n - window;

    if (opt.mode == RollingMode::Fast) {
        const std::span<const double> x(d.adjusted);
        const auto fm = fit_model(spec, x.first(first), opt.fit);
        if (!fm.convergence.converged) throw NumericalError("pre-window fit did not converge: " + fm.convergence.message);
        AcdModelSpec s = spec;
        s.gen.extra = fm.theta_extra;
        const AcdModel model(s);
        const auto f = model.filter(fm.params, x, fm.presample);
        const auto vol = detail::in_sample_volatility(model, fm.params.phi, f.psi, d, n);
        for (std::size_t k = 0; k < window; ++k) {
            auto& st = out.steps[k];
            st.index = first + k;
            st.ret = d.returns[st.index];
            st.psi = f.psi[st.index];
            try {
                st.ivar = detail::ivar_step(model, fm.params.phi, f.psi, f.psi[st.index], vol, d, st.index, var_level,
                                            which)
                              .ivar;
                st.ok = true;
            } catch (const std::exception& e) {
                st.error = e.what();
            }
        }
    } else {
        parallel_for(
            window,
            [&](std::size_t k) {
                auto& st = out.steps[k];
                st.index = first + k;
                st.ret = d.returns[st.index];
                try {
                    FitOptions fo = opt.fit;
                    fo.workers = 1;
                    fo.compute_standard_errors = false;
                    fo.seed = derive_seed(opt.fit.seed, st.index);
                    const auto fm = fit_model(spec, std::span<const double>(d.adjusted).first(st.index), fo);
                    if (!fm.convergence.converged) throw NumericalError("fit did not converge");
                    const AcdModel model(fm.spec);
                    const auto vol = detail::in_sample_volatility(model, fm.params.phi, fm.psi_path, d, st.index);
                    st.psi = fm.psi_next;
                    st.ivar = detail::ivar_step(model, fm.params.phi, fm.psi_path, fm.psi_next, vol, d, st.index,
                                                var_level, which)
                                  .ivar;
                    st.ok = true;
                } catch (const std::exception& e) {
                    st.error = e.what();
                }
            },
            opt.workers);
    }
    std::vector<double> r, v;
    for (auto& st : out.steps) {
        if (!st.ok) continue;
        st.hit = st.ret < st.ivar;
        r.push_back(st.ret);
        v.push_back(st.ivar);
    }
    out.n_ok = r.size();
    if (out.n_ok == 0) throw NumericalError("every backtest step failed");
    out.hit_rate = hit_rate(r, v);
    out.hits = static_cast<std::size_t>(std::count_if(out.steps.begin(), out.steps.end(), [](const IvarStep& s) { return s.ok && s.hit; }));
    std::tie(out.band_lo, out.band_hi) = stats::binomial_acceptance(out.n_ok, var_level, 0.95);
    out.calibrated = out.hits >= out.band_lo && out.hits <= out.band_hi;
    return out;
}

}  // namespace qlsacd
