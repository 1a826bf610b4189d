#pragma once

#include "qlsacd/errors.hpp"
#include "qlsacd/lsdist.hpp"
#include "qlsacd/stats.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace qlsacd {

enum class Link { Log };

struct AcdModelSpec {
    std::size_t r = 1;
    std::size_t s = 1;
    double q = 0.5;
    Link link = Link::Log;
    GeneratorSpec gen{};

    void validate() const {
        if (r + s < 1) throw DomainError("model order: r + s must be at least 1");
        if (!(q > 0.0 && q < 1.0)) throw DomainError("quantile level q must lie in (0,1)");
        gen.validate();
    }
    std::size_t lags() const { return std::max(r, s); }
    // Dynamic parameters (phi, omega, alpha, beta); shape parameters excluded.
    std::size_t n_params() const { return 2 + r + s; }
};

struct AcdParams {
    double phi = 1.0;
    double omega = 0.0;
    std::vector<double> alpha;
    std::vector<double> beta;

    void validate(const AcdModelSpec& spec) const {
        if (!(phi > 0.0) || !std::isfinite(phi)) throw DomainError("phi must be positive and finite");
        if (!std::isfinite(omega)) throw DomainError("omega must be finite");
        if (alpha.size() != spec.r) throw DomainError("alpha has " + std::to_string(alpha.size()) +
                                                      " entries, model order r=" + std::to_string(spec.r));
        if (beta.size() != spec.s) throw DomainError("beta has " + std::to_string(beta.size()) +
                                                     " entries, model order s=" + std::to_string(spec.s));
        for (double a : alpha)
            if (!std::isfinite(a)) throw DomainError("alpha must be finite");
        for (double b : beta)
            if (!std::isfinite(b)) throw DomainError("beta must be finite");
    }

    // Heuristic only; the hybrid recursion has no known stationarity region.
    bool stationarity_warning() const {
        double s = 0.0;
        for (double a : alpha) s += std::fabs(a);
        return s >= 1.0;
    }

    // Ordering (phi, omega, alpha..., beta...).
    std::vector<double> to_vector() const {
        std::vector<double> v{phi, omega};
        v.insert(v.end(), alpha.begin(), alpha.end());
        v.insert(v.end(), beta.begin(), beta.end());
        return v;
    }

    static AcdParams from_vector(const AcdModelSpec& spec, std::span<const double> v) {
        if (v.size() != spec.n_params()) throw DomainError("parameter vector has the wrong length");
        AcdParams p;
        p.phi = v[0];
        p.omega = v[1];
        p.alpha.assign(v.begin() + 2, v.begin() + 2 + static_cast<std::ptrdiff_t>(spec.r));
        p.beta.assign(v.begin() + 2 + static_cast<std::ptrdiff_t>(spec.r), v.end());
        return p;
    }

    bool operator==(const AcdParams&) const = default;
};

// Values for t <= 0, most recent last. Both vectors have length max(r, s).
struct Presample {
    std::vector<double> x;
    std::vector<double> psi;
};

struct FilterOutput {
    std::vector<double> psi;
    std::vector<double> z;
    std::vector<double> eta;
    double eta_next = 0.0;  // log Psi_{n+1}, measurable w.r.t. the sample
};

struct SimulatedPath {
    std::vector<double> x;
    std::vector<double> psi;
    Presample presample;  // state right before the first retained observation
};

struct LoglikGradient {
    double loglik = 0.0;
    std::vector<double> gradient;  // (phi, omega, alpha, beta)
};

inline constexpr double kEtaLimit = 700.0;
inline constexpr std::size_t kSimulationBurnIn = 500;

// Mean of x for the lagged durations and the type-7 empirical q-quantile for Psi.
inline Presample default_presample(const AcdModelSpec& spec, std::span<const double> x) {
    if (x.empty()) throw DomainError("empty duration series");
    const std::size_t m = spec.lags();
    return Presample{std::vector<double>(m, stats::mean(x)), std::vector<double>(m, stats::quantile(x, spec.q))};
}

class AcdModel {
public:
    explicit AcdModel(AcdModelSpec spec)
        : spec_((spec.validate(), std::move(spec))),
          law_(std::make_shared<const StandardSymmetric>(spec_.gen)),
          z_q_(law_->quantile(spec_.q)) {}

    const AcdModelSpec& spec() const { return spec_; }
    const StandardSymmetric& law() const { return *law_; }
    std::shared_ptr<const StandardSymmetric> law_ptr() const { return law_; }
    double z_q() const { return z_q_; }

    QlsDistribution conditional(double psi, double phi) const { return QlsDistribution(spec_.q, psi, phi, law_); }

    FilterOutput filter(const AcdParams& p, std::span<const double> x) const {
        return filter(p, x, default_presample(spec_, x));
    }

    FilterOutput filter(const AcdParams& p, std::span<const double> x, const Presample& pre) const {
        check_inputs(p, x, pre);
        FilterOutput out;
        const std::size_t n = x.size();
        out.eta.resize(n);
        out.psi.resize(n);
        out.z.resize(n);
        std::vector<double> ratio(n);
        const double sp = std::sqrt(p.phi);
        for (std::size_t t = 0; t <= n; ++t) {
            const double eta = step_eta(p, t, pre, out.eta, ratio);
            if (t == n) {
                out.eta_next = eta;
                break;
            }
            out.eta[t] = eta;
            out.psi[t] = std::exp(eta);
            ratio[t] = x[t] / out.psi[t];
            out.z[t] = (std::log(x[t]) - eta) / sp + z_q_;
        }
        return out;
    }

    // Kernel log-likelihood sum log g(z_t^2) - (n/2) log phi; -inf when some g(z_t^2) = 0.
    double loglik(const AcdParams& p, std::span<const double> x) const {
        return loglik(p, x, default_presample(spec_, x));
    }
    double loglik(const AcdParams& p, std::span<const double> x, const Presample& pre) const {
        return kernel_sum(filter(p, x, pre), p.phi);
    }

    // Adds n log delta - sum log x so that values compare across families.
    double loglik_full(const AcdParams& p, std::span<const double> x) const {
        return loglik_full(p, x, default_presample(spec_, x));
    }
    double loglik_full(const AcdParams& p, std::span<const double> x, const Presample& pre) const {
        return loglik(p, x, pre) + full_constant(x);
    }

    double full_constant(std::span<const double> x) const {
        double slog = 0.0;
        for (double v : x) slog += std::log(v);
        return static_cast<double>(x.size()) * law_->log_delta() - slog;
    }

    std::vector<double> score(const AcdParams& p, std::span<const double> x) const {
        return loglik_and_score(p, x, default_presample(spec_, x)).gradient;
    }
    std::vector<double> score(const AcdParams& p, std::span<const double> x, const Presample& pre) const {
        return loglik_and_score(p, x, pre).gradient;
    }

    // Kernel log-likelihood and its analytic gradient from one pass of the
    // derivative recursions on eta = log Psi:
    //   d eta_t = e_k + sum_j alpha_j d eta_{t-j} - sum_j beta_j (x/Psi)_{t-j} d eta_{t-j},
    // where e_k is 1 for omega, eta_{t-l} for alpha_l and (x/Psi)_{t-m} for beta_m.
    LoglikGradient loglik_and_score(const AcdParams& p, std::span<const double> x, const Presample& pre) const {
        const FilterOutput f = filter(p, x, pre);
        const std::size_t n = x.size(), r = spec_.r, s = spec_.s, k = spec_.n_params() - 1;
        LoglikGradient out;
        out.loglik = kernel_sum(f, p.phi);
        out.gradient.assign(spec_.n_params(), 0.0);
        if (!std::isfinite(out.loglik)) return out;

        std::vector<double> d(n * k, 0.0);  // d eta_t / d(omega, alpha, beta), row-major
        auto eta_at = [&](std::size_t t, std::size_t j) {
            return t >= j ? f.eta[t - j] : std::log(pre.psi[pre.psi.size() - (j - t)]);
        };
        auto ratio_at = [&](std::size_t t, std::size_t j) {
            return t >= j ? x[t - j] / f.psi[t - j] : pre.x[pre.x.size() - (j - t)] / pre.psi[pre.psi.size() - (j - t)];
        };
        const double sp = std::sqrt(p.phi);
        double g_phi = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            double* dt = &d[t * k];
            dt[0] = 1.0;
            for (std::size_t l = 1; l <= r; ++l) dt[l] = eta_at(t, l);
            for (std::size_t m = 1; m <= s; ++m) dt[r + m] = ratio_at(t, m);
            for (std::size_t j = 1; j <= r && j <= t; ++j) {
                const double* dp = &d[(t - j) * k];
                for (std::size_t c = 0; c < k; ++c) dt[c] += p.alpha[j - 1] * dp[c];
            }
            for (std::size_t j = 1; j <= s && j <= t; ++j) {
                const double* dp = &d[(t - j) * k];
                const double w = p.beta[j - 1] * x[t - j] / f.psi[t - j];
                for (std::size_t c = 0; c < k; ++c) dt[c] -= w * dp[c];
            }
            const double zt = f.z[t];
            const double zv = kernel::zv(spec_.gen, zt);
            g_phi += zv * (zt - z_q_);
            for (std::size_t c = 0; c < k; ++c) out.gradient[1 + c] += dt[c] * zv;
        }
        out.gradient[0] = g_phi / (2.0 * p.phi) - static_cast<double>(n) / (2.0 * p.phi);
        for (std::size_t c = 0; c < k; ++c) out.gradient[1 + c] /= sp;
        return out;
    }

    // Burn-in of 500 draws from Psi = exp(omega / (1 - sum alpha)) (exp(omega) when
    // sum alpha >= 1), with the lagged durations set to that Psi.
    SimulatedPath simulate(const AcdParams& p, std::size_t n, std::uint64_t seed) const {
        if (n < 1) throw DomainError("simulate: n must be at least 1");
        p.validate(spec_);
        const double sa = std::accumulate(p.alpha.begin(), p.alpha.end(), 0.0);
        const double psi0 = std::exp(sa < 1.0 ? p.omega / (1.0 - sa) : p.omega);
        if (!std::isfinite(psi0) || !(psi0 > 0.0)) throw DivergenceError(0, sa < 1.0 ? p.omega / (1.0 - sa) : p.omega);
        const std::size_t m = spec_.lags();
        const std::size_t total = n + kSimulationBurnIn;

        std::mt19937_64 rng(seed);
        const Presample start{std::vector<double>(m, psi0), std::vector<double>(m, psi0)};
        std::vector<double> x(total), eta(total), ratio(total);
        const double sp = std::sqrt(p.phi);
        for (std::size_t t = 0; t < total; ++t) {
            eta[t] = step_eta(p, t, start, eta, ratio);
            const double psi = std::exp(eta[t]);
            x[t] = psi * std::exp(sp * (law_->sample(rng) - z_q_));
            if (!(x[t] > 0.0) || !std::isfinite(x[t])) throw DivergenceError(t, eta[t]);
            ratio[t] = x[t] / psi;
        }
        SimulatedPath out;
        out.x.assign(x.begin() + kSimulationBurnIn, x.end());
        out.psi.resize(n);
        for (std::size_t t = 0; t < n; ++t) out.psi[t] = std::exp(eta[kSimulationBurnIn + t]);
        for (std::size_t j = m; j >= 1; --j) {
            const std::size_t t = kSimulationBurnIn - j;
            out.presample.x.push_back(x[t]);
            out.presample.psi.push_back(std::exp(eta[t]));
        }
        return out;
    }

private:
    void check_inputs(const AcdParams& p, std::span<const double> x, const Presample& pre) const {
        p.validate(spec_);
        if (x.empty()) throw DomainError("empty duration series");
        for (std::size_t t = 0; t < x.size(); ++t)
            if (!(x[t] > 0.0) || !std::isfinite(x[t]))
                throw DomainError("durations must be positive and finite (index " + std::to_string(t) + ")");
        const std::size_t m = spec_.lags();
        if (pre.x.size() != m || pre.psi.size() != m)
            throw DomainError("presample must hold max(r,s) = " + std::to_string(m) + " values");
        for (std::size_t j = 0; j < m; ++j)
            if (!(pre.x[j] > 0.0) || !(pre.psi[j] > 0.0)) throw DomainError("presample values must be positive");
    }

    // eta_t from eta[0..t-1], ratio[0..t-1] and the presample.
    double step_eta(const AcdParams& p, std::size_t t, const Presample& pre, const std::vector<double>& eta,
                    const std::vector<double>& ratio) const {
        double e = p.omega;
        for (std::size_t j = 1; j <= spec_.r; ++j)
            e += p.alpha[j - 1] * (t >= j ? eta[t - j] : std::log(pre.psi[pre.psi.size() - (j - t)]));
        for (std::size_t j = 1; j <= spec_.s; ++j)
            e += p.beta[j - 1] *
                 (t >= j ? ratio[t - j] : pre.x[pre.x.size() - (j - t)] / pre.psi[pre.psi.size() - (j - t)]);
        if (!(std::fabs(e) <= kEtaLimit)) throw DivergenceError(t, e);
        return e;
    }

    double kernel_sum(const FilterOutput& f, double phi) const {
        // Compensated so that rounding noise stays far below likelihood differences
        // the optimizer must resolve near the maximum.
        stats::CompensatedSum sum;
        for (double z : f.z) sum.add(kernel::log_g(spec_.gen, z * z));
        sum.add(-0.5 * static_cast<double>(f.z.size()) * std::log(phi));
        return sum.value();
    }

    AcdModelSpec spec_;
    std::shared_ptr<const StandardSymmetric> law_;
    double z_q_;
};

inline FilterOutput filter(const AcdModelSpec& spec, const AcdParams& p, std::span<const double> x) {
    return AcdModel(spec).filter(p, x);
}

inline double loglik(const AcdModelSpec& spec, const AcdParams& p, std::span<const double> x) {
    return AcdModel(spec).loglik(p, x);
}

inline double loglik_full(const AcdModelSpec& spec, const AcdParams& p, std::span<const double> x) {
    return AcdModel(spec).loglik_full(p, x);
}

inline std::vector<double> score(const AcdModelSpec& spec, const AcdParams& p, std::span<const double> x) {
    return AcdModel(spec).score(p, x);
}

inline SimulatedPath simulate(const AcdModelSpec& spec, const AcdParams& p, std::size_t n, std::uint64_t seed) {
    return AcdModel(spec).simulate(p, n, seed);
}

}  // namespace qlsacd
