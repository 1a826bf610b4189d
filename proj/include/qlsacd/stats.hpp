#pragma once

#include "qlsacd/errors.hpp"

#include <boost/math/distributions/binomial.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

namespace qlsacd::stats {

// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        comp_ += std::fabs(sum_) >= std::fabs(v) ? (sum_ - t) + v : (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double mean(std::span<const double> x) {
    if (x.empty()) throw DomainError("mean of an empty sample");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Unbiased (n-1) sample variance; zero for a single observation.
inline double variance(std::span<const double> x) {
    const double m = mean(x);
    if (x.size() < 2) return 0.0;
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

// Linear-interpolation quantile (Hyndman-Fan type 7) of an already sorted sample.
inline double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw DomainError("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile level outside [0,1]");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::span<const double> x, double p) {
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    return quantile_sorted(s, p);
}

inline double median(std::span<const double> x) { return quantile(x, 0.5); }

struct Moments {
    double mean = 0.0;
    double sd = 0.0;               // n-1 denominator
    double skewness = 0.0;         // m3 / m2^{3/2}
    double excess_kurtosis = 0.0;  // m4 / m2^2 - 3
};

// Skewness and kurtosis use plain central-moment estimators without
// small-sample correction; a zero-variance sample reports zero for both.
inline Moments moments(std::span<const double> x) {
    Moments out;
    out.mean = mean(x);
    const auto n = static_cast<double>(x.size());
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - out.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    out.sd = x.size() > 1 ? std::sqrt(m2 / (n - 1.0)) : 0.0;
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if (m2 > 0.0) {
        out.skewness = m3 / std::pow(m2, 1.5);
        out.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    }
    return out;
}

// Two-sided one-sample Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_statistic(std::span<const double> x, const std::function<double(double)>& cdf) {
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    const auto n = static_cast<double>(s.size());
    double d = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double f = cdf(s[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

// Asymptotic Kolmogorov tail probability with Stephens' finite-n correction.
inline double ks_pvalue(double d, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    if (lambda < 1e-3) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

// Asymptotic 1% critical value of the KS statistic.
inline double ks_critical_1pct(std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    return 1.6276 / (sn + 0.12 + 0.11 / sn);
}

// Central acceptance region [lo, hi] for a Binomial(n, p) count at the given
// confidence: P(X < lo) <= (1-conf)/2 and P(X > hi) <= (1-conf)/2.
inline std::pair<std::size_t, std::size_t> binomial_acceptance(std::size_t n, double p,
                                                               double conf = 0.95) {
    const boost::math::binomial_distribution<double> dist(static_cast<double>(n), p);
    const double tail = 0.5 * (1.0 - conf);
    std::size_t lo = 0;
    while (lo < n && boost::math::cdf(dist, static_cast<double>(lo)) <= tail) ++lo;
    std::size_t hi = n;
    while (hi > 0 && boost::math::cdf(boost::math::complement(dist, static_cast<double>(hi - 1))) <= tail)
        --hi;
    return {lo, hi};
}

}  // namespace qlsacd::stats
