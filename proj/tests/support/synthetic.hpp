#pragma once

#include "qlsacd/ingest.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace qlsacd::testing {

// Multiplicative U-shape over a 09:30-16:00 session, in hours after midnight.
inline double u_shape(double hours) {
    const double c = (hours - 12.75) / 3.25;
    return 1.0 + 1.5 * c * c;
}

struct PlantedDurations {
    DurationSeries series;
    std::vector<double> truth;  // planted factor at each duration's start
};

// Exponential durations scaled by u_shape at their start, laid out over
// consecutive sessions; prices follow a random walk in steps of kappa.
inline PlantedDurations planted_diurnal(std::size_t n, std::uint64_t seed, bool seasonal = true) {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> ex(1.0 / 8.0);
    std::bernoulli_distribution up(0.5);
    const double open = 9.5 * 3600.0, close = 16.0 * 3600.0;
    PlantedDurations out;
    auto& d = out.series;
    d.kappa = 0.01;
    double day = 0.0, tod = open, price = 100.0;
    auto push_event = [&] {
        d.event_labels.push_back(std::to_string(d.event_labels.size()));
        d.event_times.push_back(day * 86400.0 + tod);
        d.event_time_of_day.push_back(tod);
        d.mid_prices.push_back(price);
    };
    push_event();
    while (d.raw.size() < n) {
        const double w = seasonal ? u_shape(tod / 3600.0) : 1.0;
        const double x = w * ex(rng);
        if (tod + x >= close) {
            // The overnight gap is not a duration; restart the clock next session.
            day += 1.0;
            tod = open;
            d.event_times.back() = day * 86400.0 + tod;
            d.event_time_of_day.back() = tod;
            continue;
        }
        out.truth.push_back(w);
        tod += x;
        const double next = price + (up(rng) ? d.kappa : -d.kappa);
        d.raw.push_back(x);
        d.returns.push_back(std::log(next) - std::log(price));
        price = next;
        push_event();
    }
    d.seasonal.assign(n, 1.0);
    d.adjusted = d.raw;
    return out;
}

// Durations as given, seasonal factor 1, returns i.i.d. N(0, sd^2) independent
// of the durations, prices compounding the returns.
inline DurationSeries series_with_iid_returns(std::span<const double> x, std::uint64_t seed, double sd = 1e-4,
                                              double kappa = 0.01) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, sd);
    DurationSeries d;
    d.kappa = kappa;
    double time = 0.0, price = 100.0;
    d.event_labels.push_back("0");
    d.event_times.push_back(time);
    d.event_time_of_day.push_back(0.0);
    d.mid_prices.push_back(price);
    for (std::size_t t = 0; t < x.size(); ++t) {
        const double r = nd(rng);
        time += x[t];
        price *= std::exp(r);
        d.event_labels.push_back(std::to_string(t + 1));
        d.event_times.push_back(time);
        d.event_time_of_day.push_back(0.0);
        d.mid_prices.push_back(price);
        d.raw.push_back(x[t]);
        d.returns.push_back(r);
    }
    d.seasonal.assign(x.size(), 1.0);
    d.adjusted.assign(x.begin(), x.end());
    return d;
}

inline TickSeries random_walk_ticks(std::size_t n, std::uint64_t seed, double step = 0.005) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, step);
    std::exponential_distribution<double> gap(1.0);
    TickSeries t;
    double time = 9.5 * 3600.0, mid = 50.0;
    for (std::size_t i = 0; i < n; ++i) {
        time += gap(rng);
        mid += nd(rng);
        Timestamp ts;
        ts.time_of_day = time;
        t.push(std::to_string(i), ts, 0, mid - 0.005, mid + 0.005);
    }
    return t;
}

inline double correlation(std::span<const double> a, std::span<const double> b) {
    const double ma = stats::mean(a), mb = stats::mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace qlsacd::testing
