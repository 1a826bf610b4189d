#pragma once

#include "qlsacd/csv.hpp"
#include "qlsacd/errors.hpp"
#include "qlsacd/stats.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qlsacd {

struct Timestamp {
    std::int64_t day = 0;      // days since 1970-01-01 of the wall-clock date
    double time_of_day = 0.0;  // wall-clock seconds after midnight
    int offset_seconds = 0;    // UTC offset written in the stamp (0 when absent)
};

// ISO-8601 "YYYY-MM-DDTHH:MM:SS[.fff][Z|+HH:MM|-HH:MM]"; a space may replace the T.
inline Timestamp parse_timestamp(std::string_view s) {
    auto fail = [&]() -> Timestamp { throw InputError("malformed timestamp '" + std::string(s) + "'"); };
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    auto digits = [&](std::size_t pos, std::size_t len, int& out) {
        if (pos + len > s.size()) return false;
        out = 0;
        for (std::size_t i = pos; i < pos + len; ++i) {
            if (s[i] < '0' || s[i] > '9') return false;
            out = out * 10 + (s[i] - '0');
        }
        return true;
    };
    int y, mo, d, h, mi, se;
    if (s.size() < 19 || !digits(0, 4, y) || s[4] != '-' || !digits(5, 2, mo) || s[7] != '-' || !digits(8, 2, d) ||
        (s[10] != 'T' && s[10] != ' ') || !digits(11, 2, h) || s[13] != ':' || !digits(14, 2, mi) || s[16] != ':' ||
        !digits(17, 2, se))
        return fail();
    std::size_t pos = 19;
    double frac = 0.0;
    if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
        double scale = 0.1;
        std::size_t k = pos + 1;
        for (; k < s.size() && s[k] >= '0' && s[k] <= '9'; ++k, scale /= 10.0) frac += (s[k] - '0') * scale;
        if (k == pos + 1) return fail();
        pos = k;
    }
    int offset = 0;
    if (pos < s.size()) {
        if (s[pos] == 'Z' && pos + 1 == s.size()) {
            pos += 1;
        } else if ((s[pos] == '+' || s[pos] == '-') && pos + 6 == s.size() && s[pos + 3] == ':') {
            int oh, om;
            if (!digits(pos + 1, 2, oh) || !digits(pos + 4, 2, om)) return fail();
            offset = (s[pos] == '-' ? -1 : 1) * (oh * 3600 + om * 60);
            pos += 6;
        } else {
            return fail();
        }
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || se > 60) return fail();
    Timestamp t;
    t.day = std::chrono::sys_days{ymd}.time_since_epoch().count();
    t.time_of_day = h * 3600.0 + mi * 60.0 + se + frac;
    t.offset_seconds = offset;
    return t;
}

struct TickSeries {
    std::vector<std::string> labels;  // timestamps as written in the input
    std::vector<double> times;        // seconds since midnight (UTC) of the first tick's day
    std::vector<double> time_of_day;  // wall-clock seconds after midnight
    std::vector<double> bid;
    std::vector<double> ask;

    std::size_t size() const { return times.size(); }

    void push(std::string label, const Timestamp& ts, std::int64_t origin_day, double b, double a) {
        labels.push_back(std::move(label));
        times.push_back(static_cast<double>(ts.day - origin_day) * 86400.0 + ts.time_of_day - ts.offset_seconds);
        time_of_day.push_back(ts.time_of_day);
        bid.push_back(b);
        ask.push_back(a);
    }

    void validate() const {
        const std::size_t n = times.size();
        if (labels.size() != n || time_of_day.size() != n || bid.size() != n || ask.size() != n)
            throw InputError("tick series columns differ in length");
        for (std::size_t i = 0; i < n; ++i) {
            if (!(bid[i] > 0.0) || !(ask[i] > 0.0) || !std::isfinite(bid[i]) || !std::isfinite(ask[i]))
                throw InputError("tick " + std::to_string(i) + ": bid and ask must be positive");
            if (ask[i] < bid[i]) throw InputError("tick " + std::to_string(i) + ": ask below bid");
            if (i > 0 && times[i] < times[i - 1]) throw InputError("tick " + std::to_string(i) + ": timestamps not sorted");
        }
    }
};

struct TickReadResult {
    TickSeries ticks;
    std::size_t skipped = 0;
    std::vector<std::string> problems;  // "line N: reason"
};

// Header `timestamp,bid,ask` (any column order). Strict mode throws on the first
// bad row; lenient mode skips it and records the reason.
inline TickReadResult read_ticks(std::istream& in, bool strict = true) {
    TickReadResult out;
    std::string line;
    std::size_t lineno = 0;
    int col_t = -1, col_b = -1, col_a = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (csv::blank(line)) continue;
        auto header = csv::split_record(line);
        for (std::size_t i = 0; i < header.size(); ++i) {
            std::string h = header[i];
            h.erase(std::remove(h.begin(), h.end(), ' '), h.end());
            if (i == 0 && h.rfind("\xEF\xBB\xBF", 0) == 0) h.erase(0, 3);
            if (h == "timestamp") col_t = static_cast<int>(i);
            else if (h == "bid") col_b = static_cast<int>(i);
            else if (h == "ask") col_a = static_cast<int>(i);
        }
        break;
    }
    if (col_t < 0 || col_b < 0 || col_a < 0)
        throw InputError("line " + std::to_string(lineno) + ": tick header must name timestamp, bid and ask");
    const auto need = static_cast<std::size_t>(std::max({col_t, col_b, col_a})) + 1;

    std::int64_t origin_day = 0;
    bool have_origin = false;
    double last_time = 0.0;
    while (std::getline(in, line)) {
        ++lineno;
        if (csv::blank(line)) continue;
        try {
            const auto f = csv::split_record(line);
            if (f.size() < need) throw InputError("expected at least " + std::to_string(need) + " fields");
            const Timestamp ts = parse_timestamp(f[static_cast<std::size_t>(col_t)]);
            const auto b = csv::parse_double(f[static_cast<std::size_t>(col_b)]);
            const auto a = csv::parse_double(f[static_cast<std::size_t>(col_a)]);
            if (!b || !a) throw InputError("bid/ask not numeric");
            if (!(*b > 0.0) || !(*a > 0.0) || !std::isfinite(*b) || !std::isfinite(*a))
                throw InputError("bid/ask must be positive");
            if (*a < *b) throw InputError("ask below bid");
            const std::int64_t origin = have_origin ? origin_day : ts.day;
            const double t = static_cast<double>(ts.day - origin) * 86400.0 + ts.time_of_day - ts.offset_seconds;
            if (have_origin && t < last_time) throw InputError("timestamp earlier than the previous row");
            origin_day = origin;
            have_origin = true;
            last_time = t;
            std::string label = f[static_cast<std::size_t>(col_t)];
            out.ticks.push(std::move(label), ts, origin_day, *b, *a);
        } catch (const InputError& e) {
            const std::string msg = "line " + std::to_string(lineno) + ": " + e.what();
            if (strict) throw InputError(msg);
            ++out.skipped;
            out.problems.push_back(msg);
        }
    }
    return out;
}

// n + 1 events give n durations; event 0 is the origin.
struct DurationSeries {
    std::vector<std::string> event_labels;  // n + 1
    std::vector<double> event_times;        // n + 1
    std::vector<double> event_time_of_day;  // n + 1
    std::vector<double> mid_prices;         // n + 1
    std::vector<double> raw;                // n: tau_t - tau_{t-1}
    std::vector<double> returns;            // n: log p_t - log p_{t-1}
    std::vector<double> seasonal;           // n
    std::vector<double> adjusted;           // n: raw / seasonal
    double kappa = 0.0;

    std::size_t size() const { return raw.size(); }

    void validate() const {
        const std::size_t n = raw.size();
        if (event_times.size() != n + 1 || mid_prices.size() != n + 1 || event_labels.size() != n + 1 ||
            event_time_of_day.size() != n + 1 || returns.size() != n || seasonal.size() != n || adjusted.size() != n)
            throw InputError("duration series columns have inconsistent lengths");
        for (std::size_t t = 0; t < n; ++t) {
            if (!(raw[t] > 0.0) || !(adjusted[t] > 0.0) || !(seasonal[t] > 0.0))
                throw InputError("duration " + std::to_string(t) + " is not positive");
        }
    }
};

// Event scan on the mid-price. Rows sharing a timestamp collapse to the last one,
// so an event never fires at zero elapsed time.
inline DurationSeries compute_price_durations(const TickSeries& ticks, double kappa) {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw InputError("kappa must be positive");
    ticks.validate();
    if (ticks.size() < 2) throw InputError("need at least two ticks");

    DurationSeries d;
    d.kappa = kappa;
    auto add_event = [&](std::size_t i, double mid) {
        d.event_labels.push_back(ticks.labels[i]);
        d.event_times.push_back(ticks.times[i]);
        d.event_time_of_day.push_back(ticks.time_of_day[i]);
        d.mid_prices.push_back(mid);
    };
    const std::size_t n = ticks.size();
    bool origin = true;
    double last_mid = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i + 1 < n && ticks.times[i + 1] == ticks.times[i]) continue;  // a later row at this instant wins
        const double mid = 0.5 * (ticks.bid[i] + ticks.ask[i]);
        if (origin) {
            add_event(i, mid);
            last_mid = mid;
            origin = false;
            continue;
        }
        // Guard against decimal prices whose difference rounds just below kappa.
        if (std::fabs(mid - last_mid) >= kappa - 1e-9 * std::fabs(last_mid)) {
            add_event(i, mid);
            last_mid = mid;
        }
    }
    if (d.event_times.size() < 2) throw InputError("threshold too large: fewer than two price events");
    const std::size_t m = d.event_times.size() - 1;
    d.raw.resize(m);
    d.returns.resize(m);
    for (std::size_t t = 0; t < m; ++t) {
        d.raw[t] = d.event_times[t + 1] - d.event_times[t];
        d.returns[t] = std::log(d.mid_prices[t + 1]) - std::log(d.mid_prices[t]);
    }
    d.seasonal.assign(m, 1.0);
    d.adjusted = d.raw;
    return d;
}

enum class DiurnalMethod { Spline, Bins, None };

inline DiurnalMethod parse_diurnal_method(std::string_view s) {
    if (s == "spline") return DiurnalMethod::Spline;
    if (s == "bins") return DiurnalMethod::Bins;
    if (s == "none") return DiurnalMethod::None;
    throw InputError("unknown adjustment '" + std::string(s) + "'; valid: spline, bins, none");
}

// Seasonal factor at each time of day (seconds), normalized to mean one.
// Spline: least-squares cubic regression spline of log x with knots on whole hours.
// Bins: mean of x within each clock hour.
inline std::vector<double> diurnal_factors(std::span<const double> tod, std::span<const double> x, DiurnalMethod method) {
    if (tod.size() != x.size()) throw DomainError("diurnal: time-of-day and durations differ in length");
    const std::size_t n = x.size();
    if (n == 0) throw InputError("diurnal: empty series");
    if (method == DiurnalMethod::None) return std::vector<double>(n, 1.0);

    const auto [lo_it, hi_it] = std::minmax_element(tod.begin(), tod.end());
    if (!(*hi_it > *lo_it)) throw InputError("diurnal: all events fall at one time of day");
    std::set<long> hours;
    for (double t : tod) hours.insert(static_cast<long>(std::floor(t / 3600.0)));
    if (hours.size() < 2) throw InputError("diurnal: at least two distinct hours are needed");

    std::vector<double> w(n);
    if (method == DiurnalMethod::Bins) {
        std::map<long, std::pair<double, std::size_t>> bins;
        for (std::size_t i = 0; i < n; ++i) {
            auto& b = bins[static_cast<long>(std::floor(tod[i] / 3600.0))];
            b.first += x[i];
            ++b.second;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto& b = bins[static_cast<long>(std::floor(tod[i] / 3600.0))];
            w[i] = b.first / static_cast<double>(b.second);
        }
    } else {
        const double u0 = *lo_it / 3600.0, u1 = *hi_it / 3600.0;
        std::vector<double> knots;
        for (double k = std::floor(u0) + 1.0; k < u1; k += 1.0) knots.push_back(k);
        const Eigen::Index p = 4 + static_cast<Eigen::Index>(knots.size());
        Eigen::MatrixXd a(static_cast<Eigen::Index>(n), p);
        Eigen::VectorXd y(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            const double u = tod[i] / 3600.0, v = u - u0;
            a(r, 0) = 1.0;
            a(r, 1) = v;
            a(r, 2) = v * v;
            a(r, 3) = v * v * v;
            for (std::size_t k = 0; k < knots.size(); ++k) {
                const double e = std::max(0.0, u - knots[k]);
                a(r, 4 + static_cast<Eigen::Index>(k)) = e * e * e;
            }
            y[r] = std::log(x[i]);
        }
        const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(y);
        const Eigen::VectorXd fitted = a * coef;
        for (std::size_t i = 0; i < n; ++i) w[i] = std::exp(fitted[static_cast<Eigen::Index>(i)]);
    }
    const double m = stats::mean(w);
    for (double& v : w) v /= m;
    return w;
}

// Each duration is scaled by the factor at its starting time.
inline DurationSeries diurnal_adjust(DurationSeries d, DiurnalMethod method) {
    d.validate();
    const std::size_t n = d.size();
    const std::span<const double> start_tod(d.event_time_of_day.data(), n);
    d.seasonal = diurnal_factors(start_tod, d.raw, method);
    for (std::size_t t = 0; t < n; ++t) d.adjusted[t] = d.raw[t] / d.seasonal[t];
    return d;
}

struct DescriptiveStats {
    std::size_t n = 0;
    double minimum = 0.0;
    double p10 = 0.0;
    double mean = 0.0;
    double median = 0.0;
    double p90 = 0.0;
    double maximum = 0.0;
    double sd = 0.0;
    double cv_percent = 0.0;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;

    std::vector<std::pair<std::string, double>> rows() const {
        return {{"n", static_cast<double>(n)},
                {"Minimum", minimum},
                {"10th percentile", p10},
                {"Mean", mean},
                {"Median", median},
                {"90th percentile", p90},
                {"Maximum", maximum},
                {"Standard deviation", sd},
                {"CV", cv_percent},
                {"skewness", skewness},
                {"excess kurtosis", excess_kurtosis}};
    }
};

inline DescriptiveStats descriptive_stats(std::span<const double> x) {
    if (x.empty()) throw DomainError("descriptive statistics of an empty sample");
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    const auto m = stats::moments(x);
    DescriptiveStats d;
    d.n = x.size();
    d.minimum = s.front();
    d.maximum = s.back();
    d.p10 = stats::quantile_sorted(s, 0.1);
    d.median = stats::quantile_sorted(s, 0.5);
    d.p90 = stats::quantile_sorted(s, 0.9);
    d.mean = m.mean;
    d.sd = m.sd;
    d.cv_percent = m.mean != 0.0 ? 100.0 * m.sd / m.mean : 0.0;
    d.skewness = m.skewness;
    d.excess_kurtosis = m.excess_kurtosis;
    return d;
}

inline constexpr const char* kDurationCsvHeader =
    "event_time,mid_price,raw_duration,seasonal_factor,adjusted_duration,return";

// One row per duration, stamped with the event that closes it.
inline void write_duration_csv(std::ostream& out, const DurationSeries& d) {
    out << kDurationCsvHeader << '\n';
    for (std::size_t t = 0; t < d.size(); ++t) {
        out << csv::quote(d.event_labels[t + 1]) << ',' << csv::format_double(d.mid_prices[t + 1]) << ','
            << csv::format_double(d.raw[t]) << ',' << csv::format_double(d.seasonal[t]) << ','
            << csv::format_double(d.adjusted[t]) << ',' << csv::format_double(d.returns[t]) << '\n';
    }
}

struct DurationTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;  // NaN where a cell is not numeric
    std::vector<std::vector<std::string>> text;

    std::optional<std::size_t> find(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        return std::nullopt;
    }
};

// Reads a CSV with a header row. Rows with the wrong field count are rejected
// with their line number.
inline DurationTable read_table(std::istream& in) {
    DurationTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (csv::blank(line)) continue;
        t.header = csv::split_record(line);
        for (auto& h : t.header) {
            h.erase(std::remove(h.begin(), h.end(), ' '), h.end());
            if (h.rfind("\xEF\xBB\xBF", 0) == 0) h.erase(0, 3);
        }
        break;
    }
    if (t.header.empty()) throw InputError("empty CSV input");
    t.columns.resize(t.header.size());
    t.text.resize(t.header.size());
    while (std::getline(in, line)) {
        ++lineno;
        if (csv::blank(line)) continue;
        std::vector<std::string> f;
        try {
            f = csv::split_record(line);
        } catch (const InputError& e) {
            throw InputError("line " + std::to_string(lineno) + ": " + e.what());
        }
        if (f.size() != t.header.size())
            throw InputError("line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                             " fields, got " + std::to_string(f.size()));
        for (std::size_t c = 0; c < f.size(); ++c) {
            t.columns[c].push_back(csv::parse_double(f[c]).value_or(std::numeric_limits<double>::quiet_NaN()));
            t.text[c].push_back(std::move(f[c]));
        }
    }
    return t;
}

// Durations for fitting: the adjusted_duration column of a duration CSV, a
// `duration` column, or the only column of a one-column file.
inline std::vector<double> read_durations(std::istream& in) {
    const auto t = read_table(in);
    std::optional<std::size_t> c = t.find("adjusted_duration");
    if (!c) c = t.find("duration");
    if (!c && t.header.size() == 1) c = 0;
    if (!c) throw InputError("no adjusted_duration or duration column in the duration file");
    const auto& col = t.columns[*c];
    for (std::size_t i = 0; i < col.size(); ++i)
        if (!(col[i] > 0.0) || !std::isfinite(col[i]))
            throw InputError("data row " + std::to_string(i + 1) + ": duration must be a positive number");
    if (col.empty()) throw InputError("duration file has no rows");
    return col;
}

// Rebuilds a DurationSeries from write_duration_csv output. The origin event is
// reconstructed from the first row (time and price backed out of its duration and return).
inline DurationSeries read_duration_series(std::istream& in, double kappa) {
    const auto t = read_table(in);
    const char* names[] = {"event_time", "mid_price", "raw_duration", "seasonal_factor", "adjusted_duration", "return"};
    std::size_t idx[6];
    for (int k = 0; k < 6; ++k) {
        const auto c = t.find(names[k]);
        if (!c) throw InputError(std::string("duration file lacks column ") + names[k]);
        idx[k] = *c;
    }
    const std::size_t n = t.columns[0].size();
    if (n < 1) throw InputError("duration file has no rows");
    DurationSeries d;
    d.kappa = kappa;
    const auto& price = t.columns[idx[1]];
    d.raw = t.columns[idx[2]];
    d.seasonal = t.columns[idx[3]];
    d.adjusted = t.columns[idx[4]];
    d.returns = t.columns[idx[5]];
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(price[i]) || !std::isfinite(d.returns[i]) || !std::isfinite(d.raw[i]))
            throw InputError("data row " + std::to_string(i + 1) + ": non-numeric value");
    d.event_labels.push_back("origin");
    d.mid_prices.push_back(price[0] / std::exp(d.returns[0]));
    d.event_times.push_back(0.0);
    for (std::size_t i = 0; i < n; ++i) {
        d.event_labels.push_back(t.text[idx[0]][i]);
        d.mid_prices.push_back(price[i]);
        d.event_times.push_back(d.event_times.back() + d.raw[i]);
    }
    d.event_time_of_day.assign(n + 1, 0.0);
    d.validate();
    return d;
}

}  // namespace qlsacd
