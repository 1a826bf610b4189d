// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// `--tier smoke` shrinks the Monte Carlo and profile studies; thresholds stay the same.

#include "qlsacd/cli.hpp"
#include "qlsacd/diagnostics.hpp"
#include "qlsacd/estimate.hpp"
#include "qlsacd/ingest.hpp"
#include "qlsacd/quadrature.hpp"
#include "qlsacd/risk.hpp"

#include "../support/random_configs.hpp"
#include "../support/synthetic.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace qlsacd;
namespace fs = std::filesystem;

namespace {

struct Settings {
    bool smoke = false;
    std::size_t workers = 1;
    std::size_t mc_reps() const { return smoke ? 100 : 500; }
    std::size_t profile_reps() const { return smoke ? 20 : 100; }
};

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

std::string pct(double v) { return fmt(100.0 * v, 4) + "%"; }

// ---------------------------------------------------------------- 1, 2

struct DistConfig {
    double psi, phi, q;
    GeneratorSpec gen;
};

std::vector<DistConfig> distribution_sweep() {
    std::mt19937_64 rng(20240611);
    auto u = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    std::vector<DistConfig> out;
    for (Family f : kAllFamilies)
        for (int i = 0; i < 20; ++i) out.push_back({std::exp(u(-3.0, 5.0)), u(0.05, 2.5), u(0.01, 0.99),
                                                    testing::random_generator(f, rng)});
    return out;
}

Verdict quantile_property(const Settings&) {
    double worst = 0.0;
    std::string where;
    for (const auto& c : distribution_sweep()) {
        const QlsDistribution d(c.q, c.psi, c.phi, c.gen);
        const double e = std::fabs(d.cdf(c.psi) - c.q);
        if (!(e <= worst)) {
            worst = e;
            where = family_name(c.gen.family);
        }
    }
    return {worst <= 1e-6, "160 configurations, max |cdf(psi_q) - q| = " + fmt(worst, 3) + " (" + where +
                               "), tolerance 1e-6"};
}

Verdict normalization(const Settings&) {
    double worst = 0.0;
    std::string where;
    for (const auto& c : distribution_sweep()) {
        const QlsDistribution d(c.q, c.psi, c.phi, c.gen);
        const double e = std::fabs(quadrature::total_mass(d) - 1.0);
        if (!(e <= worst)) {
            worst = e;
            where = family_name(c.gen.family);
        }
    }
    return {worst <= 1e-6, "160 configurations, max |integral of pdf - 1| = " + fmt(worst, 3) + " (" + where +
                               "), tolerance 1e-6"};
}

// ---------------------------------------------------------------- 3

Verdict score_correctness(const Settings&) {
    std::mt19937_64 rng(77);
    double worst = 0.0, worst_pure = 0.0;
    std::string where;
    for (int i = 0; i < 100; ++i) {
        const Family fam = kAllFamilies[static_cast<std::size_t>(i) % kAllFamilies.size()];
        const auto in = testing::random_instance(fam, 200, rng);
        const AcdModel m(in.spec);
        const auto pre = default_presample(in.spec, in.x);
        const auto g = m.score(in.params, in.x, pre);
        auto f = [&](const std::vector<double>& v) { return m.loglik(AcdParams::from_vector(in.spec, v), in.x, pre); };
        const auto v = in.params.to_vector();
        for (std::size_t k = 0; k < v.size(); ++k) {
            const double fd = testing::central_difference(f, v, k, 1e-6 * std::max(1.0, std::fabs(v[k])));
            const double e = std::fabs(g[k] - fd) / std::max(1.0, std::fabs(fd));
            worst_pure = std::max(worst_pure, std::fabs(g[k] - fd) / std::fabs(fd));
            if (!(e <= worst)) {
                worst = e;
                where = std::string(family_name(fam)) + " r=" + std::to_string(in.spec.r) +
                        " s=" + std::to_string(in.spec.s);
            }
        }
    }
    return {worst <= 1e-5, "100 instances, max |score - fd| / max(|fd|, 1) = " + fmt(worst, 3) + " (" + where +
                               "), tolerance 1e-5; max plain relative error " + fmt(worst_pure, 3)};
}

// ---------------------------------------------------------------- 4, 5, 6

const McReport& mc_study(const Settings& s) {
    static std::optional<McReport> report;
    if (!report) {
        auto cfg = McConfig::study_design();
        cfg.replications = s.mc_reps();
        cfg.seed = 4;
        cfg.workers = s.workers;
        cfg.keep_replications = true;
        report = run_mc_study(cfg);
    }
    return *report;
}

const McCell& cell(const McReport& rep, double q, std::size_t n) {
    for (const auto& c : rep.cells)
        if (c.q == q && c.n == n) return c;
    throw std::logic_error("missing Monte Carlo cell");
}

Verdict mc_decrease(const Settings& s) {
    const auto& rep = mc_study(s);
    const std::vector<std::size_t> ns{200, 1000, 2000};
    std::size_t checks = 0, ok = 0, endpoint_ok = 0, failures = 0;
    std::string broken;
    for (double q : McConfig{}.q_values) {
        for (std::size_t n : ns) failures += cell(rep, q, n).n_failed;
        for (std::size_t p = 0; p < rep.parameter_names.size(); ++p) {
            for (int which = 0; which < 2; ++which) {
                auto metric = [&](std::size_t n) {
                    const auto& a = cell(rep, q, n).parameters[p].acc;
                    return which == 0 ? a.rb : a.rmse;
                };
                const bool chain = metric(200) > metric(1000) && metric(1000) > metric(2000);
                ++checks;
                ok += chain;
                endpoint_ok += metric(200) > metric(2000);
                if (!chain && broken.size() < 200)
                    broken += std::string(broken.empty() ? "" : "; ") + (which == 0 ? "RB " : "RMSE ") +
                              rep.parameter_names[p] + " q=" + fmt(q) + " (" + fmt(metric(200), 3) + ", " +
                              fmt(metric(1000), 3) + ", " + fmt(metric(2000), 3) + ")";
            }
        }
    }
    std::string d = "N=" + std::to_string(s.mc_reps()) + ", " + std::to_string(ok) + "/" + std::to_string(checks) +
                    " (q, parameter, metric) series strictly decrease over n=200,1000,2000; " +
                    std::to_string(endpoint_ok) + "/" + std::to_string(checks) + " have n=2000 below n=200; " +
                    std::to_string(failures) + " failed fits";
    if (!broken.empty()) d += "; not monotone: " + broken;
    return {ok == checks, d};
}

Verdict gcs_reference(const Settings& s) {
    const auto& rep = mc_study(s);
    bool all = true;
    std::string d = "n=2000 averaged (mean, median, sd, skew, ex.kurt) vs (1, 0.69, 1, 2, 6) +- (0.05, 0.05, 0.10, 0.4, 2.0):";
    for (double q : McConfig{}.q_values) {
        const auto m = cell(rep, q, 2000).residual_means.as_array();
        bool ok = true;
        for (std::size_t k = 0; k < 5; ++k) ok = ok && std::fabs(m[k] - kExpTargets[k]) <= ReferenceTolerances{}.tol[k];
        all = all && ok;
        d += " q=" + fmt(q) + " (" + fmt(m[0], 3) + ", " + fmt(m[1], 3) + ", " + fmt(m[2], 3) + ", " + fmt(m[3], 3) +
             ", " + fmt(m[4], 3) + ")" + (ok ? "" : " OUT");
    }
    return {all, d};
}

Verdict parameter_recovery(const Settings& s) {
    const auto& rep = mc_study(s);
    const auto truth = McConfig::study_design().true_params.to_vector();
    std::map<double, std::pair<std::size_t, std::size_t>> by_q;  // q -> (inside, total)
    for (const auto& r : rep.replications) {
        if (r.n != 2000) continue;
        auto& [inside, total] = by_q[r.q];
        ++total;
        if (!r.ok || !r.se) continue;
        bool all = true;
        for (std::size_t k = 0; k < truth.size(); ++k)
            all = all && std::isfinite((*r.se)[k]) && std::fabs(r.estimate[k] - truth[k]) <= 3.0 * (*r.se)[k];
        inside += all;
    }
    const auto [in_med, tot_med] = by_q.at(0.5);
    const double rate = static_cast<double>(in_med) / static_cast<double>(tot_med);
    std::string d = "q=0.5, n=2000: all four within 3 SE in " + std::to_string(in_med) + "/" +
                    std::to_string(tot_med) + " = " + pct(rate) + " (need >= 99%); other q:";
    for (const auto& [q, c] : by_q)
        if (q != 0.5) d += " " + fmt(q) + ": " + pct(static_cast<double>(c.first) / static_cast<double>(c.second));
    return {rate >= 0.99, d};
}

// ---------------------------------------------------------------- 7

Verdict interval_coverage(const Settings&) {
    const AcdModelSpec spec{1, 1, 0.5, Link::Log, {Family::LogNormal, {}}};
    const AcdParams truth{0.25, 0.20, {0.70}, {0.10}};
    const AcdModel model(spec);
    auto run = [&](std::uint64_t seed) {
        const auto path = model.simulate(truth, 2000, seed);
        RollingOptions ro;
        ro.fit.compute_standard_errors = false;
        return prediction_interval(path.x, spec, 0.025, 0.975, 300, ro);
    };
    const auto pi = run(700);
    std::size_t in = 0, tot = 0;
    for (std::uint64_t k = 0; k < 20; ++k) {
        const auto p = run(701 + k);
        in += p.n_inside;
        tot += p.n_ok;
    }
    return {pi.n_ok == 300 && std::fabs(pi.coverage - 0.95) <= 0.025,
            "window 300, fast mode: coverage " + pct(pi.coverage) + " (" + std::to_string(pi.n_inside) + "/" +
                std::to_string(pi.n_ok) + "), band 95% +- 2.5%; pooled over 20 further paths " +
                pct(static_cast<double>(in) / static_cast<double>(tot))};
}

// ---------------------------------------------------------------- 8

Verdict ivar_calibration(const Settings&) {
    const double hand = hit_rate(std::vector<double>{-0.03, 0.01, -0.005}, std::vector<double>{-0.02, -0.02, -0.02});
    const AcdModelSpec spec{1, 1, 0.5, Link::Log, {Family::LogNormal, {}}};
    const auto path = AcdModel(spec).simulate(AcdParams{0.25, 0.20, {0.70}, {0.10}}, 3000, 800);
    const auto d = testing::series_with_iid_returns(path.x, 801);
    RollingOptions ro;
    ro.fit.compute_standard_errors = false;
    const auto bt = ivar_backtest(d, spec, 0.01, 1000, ro);
    return {hand == 1.0 / 3.0 && bt.n_ok == bt.window && bt.calibrated,
            "hand example " + fmt(hand, 17) + " (1/3 exact: " + (hand == 1.0 / 3.0 ? "yes" : "no") +
                "); window 1000 at 1%: " + std::to_string(bt.hits) + " hits, rate " + pct(bt.hit_rate) +
                ", binomial 95% band [" + std::to_string(bt.band_lo) + ", " + std::to_string(bt.band_hi) + "]"};
}

// ---------------------------------------------------------------- 9

Verdict profile_likelihood(const Settings& s) {
    const AcdModelSpec truth_spec{1, 1, 0.5, Link::Log, {Family::LogStudentT, {5.0}}};
    const AcdParams truth{0.25, 0.20, {0.70}, {0.10}};
    const AcdModel model(truth_spec);
    AcdModelSpec fit_spec = truth_spec;
    fit_spec.gen.extra.clear();
    FitOptions fo;
    fo.compute_standard_errors = false;
    for (int v = 2; v <= 30; ++v) fo.profile_grid.push_back({static_cast<double>(v)});
    const std::size_t reps = s.profile_reps();
    std::vector<double> picked(reps, std::nan(""));
    std::vector<std::uint8_t> evaluable(reps, 0);  // likelihood finite at the truth under the default presample
    parallel_for(reps, [&](std::size_t k) {
        std::vector<double> x;
        try {
            x = model.simulate(truth, 5000, derive_seed(900, k)).x;
        } catch (const DivergenceError&) {
            return;  // the path itself blew up: a miss
        }
        try {
            evaluable[k] = std::isfinite(model.loglik(truth, x));
        } catch (const NumericalError&) {
        }
        auto o = fo;
        o.seed = derive_seed(901, k);
        try {
            const auto fm = profile_fit(fit_spec, x, o);
            if (fm.convergence.converged) picked[k] = fm.theta_extra.at(0);
        } catch (const NumericalError&) {
            // An explosive path counts as a miss.
        }
    }, s.workers);
    std::size_t hits = 0, failed = 0, n_eval = 0, hits_eval = 0;
    std::map<int, int> hist;
    for (std::size_t k = 0; k < reps; ++k) {
        const double v = picked[k];
        n_eval += evaluable[k];
        if (std::isnan(v)) {
            ++failed;
            continue;
        }
        ++hist[static_cast<int>(v)];
        hits += v >= 3.0 && v <= 8.0;
        hits_eval += evaluable[k] && v >= 3.0 && v <= 8.0;
    }
    const double rate = static_cast<double>(hits) / static_cast<double>(reps);
    std::string d = std::to_string(reps) + " replications, n=5000, grid 2..30: profiled nu in {3..8} in " +
                    std::to_string(hits) + " = " + pct(rate) + " (need >= 90%); " + std::to_string(failed) + " failed fits; picks:";
    for (const auto& [v, c] : hist) d += " " + std::to_string(v) + "x" + std::to_string(c);
    d += "; " + std::to_string(reps - n_eval) + " paths diverge or have a non-finite likelihood at the true parameters; " +
         "rate among the other " + std::to_string(n_eval) + ": " +
         pct(n_eval ? static_cast<double>(hits_eval) / static_cast<double>(n_eval) : 0.0);
    return {rate >= 0.9, d};
}

// ---------------------------------------------------------------- 10

Verdict ingestion(const Settings&) {
    const auto planted = testing::planted_diurnal(5000, 42);
    const auto adj = diurnal_adjust(planted.series, DiurnalMethod::Spline);
    const double corr = testing::correlation(adj.seasonal, planted.truth);

    TickSeries t;
    const std::vector<double> times{10.0, 11.5, 13.25}, mids{100.0, 100.004, 100.011};
    for (std::size_t i = 0; i < 3; ++i) {
        Timestamp ts;
        ts.time_of_day = 36000.0 + times[i];
        t.push("t" + std::to_string(i), ts, 0, mids[i] - 0.0005, mids[i] + 0.0005);
    }
    const auto d = compute_price_durations(t, 0.01);
    const bool hand = d.size() == 1 && d.raw[0] == 13.25 - 10.0 && d.returns[0] == std::log(100.011) - std::log(100.0) &&
                      d.event_labels == std::vector<std::string>{"t0", "t2"};

    const std::vector<std::string> expected_rows{"n",      "Minimum", "10th percentile",    "Mean", "Median",
                                          "90th percentile", "Maximum", "Standard deviation", "CV",
                                          "skewness", "excess kurtosis"};
    std::vector<std::string> labels;
    for (const auto& [label, v] : descriptive_stats(std::vector<double>{1, 2, 3, 4, 5}).rows()) labels.push_back(label);
    const bool rows = labels == expected_rows;
    return {corr > 0.95 && hand && rows, "planted U-shape correlation " + fmt(corr) + " (need > 0.95); hand trace " +
                                             (hand ? "exact" : "MISMATCH") + "; stats row labels " +
                                             (rows ? "match" : "MISMATCH")};
}

// ---------------------------------------------------------------- 11

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

int invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "qlsacd");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

Verdict determinism(const Settings&) {
    const auto root = fs::temp_directory_path() / "qlsacd_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    {
        // Two sessions of quotes on one day.
        const auto ticks = testing::random_walk_ticks(20000, 1100, 0.004);
        std::ofstream f(root / "ticks.csv");
        f << "timestamp,bid,ask\n";
        for (std::size_t i = 0; i < ticks.size(); ++i) {
            const double s = ticks.time_of_day[i];
            char buf[64];
            std::snprintf(buf, sizeof buf, "2024-03-04T%02d:%02d:%06.3f", static_cast<int>(s / 3600),
                          static_cast<int>(std::fmod(s, 3600.0) / 60), std::fmod(s, 60.0));
            f << buf << ',' << csv::format_double(ticks.bid[i]) << ',' << csv::format_double(ticks.ask[i]) << '\n';
        }
    }
    const auto ticks = (root / "ticks.csv").string();
    std::vector<std::string> outputs;
    bool codes = true;
    for (const std::string run : {"a", "b"}) {
        const auto dir = root / run;
        fs::create_directories(dir);
        auto p = [&](const char* f) { return (dir / f).string(); };
        codes = codes && invoke({"durations", ticks, "--kappa", "0.01", "--out", p("durations.csv"), "--stats",
                                 p("stats.json"), "--deterministic"}) == 0;
        codes = codes && invoke({"--deterministic", "fit", p("durations.csv"), "--family", "log-student-t",
                                 "--profile-grid", "3:12:3", "--out", p("model.json")}) == 0;
        codes = codes && invoke({"--deterministic", "fit", p("durations.csv"), "--q-grid", "0.25:0.75:0.25",
                                 "--out", p("qgrid.json"), "--criteria-out", p("criteria.csv")}) == 0;
        codes = codes && invoke({"--deterministic", "diagnose", p("durations.csv"), "--model", p("model.json"),
                                 "--out-dir", dir.string(), "--envelope-sims", "30", "--seed", "3"}) == 0;
        codes = codes && invoke({"--deterministic", "--workers", "2", "mc", "--n", "200", "--replications", "5",
                                 "--q", "0.25,0.75", "--seed", "9", "--out", p("mc.csv"), "--json", p("mc.json"),
                                 "--replications-out", p("mc_reps.csv")}) == 0;
        codes = codes && invoke({"--deterministic", "forecast", p("durations.csv"), "--q-lo", "0.025", "--q-hi",
                                 "0.975", "--window", "100", "--out", p("intervals.csv"), "--summary",
                                 p("intervals.json")}) == 0;
        codes = codes && invoke({"--deterministic", "ivar", p("durations.csv"), "--kappa", "0.01", "--window",
                                 "100", "--out", p("ivar.csv"), "--summary", p("ivar.json")}) == 0;
    }
    std::size_t files = 0, same = 0;
    std::string differ;
    for (const auto& e : fs::directory_iterator(root / "a")) {
        ++files;
        if (slurp(e.path()) == slurp(root / "b" / e.path().filename())) ++same;
        else differ += " " + e.path().filename().string();
    }
    fs::remove_all(root);
    return {codes && files >= 14 && same == files,
            std::to_string(same) + "/" + std::to_string(files) +
                " CSV/JSON outputs byte-identical across two runs (durations, fit, q-grid, diagnose, mc, forecast, "
                "ivar)" + (codes ? "" : "; a command FAILED") + (differ.empty() ? "" : "; differ:" + differ)};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Verdict(const Settings&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string tier = "full";
    std::vector<int> only;
    Settings s;
    app.add_option("--tier", tier, "full or smoke")->check(CLI::IsMember({"full", "smoke"}))->capture_default_str();
    app.add_option("--only", only, "Run only these criteria");
    app.add_option("--workers", s.workers, "Worker threads")->capture_default_str();
    CLI11_PARSE(app, argc, argv);
    s.smoke = tier == "smoke";

    const std::vector<Criterion> criteria{
        {1, "quantile property", quantile_property},
        {2, "normalization", normalization},
        {3, "score correctness", score_correctness},
        {4, "Monte Carlo RB/RMSE decrease", mc_decrease},
        {5, "GCS residual reference", gcs_reference},
        {6, "parameter recovery", parameter_recovery},
        {7, "prediction-interval coverage", interval_coverage},
        {8, "IVaR backtest calibration", ivar_calibration},
        {9, "profile likelihood", profile_likelihood},
        {10, "ingestion", ingestion},
        {11, "determinism", determinism},
    };
    std::cout << "acceptance tier: " << tier << '\n';
    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run(s);
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !v.pass;
        std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << "): " << v.detail
                  << " [" << fmt(secs, 3) << " s]" << std::endl;
    }
    std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : std::string("all criteria passed"))
              << '\n';
    return failed ? 1 : 0;
}
