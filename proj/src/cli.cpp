#include "qlsacd/cli.hpp"

#include "qlsacd/diagnostics.hpp"
#include "qlsacd/estimate.hpp"
#include "qlsacd/ingest.hpp"
#include "qlsacd/io.hpp"
#include "qlsacd/risk.hpp"
#include "qlsacd/version.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace qlsacd::cli {
namespace {

using io::json;

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

double to_number(const std::string& s, const std::string& what) {
    const auto v = csv::parse_double(s);
    if (!v) throw InputError(what + ": '" + s + "' is not a number");
    return *v;
}

std::vector<double> number_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    for (const auto& part : split(s, ',')) out.push_back(to_number(part, what));
    if (out.empty()) throw InputError(what + ": empty list");
    return out;
}

std::vector<std::size_t> count_list(const std::string& s, const std::string& what) {
    std::vector<std::size_t> out;
    for (double v : number_list(s, what)) {
        if (!(v >= 1.0) || v != std::floor(v)) throw InputError(what + ": expected positive integers");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

// lo:hi:step, inclusive of hi up to rounding; values rounded to 12 decimals.
std::vector<double> range_list(const std::string& s, const std::string& what) {
    const auto parts = split(s, ':');
    if (parts.size() != 3) throw InputError(what + ": expected lo:hi:step");
    const double lo = to_number(parts[0], what), hi = to_number(parts[1], what), step = to_number(parts[2], what);
    if (!(step > 0.0) || !(hi >= lo)) throw InputError(what + ": need step > 0 and hi >= lo");
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    if (count > 100000) throw InputError(what + ": too many grid points");
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12;
    return out;
}

std::vector<double> list_or_range(const std::string& s, const std::string& what) {
    return s.find(':') != std::string::npos ? range_list(s, what) : number_list(s, what);
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return in;
}

// Writes to a file, or to `fallback` when the path is empty or "-".
void emit(const std::string& path, std::ostream& fallback, const std::function<void(std::ostream&)>& body) {
    if (path.empty() || path == "-") {
        body(fallback);
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write '" + path + "'");
    body(f);
    if (!f) throw InputError("write to '" + path + "' failed");
}

struct Global {
    bool deterministic = false;
    std::size_t workers = 1;
};

struct ModelFlags {
    std::string family = "log-normal";
    std::string order = "1,1";
    double q = 0.5;
    std::string extra;

    void add(CLI::App* c, bool with_q = true) {
        c->add_option("--family", family, "Log-symmetric family: " + family_names_list())->capture_default_str();
        c->add_option("--order", order, "Model order r,s")->capture_default_str();
        if (with_q) c->add_option("--q", q, "Quantile level in (0,1)")->capture_default_str();
        c->add_option("--extra", extra, "Fix the shape parameter(s), comma separated; default profiles them");
    }

    AcdModelSpec spec() const {
        AcdModelSpec s;
        s.gen.family = parse_family(family);
        const auto rs = split(order, ',');
        if (rs.size() != 2) throw InputError("--order expects r,s");
        const double r = to_number(rs[0], "--order"), ss = to_number(rs[1], "--order");
        if (r < 0 || ss < 0 || r != std::floor(r) || ss != std::floor(ss) || r > 20 || ss > 20)
            throw InputError("--order expects small nonnegative integers");
        s.r = static_cast<std::size_t>(r);
        s.s = static_cast<std::size_t>(ss);
        s.q = q;
        if (!extra.empty()) s.gen.extra = number_list(extra, "--extra");
        try {
            if (s.gen.extra.empty()) {
                AcdModelSpec probe = s;
                probe.gen.extra = default_extra(s.gen.family);
                probe.validate();
            } else {
                s.validate();
            }
        } catch (const DomainError& e) {
            throw InputError(e.what());
        }
        return s;
    }
};

struct FitFlags {
    std::uint64_t seed = 0;
    std::size_t max_iterations = 1000;
    double gtol = 1e-5;
    std::size_t restarts = 3;
    std::string profile_grid;

    void add(CLI::App* c) {
        c->add_option("--seed", seed, "Seed for restarts")->capture_default_str();
        c->add_option("--max-iter", max_iterations, "BFGS iteration limit")->capture_default_str();
        c->add_option("--gtol", gtol, "Gradient max-norm tolerance")->capture_default_str();
        c->add_option("--restarts", restarts, "Jittered restarts after a failed run")->capture_default_str();
        c->add_option("--profile-grid", profile_grid,
                      "Shape candidates: lo:hi:step or v1,v2,... (one shape); a,b;c,d (two shapes)");
    }

    FitOptions options(const AcdModelSpec& spec, std::size_t workers) const {
        FitOptions o;
        o.seed = seed;
        o.max_iterations = max_iterations;
        o.gradient_tolerance = gtol;
        o.max_restarts = restarts;
        o.workers = workers;
        if (!profile_grid.empty()) {
            const std::size_t k = extra_count(spec.gen.family);
            if (k == 0) throw InputError("--profile-grid given for a family without shape parameters");
            if (k == 1) {
                std::string g = profile_grid;
                std::replace(g.begin(), g.end(), ';', ',');
                for (double v : list_or_range(g, "--profile-grid")) o.profile_grid.push_back({v});
            } else {
                for (const auto& cand : split(profile_grid, ';')) {
                    auto v = number_list(cand, "--profile-grid");
                    if (v.size() != k) throw InputError("--profile-grid: each candidate needs " + std::to_string(k) + " values");
                    o.profile_grid.push_back(std::move(v));
                }
            }
            for (const auto& cand : o.profile_grid) {
                GeneratorSpec g{spec.gen.family, cand};
                try {
                    g.validate();
                } catch (const DomainError& e) {
                    throw InputError(std::string("--profile-grid: ") + e.what());
                }
            }
        }
        return o;
    }
};

void warn_hash(const io::ModelDocument& m, std::span<const double> x, std::ostream& err) {
    const auto h = io::data_hash(x);
    if (!m.data_hash.empty() && m.data_hash != h)
        err << "warning: model was fitted to different data (hash " << m.data_hash << ", input " << h << ")\n";
}

io::ModelDocument load_model(const std::string& path) {
    auto in = open_in(path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw InputError("model file '" + path + "' is not valid JSON: " + e.what());
    }
    return io::model_from_json(j);
}

// Rebuilds the fitted quantities a saved model implies for the data x.
FittedModel refilter(const io::ModelDocument& m, std::span<const double> x) {
    FittedModel fm;
    fm.spec = m.spec;
    fm.params = m.params;
    fm.theta_extra = m.spec.gen.extra;
    fm.presample = m.presample;
    fm.n = x.size();
    const AcdModel model(m.spec);
    const auto f = model.filter(m.params, x, m.presample);
    fm.psi_path = f.psi;
    fm.psi_next = std::exp(f.eta_next);
    fm.loglik_kernel = model.loglik(m.params, x, m.presample);
    fm.loglik_full = fm.loglik_kernel + model.full_constant(x);
    fm.convergence.converged = m.converged;
    return fm;
}

std::vector<double> read_duration_file(const std::string& path) {
    auto in = open_in(path);
    return read_durations(in);
}

// ---------------------------------------------------------------------------

struct DurationsCmd {
    std::string input, out, stats, stats_format = "json", adjust = "spline";
    double kappa = 0.0;
    bool lenient = false;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("durations", "Price durations from bid/ask ticks");
        c->add_option("ticks", input, "Tick CSV with header timestamp,bid,ask")->required();
        c->add_option("--kappa", kappa, "Mid-price move that defines an event")->required();
        c->add_option("--adjust", adjust, "Diurnal adjustment")
            ->check(CLI::IsMember({"spline", "bins", "none"}))
            ->capture_default_str();
        c->add_flag("--lenient", lenient, "Skip malformed rows instead of failing");
        c->add_option("--out", out, "Duration CSV (default: stdout)");
        c->add_option("--stats", stats, "Write summary statistics of raw and adjusted durations here");
        c->add_option("--stats-format", stats_format, "Summary format")
            ->check(CLI::IsMember({"json", "text"}))
            ->capture_default_str();
        c->callback([this] { cmd = this; });
    }

    int run(const Global& g, std::ostream& out_s, std::ostream& err) const {
        auto in = open_in(input);
        const auto ticks = read_ticks(in, !lenient);
        if (ticks.skipped) err << "warning: skipped " << ticks.skipped << " malformed row(s)\n";
        for (const auto& p : ticks.problems) err << "  " << p << '\n';
        const auto& tt = ticks.ticks.times;
        if (!tt.empty() && std::floor(tt.back() / 86400.0) > std::floor(tt.front() / 86400.0))
            err << "warning: ticks span more than one calendar day; overnight gaps count as durations\n";
        const auto d = diurnal_adjust(compute_price_durations(ticks.ticks, kappa), parse_diurnal_method(adjust));
        emit(out, out_s, [&](std::ostream& o) { write_duration_csv(o, d); });
        if (!stats.empty()) {
            const auto raw = descriptive_stats(d.raw), adj = descriptive_stats(d.adjusted);
            emit(stats, out_s, [&](std::ostream& o) {
                if (stats_format == "text") {
                    io::write_stats_table(o, {{"raw", raw}, {"adjusted", adj}});
                } else {
                    auto j = io::document("qlsacd.duration_stats", g.deterministic);
                    j["kappa"] = kappa;
                    j["adjustment"] = adjust;
                    j["skipped_rows"] = ticks.skipped;
                    j["raw"] = io::to_json(raw);
                    j["adjusted"] = io::to_json(adj);
                    io::write_json(o, j);
                }
            });
        }
        return kOk;
    }

    inline static const DurationsCmd* cmd = nullptr;
};

struct FitCmd {
    std::string input, out, q_grid, criteria_out;
    bool allow_nonconverged = false, no_se = false;
    ModelFlags model;
    FitFlags fit;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("fit", "Maximum-likelihood fit of a QLS-ACD model");
        c->add_option("durations", input, "Duration CSV (adjusted_duration or duration column)")->required();
        model.add(c);
        fit.add(c);
        c->add_option("--q-grid", q_grid, "Fit over q = lo:hi:step and report criteria per q");
        c->add_option("--out", out, "Model JSON (default: stdout)");
        c->add_option("--criteria-out", criteria_out, "CSV of information criteria");
        c->add_flag("--allow-nonconverged", allow_nonconverged, "Exit 0 even if the optimizer did not converge");
        c->add_flag("--no-se", no_se, "Skip the Hessian and standard errors");
        c->callback([this] { cmd = this; });
    }

    static void criteria_row(std::ostream& o, double q, const FittedModel& f) {
        o << csv::format_double(q) << ',' << family_name(f.spec.gen.family) << ',';
        std::string ex;
        for (std::size_t i = 0; i < f.theta_extra.size(); ++i) ex += (i ? ";" : "") + csv::format_double(f.theta_extra[i]);
        o << ex << ',' << csv::format_double(f.loglik_full) << ',' << csv::format_double(f.criteria.aic) << ','
          << csv::format_double(f.criteria.bic) << ',' << csv::format_double(f.criteria.caic) << ','
          << csv::format_double(f.criteria.hqic) << ',' << csv::format_double(f.criteria.aicc) << ','
          << (f.convergence.converged ? 1 : 0) << '\n';
    }

    static constexpr const char* kCriteriaHeader = "q,family,extra,loglik_full,aic,bic,caic,hqic,aicc,converged\n";

    int run(const Global& g, std::ostream& out_s, std::ostream& err) const {
        const auto x = read_duration_file(input);
        const auto spec = model.spec();
        auto opt = fit.options(spec, g.workers);
        opt.compute_standard_errors = !no_se;
        const auto hash = io::data_hash(x);

        if (!q_grid.empty()) {
            const auto qs = range_list(q_grid, "--q-grid");
            for (double q : qs)
                if (!(q > 0.0 && q < 1.0)) throw InputError("--q-grid values must lie in (0,1)");
            const auto scan = q_grid_scan(spec, x, qs, opt);
            auto doc = io::document("qlsacd.qgrid", g.deterministic);
            json rows = json::array();
            for (const auto& row : scan.rows) {
                json r{{"q", row.q}};
                if (row.fit) r["fit"] = io::model_json(*row.fit, hash);
                else r["error"] = row.error;
                rows.push_back(r);
            }
            doc["rows"] = rows;
            doc["n_converged"] = scan.n_converged;
            doc["averages"] = scan.averages ? io::to_json(*scan.averages) : json(nullptr);
            emit(out, out_s, [&](std::ostream& o) { io::write_json(o, doc); });
            if (!criteria_out.empty())
                emit(criteria_out, out_s, [&](std::ostream& o) {
                    o << kCriteriaHeader;
                    for (const auto& row : scan.rows)
                        if (row.fit) criteria_row(o, row.q, *row.fit);
                    if (scan.averages)
                        o << "average," << family_name(spec.gen.family) << ",,,"
                          << csv::format_double(scan.averages->aic) << ',' << csv::format_double(scan.averages->bic)
                          << ',' << csv::format_double(scan.averages->caic) << ','
                          << csv::format_double(scan.averages->hqic) << ',' << csv::format_double(scan.averages->aicc)
                          << ',' << scan.n_converged << '\n';
                });
            for (const auto& row : scan.rows)
                if (!row.fit) err << "q=" << row.q << ": " << row.error << '\n';
            if (scan.n_converged == 0) {
                err << "error: no fit on the q grid converged\n";
                return kNumericalError;
            }
            if (scan.n_converged < scan.rows.size() && !allow_nonconverged) {
                err << "error: " << scan.rows.size() - scan.n_converged << " fit(s) on the q grid did not converge\n";
                return kNumericalError;
            }
            return kOk;
        }

        const auto fm = fit_model(spec, x, opt);
        if (!fm.convergence.converged && !allow_nonconverged) {
            err << "error: optimizer did not converge: " << fm.convergence.message << '\n';
            return kNumericalError;
        }
        auto doc = io::document("qlsacd.model", g.deterministic);
        doc.update(io::model_json(fm, hash));
        emit(out, out_s, [&](std::ostream& o) { io::write_json(o, doc); });
        if (!criteria_out.empty())
            emit(criteria_out, out_s, [&](std::ostream& o) {
                o << kCriteriaHeader;
                criteria_row(o, spec.q, fm);
            });
        if (fm.params.stationarity_warning()) err << "warning: sum of |alpha| >= 1\n";
        return kOk;
    }

    inline static const FitCmd* cmd = nullptr;
};

struct DiagnoseCmd {
    std::string input, model_path, out_dir = ".", residuals_out, envelope_out, summary_out;
    std::size_t sims = 100;
    double level = 0.95;
    bool refit = false;
    std::uint64_t seed = 0;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("diagnose", "GCS residuals, EXP(1) reference check and QQ envelope");
        c->add_option("durations", input, "Duration CSV the model was fitted to")->required();
        c->add_option("--model", model_path, "Model JSON from `fit`")->required();
        c->add_option("--out-dir", out_dir, "Directory for residuals.csv, envelope.csv, diagnostics.json")
            ->capture_default_str();
        c->add_option("--residuals-out", residuals_out, "Residual CSV path (overrides --out-dir)");
        c->add_option("--envelope-out", envelope_out, "Envelope CSV path (overrides --out-dir)");
        c->add_option("--summary-out", summary_out, "Summary JSON path (overrides --out-dir)");
        c->add_option("--envelope-sims", sims, "Simulated datasets for the envelope")->capture_default_str();
        c->add_option("--level", level, "Pointwise envelope level")->capture_default_str();
        c->add_flag("--refit", refit, "Refit every simulated dataset (slow)");
        c->add_option("--seed", seed, "Simulation seed")->capture_default_str();
        c->callback([this] { cmd = this; });
    }

    int run(const Global& g, std::ostream& out_s, std::ostream& err) const {
        if (sims < 1) throw InputError("--envelope-sims must be at least 1");
        if (!(level > 0.0 && level < 1.0)) throw InputError("--level must lie in (0,1)");
        const auto m = load_model(model_path);
        const auto x = read_duration_file(input);
        warn_hash(m, x, err);
        const auto fm = refilter(m, x);
        const auto res = gcs_residuals(fm, x);
        EnvelopeOptions eo;
        eo.n_sim = sims;
        eo.level = level;
        eo.refit = refit;
        eo.seed = seed;
        eo.workers = g.workers;
        const auto env = envelope(fm, x, eo);
        const auto check = residual_reference_check(res);
        auto path = [&](const std::string& explicit_path, const char* name) {
            return explicit_path.empty() ? out_dir + "/" + name : explicit_path;
        };
        emit(path(residuals_out, "residuals.csv"), out_s, [&](std::ostream& o) { io::write_residual_csv(o, res); });
        emit(path(envelope_out, "envelope.csv"), out_s, [&](std::ostream& o) { io::write_envelope_csv(o, env); });
        auto doc = io::document("qlsacd.diagnostics", g.deterministic);
        doc["data_hash"] = io::data_hash(x);
        doc["n"] = x.size();
        doc["n_capped"] = res.n_capped;
        doc["summary"] = io::to_json(res.summary);
        doc["reference_check"] = io::to_json(check);
        doc["envelope"] = json{{"n_sim_requested", env.n_sim_requested},
                               {"n_sim_effective", env.n_sim_effective},
                               {"level", level},
                               {"mode", refit ? "refit" : "fast"},
                               {"fraction_inside", env.fraction_inside},
                               {"failures", env.failures}};
        emit(path(summary_out, "diagnostics.json"), out_s, [&](std::ostream& o) { io::write_json(o, doc); });
        return kOk;
    }

    inline static const DiagnoseCmd* cmd = nullptr;
};

struct McCmd {
    std::string true_params = "0.25,0.20,0.70,0.10", sizes = "200,1000,2000", qs = "0.05,0.25,0.5,0.75,0.95";
    std::string out, json_out, reps_out;
    std::size_t replications = 500;
    std::uint64_t seed = 0;
    bool no_se = false;
    ModelFlags model;
    FitFlags fit;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("mc", "Monte Carlo study: RB, RMSE and residual summaries");
        c->add_option("--true-params", true_params, "phi,omega,alpha_1..alpha_r,beta_1..beta_s")
            ->capture_default_str();
        c->add_option("--n", sizes, "Sample sizes")->capture_default_str();
        c->add_option("--replications", replications, "Replications per (q, n)")->capture_default_str();
        c->add_option("--q", qs, "Quantile levels")->capture_default_str();
        c->add_option("--seed", seed, "Study seed")->capture_default_str();
        c->add_option("--family", model.family, "Log-symmetric family: " + family_names_list())->capture_default_str();
        c->add_option("--order", model.order, "Model order r,s")->capture_default_str();
        c->add_option("--extra", model.extra, "Shape parameter(s), held fixed in the fits");
        c->add_option("--max-iter", fit.max_iterations, "BFGS iteration limit")->capture_default_str();
        c->add_option("--gtol", fit.gtol, "Gradient max-norm tolerance")->capture_default_str();
        c->add_option("--out", out, "Per (q, n, parameter) CSV (default: stdout)");
        c->add_option("--json", json_out, "Report JSON");
        c->add_option("--replications-out", reps_out, "Per-replication CSV");
        c->add_flag("--no-se", no_se, "Skip standard errors");
        c->callback([this] { cmd = this; });
    }

    int run(const Global& g, std::ostream& out_s, std::ostream&) const {
        McConfig cfg;
        cfg.spec = model.spec();
        if (extra_count(cfg.spec.gen.family) > 0 && cfg.spec.gen.extra.empty())
            throw InputError("mc needs --extra for families with shape parameters");
        try {
            cfg.true_params = AcdParams::from_vector(cfg.spec, number_list(true_params, "--true-params"));
        } catch (const DomainError& e) {
            throw InputError(std::string("--true-params: ") + e.what() + " (expected " +
                             std::to_string(cfg.spec.n_params()) + " values)");
        }
        try {
            cfg.true_params.validate(cfg.spec);
        } catch (const DomainError& e) {
            throw InputError(std::string("--true-params: ") + e.what());
        }
        cfg.sample_sizes = count_list(sizes, "--n");
        cfg.q_values = number_list(qs, "--q");
        cfg.replications = replications;
        cfg.seed = seed;
        cfg.workers = g.workers;
        cfg.fit_options = fit.options(cfg.spec, 1);
        cfg.fit_options.compute_standard_errors = !no_se;
        cfg.keep_replications = !reps_out.empty();
        const auto rep = run_mc_study(cfg);
        emit(out, out_s, [&](std::ostream& o) { io::write_mc_csv(o, rep); });
        if (!json_out.empty())
            emit(json_out, out_s, [&](std::ostream& o) {
                auto doc = io::document("qlsacd.mc", g.deterministic);
                doc["model"] = io::spec_json(cfg.spec);
                doc["replications"] = cfg.replications;
                doc["seed"] = cfg.seed;
                doc["report"] = io::to_json(rep);
                io::write_json(o, doc);
            });
        if (!reps_out.empty()) emit(reps_out, out_s, [&](std::ostream& o) { io::write_mc_replications_csv(o, rep); });
        return kOk;
    }

    inline static const McCmd* cmd = nullptr;
};

struct ForecastCmd {
    std::string input, model_path, mode = "fast", out, summary;
    std::optional<double> q_lo, q_hi;
    std::size_t window = 300;
    ModelFlags model;
    FitFlags fit;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("forecast", "One-step quantile forecast or rolling prediction intervals");
        c->add_option("durations", input, "Duration CSV")->required();
        c->add_option("--model", model_path, "Model JSON; required for the point forecast");
        c->add_option("--q-lo", q_lo, "Lower quantile level of the interval");
        c->add_option("--q-hi", q_hi, "Upper quantile level of the interval");
        c->add_option("--window", window, "Number of final observations to predict")->capture_default_str();
        c->add_option("--mode", mode, "fast reuses one pre-window fit; refit re-estimates every step")
            ->check(CLI::IsMember({"fast", "refit"}))
            ->capture_default_str();
        model.add(c, false);
        fit.add(c);
        c->add_option("--out", out, "Interval CSV (default: stdout)");
        c->add_option("--summary", summary, "Summary JSON (default: stdout for the point forecast)");
        c->callback([this] { cmd = this; });
    }

    int run(const Global& g, std::ostream& out_s, std::ostream& err) const {
        const auto x = read_duration_file(input);
        const auto hash = io::data_hash(x);
        std::optional<io::ModelDocument> m;
        if (!model_path.empty()) m = load_model(model_path);
        if (!q_lo && !q_hi) {
            if (!m) throw InputError("forecast needs --model, or --q-lo and --q-hi for intervals");
            warn_hash(*m, x, err);
            auto doc = io::document("qlsacd.forecast", g.deterministic);
            doc["q"] = m->spec.q;
            doc["psi_next"] = forecast_quantile(m->spec, m->params, m->presample, x);
            doc["n"] = x.size();
            doc["data_hash"] = hash;
            emit(summary, out_s, [&](std::ostream& o) { io::write_json(o, doc); });
            return kOk;
        }
        if (!q_lo || !q_hi) throw InputError("--q-lo and --q-hi go together");
        AcdModelSpec spec = m ? m->spec : model.spec();
        RollingOptions ro;
        ro.mode = parse_rolling_mode(mode);
        ro.fit = fit.options(spec, 1);
        ro.workers = g.workers;
        const auto pi = prediction_interval(x, spec, *q_lo, *q_hi, window, ro);
        emit(out, out_s, [&](std::ostream& o) { io::write_intervals_csv(o, pi); });
        for (const auto& st : pi.steps)
            if (!st.ok) err << "step " << st.index << ": " << st.error << '\n';
        if (pi.n_ok == 0) {
            err << "error: every interval step failed\n";
            return kNumericalError;
        }
        if (!summary.empty())
            emit(summary, out_s, [&](std::ostream& o) {
                auto doc = io::document("qlsacd.intervals", g.deterministic);
                doc["q_lo"] = pi.q_lo;
                doc["q_hi"] = pi.q_hi;
                doc["window"] = pi.window;
                doc["mode"] = mode;
                doc["n_ok"] = pi.n_ok;
                doc["n_inside"] = pi.n_inside;
                doc["coverage"] = pi.coverage;
                doc["data_hash"] = hash;
                io::write_json(o, doc);
            });
        return kOk;
    }

    inline static const ForecastCmd* cmd = nullptr;
};

struct IvarCmd {
    std::string input, model_path, mode = "fast", out, summary, hazard = "last";
    double kappa = 0.0, var_level = 0.01;
    std::size_t window = 0;
    ModelFlags model;
    FitFlags fit;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("ivar", "Intraday value-at-risk forecast and rolling backtest");
        c->add_option("durations", input, "Duration CSV written by `durations`")->required();
        c->add_option("--kappa", kappa, "Threshold used to build the durations")->required();
        c->add_option("--var-level", var_level, "VaR probability in (0, 0.5)")->capture_default_str();
        c->add_option("--window", window, "Backtest the final observations (0: forecast only)")->capture_default_str();
        c->add_option("--mode", mode, "Backtest mode")->check(CLI::IsMember({"fast", "refit"}))->capture_default_str();
        c->add_option("--hazard", hazard, "Forecast hazard under the last in-sample quantile or the forecast one")
            ->check(CLI::IsMember({"last", "next"}))
            ->capture_default_str();
        c->add_option("--model", model_path, "Model JSON; otherwise a model is fitted to the adjusted durations");
        model.add(c);
        fit.add(c);
        c->add_option("--out", out, "Backtest CSV (default: stdout when --window > 0)");
        c->add_option("--summary", summary, "Summary JSON (default: stdout)");
        c->callback([this] { cmd = this; });
    }

    int run(const Global& g, std::ostream& out_s, std::ostream& err) const {
        if (!(kappa > 0.0)) throw InputError("--kappa must be positive");
        if (!(var_level > 0.0 && var_level < 0.5)) throw InputError("--var-level must lie in (0, 0.5)");
        auto in = open_in(input);
        const auto d = read_duration_series(in, kappa);
        const auto hash = io::data_hash(d.adjusted);
        const auto which = hazard == "last" ? ForecastHazard::LastQuantile : ForecastHazard::NextQuantile;
        FittedModel fm;
        AcdModelSpec spec;
        if (!model_path.empty()) {
            const auto m = load_model(model_path);
            warn_hash(m, d.adjusted, err);
            fm = refilter(m, d.adjusted);
            spec = m.spec;
        } else {
            spec = model.spec();
            auto fo = fit.options(spec, g.workers);
            fo.compute_standard_errors = false;
            fm = fit_model(spec, d.adjusted, fo);
            if (!fm.convergence.converged) {
                err << "error: fit did not converge: " << fm.convergence.message << '\n';
                return kNumericalError;
            }
            spec = fm.spec;
        }
        const auto f = ivar_forecast(fm, d, var_level, which);
        auto doc = io::document("qlsacd.ivar", g.deterministic);
        doc["forecast"] = io::to_json(f);
        doc["hazard"] = hazard;
        doc["data_hash"] = hash;
        if (window > 0) {
            RollingOptions ro;
            ro.mode = parse_rolling_mode(mode);
            ro.fit = fit.options(spec, 1);
            ro.workers = g.workers;
            const auto bt = ivar_backtest(d, spec, var_level, window, ro, which);
            emit(out, out_s, [&](std::ostream& o) { io::write_ivar_csv(o, bt, d); });
            doc["backtest"] = json{{"var_level", bt.var_level},
                                   {"window", bt.window},
                                   {"mode", mode},
                                   {"steps_ok", bt.n_ok},
                                   {"hits", bt.hits},
                                   {"hit_rate", bt.hit_rate},
                                   {"binomial_95", {bt.band_lo, bt.band_hi}},
                                   {"calibrated", bt.calibrated}};
        }
        emit(summary, out_s, [&](std::ostream& o) { io::write_json(o, doc); });
        return kOk;
    }

    inline static const IvarCmd* cmd = nullptr;
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Quantile log-symmetric ACD models for financial durations", "qlsacd"};
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.fallthrough();  // global flags may follow the subcommand
    app.set_config("--config", "", "Read options from a key = value file ([subcommand] sections); flags override it");
    app.set_version_flag("--version", kSoftwareVersion);
    app.require_subcommand(1);
    Global g;
    app.add_flag("--deterministic", g.deterministic, "Omit the generated_at timestamp from JSON output");
    app.add_option("--workers", g.workers, "Worker threads for independent fits")->capture_default_str();

    DurationsCmd durations;
    FitCmd fit;
    DiagnoseCmd diagnose;
    McCmd mc;
    ForecastCmd forecast;
    IvarCmd ivar;
    DurationsCmd::cmd = nullptr;
    FitCmd::cmd = nullptr;
    DiagnoseCmd::cmd = nullptr;
    McCmd::cmd = nullptr;
    ForecastCmd::cmd = nullptr;
    IvarCmd::cmd = nullptr;
    durations.add(app);
    fit.add(app);
    diagnose.add(app);
    mc.add(app);
    forecast.add(app);
    ivar.add(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kInputError;
    }
    if (g.workers == 0) g.workers = 1;

    try {
        if (DurationsCmd::cmd) return durations.run(g, out, err);
        if (FitCmd::cmd) return fit.run(g, out, err);
        if (DiagnoseCmd::cmd) return diagnose.run(g, out, err);
        if (McCmd::cmd) return mc.run(g, out, err);
        if (ForecastCmd::cmd) return forecast.run(g, out, err);
        if (IvarCmd::cmd) return ivar.run(g, out, err);
        err << "error: no subcommand\n";
        return kInputError;
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << '\n';
        return kNumericalError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternalError;
    }
}

}  // namespace qlsacd::cli
