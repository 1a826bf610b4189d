#pragma once

#include "qlsacd/csv.hpp"
#include "qlsacd/diagnostics.hpp"
#include "qlsacd/errors.hpp"
#include "qlsacd/estimate.hpp"
#include "qlsacd/ingest.hpp"
#include "qlsacd/risk.hpp"
#include "qlsacd/version.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <iomanip>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace qlsacd::io {

using nlohmann::json;
using csv::format_double;

// FNV-1a over the shortest decimal text of every value; stable across platforms.
inline std::string data_hash(std::span<const double> x) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto eat = [&](char c) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    };
    for (double v : x) {
        for (char c : format_double(v)) eat(c);
        eat(',');
    }
    std::ostringstream os;
    os << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

inline std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

// Common header of every JSON document.
inline json document(const std::string& kind, bool deterministic) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["software_version"] = kSoftwareVersion;
    j["kind"] = kind;
    if (!deterministic) j["generated_at"] = utc_now();
    return j;
}

inline void write_json(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

// NaN and infinities have no JSON literal; they become null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json numbers(std::span<const double> v) {
    json a = json::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

inline json to_json(const InformationCriteria& c) {
    return json{{"aic", number(c.aic)},
                {"bic", number(c.bic)},
                {"caic", number(c.caic)},
                {"hqic", number(c.hqic)},
                {"aicc", number(c.aicc)}};
}

inline json spec_json(const AcdModelSpec& spec) {
    return json{{"family", family_name(spec.gen.family)},
                {"extra", numbers(spec.gen.extra)},
                {"r", spec.r},
                {"s", spec.s},
                {"q", spec.q},
                {"link", "log"}};
}

inline json params_json(const AcdParams& p) {
    return json{{"phi", p.phi}, {"omega", p.omega}, {"alpha", numbers(p.alpha)}, {"beta", numbers(p.beta)}};
}

inline json model_json(const FittedModel& fm, const std::string& hash) {
    json j;
    j["model"] = spec_json(fm.spec);
    j["params"] = params_json(fm.params);
    if (fm.se) {
        const auto names = parameter_names(fm.spec);
        json se;
        for (std::size_t i = 0; i < names.size(); ++i) se[names[i]] = number((*fm.se)[i]);
        j["standard_errors"] = se;
    } else {
        j["standard_errors"] = nullptr;
    }
    if (!fm.se_diagnostic.empty()) j["standard_error_diagnostic"] = fm.se_diagnostic;
    j["n"] = fm.n;
    j["n_free"] = fm.n_free;
    j["loglik_kernel"] = number(fm.loglik_kernel);
    j["loglik_full"] = number(fm.loglik_full);
    j["criteria"] = to_json(fm.criteria);
    j["psi_next"] = number(fm.psi_next);
    j["presample"] = json{{"x", numbers(fm.presample.x)}, {"psi", numbers(fm.presample.psi)}};
    j["convergence"] = json{{"converged", fm.convergence.converged},
                            {"iterations", fm.convergence.iterations},
                            {"evaluations", fm.convergence.evaluations},
                            {"restarts", fm.convergence.restarts},
                            {"gradient_max_norm", number(fm.convergence.gradient_max_norm)},
                            {"message", fm.convergence.message}};
    if (!fm.profile.empty()) {
        json prof = json::array();
        for (const auto& p : fm.profile) {
            json e{{"extra", numbers(p.extra)}, {"converged", p.converged}};
            e["loglik_full"] = p.loglik_full ? number(*p.loglik_full) : json(nullptr);
            if (!p.error.empty()) e["error"] = p.error;
            prof.push_back(e);
        }
        j["profile"] = prof;
    }
    j["data_hash"] = hash;
    return j;
}

// What a saved model needs to be reused on (possibly new) data.
struct ModelDocument {
    AcdModelSpec spec;
    AcdParams params;
    Presample presample;
    std::size_t n = 0;
    std::string data_hash;
    bool converged = false;
};

inline ModelDocument model_from_json(const json& j) {
    try {
        if (j.at("schema_version").get<int>() != kSchemaVersion)
            throw InputError("model file has schema_version " + j.at("schema_version").dump() + ", expected " +
                             std::to_string(kSchemaVersion));
        ModelDocument m;
        const auto& mj = j.at("model");
        m.spec.gen.family = parse_family(mj.at("family").get<std::string>());
        m.spec.gen.extra = mj.at("extra").get<std::vector<double>>();
        m.spec.r = mj.at("r").get<std::size_t>();
        m.spec.s = mj.at("s").get<std::size_t>();
        m.spec.q = mj.at("q").get<double>();
        m.spec.validate();
        const auto& pj = j.at("params");
        m.params.phi = pj.at("phi").get<double>();
        m.params.omega = pj.at("omega").get<double>();
        m.params.alpha = pj.at("alpha").get<std::vector<double>>();
        m.params.beta = pj.at("beta").get<std::vector<double>>();
        m.params.validate(m.spec);
        m.presample.x = j.at("presample").at("x").get<std::vector<double>>();
        m.presample.psi = j.at("presample").at("psi").get<std::vector<double>>();
        m.n = j.at("n").get<std::size_t>();
        m.data_hash = j.value("data_hash", "");
        m.converged = j.at("convergence").at("converged").get<bool>();
        return m;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed model file: ") + e.what());
    } catch (const DomainError& e) {
        throw InputError(std::string("invalid model file: ") + e.what());
    }
}

inline json to_json(const ResidualSummary& s) {
    return json{{"mean", number(s.mean)},
                {"median", number(s.median)},
                {"sd", number(s.sd)},
                {"skewness", number(s.skewness)},
                {"excess_kurtosis", number(s.excess_kurtosis)}};
}

inline json to_json(const ReferenceCheck& c) {
    json items = json::array();
    for (const auto& it : c.items)
        items.push_back(json{{"statistic", it.name},
                             {"value", number(it.value)},
                             {"target", it.target},
                             {"tolerance", it.tolerance},
                             {"pass", it.pass}});
    return json{{"targets", json(std::vector<double>(kExpTargets.begin(), kExpTargets.end()))},
                {"items", items},
                {"ks_statistic", number(c.ks_statistic)},
                {"ks_pvalue", number(c.ks_pvalue)},
                {"ks_pass", c.ks_pass},
                {"summary_pass", c.summary_pass},
                {"pass", c.pass}};
}

inline void write_residual_csv(std::ostream& out, const ResidualSeries& r) {
    out << "index,r_gcs,capped\n";
    for (std::size_t t = 0; t < r.r_gcs.size(); ++t)
        out << t << ',' << format_double(r.r_gcs[t]) << ',' << static_cast<int>(r.capped[t]) << '\n';
}

inline void write_envelope_csv(std::ostream& out, const Envelope& e) {
    out << "order,theoretical,observed,lower,center,upper\n";
    for (std::size_t i = 0; i < e.observed.size(); ++i)
        out << i + 1 << ',' << format_double(e.theoretical[i]) << ',' << format_double(e.observed[i]) << ','
            << format_double(e.lower[i]) << ',' << format_double(e.center[i]) << ',' << format_double(e.upper[i])
            << '\n';
}

inline constexpr const char* kMcCsvHeader =
    "q,n,parameter,truth,mean_estimate,rb,rmse,n_success,n_failed,res_mean,res_median,res_sd,res_skewness,"
    "res_excess_kurtosis";

inline void write_mc_csv(std::ostream& out, const McReport& rep) {
    out << kMcCsvHeader << '\n';
    for (const auto& c : rep.cells) {
        const auto r = c.residual_means.as_array();
        std::string tail;
        for (double v : r) tail += ',' + format_double(v);
        for (const auto& p : c.parameters)
            out << format_double(c.q) << ',' << c.n << ',' << p.parameter << ',' << format_double(p.truth) << ','
                << format_double(p.acc.mean_estimate) << ',' << format_double(p.acc.rb) << ','
                << format_double(p.acc.rmse) << ',' << c.n_success << ',' << c.n_failed << tail << '\n';
        if (c.parameters.empty())
            out << format_double(c.q) << ',' << c.n << ",,,,,," << c.n_success << ',' << c.n_failed << ",,,,,\n";
    }
}

inline void write_mc_replications_csv(std::ostream& out, const McReport& rep) {
    out << "q,n,replication,seed,ok";
    for (const auto& p : rep.parameter_names) out << ',' << p;
    for (const auto& p : rep.parameter_names) out << ",se_" << p;
    out << ",res_mean,res_median,res_sd,res_skewness,res_excess_kurtosis,error\n";
    const std::size_t k = rep.parameter_names.size();
    for (const auto& r : rep.replications) {
        out << format_double(r.q) << ',' << r.n << ',' << r.rep << ',' << r.seed << ',' << (r.ok ? 1 : 0);
        for (std::size_t i = 0; i < k; ++i) out << ',' << (r.ok ? format_double(r.estimate[i]) : "");
        for (std::size_t i = 0; i < k; ++i) out << ',' << (r.ok && r.se ? format_double((*r.se)[i]) : "");
        for (double v : r.residuals.as_array()) out << ',' << (r.ok ? format_double(v) : "");
        out << ',' << csv::quote(r.error) << '\n';
    }
}

inline json to_json(const McReport& rep) {
    json cells = json::array();
    for (const auto& c : rep.cells) {
        json params = json::array();
        for (const auto& p : c.parameters)
            params.push_back(json{{"parameter", p.parameter},
                                  {"truth", p.truth},
                                  {"mean_estimate", number(p.acc.mean_estimate)},
                                  {"rb", number(p.acc.rb)},
                                  {"rmse", number(p.acc.rmse)}});
        cells.push_back(json{{"q", c.q},
                             {"n", c.n},
                             {"n_success", c.n_success},
                             {"n_failed", c.n_failed},
                             {"parameters", params},
                             {"residual_summary_means", to_json(c.residual_means)}});
    }
    return json{{"parameter_names", rep.parameter_names}, {"truth", numbers(rep.truth)}, {"cells", cells}};
}

inline void write_intervals_csv(std::ostream& out, const PredictionIntervals& pi) {
    out << "index,duration,lower,upper,inside,ok\n";
    for (const auto& st : pi.steps)
        out << st.index << ',' << format_double(st.x) << ',' << (st.ok ? format_double(st.lower) : "") << ','
            << (st.ok ? format_double(st.upper) : "") << ',' << (st.inside ? 1 : 0) << ',' << (st.ok ? 1 : 0) << '\n';
}

inline void write_ivar_csv(std::ostream& out, const IvarBacktest& bt, const DurationSeries& d) {
    out << "event_time,return,ivar,hit\n";
    for (const auto& st : bt.steps) {
        if (!st.ok) continue;
        out << csv::quote(d.event_labels[st.index + 1]) << ',' << format_double(st.ret) << ','
            << format_double(st.ivar) << ',' << (st.hit ? 1 : 0) << '\n';
    }
}

inline json to_json(const IvarForecast& f) {
    return json{{"psi_next", number(f.psi_next)},
                {"sigma2_next", number(f.sigma2_next)},
                {"sigma2_saturated", f.sigma2_saturated},
                {"ivar", number(f.ivar)},
                {"var_level", f.var_level},
                {"q_level", f.q_level},
                {"q_alpha", number(f.q_alpha)},
                {"n_used", f.n_used},
                {"n_excluded", f.n_excluded}};
}

inline json to_json(const DescriptiveStats& s) {
    json rows = json::array();
    for (const auto& [label, v] : s.rows()) rows.push_back(json{{"statistic", label}, {"value", number(v)}});
    return rows;
}

inline void write_stats_table(std::ostream& out, const std::vector<std::pair<std::string, DescriptiveStats>>& cols) {
    std::size_t w = 0;
    for (const auto& [label, v] : cols.front().second.rows()) w = std::max(w, label.size());
    out << std::left << std::setw(static_cast<int>(w) + 2) << "";
    for (const auto& c : cols) out << std::right << std::setw(20) << c.first;
    out << '\n';
    const auto n_rows = cols.front().second.rows().size();
    for (std::size_t i = 0; i < n_rows; ++i) {
        out << std::left << std::setw(static_cast<int>(w) + 2) << cols.front().second.rows()[i].first;
        for (const auto& c : cols) out << std::right << std::setw(20) << format_double(c.second.rows()[i].second);
        out << '\n';
    }
}

}  // namespace qlsacd::io
