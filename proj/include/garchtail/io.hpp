#pragma once

#include "garchtail/clusters.hpp"
#include "garchtail/empirical.hpp"
#include "garchtail/pipeline.hpp"
#include "garchtail/spectral.hpp"
#include "garchtail/stationarity.hpp"
#include "garchtail/tailchain.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace garchtail {

using Json = nlohmann::ordered_json;

/// Finite doubles as numbers, anything else as null.
inline Json num(double v) { return std::isfinite(v) ? Json(v == 0.0 ? 0.0 : v) : Json(nullptr); }

inline Json to_json(const Estimate& e) { return Json{{"value", num(e.value)}, {"stderr", num(e.stderr)}}; }

inline Json to_json(const std::vector<Estimate>& v) {
    Json a = Json::array();
    for (const auto& e : v) a.push_back(to_json(e));
    return a;
}

inline Json to_json(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

inline Json to_json(const GarchSpec& s) {
    const auto& inn = s.innovation;
    Json i{{"kind", std::string(to_string(inn.kind))}};
    if (inn.kind != InnovationKind::Gaussian) {
        i["nu"] = inn.nu;
        i["xi"] = inn.xi;
        i["mu"] = inn.mu;
        i["omega"] = inn.omega;
    }
    return Json{{"p", s.p},           {"q", s.q},       {"alpha0", s.alpha0}, {"alpha", to_json(s.alpha)},
                {"beta", to_json(s.beta)}, {"phi", s.phi()}, {"innovation", i}};
}

inline Json to_json(const GammaReport& g) {
    Json trace = Json::array();
    for (const auto& p : g.trace) {
        trace.push_back(Json{{"t", p.t}, {"gamma_t", num(p.gamma_t)}, {"eta_t", num(p.eta_t)},
                             {"c_condition", num(p.c_condition)}, {"c_spread", num(p.c_spread)}});
    }
    return Json{{"gamma", num(g.gamma_rescaled)},
                {"gamma_stderr", num(g.mc_stderr)},
                {"eta", num(g.eta)},
                {"eta_stderr", num(g.eta_stderr)},
                {"eta_plain", num(g.eta_plain)},
                {"e_log_lambda", num(g.e_log_lambda)},
                {"e_log_lambda_mc", num(g.e_log_lambda_mc)},
                {"e_log_lambda_mc_stderr", num(g.e_log_lambda_mc_stderr)},
                {"t", g.t_used},
                {"replicates", g.replicates},
                {"stable_flags", g.stable_flags},
                {"condition_suspect", g.condition_suspect},
                {"trace", trace}};
}

inline Json to_json(const StationarityResult& r) {
    Json j{{"verdict", to_string(r.verdict)}, {"reason", r.reason}};
    j["gamma_report"] = r.report ? to_json(*r.report) : Json(nullptr);
    return j;
}

inline Json to_json(const RhoPoint& p) {
    return Json{{"k", num(p.k)},
                {"rho", num(p.rho)},
                {"stderr", num(p.stderr)},
                {"iterations", p.iterations},
                {"converged_at", p.converged_at}};
}

inline Json to_json(const RhoCurve& c) {
    Json grid = Json::array(), bis = Json::array();
    for (const auto& p : c.grid) grid.push_back(to_json(p));
    for (const auto& p : c.bisection) bis.push_back(to_json(p));
    return Json{{"kappa", num(c.kappa_hat)}, {"bracket", Json::array({num(c.bracket_lo), num(c.bracket_hi)})},
                {"sign_changes", c.sign_changes}, {"grid", grid}, {"bisection", bis}};
}

inline Json to_json(const ConvergenceResult& r) {
    Json trace = Json::array();
    for (const auto& s : r.trace) {
        trace.push_back(Json{{"s", s.s},
                             {"ks_marginal", num(s.ks_marginal)},
                             {"ks_weights", num(s.ks_weights)},
                             {"threshold_marginal", num(s.threshold_marginal)},
                             {"threshold_weights", num(s.threshold_weights)},
                             {"ess", num(s.ess)},
                             {"pass", s.pass}});
    }
    return Json{{"converged_at", r.converged_at}, {"declared_at", r.declared_at}, {"particles", r.ensemble.size()},
                {"ess", num(r.ensemble.ess())}, {"trace", trace}};
}

inline Json to_json(const ChainSummary& s) {
    Json lags = Json::array();
    const auto n = static_cast<double>(s.total());
    for (std::size_t t = 0; t <= s.tau_max; ++t) {
        std::uint64_t c = 0;
        for (const auto& g : s.exceed_lag) c += g[t];
        lags.push_back(Json{{"tau", t}, {"exceedances", c}, {"fraction", n > 0 ? c / n : 0.0}});
    }
    std::vector<std::uint64_t> hist;
    for (const auto& g : s.count_hist) {
        if (hist.size() < g.size()) hist.resize(g.size(), 0);
        for (std::size_t i = 0; i < g.size(); ++i) hist[i] += g[i];
    }
    while (!hist.empty() && hist.back() == 0) hist.pop_back();
    return Json{{"chains", s.total()},  {"proposals", s.proposals}, {"alive_at_T", s.alive_at_T},
                {"mean_steps", n > 0 ? static_cast<double>(s.steps) / n : 0.0}, {"groups", s.groups},
                {"exceedances_per_lag", lags}, {"count_histogram", hist}};
}

inline Json to_json(const ClusterReport& r) {
    return Json{{"chains", r.chains},
                {"alive_at_T", num(r.alive_at_T)},
                {"theta_x2", to_json(r.theta_x2)},
                {"mean_cluster_size", to_json(r.mean_cluster_size)},
                {"delta", to_json(r.delta)},
                {"delta_breiman", num(r.delta_breiman)},
                {"theta_up", to_json(r.theta_up)},
                {"theta_lo", to_json(r.theta_lo)},
                {"Pi_up", to_json(r.Pi_up)},
                {"Pi_lo", to_json(r.Pi_lo)},
                {"chi_x2", to_json(r.chi_x2)},
                {"chi_up", to_json(r.chi_up)},
                {"chi_lo", to_json(r.chi_lo)},
                {"theta_ladder", to_json(r.theta_ladder)},
                {"pi_x2", to_json(r.pi_x2)},
                {"pi_up", to_json(r.pi_up)},
                {"pi_lo", to_json(r.pi_lo)},
                {"ladder_mass_beyond", num(r.ladder_mass_beyond)},
                {"truncation_warning", r.truncation_warning},
                {"warnings", r.warnings}};
}

/// Reference-table quantities next to the stored expected values and their tolerances.
inline Json table_comparison(const TableRow& row, const std::map<std::string, double>& expected) {
    static const std::map<std::string, double> tol{{"gamma", 0.02},    {"eta", 0.01},      {"kappa", 0.05},
                                                   {"theta_x2", 0.03}, {"theta_up", 0.03}, {"theta_lo", 0.03},
                                                   {"delta", 0.02}};
    const std::map<std::string, double> got{{"gamma", row.gamma_kappa},
                                            {"eta", row.eta_kappa},
                                            {"kappa", row.kappa},
                                            {"theta_x2", row.clusters.theta_x2.value},
                                            {"theta_up", row.clusters.theta_up.value},
                                            {"theta_lo", row.clusters.theta_lo.value},
                                            {"delta", row.clusters.delta.value}};
    Json out = Json::object();
    for (const auto& f : expected_fields()) {
        auto it = expected.find(f);
        if (it == expected.end()) continue;
        const double v = got.at(f);
        out[f] = Json{{"computed", num(v)},
                      {"expected", it->second},
                      {"tolerance", tol.at(f)},
                      {"within", std::abs(v - it->second) <= tol.at(f) + 1e-12}};
    }
    return out;
}

inline Json to_json(const TableRow& r) {
    Json j{{"name", r.name}, {"phi", num(r.phi)}, {"stationarity", to_json(r.stationarity)}};
    if (r.stationarity.verdict == Verdict::NotStationary) return j;
    j["row"] = Json{{"gamma", num(r.gamma_kappa)},
                    {"eta", num(r.eta_kappa)},
                    {"kappa", num(r.kappa)},
                    {"theta_x2", num(r.clusters.theta_x2.value)},
                    {"theta_up", num(r.clusters.theta_up.value)},
                    {"theta_lo", num(r.clusters.theta_lo.value)},
                    {"delta", num(r.clusters.delta.value)}};
    j["gamma_simulation"] = to_json(r.gamma);
    j["kappa_search"] = r.curve ? to_json(*r.curve) : Json(nullptr);
    j["converged_at"] = r.converged_at;
    j["T"] = r.T_used;
    j["chains"] = to_json(r.chains);
    j["clusters"] = to_json(r.clusters);
    return j;
}

inline Json to_json(const RunsEstimate& e) {
    return Json{{"u", num(e.u)},
                {"m", e.m},
                {"theta_tilde", num(e.theta_tilde)},
                {"n_exceed", e.n_exceed},
                {"ci95", Json::array({num(e.ci95.first), num(e.ci95.second)})}};
}

inline Json to_json(const TailQQ& q) {
    return Json{{"x", num(q.x)},         {"n_exceed", q.n_exceed},           {"log_r", to_json(q.log_r)},
                {"log_ratio", to_json(q.log_ratio)}, {"slope", num(q.slope)}, {"slope_stderr", num(q.slope_stderr)}};
}

/// Minimal CSV writer: header row first, values with 17 significant digits.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw Error(ErrorKind::Config, "cannot write '" + path + "'");
        out_.precision(17);
        row_strings(header);
    }

    template <typename... Ts>
    void row(const Ts&... values) {
        bool first = true;
        ((out_ << (first ? "" : ",") << values, first = false), ...);
        out_ << '\n';
    }

    void row_values(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << values[i];
        out_ << '\n';
    }

private:
    void row_strings(const std::vector<std::string>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << values[i];
        out_ << '\n';
    }

    std::ofstream out_;
};

inline void write_json(const std::string& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Config, "cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

}  // namespace garchtail
