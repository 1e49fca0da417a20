#include "garchtail/clusters.hpp"
#include "garchtail/config.hpp"
#include "garchtail/empirical.hpp"
#include "garchtail/io.hpp"
#include "garchtail/pipeline.hpp"
#include "garchtail/spectral.hpp"
#include "garchtail/sre.hpp"
#include "garchtail/stationarity.hpp"
#include "garchtail/tailchain.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

using namespace garchtail;

namespace {

constexpr const char* kVersion = "1.0";

struct Common {
    std::string model;
    std::uint64_t seed = 1;
    unsigned workers = std::max(1U, std::thread::hardware_concurrency());
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_model = true) {
    if (needs_model) cmd->add_option("--model", c.model, "Model file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "Master seed")->capture_default_str();
    cmd->add_option("--workers", c.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--out", c.out, "Directory for JSON and CSV artifacts");
}

std::string out_path(const Common& c, const std::string& file) {
    std::filesystem::create_directories(c.out);
    return (std::filesystem::path(c.out) / file).string();
}

Json envelope(const std::string& command, const Common& c, const ModelFile* m) {
    Json j{{"command", command}, {"version", kVersion}, {"seed", c.seed}, {"workers", c.workers}};
    if (m) j["model"] = Json{{"name", m->name}, {"file", c.model}, {"spec", to_json(m->spec)}};
    return j;
}

void emit(const std::string& command, const Common& c, const Json& j) {
    std::cout << j.dump(2) << '\n';
    if (!c.out.empty()) write_json(out_path(c, command + ".json"), j);
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double x = 0.0;
        if (!detail::parse_number(item, x)) throw Error(ErrorKind::Config, "'" + item + "' in list '" + s + "' is not a number");
        v.push_back(x);
    }
    if (v.empty()) throw Error(ErrorKind::Config, "empty list");
    return v;
}

struct KappaOpts {
    std::size_t J = 10'000;
    double grid_lo = 0.1;
    double grid_hi = 4.0;
    double grid_step = 0.25;
    double tol = 0.005;
    double extend_to = 16.0;
    std::string init = "path";
    std::optional<double> kappa;
};

void add_kappa_opts(CLI::App* cmd, KappaOpts& k, bool allow_fixed) {
    cmd->add_option("--J", k.J, "Particles")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--grid-lo", k.grid_lo, "Smallest k on the scan grid")->capture_default_str();
    cmd->add_option("--grid-hi", k.grid_hi, "Largest k on the scan grid")->capture_default_str();
    cmd->add_option("--grid-step", k.grid_step, "Scan grid step")->capture_default_str();
    cmd->add_option("--tol", k.tol, "Bisection tolerance on kappa")->capture_default_str();
    cmd->add_option("--extend-to", k.extend_to, "Extend the grid up to this k while rho < 1")->capture_default_str();
    cmd->add_option("--init", k.init, "Starting ensemble: path or uniform")
        ->capture_default_str()
        ->check(CLI::IsMember({"path", "uniform"}));
    if (allow_fixed) cmd->add_option("--kappa", k.kappa, "Use this kappa instead of searching");
}

ReportBudget budget_from(const KappaOpts& k, unsigned workers) {
    ReportBudget b;
    b.kappa.rho.spectral.J = k.J;
    b.kappa.grid_lo = k.grid_lo;
    b.kappa.grid_hi = k.grid_hi;
    b.kappa.grid_step = k.grid_step;
    b.kappa.tol_kappa = k.tol;
    b.kappa.extend_to = k.extend_to;
    b.init_from_path = k.init == "path";
    b.kappa_override = k.kappa;
    b.set_workers(workers);
    return b;
}

/// kappa (searched or given) and a converged ensemble at it.
struct Converged {
    double kappa = 0.0;
    std::optional<RhoCurve> curve;
    ConvergenceResult conv;
};

Converged converge(const GarchSpec& spec, const ReportBudget& b, StreamKey key) {
    Converged out;
    ParticleEnsemble ens = starting_ensemble(spec, b, key);
    if (b.kappa_override) {
        out.kappa = *b.kappa_override;
    } else {
        out.curve = find_kappa(spec, b.kappa, std::move(ens), key.domain("kappa"));
        out.kappa = out.curve->kappa_hat;
        ens = std::move(out.curve->ensemble);
        out.curve->ensemble = ParticleEnsemble{};
    }
    out.conv = run_to_convergence(spec, out.kappa, std::move(ens), b.kappa.rho.spectral, key.domain("spectral"));
    return out;
}

int cmd_simulate(const Common& c, std::size_t n, std::size_t burn, bool sre) {
    const auto m = load_model_file(c.model);
    const auto path = sre ? simulate_sre(m.spec, n + burn, burn, StreamKey(c.seed))
                          : simulate(m.spec, n + burn, burn, StreamKey(c.seed));
    std::span<const double> x(path.x2);
    x = x.subspan(burn);
    Json q = Json::object();
    for (double p : {0.5, 0.9, 0.99, 0.999, 0.9999}) {
        std::ostringstream key;
        key << p;
        q[key.str()] = num(empirical_quantile(x, p));
    }
    auto j = envelope("simulate", c, &m);
    j["result"] = Json{{"n", n}, {"burn_in", burn}, {"recursion", sre ? "sre" : "scalar"}, {"x2_quantiles", q},
                       {"x2_max", num(*std::max_element(x.begin(), x.end()))}};
    if (!c.out.empty()) {
        CsvWriter csv(out_path(c, "simulate.csv"), {"t[step]", "x2[squared return]", "sigma2[conditional variance]"});
        for (std::size_t t = burn; t < path.size(); ++t) csv.row(t - burn, path.x2[t], path.sigma2[t]);
    }
    emit("simulate", c, j);
    return 0;
}

int cmd_stationarity(const Common& c, std::size_t t, std::size_t reps, std::size_t naive_t) {
    const auto m = load_model_file(c.model);
    StationarityBudget b{t, reps, c.workers};
    auto res = check_stationarity(m.spec, b, StreamKey(c.seed).domain("stationarity"));
    if (!res.report && res.verdict != Verdict::NotStationary) {
        res.report = gamma_stable(m.spec, t, reps, StreamKey(c.seed).domain("gamma"), c.workers);
    }
    auto j = envelope("stationarity", c, &m);
    j["result"] = to_json(res);
    if (naive_t > 0) {
        const auto traces = gamma_naive(m.spec, naive_t, reps, StreamKey(c.seed), 200, c.workers);
        Json nv = Json::array();
        for (const auto& tr : traces) {
            nv.push_back(Json{{"underflow", tr.underflow}, {"t_reached", tr.t_reached}, {"gamma", num(tr.final_gamma())}});
        }
        j["result"]["gamma_naive"] = nv;
    }
    if (!c.out.empty() && res.report) {
        CsvWriter csv(out_path(c, "gamma_trace.csv"),
                      {"t[step]", "gamma_t[log growth per step]", "eta_t[log growth per step]", "c_condition[log per step]"});
        for (const auto& p : res.report->trace) csv.row(p.t, p.gamma_t, p.eta_t, p.c_condition);
    }
    emit("stationarity", c, j);
    return res.verdict == Verdict::NotStationary ? exit_code(ErrorKind::Explosion) : 0;
}

int cmd_kappa(const Common& c, const KappaOpts& k) {
    const auto m = load_model_file(c.model);
    auto b = budget_from(k, c.workers);
    const auto key = StreamKey(c.seed);
    const auto curve = find_kappa(m.spec, b.kappa, starting_ensemble(m.spec, b, key), key.domain("kappa"));
    auto j = envelope("kappa", c, &m);
    j["result"] = to_json(curve);
    if (!c.out.empty()) {
        CsvWriter csv(out_path(c, "rho_curve.csv"), {"phase", "k[exponent]", "rho[ratio]", "stderr[ratio]", "iterations[count]"});
        for (const auto& p : curve.grid) csv.row("grid", p.k, p.rho, p.stderr, p.iterations);
        for (const auto& p : curve.bisection) csv.row("bisection", p.k, p.rho, p.stderr, p.iterations);
    }
    emit("kappa", c, j);
    return 0;
}

int cmd_spectral(const Common& c, const KappaOpts& k) {
    const auto m = load_model_file(c.model);
    const auto b = budget_from(k, c.workers);
    const auto r = converge(m.spec, b, StreamKey(c.seed));
    const MomentTable table(m.spec.innovation, r.kappa);
    const auto rho = rho_quadrature(r.conv.ensemble, m.spec, table);
    auto j = envelope("spectral", c, &m);
    j["result"] = Json{{"kappa", num(r.kappa)},
                       {"kappa_search", r.curve ? to_json(*r.curve) : Json(nullptr)},
                       {"convergence", to_json(r.conv)},
                       {"rho", to_json(Estimate{rho.rho, rho.stderr})}};
    if (!c.out.empty()) {
        std::vector<std::string> header;
        for (std::size_t i = 0; i < r.conv.ensemble.dim; ++i) header.push_back("theta" + std::to_string(i + 1) + "[share]");
        header.push_back("weight[probability]");
        header.push_back("sigma_share[share]");
        CsvWriter csv(out_path(c, "particles.csv"), header);
        for (std::size_t p = 0; p < r.conv.ensemble.size(); ++p) {
            const auto th = r.conv.ensemble.theta(p);
            std::vector<double> v(th.begin(), th.end());
            v.push_back(r.conv.ensemble.weights[p]);
            v.push_back(r.conv.ensemble.sigma_share[p]);
            csv.row_values(v);
        }
    }
    emit("spectral", c, j);
    return 0;
}

struct ChainOpts {
    std::size_t N = 100'000;
    std::size_t T = 1000;
    std::size_t tau_max = 25;
    std::size_t i_max = 200;
    std::string condition = "x2";
    std::size_t keep = 0;
};

ChainConfig chain_config(const ChainOpts& o, unsigned workers) {
    ChainConfig cfg;
    cfg.N = o.N;
    cfg.T = o.T;
    cfg.tau_max = o.tau_max;
    cfg.condition = parse_condition(o.condition);
    cfg.workers = workers;
    return cfg;
}

int cmd_tailchain(const Common& c, const KappaOpts& k, const ChainOpts& o) {
    const auto m = load_model_file(c.model);
    const auto b = budget_from(k, c.workers);
    const auto key = StreamKey(c.seed);
    const auto r = converge(m.spec, b, key);
    auto cfg = chain_config(o, c.workers);
    const auto batch = batch_chains(m.spec, r.kappa, r.conv.ensemble, cfg, key.domain("chains"));
    auto j = envelope("tailchain", c, &m);
    j["result"] = Json{{"kappa", num(r.kappa)}, {"T", o.T}, {"condition", o.condition}, {"summary", to_json(batch.summary)}};
    if (!c.out.empty() && o.keep > 0) {
        ChainConfig kc = cfg;
        kc.N = std::min(o.keep, o.N);
        kc.keep_chains = true;
        const auto kept = batch_chains(m.spec, r.kappa, r.conv.ensemble, kc, key.domain("chains"));
        CsvWriter csv(out_path(c, "chains.csv"), {"chain[index]", "t[step]", "r0[radius]", "x2hat[threshold units]",
                                                   "sigma2hat[threshold units]"});
        for (std::size_t i = 0; i < kept.chains.size(); ++i) {
            const auto& ch = kept.chains[i];
            for (std::size_t t = 0; t <= ch.stopped_at; ++t) csv.row(i, t, ch.r0, ch.x2hat[t], ch.sigma2hat[t]);
        }
    }
    emit("tailchain", c, j);
    return 0;
}

void write_cluster_csv(const Common& c, const ClusterReport& r) {
    CsvWriter chi(out_path(c, "extremogram.csv"), {"tau[lag]", "chi_x2[probability]", "chi_x2_stderr[probability]",
                                                    "chi_up[probability]", "chi_lo[probability]"});
    for (std::size_t t = 0; t < r.chi_x2.size(); ++t) {
        chi.row(t, r.chi_x2[t].value, r.chi_x2[t].stderr, r.chi_up[t].value, r.chi_lo[t].value);
    }
    CsvWriter pmf(out_path(c, "cluster_sizes.csv"), {"size[exceedances]", "theta_ladder[probability]", "pi_x2[probability]",
                                                      "pi_up[probability]", "pi_lo[probability]"});
    for (std::size_t i = 0; i < r.pi_x2.size(); ++i) {
        pmf.row(i + 1, r.theta_ladder[i].value, r.pi_x2[i].value, r.pi_up[i].value, r.pi_lo[i].value);
    }
}

int cmd_clusters(const Common& c, const KappaOpts& k, const ChainOpts& o) {
    const auto m = load_model_file(c.model);
    const auto b = budget_from(k, c.workers);
    const auto key = StreamKey(c.seed);
    const auto r = converge(m.spec, b, key);
    auto cfg = chain_config(o, c.workers);
    cfg.condition = Condition::OnX2;
    const auto [summary, T] = extinct_chains(m.spec, r.kappa, r.conv.ensemble, cfg, b.max_T, key.domain("chains"));
    const auto rep = cluster_report(summary, delta_eval(m.spec, r.kappa, r.conv.ensemble),
                                    delta_breiman(m.spec.innovation, r.kappa), o.i_max);
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
    auto j = envelope("clusters", c, &m);
    j["result"] = Json{{"kappa", num(r.kappa)}, {"T", T}, {"report", to_json(rep)}};
    if (!c.out.empty()) write_cluster_csv(c, rep);
    emit("clusters", c, j);
    return 0;
}

struct ValidateOpts {
    std::size_t n = 1'000'000;
    std::size_t burn = 10'000;
    std::string m_list = "100,1000";
    std::string u_list = "0.99,0.995,0.999,0.9995,0.9999";
    std::string chi_list = "0.99,0.999,0.9999";
    std::size_t tau_max = 25;
    double qq_quantile = 0.999;
    std::string r_grid = "1,1.25,1.5,2,2.5,3,4,5,6,8";
};

int cmd_validate(const Common& c, const ValidateOpts& o) {
    const auto m = load_model_file(c.model);
    const auto key = StreamKey(c.seed);
    const auto path = simulate(m.spec, o.n + o.burn, o.burn, key);
    std::span<const double> x(path.x2);
    x = x.subspan(o.burn);
    Json runs = Json::array();
    std::vector<RunsEstimate> all;
    std::size_t idx = 0;
    for (double q : parse_list(o.u_list)) {
        for (double mm : parse_list(o.m_list)) {
            const auto e = runs_estimator(x, empirical_quantile(x, q), static_cast<std::size_t>(mm), key.sub(idx++));
            auto je = to_json(e);
            je["quantile"] = q;
            runs.push_back(je);
            all.push_back(e);
        }
    }
    Json chis = Json::array();
    std::vector<std::pair<double, std::vector<double>>> chi_rows;
    for (double q : parse_list(o.chi_list)) {
        const auto chi = empirical_extremogram(x, empirical_quantile(x, q), o.tau_max);
        chis.push_back(Json{{"quantile", q}, {"chi", to_json(chi)}});
        chi_rows.emplace_back(q, chi);
    }
    const auto qq = tail_qq(x, o.qq_quantile, parse_list(o.r_grid));
    auto j = envelope("validate", c, &m);
    j["result"] = Json{{"n", o.n}, {"runs", runs}, {"extremogram", chis}, {"tail_qq", to_json(qq)}};
    if (!c.out.empty()) {
        CsvWriter r(out_path(c, "runs.csv"), {"quantile[level]", "u[squared return]", "m[steps]", "theta_tilde[index]",
                                               "ci_lo[index]", "ci_hi[index]", "n_exceed[count]"});
        std::size_t i = 0;
        for (double q : parse_list(o.u_list)) {
            for (std::size_t k = 0; k < parse_list(o.m_list).size(); ++k, ++i) {
                const auto& e = all[i];
                r.row(q, e.u, e.m, e.theta_tilde, e.ci95.first, e.ci95.second, e.n_exceed);
            }
        }
        CsvWriter ch(out_path(c, "extremogram_empirical.csv"), {"quantile[level]", "tau[lag]", "chi[probability]"});
        for (const auto& [q, chi] : chi_rows) {
            for (std::size_t t = 0; t < chi.size(); ++t) ch.row(q, t, chi[t]);
        }
        CsvWriter t(out_path(c, "tail_qq.csv"), {"log_r[log ratio]", "log_survival_ratio[log probability]"});
        for (std::size_t k = 0; k < qq.log_r.size(); ++k) t.row(qq.log_r[k], qq.log_ratio[k]);
    }
    emit("validate", c, j);
    return 0;
}

struct ReportOpts {
    KappaOpts kappa;
    ChainOpts chains;
    std::size_t t = 30'000;
    std::size_t reps = 10;
};

ReportBudget report_budget(const ReportOpts& o, unsigned workers) {
    auto b = budget_from(o.kappa, workers);
    b.gamma.t = o.t;
    b.gamma.replicates = o.reps;
    b.chains = chain_config(o.chains, workers);
    b.chains.condition = Condition::OnX2;
    b.i_max = o.chains.i_max;
    b.set_workers(workers);
    return b;
}

int cmd_report(const Common& c, const ReportOpts& o) {
    const auto m = load_model_file(c.model);
    const auto row = run_report(m, report_budget(o, c.workers), StreamKey(c.seed));
    for (const auto& w : row.clusters.warnings) std::cerr << "warning: " << w << '\n';
    auto j = envelope("report", c, &m);
    j["result"] = to_json(row);
    if (!m.expected.empty() && row.stationarity.verdict != Verdict::NotStationary) {
        j["result"]["comparison"] = table_comparison(row, m.expected);
    }
    if (!c.out.empty() && row.stationarity.verdict != Verdict::NotStationary) {
        CsvWriter csv(out_path(c, "report.csv"), {"model[name]", "gamma[log growth]", "eta[log growth]", "kappa[index]",
                                                   "theta_x2[index]", "theta_up[index]", "theta_lo[index]", "delta[probability]"});
        csv.row(row.name, row.gamma_kappa, row.eta_kappa, row.kappa, row.clusters.theta_x2.value,
                row.clusters.theta_up.value, row.clusters.theta_lo.value, row.clusters.delta.value);
        write_cluster_csv(c, row.clusters);
    }
    emit("report", c, j);
    return row.stationarity.verdict == Verdict::NotStationary ? exit_code(ErrorKind::Explosion) : 0;
}

struct ContourOpts {
    ReportOpts report;
    std::string innovation = "gaussian";
    double nu = 3.0;
    double xi = 0.0;
    std::string panel = "alpha1-beta1";
    std::string x_list = "0.1,0.2,0.3,0.4,0.5";
    std::string y_list = "0.35,0.5,0.65,0.8";
    double fixed = 0.05;
    double alpha0 = 1e-5;
};

int cmd_contour(const Common& c, const ContourOpts& o) {
    const auto kind = parse_innovation_kind(o.innovation);
    const Innovation inn = kind == InnovationKind::Gaussian ? standardize(kind) : standardize(kind, o.nu, o.xi);
    const bool first = o.panel == "alpha1-beta1";
    auto b = report_budget(o.report, c.workers);
    Json grid = Json::array();
    std::vector<std::vector<double>> rows;
    std::size_t idx = 0;
    for (double y : parse_list(o.y_list)) {
        for (double x : parse_list(o.x_list)) {
            const std::vector<double> alpha = first ? std::vector<double>{x, o.fixed} : std::vector<double>{o.fixed, x};
            const std::vector<double> beta = first ? std::vector<double>{y, o.fixed} : std::vector<double>{o.fixed, y};
            ModelFile m;
            m.spec = make_spec(2, 2, o.alpha0, alpha, beta, inn);
            m.name = "grid" + std::to_string(idx);
            Json point{{"x", x}, {"y", y}, {"phi", m.spec.phi()}};
            if (m.spec.phi() >= 1.0) {
                point["skipped"] = "phi >= 1";
                grid.push_back(point);
                ++idx;
                continue;
            }
            TableRow row;
            try {
                row = run_report(m, b, StreamKey(c.seed).sub(idx++));
            } catch (const Error& e) {
                point["skipped"] = e.what();
                grid.push_back(point);
                continue;
            }
            point["kappa"] = num(row.kappa);
            point["theta_x2"] = to_json(row.clusters.theta_x2);
            point["theta_up"] = to_json(row.clusters.theta_up);
            grid.push_back(point);
            rows.push_back({x, y, m.spec.phi(), row.kappa, row.clusters.theta_x2.value, row.clusters.theta_up.value,
                            row.clusters.theta_up.stderr});
        }
    }
    auto j = envelope("contour", c, nullptr);
    j["result"] = Json{{"panel", o.panel}, {"fixed", o.fixed}, {"innovation", std::string(to_string(kind))}, {"grid", grid}};
    if (!c.out.empty()) {
        const std::string xs = first ? "alpha1" : "alpha2";
        const std::string ys = first ? "beta1" : "beta2";
        CsvWriter csv(out_path(c, "contour.csv"), {xs + "[coefficient]", ys + "[coefficient]", "phi[sum]", "kappa[index]",
                                                   "theta_x2[index]", "theta_up[index]", "theta_up_stderr[index]"});
        for (const auto& r : rows) csv.row_values(r);
    }
    emit("contour", c, j);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Extremal properties of GARCH(p,q) processes"};
    app.require_subcommand(1);
    std::function<int()> run;

    Common sim_c;
    std::size_t sim_n = 1'000'000, sim_burn = 10'000;
    bool sim_sre = false;
    auto* sim = app.add_subcommand("simulate", "Simulate a path of X2 and sigma2");
    add_common(sim, sim_c);
    sim->add_option("--n", sim_n, "Values kept after burn-in")->capture_default_str();
    sim->add_option("--burn", sim_burn, "Burn-in length")->capture_default_str();
    sim->add_flag("--sre", sim_sre, "Iterate the matrix recursion instead of the scalar one");
    sim->callback([&] { run = [&] { return cmd_simulate(sim_c, sim_n, sim_burn, sim_sre); }; });

    Common st_c;
    std::size_t st_t = 30'000, st_reps = 10, st_naive = 0;
    auto* st = app.add_subcommand("stationarity", "Strict stationarity and the Lyapunov exponent");
    add_common(st, st_c);
    st->add_option("--t", st_t, "Product length")->capture_default_str();
    st->add_option("--reps", st_reps, "Replicates")->capture_default_str();
    st->add_option("--naive-t", st_naive, "Also run the plain matrix product to this length (0 = skip)")->capture_default_str();
    st->callback([&] { run = [&] { return cmd_stationarity(st_c, st_t, st_reps, st_naive); }; });

    Common k_c;
    KappaOpts k_o;
    auto* kc = app.add_subcommand("kappa", "Tail index by the spectral fixed point");
    add_common(kc, k_c);
    add_kappa_opts(kc, k_o, false);
    kc->callback([&] { run = [&] { return cmd_kappa(k_c, k_o); }; });

    Common sp_c;
    KappaOpts sp_o;
    auto* sp = app.add_subcommand("spectral", "Converged spectral ensemble");
    add_common(sp, sp_c);
    add_kappa_opts(sp, sp_o, true);
    sp->callback([&] { run = [&] { return cmd_spectral(sp_c, sp_o); }; });

    Common tc_c;
    KappaOpts tc_k;
    ChainOpts tc_o;
    auto* tc = app.add_subcommand("tailchain", "Forward tail chains");
    add_common(tc, tc_c);
    add_kappa_opts(tc, tc_k, true);
    tc->add_option("--N", tc_o.N, "Chains")->capture_default_str();
    tc->add_option("--T", tc_o.T, "Chain length")->capture_default_str();
    tc->add_option("--taumax", tc_o.tau_max, "Lags in the summary")->capture_default_str();
    tc->add_option("--condition", tc_o.condition, "x2 or sigma2")->capture_default_str()->check(CLI::IsMember({"x2", "sigma2"}));
    tc->add_option("--keep", tc_o.keep, "Write this many full chains to chains.csv")->capture_default_str();
    tc->callback([&] { run = [&] { return cmd_tailchain(tc_c, tc_k, tc_o); }; });

    Common cl_c;
    KappaOpts cl_k;
    ChainOpts cl_o;
    auto* cl = app.add_subcommand("clusters", "Extremogram, cluster sizes, extremal indices and delta");
    add_common(cl, cl_c);
    add_kappa_opts(cl, cl_k, true);
    cl->add_option("--N", cl_o.N, "Chains")->capture_default_str();
    cl->add_option("--T", cl_o.T, "Initial chain length")->capture_default_str();
    cl->add_option("--taumax", cl_o.tau_max, "Largest lag")->capture_default_str();
    cl->add_option("--imax", cl_o.i_max, "Largest cluster size reported")->capture_default_str();
    cl->callback([&] { run = [&] { return cmd_clusters(cl_c, cl_k, cl_o); }; });

    Common va_c;
    ValidateOpts va_o;
    auto* va = app.add_subcommand("validate", "Runs estimator, empirical extremogram and tail QQ from a long path");
    add_common(va, va_c);
    va->add_option("--n", va_o.n, "Path length after burn-in")->capture_default_str();
    va->add_option("--burn", va_o.burn, "Burn-in length")->capture_default_str();
    va->add_option("--m", va_o.m_list, "Run lengths, comma separated")->capture_default_str();
    va->add_option("--quantiles", va_o.u_list, "Threshold quantiles for the runs estimator")->capture_default_str();
    va->add_option("--chi-quantiles", va_o.chi_list, "Threshold quantiles for the extremogram")->capture_default_str();
    va->add_option("--taumax", va_o.tau_max, "Largest lag")->capture_default_str();
    va->add_option("--qq-quantile", va_o.qq_quantile, "Threshold quantile for the tail QQ")->capture_default_str();
    va->add_option("--r-grid", va_o.r_grid, "Ratios r >= 1 for the tail QQ")->capture_default_str();
    va->callback([&] { run = [&] { return cmd_validate(va_c, va_o); }; });

    auto add_report_opts = [](CLI::App* cmd, ReportOpts& o) {
        add_kappa_opts(cmd, o.kappa, true);
        cmd->add_option("--N", o.chains.N, "Chains")->capture_default_str();
        cmd->add_option("--T", o.chains.T, "Initial chain length")->capture_default_str();
        cmd->add_option("--taumax", o.chains.tau_max, "Largest lag")->capture_default_str();
        cmd->add_option("--imax", o.chains.i_max, "Largest cluster size reported")->capture_default_str();
        cmd->add_option("--t", o.t, "Lyapunov product length")->capture_default_str();
        cmd->add_option("--reps", o.reps, "Lyapunov replicates")->capture_default_str();
    };

    Common re_c;
    ReportOpts re_o;
    auto* re = app.add_subcommand("report", "Stationarity, kappa, spectral, tail chains and clusters in one row");
    add_common(re, re_c);
    add_report_opts(re, re_o);
    re->callback([&] { run = [&] { return cmd_report(re_c, re_o); }; });

    Common co_c;
    ContourOpts co_o;
    co_o.report.kappa.J = 4000;
    co_o.report.chains.N = 20'000;
    co_o.report.kappa.init = "uniform";
    auto* co = app.add_subcommand("contour", "theta_up over a GARCH(2,2) parameter grid");
    add_common(co, co_c, false);
    add_report_opts(co, co_o.report);
    co->add_option("--innovation", co_o.innovation, "gaussian, scaled_t or skew_t")->capture_default_str();
    co->add_option("--nu", co_o.nu, "Degrees of freedom")->capture_default_str();
    co->add_option("--xi", co_o.xi, "Skewness")->capture_default_str();
    co->add_option("--panel", co_o.panel, "alpha1-beta1 or alpha2-beta2")
        ->capture_default_str()
        ->check(CLI::IsMember({"alpha1-beta1", "alpha2-beta2"}));
    co->add_option("--x", co_o.x_list, "Grid of the alpha coefficient")->capture_default_str();
    co->add_option("--y", co_o.y_list, "Grid of the beta coefficient")->capture_default_str();
    co->add_option("--fixed", co_o.fixed, "Value of the two held coefficients")->capture_default_str();
    co->callback([&] { run = [&] { return cmd_contour(co_c, co_o); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_code(ErrorKind::Config);
    }
    try {
        return run();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
