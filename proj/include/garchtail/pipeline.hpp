#pragma once

#include "garchtail/clusters.hpp"
#include "garchtail/config.hpp"
#include "garchtail/spectral.hpp"
#include "garchtail/stationarity.hpp"
#include "garchtail/tailchain.hpp"

#include <optional>
#include <string>

namespace garchtail {

/// Desk-scale defaults: J = 10^4 particles, N = 10^5 chains, 10 gamma replicates at t = 3 x 10^4.
struct ReportBudget {
    StationarityBudget gamma{30'000, 10, 1};
    KappaConfig kappa = [] {
        KappaConfig k;
        k.rho.spectral.J = 10'000;
        k.extend_to = 16.0;
        return k;
    }();
    bool init_from_path = true;
    InitConfig init;
    ChainConfig chains;
    std::size_t i_max = 200;
    std::size_t max_T = 16'000;  ///< T is doubled from chains.T until at most 10^-3 of chains are alive at T
    std::optional<double> kappa_override;  ///< skip the search and use this kappa
    unsigned workers = 1;

    void set_workers(unsigned w) {
        workers = w;
        gamma.workers = w;
        kappa.rho.spectral.workers = w;
        chains.workers = w;
    }
};

/// One reference-table row plus the intermediate results behind it.
struct TableRow {
    std::string name;
    double phi = 0.0;
    StationarityResult stationarity;
    GammaReport gamma;
    double gamma_kappa = 0.0;  ///< E ln lambda + eta with eta = -ln E lambda^kappa / kappa
    double eta_kappa = 0.0;
    std::optional<RhoCurve> curve;
    double kappa = 0.0;
    std::size_t converged_at = 0;
    std::size_t T_used = 0;
    ChainSummary chains;
    ClusterReport clusters;
};

inline ParticleEnsemble starting_ensemble(const GarchSpec& spec, const ReportBudget& b, StreamKey key) {
    if (b.init_from_path) return init_ensemble(spec, b.init, key.domain("init"));
    return uniform_ensemble(spec, b.kappa.rho.spectral.J, key.domain("init"));
}

/// Chains at kappa from a converged ensemble, doubling T until extinction holds or max_T is reached.
inline std::pair<ChainSummary, std::size_t> extinct_chains(const GarchSpec& spec, double kappa,
                                                           const ParticleEnsemble& ens, ChainConfig cfg,
                                                           std::size_t max_T, StreamKey key) {
    for (;;) {
        auto s = batch_chains(spec, kappa, ens, cfg, key).summary;
        const double alive = static_cast<double>(s.alive_at_T) / static_cast<double>(std::max<std::uint64_t>(1, s.total()));
        if (alive <= kTruncationMass || cfg.T * 2 > max_T) return {std::move(s), cfg.T};
        cfg.T *= 2;
    }
}

/**
 * @brief stationarity -> kappa -> spectral -> tail chains -> clusters for one model.
 *
 * Streams: "gamma", "init", "kappa", "spectral", "chains" under the master key.
 * A model that is not stationary stops after the stationarity step with kappa = 0.
 */
inline TableRow run_report(const ModelFile& model, const ReportBudget& b, StreamKey key) {
    const GarchSpec& spec = model.spec;
    TableRow row;
    row.name = model.name;
    row.phi = spec.phi();
    row.stationarity = check_stationarity(spec, b.gamma, key.domain("stationarity"));
    if (row.stationarity.verdict == Verdict::NotStationary) return row;
    row.gamma = gamma_stable(spec, b.gamma.t, b.gamma.replicates, key.domain("gamma"), b.gamma.workers);

    ParticleEnsemble ens;
    if (b.kappa_override) {
        row.kappa = *b.kappa_override;
        ens = starting_ensemble(spec, b, key);
    } else {
        row.curve = find_kappa(spec, b.kappa, starting_ensemble(spec, b, key), key.domain("kappa"));
        row.kappa = row.curve->kappa_hat;
        ens = std::move(row.curve->ensemble);
        row.curve->ensemble = ParticleEnsemble{};
    }
    row.eta_kappa = eta_from_kappa(spec, row.kappa);
    row.gamma_kappa = gamma_combined(spec, row.kappa);

    auto conv = run_to_convergence(spec, row.kappa, std::move(ens), b.kappa.rho.spectral, key.domain("spectral"));
    row.converged_at = conv.converged_at;
    const auto delta = delta_eval(spec, row.kappa, conv.ensemble);
    const double delta_limit = delta_breiman(spec.innovation, row.kappa);

    auto [summary, T] = extinct_chains(spec, row.kappa, conv.ensemble, b.chains, b.max_T, key.domain("chains"));
    row.T_used = T;
    row.chains = std::move(summary);
    row.clusters = cluster_report(row.chains, delta, delta_limit, b.i_max);
    return row;
}

}  // namespace garchtail
