#pragma once

#include "garchtail/errors.hpp"
#include "garchtail/garch_spec.hpp"
#include "garchtail/innovations.hpp"
#include "garchtail/parallel.hpp"
#include "garchtail/rng.hpp"
#include "garchtail/spectral.hpp"
#include "garchtail/sre.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace garchtail {

enum class Condition { OnX2, OnSigma2 };

inline const char* to_string(Condition c) noexcept { return c == Condition::OnX2 ? "x2" : "sigma2"; }

inline Condition parse_condition(const std::string& s) {
    if (s == "x2") return Condition::OnX2;
    if (s == "sigma2") return Condition::OnSigma2;
    throw Error(ErrorKind::Config, "condition must be x2 or sigma2, got '" + s + "'");
}

/**
 * @brief One realization of the forward tail chain.
 *
 * x2hat[t] = R0 theta_t^(1) and sigma2hat[t] = R0 sigma-component of theta_t, with
 * theta_t = A_t theta_{t-1} left unnormalized. Entries after stopped_at are 0:
 * the chain fell below the extinction level there.
 */
struct TailChain {
    double r0 = 0.0;
    std::vector<double> x2hat;
    std::vector<double> sigma2hat;
    Condition condition = Condition::OnX2;
    std::size_t stopped_at = 0;
};

struct ChainConfig {
    std::size_t T = 1000;
    std::size_t N = 100'000;
    Condition condition = Condition::OnX2;
    double stop_level = 1e-4;         ///< stop once R0 ||theta_t||_1 falls below this; 0 disables
    std::size_t tau_max = 25;         ///< lags tracked by the streaming summary
    std::size_t stall_probe = 10'000'000;  ///< proposals examined before RejectionStall can fire
    unsigned workers = 1;
    bool keep_chains = false;
};

/**
 * @brief Streaming summary of a batch of chains.
 *
 * Counts are kept per group (chains split by block into `groups` parts) so that
 * every functional gets a between-group standard error.
 */
struct ChainSummary {
    std::size_t tau_max = 0;
    std::size_t groups = 0;
    std::vector<std::uint64_t> n;                       ///< chains per group
    std::vector<std::vector<std::uint64_t>> exceed_lag;  ///< [group][tau] chains with x2hat[tau] > 1
    std::vector<std::vector<std::uint64_t>> count_hist;  ///< [group][i] chains with exactly i exceedances in [0, T]
    std::uint64_t proposals = 0;
    std::uint64_t alive_at_T = 0;  ///< chains with x2hat[T] > 1
    std::uint64_t steps = 0;       ///< total propagation steps taken

    [[nodiscard]] std::uint64_t total() const {
        std::uint64_t s = 0;
        for (auto v : n) s += v;
        return s;
    }
};

struct ChainBatch {
    ChainSummary summary;
    std::vector<TailChain> chains;
};

/**
 * @brief Draws tail chains from a converged spectral ensemble.
 *
 * theta_0 is drawn from the ensemble with its weights and R0 = U^(-1/kappa);
 * the pair is rejected until R0 theta_0^(1) > 1 (or the sigma2 analogue).
 */
class TailChainSampler {
public:
    TailChainSampler(const GarchSpec& spec, double kappa, const ParticleEnsemble& ens, const ChainConfig& cfg)
        : spec_(spec), kappa_(kappa), ens_(ens), cfg_(cfg) {
        if (!(kappa > 0.0)) throw Error(ErrorKind::Config, "kappa must be positive");
        if (cfg.T < 1) throw Error(ErrorKind::Config, "T must be at least 1");
        if (ens.size() == 0) throw Error(ErrorKind::TooFewParticles, "empty ensemble");
        cum_.resize(ens.size());
        double acc = 0.0;
        for (std::size_t j = 0; j < ens.size(); ++j) cum_[j] = acc += ens.weights[j];
        total_ = acc;
    }

    struct Proposal {
        double r0;
        std::size_t index;
        bool accepted;
    };

    Proposal propose(Rng& rng) const {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        double u = unif(rng);
        while (u == 0.0) u = unif(rng);
        const double r0 = std::pow(u, -1.0 / kappa_);
        const double w = total_ * unif(rng);
        auto idx = static_cast<std::size_t>(std::upper_bound(cum_.begin(), cum_.end(), w) - cum_.begin());
        idx = std::min(idx, ens_.size() - 1);
        const double level = cfg_.condition == Condition::OnX2 ? ens_.theta(idx)[0] : sigma_share(idx);
        return {r0, idx, r0 * level > 1.0};
    }

    /// Runs one chain; calls visit(t, x2hat_t, sigma2hat_t) for t = 0..stop. Returns {r0, stop, proposals}.
    template <typename Visit>
    std::tuple<double, std::size_t, std::uint64_t> run(Rng& rng, InnovationSampler& draw, Visit&& visit) const {
        std::uint64_t tried = 0;
        Proposal pr{};
        do {
            pr = propose(rng);
            ++tried;
            if (tried >= cfg_.stall_probe && !pr.accepted) {
                throw Error(ErrorKind::RejectionStall,
                            "no acceptance in " + std::to_string(tried) + " proposals; ensemble and kappa disagree");
            }
        } while (!pr.accepted);
        const std::size_t d = ens_.dim;
        std::vector<double> cur(ens_.theta(pr.index).begin(), ens_.theta(pr.index).end());
        std::vector<double> next(d);
        const double r0 = pr.r0;
        visit(std::size_t{0}, r0 * cur[0], r0 * sigma_share(pr.index));
        std::size_t t = 1;
        for (; t <= cfg_.T; ++t) {
            const double s2 = r0 * drive(spec_, cur);
            apply(spec_, cur, draw.squared(rng), next);
            std::swap(cur, next);
            visit(t, r0 * cur[0], s2);
            if (cfg_.stop_level > 0.0) {
                double norm = 0.0;
                for (double v : cur) norm += v;
                if (r0 * norm < cfg_.stop_level) break;
            }
        }
        return {r0, std::min(t, cfg_.T), tried};
    }

    TailChain sample(Rng& rng) const {
        InnovationSampler draw(spec_.innovation);
        TailChain ch;
        ch.condition = cfg_.condition;
        ch.x2hat.assign(cfg_.T + 1, 0.0);
        ch.sigma2hat.assign(cfg_.T + 1, 0.0);
        auto [r0, stop, tried] = run(rng, draw, [&](std::size_t t, double x2, double s2) {
            ch.x2hat[t] = x2;
            ch.sigma2hat[t] = s2;
        });
        (void)tried;
        ch.r0 = r0;
        ch.stopped_at = stop;
        return ch;
    }

    [[nodiscard]] const ChainConfig& config() const noexcept { return cfg_; }

private:
    double sigma_share(std::size_t j) const {
        return spec_.p >= 1 ? ens_.theta(j)[spec_.sigma_index()] : ens_.sigma_share[j];
    }

    GarchSpec spec_;
    double kappa_;
    const ParticleEnsemble& ens_;
    ChainConfig cfg_;
    std::vector<double> cum_;
    double total_ = 0.0;
};

inline TailChain sample_chain(const GarchSpec& spec, double kappa, const ParticleEnsemble& ens, std::size_t T,
                              Condition condition, Rng& rng) {
    ChainConfig cfg;
    cfg.T = T;
    cfg.condition = condition;
    return TailChainSampler(spec, kappa, ens, cfg).sample(rng);
}

inline constexpr std::size_t kChainBlock = 1024;
inline constexpr std::size_t kChainGroups = 20;

/**
 * @brief N independent chains summarized on the fly.
 *
 * Chain i uses stream key.sub(block of i); blocks are merged in index order, so
 * the summary does not depend on the worker count.
 */
inline ChainBatch batch_chains(const GarchSpec& spec, double kappa, const ParticleEnsemble& ens, const ChainConfig& cfg,
                               StreamKey key) {
    const TailChainSampler sampler(spec, kappa, ens, cfg);
    const Blocks blocks{cfg.N, kChainBlock};
    const std::size_t nb = blocks.count();
    const std::size_t hist_len = cfg.T + 2;

    struct BlockResult {
        std::uint64_t n = 0;
        std::vector<std::uint64_t> lag;
        std::vector<std::pair<std::size_t, std::uint64_t>> hist;  // sparse (count, chains)
        std::uint64_t proposals = 0;
        std::uint64_t alive = 0;
        std::uint64_t steps = 0;
        std::vector<TailChain> chains;
    };
    std::vector<BlockResult> results(nb);
    parallel_for(nb, cfg.workers, [&](std::size_t b) {
        auto rng = key.domain("tailchain").sub(b).rng();
        InnovationSampler draw(spec.innovation);
        BlockResult& out = results[b];
        out.lag.assign(cfg.tau_max + 1, 0);
        std::vector<std::uint64_t> hist(hist_len, 0);
        for (std::size_t i = blocks.begin(b); i < blocks.end(b); ++i) {
            std::size_t count = 0;
            bool alive = false;
            TailChain ch;
            if (cfg.keep_chains) {
                ch.condition = cfg.condition;
                ch.x2hat.assign(cfg.T + 1, 0.0);
                ch.sigma2hat.assign(cfg.T + 1, 0.0);
            }
            auto [r0, stop, tried] = sampler.run(rng, draw, [&](std::size_t t, double x2, double s2) {
                const bool ex = x2 > 1.0;
                if (ex) ++count;
                if (t <= cfg.tau_max && ex) ++out.lag[t];
                if (t == cfg.T) alive = ex;
                if (cfg.keep_chains) {
                    ch.x2hat[t] = x2;
                    ch.sigma2hat[t] = s2;
                }
            });
            ++hist[std::min(count, hist_len - 1)];
            ++out.n;
            out.proposals += tried;
            out.steps += stop;
            if (alive) ++out.alive;
            if (cfg.keep_chains) {
                ch.r0 = r0;
                ch.stopped_at = stop;
                out.chains.push_back(std::move(ch));
            }
        }
        for (std::size_t i = 0; i < hist_len; ++i) {
            if (hist[i] != 0) out.hist.emplace_back(i, hist[i]);
        }
    });

    ChainBatch batch;
    ChainSummary& s = batch.summary;
    s.tau_max = cfg.tau_max;
    s.groups = std::min(kChainGroups, nb);
    s.n.assign(s.groups, 0);
    s.exceed_lag.assign(s.groups, std::vector<std::uint64_t>(cfg.tau_max + 1, 0));
    s.count_hist.assign(s.groups, std::vector<std::uint64_t>(hist_len, 0));
    for (std::size_t b = 0; b < nb; ++b) {
        const std::size_t g = b % s.groups;
        auto& r = results[b];
        s.n[g] += r.n;
        for (std::size_t t = 0; t <= cfg.tau_max; ++t) s.exceed_lag[g][t] += r.lag[t];
        for (auto [i, c] : r.hist) s.count_hist[g][i] += c;
        s.proposals += r.proposals;
        s.alive_at_T += r.alive;
        s.steps += r.steps;
        if (cfg.keep_chains) {
            for (auto& ch : r.chains) batch.chains.push_back(std::move(ch));
        }
    }
    return batch;
}

}  // namespace garchtail
