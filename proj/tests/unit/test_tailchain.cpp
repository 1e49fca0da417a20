#include "catch_amalgamated.hpp"

#include "garchtail/tailchain.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace garchtail;
using Catch::Approx;

namespace {

const auto kGauss = standardize(InnovationKind::Gaussian);
const auto kT3 = standardize(InnovationKind::ScaledT, 3.0);

GarchSpec model_a(Innovation inn) { return make_spec(2, 2, 1e-5, {0.3, 0.15}, {0.2, 0.1}, inn); }
GarchSpec model_c(Innovation inn) { return make_spec(1, 1, 1e-5, {0.1}, {0.9}, inn); }

ParticleEnsemble converged(const GarchSpec& spec, double kappa, std::uint64_t seed, std::size_t J = 4000) {
    SpectralConfig cfg;
    cfg.J = J;
    return run_to_convergence(spec, kappa, uniform_ensemble(spec, J, StreamKey(seed)), cfg, StreamKey(seed + 1)).ensemble;
}

double spearman(std::vector<double> a, std::vector<double> b) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return v[i] < v[j]; });
        std::vector<double> r(v.size());
        for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k);
        return r;
    };
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    const double m = (static_cast<double>(a.size()) - 1.0) / 2.0;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (ra[i] - m) * (rb[i] - m);
        saa += (ra[i] - m) * (ra[i] - m);
        sbb += (rb[i] - m) * (rb[i] - m);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("chains start above the conditioning level", "[tailchain][invariant]") {
    const auto spec = model_a(kGauss);
    const auto ens = converged(spec, 2.37, 1);
    auto rng = StreamKey(2).rng();
    for (int i = 0; i < 500; ++i) {
        const auto ch = sample_chain(spec, 2.37, ens, 200, Condition::OnX2, rng);
        REQUIRE(ch.x2hat.size() == 201);
        CHECK(ch.x2hat[0] > 1.0);
        CHECK(ch.r0 >= 1.0);
        CHECK(std::all_of(ch.x2hat.begin(), ch.x2hat.end(), [](double v) { return v >= 0.0; }));
        CHECK(std::all_of(ch.sigma2hat.begin(), ch.sigma2hat.end(), [](double v) { return v >= 0.0; }));
    }
    for (int i = 0; i < 500; ++i) {
        const auto ch = sample_chain(spec, 2.37, ens, 50, Condition::OnSigma2, rng);
        CHECK(ch.sigma2hat[0] > 1.0);
        CHECK(ch.condition == Condition::OnSigma2);
    }
}

TEST_CASE("proposal radius is Pareto and independent of the angle", "[tailchain][pareto]") {
    const auto spec = model_a(kT3);
    const double kappa = 1.27;
    const auto ens = converged(spec, kappa, 3);
    const TailChainSampler sampler(spec, kappa, ens, ChainConfig{});
    auto rng = StreamKey(4).rng();
    const std::size_t n = 20'000;
    std::vector<double> r(n), theta1(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto pr = sampler.propose(rng);
        r[i] = pr.r0;
        theta1[i] = ens.theta(pr.index)[0];
    }
    std::vector<double> sorted = r;
    std::sort(sorted.begin(), sorted.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ref = 1.0 - std::pow(sorted[i], -kappa);
        ks = std::max({ks, std::abs(ref - static_cast<double>(i) / n), std::abs(ref - static_cast<double>(i + 1) / n)});
    }
    CHECK(ks < 1.63 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(spearman(r, theta1)) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("ARCH(1) chain ratios are alpha Z^2", "[tailchain][arch1]") {
    const double alpha = 0.5;
    const auto spec = make_spec(0, 1, 1e-5, {alpha}, {}, kGauss);
    const auto ens = uniform_ensemble(spec, 100, StreamKey(5));
    ChainConfig cfg;
    cfg.T = 1;
    cfg.stop_level = 0.0;
    const TailChainSampler sampler(spec, 2.0, ens, cfg);
    auto rng = StreamKey(6).rng();
    const std::size_t n = 20'000;
    std::vector<double> ratio(n);
    for (auto& x : ratio) {
        const auto ch = sampler.sample(rng);
        x = ch.x2hat[1] / ch.x2hat[0];
    }
    auto orng = StreamKey(7).rng();
    std::normal_distribution<double> normal;
    std::vector<double> direct(n);
    for (auto& x : direct) {
        const double z = normal(orng);
        x = alpha * z * z;
    }
    CHECK(oracle::ks_two_sample(ratio, direct) < 1.63 * std::sqrt(2.0 / n));
}

TEST_CASE("degenerate ARCH dies after one step", "[tailchain][degenerate]") {
    const auto spec = make_spec(0, 1, 1e-5, {1e-12}, {}, kGauss);
    const auto ens = uniform_ensemble(spec, 10, StreamKey(8));
    auto rng = StreamKey(9).rng();
    for (int i = 0; i < 100; ++i) {
        const auto ch = sample_chain(spec, 2.0, ens, 20, Condition::OnX2, rng);
        CHECK(ch.x2hat[1] < 1e-6);
        CHECK(ch.stopped_at == 1);
        for (std::size_t t = 2; t <= 20; ++t) CHECK(ch.x2hat[t] == 0.0);
    }
}

TEST_CASE("batch summary is worker invariant and extinct by T", "[tailchain][batch]") {
    const auto spec = model_a(kGauss);
    const auto ens = converged(spec, 2.37, 10);
    ChainConfig cfg;
    cfg.N = 20'000;
    cfg.T = 1000;
    cfg.workers = 1;
    const auto one = batch_chains(spec, 2.37, ens, cfg, StreamKey(11)).summary;
    cfg.workers = 4;
    const auto four = batch_chains(spec, 2.37, ens, cfg, StreamKey(11)).summary;
    CHECK(one.exceed_lag == four.exceed_lag);
    CHECK(one.count_hist == four.count_hist);
    CHECK(one.total() == cfg.N);
    CHECK(one.proposals == four.proposals);
    CHECK(static_cast<double>(one.alive_at_T) / cfg.N < 1e-3);
    std::uint64_t lag0 = 0;
    for (const auto& g : one.exceed_lag) lag0 += g[0];
    CHECK(lag0 == cfg.N);
}

TEST_CASE("kept chains agree with the streaming summary", "[tailchain][batch]") {
    const auto spec = model_a(kT3);
    const auto ens = converged(spec, 1.27, 12, 2000);
    ChainConfig cfg;
    cfg.N = 3000;
    cfg.T = 300;
    cfg.tau_max = 5;
    cfg.keep_chains = true;
    const auto batch = batch_chains(spec, 1.27, ens, cfg, StreamKey(13));
    REQUIRE(batch.chains.size() == cfg.N);
    for (std::size_t tau = 0; tau <= cfg.tau_max; ++tau) {
        std::uint64_t direct = 0;
        for (const auto& ch : batch.chains) direct += ch.x2hat[tau] > 1.0 ? 1 : 0;
        std::uint64_t summary = 0;
        for (const auto& g : batch.summary.exceed_lag) summary += g[tau];
        CHECK(direct == summary);
    }
}

TEST_CASE("IGARCH chains decay more slowly than model A", "[tailchain][decay]") {
    ChainConfig cfg;
    cfg.N = 10'000;
    cfg.T = 1000;
    cfg.tau_max = 10;
    auto frac10 = [&](const GarchSpec& spec, double kappa, std::uint64_t seed) {
        const auto ens = converged(spec, kappa, seed);
        const auto s = batch_chains(spec, kappa, ens, cfg, StreamKey(seed + 2)).summary;
        std::uint64_t c = 0;
        for (const auto& g : s.exceed_lag) c += g[10];
        return static_cast<double>(c) / cfg.N;
    };
    CHECK(frac10(model_c(kT3), 1.0, 20) > frac10(model_a(kT3), 1.27, 30) + 0.1);
}
