#include "catch_amalgamated.hpp"

#include "garchtail/clusters.hpp"

#include <cmath>
#include <numeric>
#include <random>

using namespace garchtail;
using Catch::Approx;

namespace {

const auto kGauss = standardize(InnovationKind::Gaussian);
const auto kT3 = standardize(InnovationKind::ScaledT, 3.0);
Innovation skew(double xi) { return standardize(InnovationKind::SkewT, 3.0, xi); }

GarchSpec model_a(Innovation inn) { return make_spec(2, 2, 1e-5, {0.3, 0.15}, {0.2, 0.1}, inn); }
GarchSpec model_b(Innovation inn) { return make_spec(2, 2, 1e-5, {0.07, 0.04}, {0.8, 0.08}, inn); }
GarchSpec model_d(Innovation inn) { return make_spec(2, 2, 1e-5, {0.07, 0.03}, {0.8, 0.1}, inn); }

ParticleEnsemble converged(const GarchSpec& spec, double kappa, std::uint64_t seed, std::size_t J = 4000) {
    SpectralConfig cfg;
    cfg.J = J;
    return run_to_convergence(spec, kappa, uniform_ensemble(spec, J, StreamKey(seed)), cfg, StreamKey(seed + 1)).ensemble;
}

struct Run {
    ParticleEnsemble ensemble;
    ChainSummary summary;
};

Run chains(const GarchSpec& spec, double kappa, std::uint64_t seed, std::size_t N = 20'000) {
    auto ens = converged(spec, kappa, seed);
    ChainConfig cfg;
    cfg.N = N;
    cfg.tau_max = 10;
    auto s = batch_chains(spec, kappa, ens, cfg, StreamKey(seed + 2)).summary;
    return {std::move(ens), std::move(s)};
}

ChainSummary synthetic(const std::vector<std::uint64_t>& hist) {
    ChainSummary s;
    s.groups = 1;
    s.tau_max = 0;
    s.count_hist = {hist};
    s.n = {std::accumulate(hist.begin(), hist.end(), std::uint64_t{0})};
    s.exceed_lag = {{s.n[0]}};
    return s;
}

std::vector<double> random_pmf(std::mt19937_64& rng, std::size_t K) {
    std::exponential_distribution<double> e;
    std::vector<double> p(K);
    double total = 0.0;
    for (auto& x : p) total += x = e(rng) * std::exp(-0.2 * static_cast<double>(&x - p.data()));
    for (auto& x : p) x /= total;
    return p;
}

}  // namespace

TEST_CASE("monotone projection pools violators", "[clusters][pava]") {
    const auto fit = detail::nonincreasing_fit({0.5, 0.2, 0.3, 0.1, 0.1, 0.2});
    const std::vector<double> ref{0.5, 0.25, 0.25, 0.4 / 3.0, 0.4 / 3.0, 0.4 / 3.0};
    REQUIRE(fit.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(fit[i] == Approx(ref[i]));
    CHECK(std::accumulate(fit.begin(), fit.end(), 0.0) == Approx(1.4));
}

TEST_CASE("isolated exceedances give theta = 1", "[clusters][ladder]") {
    const auto spec = make_spec(0, 1, 1e-5, {1e-12}, {}, kGauss);
    const auto ens = uniform_ensemble(spec, 10, StreamKey(1));
    ChainConfig cfg;
    cfg.N = 2000;
    cfg.T = 50;
    const auto s = batch_chains(spec, 2.0, ens, cfg, StreamKey(2)).summary;
    const auto lad = cluster_ladder(s);
    CHECK(lad.theta.value == 1.0);
    CHECK(lad.pi[0].value == 1.0);
    CHECK(lad.pi[1].value == 0.0);
    CHECK_FALSE(lad.truncation_warning);
}

TEST_CASE("ladder from a known histogram", "[clusters][ladder]") {
    // Counts 1, 2, 3 with probabilities 1/2, 1/3, 1/6: theta P(S >= i) with S in {1,2,3}.
    const auto lad = cluster_ladder(synthetic({0, 3000, 2000, 1000}), 5);
    CHECK(lad.theta.value == Approx(0.5));
    CHECK(lad.pi[0].value == Approx(1.0 / 3.0));
    CHECK(lad.pi[1].value == Approx(1.0 / 3.0));
    CHECK(lad.pi[2].value == Approx(1.0 / 3.0));
    CHECK(lad.mean_size.value == Approx(2.0));
    CHECK(lad.pi[3].value == 0.0);
}

TEST_CASE("truncation warning fires on long clusters", "[clusters][ladder]") {
    std::vector<std::uint64_t> hist(302, 0);
    for (std::size_t i = 1; i <= 300; ++i) hist[i] = 10;
    const auto lad = cluster_ladder(synthetic(hist), 200);
    CHECK(lad.truncation_warning);
    CHECK(lad.mass_beyond == Approx(1.0));
    CHECK(lad.pi.size() == 200);
}

TEST_CASE("ladder invariants on model A", "[clusters][ladder][property]") {
    for (const auto& [inn, kappa] : {std::pair{kT3, 1.27}, std::pair{kGauss, 2.37}}) {
        const auto run = chains(model_a(inn), kappa, 10);
        const auto lad = cluster_ladder(run.summary);
        for (std::size_t i = 1; i < lad.theta_i.size(); ++i) CHECK(lad.theta_i[i].value <= lad.theta_i[i - 1].value);
        double total = 0.0, size = 0.0;
        for (std::size_t i = 0; i < lad.pi_full.size(); ++i) {
            CHECK(lad.pi_full[i] >= 0.0);
            total += lad.pi_full[i];
            size += static_cast<double>(i + 1) * lad.pi_full[i];
        }
        CHECK(total == Approx(1.0).epsilon(1e-12));
        CHECK(lad.theta.value > 0.0);
        CHECK(lad.theta.value <= 1.0);
        CHECK(std::abs(size * lad.theta.value - 1.0) < 3.0 * lad.theta.stderr * size + 1e-12);
        const auto chi = extremogram_limit(run.summary);
        CHECK(chi[0].value == 1.0);
    }
}

TEST_CASE("model A Gaussian extremal index", "[clusters][table]") {
    const auto run = chains(model_a(kGauss), 2.37, 20);
    const auto rep = cluster_report(run.summary, {0.5, 0.0}, 0.5);
    CHECK(std::abs(rep.theta_x2.value - 0.59) < 0.03);
    CHECK(std::abs(rep.theta_up.value - 0.72) < 0.03);
    CHECK(rep.theta_up.value == rep.theta_lo.value);
    for (std::size_t t = 0; t < rep.chi_x2.size(); ++t) {
        CHECK(rep.chi_up[t].value + rep.chi_lo[t].value == Approx(rep.chi_x2[t].value).margin(1e-15));
    }
    CHECK(std::min(rep.theta_up.value, rep.theta_lo.value) >= rep.theta_x2.value - 3.0 * rep.theta_x2.stderr);
}

TEST_CASE("heavier tails weaken extremal dependence", "[clusters][extremogram]") {
    const auto gauss = extremogram_limit(chains(model_a(kGauss), 2.37, 30).summary);
    const auto t3 = extremogram_limit(chains(model_a(kT3), 1.27, 40).summary);
    for (std::size_t t = 1; t <= 3; ++t) CHECK(gauss[t].value > t3[t].value + 3.0 * std::hypot(gauss[t].stderr, t3[t].stderr));
}

TEST_CASE("models B and D peak at lag 2", "[clusters][extremogram]") {
    for (const auto& [spec, kappa] : {std::pair{model_b(kT3), 1.26}, std::pair{model_d(kT3), 1.0}}) {
        const auto chi = extremogram_limit(chains(spec, kappa, 50).summary);
        CHECK(chi[2].value > chi[1].value);
        for (std::size_t t = 3; t <= 10; ++t) CHECK(chi[t].value <= chi[t - 1].value + 3.0 * chi[t].stderr);
    }
}

TEST_CASE("delta for symmetric and skewed innovations", "[clusters][delta]") {
    const auto ens = converged(model_a(kT3), 1.27, 60, 1000);
    const auto sym = delta_eval(model_a(kT3), 1.27, ens);
    CHECK(sym.value == 0.5);
    CHECK(delta_breiman(kGauss, 2.0) == 0.5);

    const auto spec = model_a(skew(1.0));
    const auto d = delta_eval(spec, 1.23, converged(spec, 1.23, 61));
    CHECK(std::abs(d.value - 0.80) < 0.02);
    CHECK(std::abs(d.value - delta_breiman(spec.innovation, 1.23)) < 4.0 * d.stderr + 0.005);
}

TEST_CASE("delta is symmetric in the skewness", "[clusters][delta][property]") {
    for (double xi : {0.3, 1.0, 2.0}) {
        for (double kappa : {0.5, 1.0, 1.4}) {
            CHECK(delta_breiman(skew(xi), kappa) + delta_breiman(skew(-xi), kappa) == Approx(1.0).epsilon(1e-9));
        }
    }
    for (double xi : {0.5, 1.0}) {
        const auto up = model_a(skew(xi));
        const auto dn = model_a(skew(-xi));
        const auto a = delta_eval(up, 1.23, converged(up, 1.23, 70));
        const auto b = delta_eval(dn, 1.23, converged(dn, 1.23, 72));
        CHECK(std::abs(a.value + b.value - 1.0) < 4.0 * std::hypot(a.stderr, b.stderr));
    }
}

TEST_CASE("thinning preserves mass and the mean-size identity", "[clusters][signed][property]") {
    std::mt19937_64 rng(80);
    std::uniform_real_distribution<double> unif(0.05, 0.95);
    for (int rep = 0; rep < 50; ++rep) {
        const auto pi = random_pmf(rng, 1 + rep % 40);
        // theta is the reciprocal mean cluster size of pi.
        double mean = 0.0;
        for (std::size_t i = 0; i < pi.size(); ++i) mean += static_cast<double>(i + 1) * pi[i];
        const double theta = 1.0 / mean;
        const double d = unif(rng);
        for (double p : {d, 1.0 - d}) {
            const auto t = thin_clusters(pi, theta, p);
            double total = 0.0, size = 0.0;
            for (std::size_t j = 0; j < t.pi.size(); ++j) {
                CHECK(t.pi[j] >= 0.0);
                total += t.pi[j];
                size += static_cast<double>(j + 1) * t.pi[j];
            }
            CHECK(total == Approx(1.0).epsilon(1e-12));
            CHECK(size == Approx(p / (theta * (1.0 - t.Pi))).epsilon(1e-12));
            CHECK(t.theta * size == Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("thinning limits", "[clusters][signed]") {
    const std::vector<double> pi{0.5, 0.3, 0.2};
    const auto keep_all = thin_clusters(pi, 0.4, 1.0);
    CHECK(keep_all.Pi == 0.0);
    CHECK(keep_all.theta == Approx(0.4));
    for (std::size_t j = 0; j < pi.size(); ++j) CHECK(keep_all.pi[j] == Approx(pi[j]));
    CHECK_THROWS_AS(thin_clusters(pi, 0.4, 0.0), Error);
    // Upper and lower agree at delta = 1/2.
    CHECK(thin_clusters(pi, 0.4, 0.5).theta == thin_clusters(pi, 0.4, 1.0 - 0.5).theta);
    // Single exceedances are kept with probability p, so theta_U = theta for pi = (1).
    CHECK(thin_clusters({1.0}, 0.7, 0.3).theta == Approx(0.7));
}
