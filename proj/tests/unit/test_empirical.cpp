#include "catch_amalgamated.hpp"

#include "garchtail/clusters.hpp"
#include "garchtail/empirical.hpp"
#include "garchtail/sre.hpp"

#include <cmath>
#include <random>

using namespace garchtail;
using Catch::Approx;

namespace {

const auto kGauss = standardize(InnovationKind::Gaussian);
const auto kT3 = standardize(InnovationKind::ScaledT, 3.0);

GarchSpec model_a(Innovation inn) { return make_spec(2, 2, 1e-5, {0.3, 0.15}, {0.2, 0.1}, inn); }
GarchSpec model_e(Innovation inn) { return make_spec(0, 2, 1e-5, {1.2, 0.5}, {}, inn); }

std::span<const double> body(const ProcessPath& p) {
    return std::span<const double>(p.x2).subspan(p.burn_in);
}

}  // namespace

TEST_CASE("runs estimator on constructed paths", "[empirical][runs]") {
    std::vector<double> isolated(10'000, 0.0);
    for (std::size_t j = 50; j < isolated.size(); j += 100) isolated[j] = 5.0;
    const auto one = runs_estimator(isolated, 1.0, 20, StreamKey(1));
    CHECK(one.theta_tilde == 1.0);
    CHECK(one.n_exceed == 100);

    std::vector<double> pairs(10'000, 0.0);
    for (std::size_t j = 50; j + 1 < pairs.size(); j += 100) pairs[j] = pairs[j + 1] = 5.0;
    const auto half = runs_estimator(pairs, 1.0, 20, StreamKey(1));
    CHECK(half.theta_tilde == Approx(0.5).margin(0.01));
    CHECK(half.ci95.first <= half.theta_tilde);
    CHECK(half.ci95.second >= half.theta_tilde);

    CHECK_THROWS_AS(runs_estimator(isolated, 10.0, 20, StreamKey(1)), Error);
}

TEST_CASE("runs estimator is rank based", "[empirical][runs][property]") {
    const auto path = simulate(model_a(kT3), 210'000, 10'000, StreamKey(2));
    const auto x = body(path);
    const double u = empirical_quantile(x, 0.999);
    std::vector<double> logged(x.size());
    std::transform(x.begin(), x.end(), logged.begin(), [](double v) { return std::log(v); });
    const auto a = runs_estimator(x, u, 100, StreamKey(3));
    const auto b = runs_estimator(logged, std::log(u), 100, StreamKey(3));
    CHECK(a.theta_tilde == b.theta_tilde);
    CHECK(a.n_exceed == b.n_exceed);
    CHECK(a.ci95 == b.ci95);
    CHECK(a.theta_tilde >= 0.0);
    CHECK(a.theta_tilde <= 1.0);
    CHECK(a.ci95.first <= a.theta_tilde);
    CHECK(a.theta_tilde <= a.ci95.second);
}

TEST_CASE("independent heavy-tailed noise has theta near 1", "[empirical][runs]") {
    const auto spec = make_spec(0, 1, 1.0, {1e-12}, {}, kT3);
    const auto path = simulate(spec, 1'010'000, 10'000, StreamKey(4));
    const auto x = body(path);
    const auto est = runs_estimator(x, empirical_quantile(x, 0.999), 100, StreamKey(5));
    // With 1000 exceedances and runs of 100 the expected count of chance neighbours is about 0.1 per exceedance.
    CHECK(est.theta_tilde > 0.85);
    CHECK(est.ci95.second >= 0.88);
}

TEST_CASE("empirical extremogram", "[empirical][extremogram]") {
    const auto spec = make_spec(0, 1, 1.0, {1e-12}, {}, kGauss);
    const auto path = simulate(spec, 1'010'000, 10'000, StreamKey(6));
    const auto x = body(path);
    const double u = empirical_quantile(x, 0.99);
    const auto chi = empirical_extremogram(x, u, 5);
    CHECK(chi[0] == 1.0);
    const double n_ex = 0.01 * static_cast<double>(x.size());
    for (std::size_t t = 1; t <= 5; ++t) {
        CHECK(chi[t] >= 0.0);
        CHECK(chi[t] <= 1.0);
        CHECK(std::abs(chi[t] - 0.01) < 4.0 * std::sqrt(0.01 * 0.99 / n_ex));
    }
}

TEST_CASE("empirical extremogram approaches the tail-chain limit", "[empirical][extremogram][chains]") {
    const auto spec = model_a(kGauss);
    const double kappa = 2.37;
    SpectralConfig scfg;
    scfg.J = 4000;
    const auto ens = run_to_convergence(spec, kappa, uniform_ensemble(spec, 4000, StreamKey(7)), scfg, StreamKey(8)).ensemble;
    ChainConfig cfg;
    cfg.N = 50'000;
    cfg.tau_max = 3;
    const auto limit = extremogram_limit(batch_chains(spec, kappa, ens, cfg, StreamKey(9)).summary);
    const auto path = simulate(spec, 10'010'000, 10'000, StreamKey(10));
    const auto x = body(path);
    const auto emp = empirical_extremogram(x, empirical_quantile(x, 0.9999), 3);
    const double n_ex = 1e-4 * static_cast<double>(x.size());
    for (std::size_t t = 1; t <= 3; ++t) {
        // Exceedances cluster, so the binomial error is inflated by the mean cluster size (about 1.7).
        const double se = std::sqrt(1.7 * limit[t].value * (1.0 - limit[t].value) / n_ex);
        CHECK(std::abs(emp[t] - limit[t].value) < 4.0 * se);
    }
}

TEST_CASE("tail QQ slope of an exact Pareto sample", "[empirical][qq]") {
    const double kappa = 1.5;
    auto rng = StreamKey(11).rng();
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> x(200'000);
    for (auto& v : x) v = std::pow(1.0 - unif(rng), -1.0 / kappa);
    const auto qq = tail_qq(x, 0.99, {1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 12.0});
    CHECK(qq.n_exceed == Approx(2000).margin(1));
    CHECK(qq.log_r.size() == 7);
    CHECK(std::abs(qq.slope + kappa) < 3.0 * qq.slope_stderr);
    CHECK(qq.slope_stderr < 0.1);
}

TEST_CASE("tail QQ slopes of GARCH paths", "[empirical][qq]") {
    const std::vector<double> grid{1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0};
    {
        const auto path = simulate(model_a(kGauss), 10'010'000, 10'000, StreamKey(12));
        const auto qq = tail_qq(body(path), 0.99998, grid);
        CHECK(std::abs(qq.slope + 2.37) < 3.0 * qq.slope_stderr);
    }
    {
        const auto path = simulate(model_e(kGauss), 1'010'000, 10'000, StreamKey(13));
        const auto qq = tail_qq(body(path), 0.999, {1.0, 2.0, 4.0, 8.0, 16.0, 32.0});
        CHECK(qq.slope > -1.0);
    }
}
