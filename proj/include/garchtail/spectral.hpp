#pragma once

#include "garchtail/errors.hpp"
#include "garchtail/garch_spec.hpp"
#include "garchtail/innovations.hpp"
#include "garchtail/parallel.hpp"
#include "garchtail/rng.hpp"
#include "garchtail/sre.hpp"
#include "garchtail/stats.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace garchtail {

/**
 * @brief Weighted particle approximation of the spectral measure H.
 *
 * Particles live on the unit simplex of the state dimension. sigma_share holds
 * the sigma2 coordinate on the same scale; for p >= 1 it is coordinate q, for
 * ARCH models it is carried separately (NaN until the first propagation step
 * when the ensemble was not built from a path).
 */
struct ParticleEnsemble {
    std::size_t dim = 0;
    std::vector<double> particles;
    std::vector<double> weights;
    std::vector<double> sigma_share;
    std::size_t iteration = 0;
    double kappa_used = 0.0;
    double raw_weight_mean = std::numeric_limits<double>::quiet_NaN();

    [[nodiscard]] std::size_t size() const noexcept { return weights.size(); }

    [[nodiscard]] std::span<const double> theta(std::size_t j) const noexcept {
        return {particles.data() + j * dim, dim};
    }

    [[nodiscard]] std::vector<double> coordinate(std::size_t i) const {
        std::vector<double> out(size());
        for (std::size_t j = 0; j < size(); ++j) out[j] = particles[j * dim + i];
        return out;
    }

    [[nodiscard]] double ess() const { return detail::effective_sample_size(weights); }

    /// Largest violation of the simplex and weight constraints.
    [[nodiscard]] double invariant_error() const {
        double worst = 0.0;
        double wsum = 0.0;
        for (std::size_t j = 0; j < size(); ++j) {
            double s = 0.0;
            for (double x : theta(j)) {
                if (x < 0.0) worst = std::max(worst, -x);
                s += x;
            }
            worst = std::max(worst, std::abs(s - 1.0));
            if (weights[j] < 0.0) worst = std::max(worst, -weights[j]);
            wsum += weights[j];
        }
        return std::max(worst, std::abs(wsum - 1.0));
    }
};

struct InitConfig {
    std::size_t n = 11'000'000;
    std::size_t n_b = 10'000;
    double u_quantile = 0.9999;
    std::size_t min_particles = 500;
};

/**
 * @brief Initial ensemble from a long simulated path.
 *
 * Keeps Theta_t = Y_t / ||Y_t||_1 for the states whose norm lies above the
 * empirical u_quantile of ||Y_t||_1, all with equal weight.
 */
inline ParticleEnsemble init_ensemble(const GarchSpec& spec, const InitConfig& cfg, StreamKey key) {
    if (!(cfg.n > cfg.n_b)) throw Error(ErrorKind::Config, "init_ensemble needs n > n_b");
    if (!(cfg.u_quantile > 0.0 && cfg.u_quantile < 1.0)) throw Error(ErrorKind::Config, "u_quantile must lie in (0, 1)");
    const std::size_t d = spec.dim();
    const std::size_t kept_len = cfg.n - cfg.n_b;
    const auto keep =
        static_cast<std::size_t>(std::ceil((1.0 - cfg.u_quantile) * static_cast<double>(kept_len) - 1e-9));
    if (keep < cfg.min_particles) {
        throw Error(ErrorKind::TooFewParticles, "only " + std::to_string(keep) + " states exceed the threshold; need " +
                                                    std::to_string(cfg.min_particles));
    }
    std::vector<double> pool(keep * d);
    std::vector<double> pool_sigma(keep);
    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;

    auto rng = key.domain("init_ensemble").rng();
    InnovationSampler draw(spec.innovation);
    GarchRecursion rec(spec);
    std::vector<double> y(d);
    for (std::size_t t = 0; t < cfg.n; ++t) {
        rec.step(draw.squared(rng));
        if (t < cfg.n_b) continue;
        rec.state(y);
        double r = 0.0;
        for (double v : y) r += v;
        std::size_t slot;
        if (heap.size() < keep) {
            slot = heap.size();
        } else if (r > heap.top().first) {
            slot = heap.top().second;
            heap.pop();
        } else {
            continue;
        }
        heap.emplace(r, slot);
        for (std::size_t i = 0; i < d; ++i) pool[slot * d + i] = y[i] / r;
        pool_sigma[slot] = rec.sigma2() / r;
    }
    ParticleEnsemble ens;
    ens.dim = d;
    ens.particles = std::move(pool);
    ens.sigma_share = std::move(pool_sigma);
    ens.weights.assign(keep, 1.0 / static_cast<double>(keep));
    return ens;
}

/// Equal-weight particles drawn uniformly on the simplex.
inline ParticleEnsemble uniform_ensemble(const GarchSpec& spec, std::size_t J, StreamKey key) {
    const std::size_t d = spec.dim();
    auto rng = key.domain("uniform_ensemble").rng();
    std::exponential_distribution<double> ex(1.0);
    ParticleEnsemble ens;
    ens.dim = d;
    ens.particles.resize(J * d);
    ens.sigma_share.resize(J);
    for (std::size_t j = 0; j < J; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) s += ens.particles[j * d + i] = ex(rng);
        for (std::size_t i = 0; i < d; ++i) ens.particles[j * d + i] /= s;
        ens.sigma_share[j] = spec.p >= 1 ? ens.particles[j * d + spec.sigma_index()]
                                         : std::numeric_limits<double>::quiet_NaN();
    }
    ens.weights.assign(J, 1.0 / static_cast<double>(J));
    return ens;
}

/**
 * @brief Tabulated E(a Z^2 + b)^k as a function of (a, b).
 *
 * E(aZ^2 + b)^k = (a + b)^k phi(u), u = b / (a + b), phi(u) = E(u + (1 - u) Z^2)^k.
 * phi is splined on u = v^4 with v uniform, which resolves the u^(k + 1/2)
 * behaviour near u = 0 for small k.
 */
class MomentTable {
public:
    MomentTable(const Innovation& inn, double k, std::size_t grid = 2049) : k_(k) {
        if (!(k >= 0.0)) throw Error(ErrorKind::Config, "moment order must be non-negative");
        if (2.0 * k >= inn.moment_limit()) {
            throw Error(ErrorKind::MomentDiverged, "E|Z|^(2k) is infinite for k = " + std::to_string(k));
        }
        const DensityNodes nodes = density_nodes(inn);
        std::vector<double> values(grid);
        const double h = 1.0 / static_cast<double>(grid - 1);
        for (std::size_t i = 0; i < grid; ++i) {
            const double v = h * static_cast<double>(i);
            values[i] = direct(nodes, k, v * v * v * v);
        }
        phi0_ = values.front();
        // dphi/dv vanishes at both ends: du/dv = 0 at v = 0, and E Z^2 = 1 makes dphi/du = 0 at u = 1.
        spline_.emplace(values.begin(), values.end(), 0.0, h, 0.0, 0.0);
    }

    static double direct(const DensityNodes& nodes, double k, double u) {
        if (u >= 1.0 || k == 0.0) return 1.0;
        return nodes.expect([&](double z) { return std::pow(u + (1.0 - u) * z * z, k); }) +
               std::pow(1.0 - u, k) * nodes.tail_power_moment(2.0 * k);
    }

    [[nodiscard]] double k() const noexcept { return k_; }

    [[nodiscard]] double phi(double u) const {
        if (u <= 0.0) return phi0_;
        if (u >= 1.0) return 1.0;
        return (*spline_)(std::sqrt(std::sqrt(u)));
    }

    /// E(a Z^2 + b)^k for a, b >= 0.
    [[nodiscard]] double operator()(double a, double b) const {
        const double s = a + b;
        if (!(s > 0.0)) return k_ == 0.0 ? 1.0 : 0.0;
        return std::pow(s, k_) * phi(b / s);
    }

private:
    double k_;
    double phi0_ = 1.0;
    std::optional<boost::math::interpolators::cardinal_cubic_b_spline<double>> spline_;
};

/// Coefficients (a, b) with ||A(z2) theta||_1 = a z2 + b.
inline std::pair<double, double> norm_coefficients(const GarchSpec& spec, std::span<const double> theta) {
    const double c = drive(spec, theta);
    return {c, (spec.p >= 1 ? c : 0.0) + shifted_mass(spec, theta)};
}

/**
 * @brief Exact draws of Z^2 under the tilted law (u + (1 - u) z^2)^k f(z) / phi(u).
 *
 * Rejection from a two-component envelope on the latent normal and chi-square
 * variables of the stochastic representation. With (x + y)^k <= C (x^k + y^k),
 * one component is the untilted law and the other tilts the latent variables
 * by a power, which keeps them in the gamma family. Acceptance is bounded
 * below by a constant depending on k only.
 */
class TiltedSquareSampler {
public:
    TiltedSquareSampler(const Innovation& inn, double k)
        : inn_(inn), k_(k), c_(std::max(1.0, std::pow(2.0, k - 1.0))),
          d_(inn.xi / std::sqrt(1.0 + inn.xi * inn.xi)), dc_(std::sqrt(1.0 - d_ * d_)),
          heavy_(inn.kind != InnovationKind::Gaussian), symmetric_(inn.xi == 0.0),
          chi_(heavy_ ? inn.nu : 1.0), chi_tilted_(heavy_ ? 0.5 * inn.nu - k : 1.0, 2.0),
          lat_tilted_(symmetric_ ? k + 0.5 : k + 1.0, 2.0) {
        if (2.0 * k >= inn.moment_limit()) throw Error(ErrorKind::MomentDiverged, "tilted law has no finite mass");
        ev_ = heavy_ ? std::pow(inn.nu / 2.0, k) * std::exp(std::lgamma(0.5 * inn.nu - k) - std::lgamma(0.5 * inn.nu)) : 1.0;
        el_ = std::pow(2.0, k) * (symmetric_ ? std::exp(std::lgamma(k + 0.5)) / std::sqrt(std::numbers::pi)
                                             : std::exp(std::lgamma(k + 1.0)));
    }

    double operator()(double u, Rng& rng) {
        if (k_ == 0.0 || u >= 1.0) {
            InnovationSampler plain(inn_);
            return plain.squared(rng);
        }
        const double mu2 = inn_.mu * inn_.mu;
        const double om2 = inn_.omega * inn_.omega;
        const double base = symmetric_ ? u : u + 2.0 * (1.0 - u) * mu2;
        const double scale = symmetric_ ? (1.0 - u) * om2 : 2.0 * (1.0 - u) * om2;
        const double m1 = std::pow(base, k_);
        const double m2 = std::pow(scale, k_) * ev_ * el_;
        const double p1 = m1 / (m1 + m2);
        for (int attempt = 0; attempt < 1'000'000; ++attempt) {
            double v2;    // V^2 = nu / W
            double lat2;  // U^2 (symmetric) or U0^2 + U1^2
            double y;
            if (unif_(rng) < p1) {
                v2 = heavy_ ? inn_.nu / chi_(rng) : 1.0;
                const double u0 = normal_(rng);
                const double u1 = normal_(rng);
                lat2 = symmetric_ ? u1 * u1 : u0 * u0 + u1 * u1;
                y = symmetric_ ? u1 : d_ * std::abs(u0) + dc_ * u1;
            } else {
                v2 = heavy_ ? inn_.nu / chi_tilted_(rng) : 1.0;
                lat2 = lat_tilted_(rng);
                const double r = std::sqrt(lat2);
                if (symmetric_) {
                    y = r;
                } else {
                    const double phi = 2.0 * std::numbers::pi * unif_(rng);
                    y = d_ * std::abs(r * std::cos(phi)) + dc_ * r * std::sin(phi);
                }
            }
            const double z = inn_.mu + inn_.omega * std::sqrt(v2) * y;
            const double z2 = z * z;
            if (!std::isfinite(z2)) continue;
            const double target = std::pow(u + (1.0 - u) * z2, k_);
            const double envelope = c_ * (m1 + std::pow(scale * v2 * lat2, k_));
            if (unif_(rng) * envelope <= target) return z2;
        }
        throw Error(ErrorKind::Convergence, "tilted sampler failed to accept");
    }

private:
    Innovation inn_;
    double k_;
    double c_;
    double d_;
    double dc_;
    bool heavy_;
    bool symmetric_;
    double ev_ = 1.0;
    double el_ = 1.0;
    std::chi_squared_distribution<double> chi_;
    std::gamma_distribution<double> chi_tilted_;
    std::gamma_distribution<double> lat_tilted_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

enum class Resampling { Multinomial, Systematic };

/**
 * @brief How a particle is moved and weighted.
 *
 * Plain: resample by current weights, draw Z from its own law, weight by
 * ||A theta||^kappa. Adapted: resample by m_j E_Z||A(Z) theta_j||^kappa, draw Z
 * from the correspondingly tilted law, equal output weights. Both target the
 * same measure; Adapted keeps bounded weights when ||A theta||^kappa has
 * infinite variance (heavy-tailed Z with kappa > nu / 4).
 */
enum class Propagation { Adapted, Plain };

struct SpectralConfig {
    std::size_t J = 10'000;
    Resampling resampling = Resampling::Multinomial;
    Propagation propagation = Propagation::Adapted;
    double ess_floor = 10.0;
    unsigned workers = 1;
    double tol_ks = 0.01;
    std::size_t window = 3;
    std::size_t max_s = 100;
};

inline constexpr std::size_t kParticleBlock = 4096;

/// Lookahead weights m_j E_Z||A(Z) theta_j||^kappa, unnormalized.
inline std::vector<double> lookahead_weights(const ParticleEnsemble& ens, const GarchSpec& spec, const MomentTable& table) {
    std::vector<double> w(ens.size());
    for (std::size_t j = 0; j < ens.size(); ++j) {
        const auto [a, b] = norm_coefficients(spec, ens.theta(j));
        w[j] = ens.weights[j] * table(a, b);
    }
    return w;
}

/**
 * @brief One propagation step of the particle approximation.
 *
 * Random streams are tied to fixed particle blocks, not to workers. With the
 * adapted scheme a MomentTable for kappa may be passed to avoid rebuilding it.
 */
inline ParticleEnsemble step(const ParticleEnsemble& ens, const GarchSpec& spec, double kappa, const SpectralConfig& cfg,
                             StreamKey key, const MomentTable* table = nullptr) {
    if (!(kappa > 0.0)) throw Error(ErrorKind::Config, "kappa must be positive");
    if (ens.size() == 0) throw Error(ErrorKind::TooFewParticles, "empty ensemble");
    if (cfg.J == 0) throw Error(ErrorKind::Config, "J must be positive");
    const bool adapted = cfg.propagation == Propagation::Adapted;
    std::optional<MomentTable> own;
    if (adapted && (table == nullptr || table->k() != kappa)) {
        own.emplace(spec.innovation, kappa);
        table = &*own;
    }
    const std::size_t d = ens.dim;
    const std::size_t J = cfg.J;
    const std::vector<double> source = adapted ? lookahead_weights(ens, spec, *table) : ens.weights;
    std::vector<double> cum(ens.size());
    double acc = 0.0;
    for (std::size_t j = 0; j < ens.size(); ++j) cum[j] = acc += source[j];
    if (!(acc > 0.0) || !std::isfinite(acc)) throw Error(ErrorKind::DegenerateWeights, "weights do not normalize");
    if (adapted && detail::effective_sample_size(source) < cfg.ess_floor) {
        throw Error(ErrorKind::DegenerateWeights, "effective sample size " +
                                                      std::to_string(detail::effective_sample_size(source)) +
                                                      " below floor " + std::to_string(cfg.ess_floor));
    }

    ParticleEnsemble out;
    out.dim = d;
    out.particles.resize(J * d);
    out.weights.resize(J);
    out.sigma_share.resize(J);
    out.iteration = ens.iteration + 1;
    out.kappa_used = kappa;

    double offset = 0.0;
    if (cfg.resampling == Resampling::Systematic) {
        auto r0 = key.domain("systematic").rng();
        offset = std::uniform_real_distribution<double>(0.0, 1.0)(r0);
    }
    const Blocks blocks{J, kParticleBlock};
    const std::size_t q = spec.sigma_index();
    parallel_for(blocks.count(), cfg.workers, [&](std::size_t b) {
        auto rng = key.sub(b).rng();
        std::uniform_real_distribution<double> unif(0.0, acc);
        InnovationSampler draw(spec.innovation);
        std::optional<TiltedSquareSampler> tilted;
        if (adapted) tilted.emplace(spec.innovation, kappa);
        for (std::size_t i = blocks.begin(b); i < blocks.end(b); ++i) {
            const double u = cfg.resampling == Resampling::Systematic
                                 ? acc * (static_cast<double>(i) + offset) / static_cast<double>(J)
                                 : unif(rng);
            auto src = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
            src = std::min(src, ens.size() - 1);
            const auto th = ens.theta(src);
            std::span<double> dst(out.particles.data() + i * d, d);
            double z2;
            if (adapted) {
                const auto [ca, cb] = norm_coefficients(spec, th);
                z2 = (*tilted)(cb / (ca + cb), rng);
            } else {
                z2 = draw.squared(rng);
            }
            apply(spec, th, z2, dst);
            double norm = 0.0;
            for (double v : dst) norm += v;
            if (norm > 0.0) {
                for (double& v : dst) v /= norm;
                out.weights[i] = adapted ? 1.0 : std::pow(norm, kappa);
                out.sigma_share[i] = spec.p >= 1 ? dst[q] : drive(spec, th) / norm;
            } else {
                std::copy(th.begin(), th.end(), dst.begin());
                out.weights[i] = 0.0;
                out.sigma_share[i] = ens.sigma_share[src];
            }
        }
    });
    double total = 0.0;
    for (double w : out.weights) total += w;
    if (!(total > 0.0) || !std::isfinite(total)) throw Error(ErrorKind::DegenerateWeights, "weights do not normalize");
    for (double& w : out.weights) w /= total;
    out.raw_weight_mean = adapted ? acc : total / static_cast<double>(J);
    if (!adapted && out.ess() < cfg.ess_floor) {
        throw Error(ErrorKind::DegenerateWeights, "effective sample size " + std::to_string(out.ess()) +
                                                      " below floor " + std::to_string(cfg.ess_floor));
    }
    return out;
}

/// Largest weighted marginal KS distance between two ensembles.
inline double marginal_ks(const ParticleEnsemble& a, const ParticleEnsemble& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.dim; ++i) {
        const auto xa = a.coordinate(i);
        const auto xb = b.coordinate(i);
        d = std::max(d, detail::weighted_ks(xa, a.weights, xb, b.weights));
    }
    return d;
}

/**
 * @brief Unnormalized incremental weights of an ensemble.
 *
 * Adapted scheme: the lookahead factors E_Z||A(Z) theta_j||^kappa. Plain
 * scheme: the raw ||A theta||^kappa of the last step. Normalizing would let a
 * small change of scale move every point at once, so the raw values are compared.
 */
inline std::vector<double> weight_profile(const ParticleEnsemble& ens, const GarchSpec& spec, const MomentTable* table) {
    if (table != nullptr) {
        std::vector<double> g(ens.size());
        for (std::size_t j = 0; j < ens.size(); ++j) {
            const auto [a, b] = norm_coefficients(spec, ens.theta(j));
            g[j] = (*table)(a, b);
        }
        return g;
    }
    const double scale = static_cast<double>(ens.size()) * (std::isfinite(ens.raw_weight_mean) ? ens.raw_weight_mean : 1.0);
    std::vector<double> w(ens.weights);
    for (double& x : w) x *= scale;
    return w;
}

struct ConvergenceStep {
    std::size_t s = 0;
    double ks_marginal = 0.0;
    double ks_weights = 0.0;
    double threshold_marginal = 0.0;
    double threshold_weights = 0.0;
    double ess = 0.0;
    bool pass = false;
};

struct ConvergenceResult {
    ParticleEnsemble ensemble;
    std::size_t converged_at = 0; ///< iteration after which all compared ensembles agree
    std::size_t declared_at = 0;  ///< iteration at which the window completed
    std::vector<ConvergenceStep> trace;
};

/**
 * @brief Iterates step() until successive ensembles agree.
 *
 * Iteration s passes when the weighted marginal KS distance to iteration s-1
 * and the KS distance between weight profiles are both within tol_ks plus the
 * 95% two-sample KS noise level at the effective sample sizes. Convergence is
 * declared after `window` consecutive passes.
 */
inline ConvergenceResult run_to_convergence(const GarchSpec& spec, double kappa, ParticleEnsemble start,
                                            const SpectralConfig& cfg, StreamKey key) {
    std::optional<MomentTable> table;
    if (cfg.propagation == Propagation::Adapted) table.emplace(spec.innovation, kappa);
    const MomentTable* tp = table ? &*table : nullptr;
    ConvergenceResult res;
    ParticleEnsemble cur = std::move(start);
    cur.iteration = 0;
    auto cur_profile = weight_profile(cur, spec, tp);
    std::size_t run = 0;
    for (std::size_t s = 1; s <= cfg.max_s; ++s) {
        ParticleEnsemble next = step(cur, spec, kappa, cfg, key.domain("iterate").sub(s), tp);
        auto next_profile = weight_profile(next, spec, tp);
        ConvergenceStep st;
        st.s = s;
        st.ess = detail::effective_sample_size(next_profile);
        st.ks_marginal = marginal_ks(cur, next);
        st.ks_weights = detail::weighted_ks(cur_profile, {}, next_profile, {});
        st.threshold_marginal = cfg.tol_ks + detail::ks_critical(cur.ess(), next.ess());
        st.threshold_weights = cfg.tol_ks + detail::ks_critical(static_cast<double>(cur.size()),
                                                                static_cast<double>(next.size()));
        st.pass = st.ks_marginal <= st.threshold_marginal && st.ks_weights <= st.threshold_weights;
        res.trace.push_back(st);
        run = st.pass ? run + 1 : 0;
        cur = std::move(next);
        cur_profile = std::move(next_profile);
        if (run >= cfg.window) {
            res.declared_at = s;
            res.converged_at = s - cfg.window;
            res.ensemble = std::move(cur);
            return res;
        }
    }
    throw Error(ErrorKind::NoConvergence, "no convergence after " + std::to_string(cfg.max_s) + " iterations at kappa " +
                                              std::to_string(kappa));
}

struct RhoEstimate {
    double rho = 0.0;
    double stderr = 0.0;
};

/// rho_k = sum_j m_j E_Z ||A theta_j||^k with the Z-integral done by quadrature.
inline RhoEstimate rho_quadrature(const ParticleEnsemble& ens, const GarchSpec& spec, const MomentTable& table) {
    double rho = 0.0;
    std::vector<double> g(ens.size());
    for (std::size_t j = 0; j < ens.size(); ++j) {
        const auto [a, b] = norm_coefficients(spec, ens.theta(j));
        g[j] = table(a, b);
        rho += ens.weights[j] * g[j];
    }
    double var = 0.0;
    for (std::size_t j = 0; j < ens.size(); ++j) var += ens.weights[j] * ens.weights[j] * (g[j] - rho) * (g[j] - rho);
    return {rho, std::sqrt(var)};
}

/**
 * @brief rho_k with z_replicates innovation draws per particle.
 *
 * Fails with MomentDiverged when the estimate from the first half of the
 * draws differs from the full estimate by more than 20%.
 */
inline RhoEstimate rho_monte_carlo(const ParticleEnsemble& ens, const GarchSpec& spec, double k,
                                   std::size_t z_replicates, StreamKey key, unsigned workers = 1) {
    if (k == 0.0) return {1.0, 0.0};
    if (z_replicates < 2) throw Error(ErrorKind::Config, "z_replicates must be at least 2");
    std::vector<double> full(ens.size()), half(ens.size());
    const Blocks blocks{ens.size(), 256};
    parallel_for(blocks.count(), workers, [&](std::size_t b) {
        auto rng = key.domain("rho_mc").sub(b).rng();
        InnovationSampler draw(spec.innovation);
        for (std::size_t j = blocks.begin(b); j < blocks.end(b); ++j) {
            const auto [a, c] = norm_coefficients(spec, ens.theta(j));
            double s = 0.0, sh = 0.0;
            for (std::size_t r = 0; r < z_replicates; ++r) {
                s += std::pow(a * draw.squared(rng) + c, k);
                if (r + 1 == z_replicates / 2) sh = s;
            }
            full[j] = s / static_cast<double>(z_replicates);
            half[j] = sh / static_cast<double>(z_replicates / 2);
        }
    });
    double rho = 0.0, rho_half = 0.0;
    for (std::size_t j = 0; j < ens.size(); ++j) {
        rho += ens.weights[j] * full[j];
        rho_half += ens.weights[j] * half[j];
    }
    if (std::abs(rho_half - rho) > 0.2 * rho) {
        throw Error(ErrorKind::MomentDiverged, "moment estimate unstable at k = " + std::to_string(k));
    }
    double var = 0.0;
    for (std::size_t j = 0; j < ens.size(); ++j) var += ens.weights[j] * ens.weights[j] * (full[j] - rho) * (full[j] - rho);
    return {rho, std::sqrt(var)};
}

struct RhoConfig {
    SpectralConfig spectral;
    std::size_t min_iterations = 40;
    std::size_t max_iterations = 2'000;
    double target_stderr = 2e-4;
    double sign_z = 4.0;
    bool quadrature = true;
    std::size_t z_replicates = 1000;
};

struct RhoPoint {
    double k = 0.0;
    double rho = 0.0;
    double stderr = 0.0;
    std::size_t iterations = 0;
    std::size_t converged_at = 0;
};

struct RhoRun {
    RhoPoint point;
    ParticleEnsemble ensemble;
    std::vector<ConvergenceStep> trace;
};

/**
 * @brief Converges the ensemble at exponent k, then averages rho over further iterations.
 *
 * Averaging stops once the batch-means standard error reaches the target or
 * the sign of rho - 1 is resolved at sign_z standard errors. Streams depend on
 * the iteration index only, so runs at different k share random numbers.
 */
inline RhoRun estimate_rho(const GarchSpec& spec, double k, ParticleEnsemble start, const RhoConfig& cfg, StreamKey key) {
    auto conv = run_to_convergence(spec, k, std::move(start), cfg.spectral, key.domain("converge"));
    RhoRun out;
    out.trace = std::move(conv.trace);
    out.point.k = k;
    out.point.converged_at = conv.converged_at;
    std::optional<MomentTable> table;
    if (cfg.quadrature || cfg.spectral.propagation == Propagation::Adapted) table.emplace(spec.innovation, k);
    const MomentTable* tp = table ? &*table : nullptr;
    ParticleEnsemble ens = std::move(conv.ensemble);
    std::vector<double> values;
    double se = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
        const auto est = cfg.quadrature
                             ? rho_quadrature(ens, spec, *table)
                             : rho_monte_carlo(ens, spec, k, cfg.z_replicates, key.domain("rho").sub(it), cfg.spectral.workers);
        values.push_back(est.rho);
        if (values.size() >= cfg.min_iterations && values.size() % 10 == 0) {
            se = detail::batch_means_stderr(values);
            const double m = detail::mean(values);
            if (se <= cfg.target_stderr || std::abs(m - 1.0) > cfg.sign_z * se) break;
        }
        ens = step(ens, spec, k, cfg.spectral, key.domain("average").sub(it), tp);
    }
    out.point.rho = detail::mean(values);
    out.point.stderr = values.size() >= 4 ? detail::batch_means_stderr(values) : se;
    out.point.iterations = values.size();
    out.ensemble = std::move(ens);
    return out;
}

struct KappaConfig {
    double grid_lo = 0.1;
    double grid_hi = 4.0;
    double grid_step = 0.25;
    double tol_kappa = 0.005;
    double extend_to = 0.0;  ///< if rho stays below 1 up to grid_hi, keep stepping (doubling the step) up to this k
    RhoConfig rho;
};

struct RhoCurve {
    std::vector<RhoPoint> grid;
    std::vector<RhoPoint> bisection;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    double kappa_hat = 0.0;
    std::size_t sign_changes = 0;
    ParticleEnsemble ensemble; ///< converged ensemble at the bracket end nearest kappa_hat
};

/// Largest k searched: moments of order 2k must exist, with a margin of 0.1 in 2k.
inline double kappa_upper_limit(const GarchSpec& spec, double requested) {
    const double lim = spec.innovation.moment_limit();
    return std::isfinite(lim) ? std::min(requested, 0.5 * (lim - 0.1)) : requested;
}

/**
 * @brief Tail index from the crossing rho_k = 1.
 *
 * Grid scan with warm starts, then bisection to tol_kappa. The returned
 * estimate interpolates ln rho linearly across the final bracket.
 */
inline RhoCurve find_kappa(const GarchSpec& spec, const KappaConfig& cfg, ParticleEnsemble start, StreamKey key) {
    const double hi = kappa_upper_limit(spec, cfg.grid_hi);
    if (!(cfg.grid_lo > 0.0) || !(cfg.grid_step > 0.0) || !(hi > cfg.grid_lo)) {
        throw Error(ErrorKind::Config, "invalid kappa grid");
    }
    std::vector<double> ks;
    for (double k = cfg.grid_lo; k <= hi + 1e-12; k += cfg.grid_step) ks.push_back(k);
    if (ks.back() < hi - 1e-9) ks.push_back(hi);

    RhoCurve curve;
    std::vector<ParticleEnsemble> ensembles;
    ParticleEnsemble warm = std::move(start);
    for (double k : ks) {
        auto run = estimate_rho(spec, k, warm, cfg.rho, key);
        curve.grid.push_back(run.point);
        warm = run.ensemble;
        ensembles.push_back(std::move(run.ensemble));
    }
    const double cap = kappa_upper_limit(spec, cfg.extend_to);
    double stride = cfg.grid_step;
    while (curve.grid.back().rho < 1.0 && curve.grid.back().k < cap - 1e-9) {
        stride *= 2.0;
        const double k = std::min(curve.grid.back().k + stride, cap);
        ks.push_back(k);
        auto run = estimate_rho(spec, k, warm, cfg.rho, key);
        curve.grid.push_back(run.point);
        warm = run.ensemble;
        ensembles.push_back(std::move(run.ensemble));
    }
    std::optional<std::size_t> cross;
    for (std::size_t i = 0; i + 1 < curve.grid.size(); ++i) {
        if ((curve.grid[i].rho < 1.0) != (curve.grid[i + 1].rho < 1.0)) {
            ++curve.sign_changes;
            if (!cross && curve.grid[i].rho < 1.0) cross = i;
        }
    }
    if (!cross) {
        throw Error(ErrorKind::NoCrossing, "rho_k - 1 does not change sign on [" + std::to_string(ks.front()) + ", " +
                                               std::to_string(ks.back()) + "]");
    }
    RhoPoint lo = curve.grid[*cross];
    RhoPoint up = curve.grid[*cross + 1];
    ParticleEnsemble ens_lo = ensembles[*cross];
    ParticleEnsemble ens_up = ensembles[*cross + 1];
    while (up.k - lo.k > cfg.tol_kappa) {
        const double mid = 0.5 * (lo.k + up.k);
        // Warm start from the end whose rho is closer to 1.
        const bool from_lo = std::abs(std::log(lo.rho)) <= std::abs(std::log(up.rho));
        auto run = estimate_rho(spec, mid, from_lo ? ens_lo : ens_up, cfg.rho, key);
        curve.bisection.push_back(run.point);
        if (run.point.rho < 1.0) {
            lo = run.point;
            ens_lo = std::move(run.ensemble);
        } else {
            up = run.point;
            ens_up = std::move(run.ensemble);
        }
    }
    curve.bracket_lo = lo.k;
    curve.bracket_hi = up.k;
    const double llo = std::log(lo.rho);
    const double lup = std::log(up.rho);
    double frac = lup > llo ? -llo / (lup - llo) : 0.5;
    frac = std::clamp(frac, 0.0, 1.0);
    curve.kappa_hat = lo.k + frac * (up.k - lo.k);
    curve.ensemble = frac < 0.5 ? std::move(ens_lo) : std::move(ens_up);
    return curve;
}

/**
 * @brief Spectral cdf of the first coordinate for GARCH(1,1).
 *
 * After one step the first coordinate is Z^2 / (1 + Z^2) with Z tilted by
 * (1 + Z^2)^kappa, whatever the ensemble:
 * H(w) = E[(1 + Z^2)^kappa 1{Z^2 <= w / (1 - w)}] / E(1 + Z^2)^kappa.
 */
inline double garch11_spectral_cdf(const Innovation& inn, double kappa, double w) {
    if (w <= 0.0) return 0.0;
    if (w >= 1.0) return 1.0;
    const double zmax = std::sqrt(w / (1.0 - w));
    const double total = expect(inn, [&](double z) { return std::pow(1.0 + z * z, kappa); });
    auto body = [&](double z) {
        const double f = density(inn, z);
        return f == 0.0 ? 0.0 : std::pow(1.0 + z * z, kappa) * f;
    };
    // Integrate over [-zmax, zmax] as the complement of the two tails.
    const double upper = detail::integrate_tail(body, zmax);
    const double lower = detail::integrate_tail([&](double z) { return body(-z); }, zmax);
    return std::clamp(1.0 - (upper + lower) / total, 0.0, 1.0);
}

}  // namespace garchtail
