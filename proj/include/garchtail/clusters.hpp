#pragma once

#include "garchtail/errors.hpp"
#include "garchtail/garch_spec.hpp"
#include "garchtail/innovations.hpp"
#include "garchtail/spectral.hpp"
#include "garchtail/tailchain.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace garchtail {

/// A Monte Carlo value with its standard error.
struct Estimate {
    double value = 0.0;
    double stderr = 0.0;
};

namespace detail {

/// Pool-adjacent-violators projection onto nonincreasing sequences (equal weights).
inline std::vector<double> nonincreasing_fit(const std::vector<double>& y) {
    std::vector<double> level;
    std::vector<std::size_t> width;
    for (double v : y) {
        level.push_back(v);
        width.push_back(1);
        while (level.size() > 1 && level[level.size() - 2] < level.back()) {
            const std::size_t w = width[width.size() - 2] + width.back();
            const double m = (level[level.size() - 2] * static_cast<double>(width[width.size() - 2]) +
                              level.back() * static_cast<double>(width.back())) /
                             static_cast<double>(w);
            level.pop_back();
            width.pop_back();
            level.back() = m;
            width.back() = w;
        }
    }
    std::vector<double> out;
    out.reserve(y.size());
    for (std::size_t b = 0; b < level.size(); ++b) out.insert(out.end(), width[b], level[b]);
    return out;
}

/// Between-group standard error of a statistic computed once per group.
inline double group_stderr(const std::vector<double>& v) {
    const auto g = static_cast<double>(v.size());
    if (v.size() < 2) return 0.0;
    double m = 0.0;
    for (double x : v) m += x;
    m /= g;
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / (g * (g - 1.0)));
}

inline double log_binomial(std::size_t n, std::size_t k) {
    return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

}  // namespace detail

/// chi(tau) = P(x2hat[tau] > 1 | x2hat[0] > 1) for tau = 0..tau_max, binomial standard errors.
inline std::vector<Estimate> extremogram_limit(const ChainSummary& s) {
    const auto n = static_cast<double>(s.total());
    if (n == 0.0) throw Error(ErrorKind::NoExceedances, "no chains in summary");
    std::vector<Estimate> chi(s.tau_max + 1);
    for (std::size_t t = 0; t <= s.tau_max; ++t) {
        std::uint64_t c = 0;
        for (const auto& g : s.exceed_lag) c += g[t];
        const double p = static_cast<double>(c) / n;
        chi[t] = {p, std::sqrt(p * (1.0 - p) / n)};
    }
    return chi;
}

/**
 * @brief Cluster ladder from one count histogram.
 *
 * theta_i[i-1] = P(count = i | exceedance at 0), projected onto nonincreasing
 * sequences; pi over the full observed support. theta = theta_i[0].
 */
struct LadderPoint {
    std::vector<double> theta_i;
    std::vector<double> pi;
    double theta = 0.0;
    double mean_size = 0.0;
};

inline LadderPoint ladder_from_counts(const std::vector<std::uint64_t>& hist) {
    std::size_t top = 0;
    double n = 0.0;
    for (std::size_t i = 0; i < hist.size(); ++i) {
        n += static_cast<double>(hist[i]);
        if (hist[i] != 0) top = i;
    }
    if (n == 0.0 || top == 0) throw Error(ErrorKind::NoExceedances, "no chains with an exceedance at 0");
    std::vector<double> raw(top);
    for (std::size_t i = 1; i <= top; ++i) raw[i - 1] = static_cast<double>(hist[i]) / n;
    LadderPoint lp;
    lp.theta_i = detail::nonincreasing_fit(raw);
    lp.theta = lp.theta_i[0];
    lp.pi.resize(top);
    for (std::size_t i = 0; i < top; ++i) {
        const double next = i + 1 < top ? lp.theta_i[i + 1] : 0.0;
        lp.pi[i] = (lp.theta_i[i] - next) / lp.theta;
    }
    for (std::size_t i = 0; i < top; ++i) lp.mean_size += static_cast<double>(i + 1) * lp.pi[i];
    return lp;
}

struct Ladder {
    std::vector<Estimate> theta_i;  ///< i = 1..i_max
    std::vector<Estimate> pi;       ///< i = 1..i_max
    std::vector<double> pi_full;    ///< full observed support, sums to 1
    Estimate theta;
    Estimate mean_size;
    double mass_beyond = 0.0;       ///< cluster-size mass beyond i_max
    bool truncation_warning = false;
};

inline constexpr double kTruncationMass = 1e-3;

inline Ladder cluster_ladder(const ChainSummary& s, std::size_t i_max = 200) {
    if (i_max < 1) throw Error(ErrorKind::Config, "i_max must be at least 1");
    std::vector<std::uint64_t> pooled(s.count_hist.empty() ? 0 : s.count_hist[0].size(), 0);
    for (const auto& g : s.count_hist) {
        for (std::size_t i = 0; i < g.size(); ++i) pooled[i] += g[i];
    }
    const auto all = ladder_from_counts(pooled);
    std::vector<LadderPoint> groups;
    for (const auto& g : s.count_hist) {
        try {
            groups.push_back(ladder_from_counts(g));
        } catch (const Error&) {
        }
    }
    auto at = [](const std::vector<double>& v, std::size_t i) { return i < v.size() ? v[i] : 0.0; };
    auto se_of = [&](auto&& get) {
        std::vector<double> v;
        v.reserve(groups.size());
        for (const auto& g : groups) v.push_back(get(g));
        return detail::group_stderr(v);
    };

    Ladder out;
    out.pi_full = all.pi;
    out.theta = {all.theta, se_of([](const LadderPoint& g) { return g.theta; })};
    out.mean_size = {all.mean_size, se_of([](const LadderPoint& g) { return g.mean_size; })};
    out.theta_i.resize(i_max);
    out.pi.resize(i_max);
    for (std::size_t i = 0; i < i_max; ++i) {
        out.theta_i[i] = {at(all.theta_i, i), se_of([&](const LadderPoint& g) { return at(g.theta_i, i); })};
        out.pi[i] = {at(all.pi, i), se_of([&](const LadderPoint& g) { return at(g.pi, i); })};
    }
    for (std::size_t i = i_max; i < all.pi.size(); ++i) out.mass_beyond += all.pi[i];
    out.truncation_warning = out.mass_beyond > kTruncationMass;
    return out;
}

/// delta = E(Z+)^(2k) / E|Z|^(2k): the limit P(X > 0 | X^2 > x) with sigma independent of Z.
inline double delta_breiman(const Innovation& inn, double kappa) {
    if (inn.xi == 0.0) return 0.5;
    return positive_moment(inn, 2.0 * kappa) / abs_moment(inn, 2.0 * kappa);
}

/**
 * @brief delta from the spectral ensemble.
 *
 * Each particle carries z^2 = theta^(1)/sigma-share; the sign of Z given |Z| = z
 * is positive with probability f(z)/(f(z)+f(-z)). Particles are weighted by
 * theta^(1)^kappa, the chance that the direction produces an X^2 exceedance.
 * Symmetric innovations return 1/2 exactly.
 */
inline Estimate delta_eval(const GarchSpec& spec, double kappa, const ParticleEnsemble& ens) {
    const auto& inn = spec.innovation;
    if (inn.xi == 0.0) return {0.5, 0.0};
    double sw = 0.0;
    double swx = 0.0;
    std::vector<double> w(ens.size()), x(ens.size());
    for (std::size_t j = 0; j < ens.size(); ++j) {
        const double t1 = ens.theta(j)[0];
        const double share = spec.p >= 1 ? ens.theta(j)[spec.sigma_index()] : ens.sigma_share[j];
        if (!(t1 > 0.0) || !(share > 0.0)) continue;
        const double z = std::sqrt(t1 / share);
        const double fp = density(inn, z);
        const double fm = density(inn, -z);
        x[j] = fp + fm > 0.0 ? fp / (fp + fm) : 0.5;
        w[j] = ens.weights[j] * std::pow(t1, kappa);
        sw += w[j];
        swx += w[j] * x[j];
    }
    if (!(sw > 0.0)) throw Error(ErrorKind::DegenerateWeights, "ensemble has no mass in the first coordinate");
    const double d = swx / sw;
    double var = 0.0;
    for (std::size_t j = 0; j < ens.size(); ++j) var += w[j] * w[j] * (x[j] - d) * (x[j] - d);
    return {d, std::sqrt(var) / sw};
}

/**
 * @brief Bernoulli thinning of squared-process clusters.
 *
 * Each exceedance of X^2 is kept with probability p (p = delta for the upper
 * tail, 1 - delta for the lower). Returns the no-exceedance probability Pi, the
 * thinned cluster-size pmf and extremal index.
 */
struct ThinnedClusters {
    double Pi = 0.0;
    std::vector<double> pi;  ///< j = 1..size of pi_x2
    double theta = 0.0;
};

inline ThinnedClusters thin_clusters(const std::vector<double>& pi_x2, double theta_x2, double p) {
    if (!(p > 1e-12)) throw Error(ErrorKind::DegenerateDelta, "retention probability is 0; this tail has no extremes");
    if (p > 1.0) throw Error(ErrorKind::DegenerateDelta, "retention probability exceeds 1");
    ThinnedClusters out;
    const std::size_t K = pi_x2.size();
    const double q = 1.0 - p;
    for (std::size_t k = 1; k <= K; ++k) out.Pi += pi_x2[k - 1] * std::pow(q, static_cast<double>(k));
    const double keep = 1.0 - out.Pi;
    out.pi.assign(K, 0.0);
    const double lp = std::log(p);
    const double lq = q > 0.0 ? std::log(q) : -INFINITY;
    for (std::size_t j = 1; j <= K; ++j) {
        double acc = 0.0;
        for (std::size_t k = j; k <= K; ++k) {
            if (pi_x2[k - 1] == 0.0) continue;
            const double lw = detail::log_binomial(k, j) + static_cast<double>(j) * lp +
                              (k == j ? 0.0 : static_cast<double>(k - j) * lq);
            acc += pi_x2[k - 1] * std::exp(lw);
        }
        out.pi[j - 1] = acc / keep;
    }
    out.theta = theta_x2 * keep / p;
    return out;
}

struct ClusterReport {
    std::vector<Estimate> chi_x2;        ///< tau = 0..tau_max
    std::vector<Estimate> theta_ladder;  ///< i = 1..i_max
    std::vector<Estimate> pi_x2;         ///< i = 1..i_max
    Estimate theta_x2;
    Estimate mean_cluster_size;
    double ladder_mass_beyond = 0.0;
    bool truncation_warning = false;
    Estimate delta;
    double delta_breiman = 0.5;
    std::vector<Estimate> chi_up, chi_lo;
    std::vector<Estimate> pi_up, pi_lo;  ///< j = 1..i_max
    Estimate theta_up, theta_lo;
    Estimate Pi_up, Pi_lo;
    std::uint64_t chains = 0;
    double alive_at_T = 0.0;  ///< fraction of chains still above 1 at T
    std::vector<std::string> warnings;
};

/**
 * @brief Squared-process functionals and their signed-tail transforms.
 *
 * Standard errors combine the between-group spread of the chain summary with
 * the uncertainty of delta, propagated by a central difference.
 */
inline ClusterReport cluster_report(const ChainSummary& s, const Estimate& delta, double delta_limit,
                                    std::size_t i_max = 200) {
    ClusterReport r;
    r.chains = s.total();
    r.alive_at_T = r.chains ? static_cast<double>(s.alive_at_T) / static_cast<double>(r.chains) : 0.0;
    r.chi_x2 = extremogram_limit(s);
    const auto lad = cluster_ladder(s, i_max);
    r.theta_ladder = lad.theta_i;
    r.pi_x2 = lad.pi;
    r.theta_x2 = lad.theta;
    r.mean_cluster_size = lad.mean_size;
    r.ladder_mass_beyond = lad.mass_beyond;
    r.truncation_warning = lad.truncation_warning;
    if (r.truncation_warning) {
        r.warnings.push_back("TruncationWarning: cluster-size mass beyond i_max = " + std::to_string(lad.mass_beyond));
    }
    if (r.alive_at_T > kTruncationMass) {
        r.warnings.push_back("chains not extinct by T: fraction alive = " + std::to_string(r.alive_at_T));
    }
    r.delta = delta;
    r.delta_breiman = delta_limit;
    const double d = delta.value;

    for (const auto& c : r.chi_x2) {
        r.chi_up.push_back({d * c.value, std::hypot(d * c.stderr, c.value * delta.stderr)});
        r.chi_lo.push_back({(1.0 - d) * c.value, std::hypot((1.0 - d) * c.stderr, c.value * delta.stderr)});
    }

    // Per-group ladders for the chain part of the error.
    std::vector<LadderPoint> groups;
    for (const auto& g : s.count_hist) {
        try {
            groups.push_back(ladder_from_counts(g));
        } catch (const Error&) {
        }
    }
    auto side = [&](bool upper) {
        const double p = upper ? d : 1.0 - d;
        const auto all = thin_clusters(lad.pi_full, lad.theta.value, p);
        std::vector<double> th, Pi;
        std::vector<std::vector<double>> pj;
        for (const auto& g : groups) {
            const auto t = thin_clusters(g.pi, g.theta, p);
            th.push_back(t.theta);
            Pi.push_back(t.Pi);
            pj.push_back(t.pi);
        }
        // Sensitivity to delta by a central difference, clipped inside (0, 1).
        const double h = std::min({1e-4, 0.5 * d, 0.5 * (1.0 - d)});
        double dth = 0.0, dPi = 0.0;
        std::vector<double> dpj(i_max, 0.0);
        if (delta.stderr > 0.0 && h > 0.0) {
            const double sgn = upper ? 1.0 : -1.0;
            const auto hi = thin_clusters(lad.pi_full, lad.theta.value, p + sgn * h);
            const auto lo = thin_clusters(lad.pi_full, lad.theta.value, p - sgn * h);
            dth = (hi.theta - lo.theta) / (2.0 * h);
            dPi = (hi.Pi - lo.Pi) / (2.0 * h);
            for (std::size_t j = 0; j < i_max && j < hi.pi.size(); ++j) dpj[j] = (hi.pi[j] - lo.pi[j]) / (2.0 * h);
        }
        Estimate theta{all.theta, std::hypot(detail::group_stderr(th), dth * delta.stderr)};
        Estimate Pie{all.Pi, std::hypot(detail::group_stderr(Pi), dPi * delta.stderr)};
        std::vector<Estimate> pis(i_max);
        for (std::size_t j = 0; j < i_max; ++j) {
            std::vector<double> v;
            for (const auto& g : pj) v.push_back(j < g.size() ? g[j] : 0.0);
            pis[j] = {j < all.pi.size() ? all.pi[j] : 0.0, std::hypot(detail::group_stderr(v), dpj[j] * delta.stderr)};
        }
        return std::tuple{theta, Pie, pis};
    };
    std::tie(r.theta_up, r.Pi_up, r.pi_up) = side(true);
    std::tie(r.theta_lo, r.Pi_lo, r.pi_lo) = side(false);
    return r;
}

}  // namespace garchtail
