#pragma once

#include "garchtail/errors.hpp"
#include "garchtail/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace garchtail {

/// Empirical p-quantile (order statistic at floor(p n), clamped).
inline double empirical_quantile(std::span<const double> x, double p) {
    if (x.empty()) throw Error(ErrorKind::Config, "quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::Config, "quantile level must lie in [0, 1]");
    std::vector<double> v(x.begin(), x.end());
    auto k = static_cast<std::size_t>(std::floor(p * static_cast<double>(v.size())));
    k = std::min(k, v.size() - 1);
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

struct RunsEstimate {
    double u = 0.0;
    std::size_t m = 0;
    double theta_tilde = 0.0;
    std::size_t n_exceed = 0;
    std::pair<double, double> ci95{0.0, 0.0};
};

struct RunsConfig {
    std::size_t bootstrap = 200;
    std::size_t block_factor = 10;  ///< bootstrap block length = block_factor * m
};

/**
 * @brief Runs estimator of the extremal index.
 *
 * theta = #{j: X2_j > u, max(X2_{j+1..j+m}) < u} / #{j: X2_j > u} over j = 0..n-m-1.
 * The 95% interval is a percentile bootstrap over disjoint blocks of length 10 m.
 */
inline RunsEstimate runs_estimator(std::span<const double> x2, double u, std::size_t m, StreamKey key,
                                   const RunsConfig& cfg = {}) {
    const std::size_t n = x2.size();
    if (m < 1) throw Error(ErrorKind::Config, "run length m must be at least 1");
    if (n <= m) throw Error(ErrorKind::Config, "path must be longer than the run length");
    const std::size_t len = n - m;
    // next[j]: first index k > j with x2[k] >= u, or n.
    std::vector<std::uint32_t> num(len, 0), den(len, 0);
    std::size_t next = n;
    for (std::size_t k = n; k-- > 0;) {
        if (k < len && x2[k] > u) {
            den[k] = 1;
            num[k] = next > k + m ? 1 : 0;
        }
        if (x2[k] >= u) next = k;
    }
    const std::size_t L = std::max<std::size_t>(1, cfg.block_factor * m);
    const std::size_t nb = (len + L - 1) / L;
    std::vector<double> bn(nb, 0.0), bd(nb, 0.0);
    double tn = 0.0, td = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
        bn[j / L] += num[j];
        bd[j / L] += den[j];
    }
    for (std::size_t b = 0; b < nb; ++b) {
        tn += bn[b];
        td += bd[b];
    }
    if (td == 0.0) throw Error(ErrorKind::NoExceedances, "no exceedances of the threshold");
    RunsEstimate est;
    est.u = u;
    est.m = m;
    est.theta_tilde = tn / td;
    est.n_exceed = static_cast<std::size_t>(td);

    auto rng = key.domain("runs_bootstrap").rng();
    std::uniform_int_distribution<std::size_t> pick(0, nb - 1);
    std::vector<double> reps;
    reps.reserve(cfg.bootstrap);
    for (std::size_t r = 0; r < cfg.bootstrap; ++r) {
        double sn = 0.0, sd = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            const auto i = pick(rng);
            sn += bn[i];
            sd += bd[i];
        }
        if (sd > 0.0) reps.push_back(sn / sd);
    }
    if (reps.empty()) {
        est.ci95 = {est.theta_tilde, est.theta_tilde};
        return est;
    }
    std::sort(reps.begin(), reps.end());
    auto pct = [&](double p) {
        const double pos = p * static_cast<double>(reps.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, reps.size() - 1);
        return reps[lo] + (pos - static_cast<double>(lo)) * (reps[hi] - reps[lo]);
    };
    // A percentile interval can miss the point estimate when the bootstrap law is skewed; widen to cover it.
    est.ci95 = {std::min(pct(0.025), est.theta_tilde), std::max(pct(0.975), est.theta_tilde)};
    return est;
}

/// chi(tau, u) = #{j: X2_j > u, X2_{j+tau} > u} / #{j: X2_j > u}, j = 0..n-1-tau.
inline std::vector<double> empirical_extremogram(std::span<const double> x2, double u, std::size_t tau_max) {
    const std::size_t n = x2.size();
    if (n <= tau_max) throw Error(ErrorKind::Config, "path shorter than tau_max");
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < n; ++j) {
        if (x2[j] > u) idx.push_back(j);
    }
    if (idx.empty()) throw Error(ErrorKind::NoExceedances, "no exceedances of the threshold");
    std::vector<double> chi(tau_max + 1, 0.0);
    for (std::size_t tau = 0; tau <= tau_max; ++tau) {
        double num = 0.0, den = 0.0;
        for (auto j : idx) {
            if (j + tau >= n) break;
            den += 1.0;
            if (x2[j + tau] > u) num += 1.0;
        }
        if (den == 0.0) throw Error(ErrorKind::NoExceedances, "no exceedances before the end of the path");
        chi[tau] = num / den;
    }
    return chi;
}

struct TailQQ {
    double x = 0.0;                 ///< threshold, the x_quantile of X2
    std::size_t n_exceed = 0;
    std::vector<double> log_r;
    std::vector<double> log_ratio;  ///< ln P(X2 > r x | X2 > x)
    double slope = 0.0;             ///< least squares through the origin; estimates -kappa
    double slope_stderr = 0.0;
};

/**
 * @brief Conditional tail ratios on an r-grid and their log-log slope.
 *
 * Grid points with no exceedance beyond r x are dropped. The slope standard
 * error uses the nested binomial covariance cov(ln p_r, ln p_s) = (1 - p_r)/(n p_r), r <= s.
 */
inline TailQQ tail_qq(std::span<const double> x2, double x_quantile, const std::vector<double>& r_grid) {
    TailQQ out;
    out.x = empirical_quantile(x2, x_quantile);
    std::vector<double> tail;
    for (double v : x2) {
        if (v > out.x) tail.push_back(v);
    }
    if (tail.empty()) throw Error(ErrorKind::NoExceedances, "no exceedances of the quantile");
    std::sort(tail.begin(), tail.end());
    out.n_exceed = tail.size();
    const auto n = static_cast<double>(tail.size());
    std::vector<double> p;
    for (double r : r_grid) {
        if (!(r >= 1.0)) throw Error(ErrorKind::Config, "r grid values must be at least 1");
        const auto above = static_cast<double>(tail.end() - std::upper_bound(tail.begin(), tail.end(), r * out.x));
        if (above == 0.0) continue;
        out.log_r.push_back(std::log(r));
        out.log_ratio.push_back(std::log(above / n));
        p.push_back(above / n);
    }
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < out.log_r.size(); ++i) {
        sxx += out.log_r[i] * out.log_r[i];
        sxy += out.log_r[i] * out.log_ratio[i];
    }
    if (sxx == 0.0) throw Error(ErrorKind::NoExceedances, "too few grid points above the threshold");
    out.slope = sxy / sxx;
    double var = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        for (std::size_t j = 0; j < p.size(); ++j) {
            // Nested events: the covariance is governed by the less extreme of the two.
            const double pr = std::max(p[i], p[j]);
            var += out.log_r[i] * out.log_r[j] * (1.0 - pr) / (n * pr);
        }
    }
    out.slope_stderr = std::sqrt(var) / sxx;
    return out;
}

}  // namespace garchtail
