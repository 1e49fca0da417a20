#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

namespace garchtail::detail {

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
}

inline double stderr_of_mean(const std::vector<double>& v) {
    if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

/// Standard error of the mean of a correlated series from about `batches` batch means.
inline double batch_means_stderr(const std::vector<double>& v, std::size_t batches = 20) {
    if (v.size() < 4) return std::numeric_limits<double>::infinity();
    batches = std::min(batches, v.size() / 2);
    const std::size_t size = v.size() / batches;
    std::vector<double> means;
    for (std::size_t b = 0; b < batches; ++b) {
        double s = 0.0;
        for (std::size_t i = b * size; i < (b + 1) * size; ++i) s += v[i];
        means.push_back(s / static_cast<double>(size));
    }
    return stderr_of_mean(means);
}

/// Kish effective sample size of a weight vector.
inline double effective_sample_size(std::span<const double> w) {
    double s = 0.0, s2 = 0.0;
    for (double x : w) {
        s += x;
        s2 += x * x;
    }
    return s2 > 0.0 ? s * s / s2 : 0.0;
}

/// Two-sample Kolmogorov-Smirnov distance between weighted samples.
inline double weighted_ks(std::span<const double> xa, std::span<const double> wa, std::span<const double> xb,
                          std::span<const double> wb) {
    auto sorted = [](std::span<const double> x, std::span<const double> w) {
        std::vector<std::pair<double, double>> v(x.size());
        double total = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            v[i] = {x[i], w.empty() ? 1.0 : w[i]};
            total += v[i].second;
        }
        std::sort(v.begin(), v.end());
        for (auto& e : v) e.second /= total;
        return v;
    };
    const auto a = sorted(xa, wa);
    const auto b = sorted(xb, wb);
    std::size_t i = 0, j = 0;
    double fa = 0.0, fb = 0.0, d = 0.0;
    while (i < a.size() || j < b.size()) {
        double x;
        if (j >= b.size() || (i < a.size() && a[i].first <= b[j].first)) {
            x = a[i].first;
        } else {
            x = b[j].first;
        }
        while (i < a.size() && a[i].first <= x) fa += a[i++].second;
        while (j < b.size() && b[j].first <= x) fb += b[j++].second;
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

/// One-sample Kolmogorov-Smirnov distance of a weighted sample from a continuous cdf.
inline double weighted_ks_cdf(std::span<const double> x, std::span<const double> w,
                              const std::function<double(double)>& cdf) {
    std::vector<std::pair<double, double>> v(x.size());
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        v[i] = {x[i], w.empty() ? 1.0 : w[i]};
        total += v[i].second;
    }
    std::sort(v.begin(), v.end());
    double f = 0.0, d = 0.0;
    for (std::size_t i = 0; i < v.size();) {
        const double xi = v[i].first;
        const double before = f;
        while (i < v.size() && v[i].first == xi) f += v[i++].second / total;
        const double c = cdf(xi);
        d = std::max({d, std::abs(c - before), std::abs(f - c)});
    }
    return d;
}

/// Asymptotic 95% critical value of the two-sample KS distance for sizes na, nb.
inline double ks_critical(double na, double nb) { return 1.36 * std::sqrt(1.0 / na + 1.0 / nb); }

}  // namespace garchtail::detail
