#pragma once

// Reference computations used only by tests. They deliberately avoid the
// library's own density and quadrature code paths.

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

/// Skew-t parameters from the gamma function itself (no log-gamma).
struct SkewT {
    double nu;
    double xi;
    double b;
    double omega;
    double mu;

    SkewT(double nu_, double xi_) : nu(nu_), xi(xi_) {
        b = xi / std::sqrt(1.0 + xi * xi) * std::sqrt(nu / std::numbers::pi) * std::tgamma((nu - 1.0) / 2.0) /
            std::tgamma(nu / 2.0);
        omega = 1.0 / std::sqrt(nu / (nu - 2.0) - b * b);
        mu = -omega * b;
    }

    [[nodiscard]] double pdf(double z) const {
        boost::math::students_t_distribution<double> t(nu), t1(nu + 1.0);
        const double y = (z - mu) / omega;
        const double arg = xi * y * std::sqrt((nu + 1.0) / (nu + y * y));
        return 2.0 / omega * boost::math::pdf(t, y) * boost::math::cdf(t1, arg);
    }
};

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

inline double scaled_t_pdf(double z, double nu) {
    const double s = std::sqrt((nu - 2.0) / nu);
    boost::math::students_t_distribution<double> t(nu);
    return boost::math::pdf(t, z / s) / s;
}

/// Integral of f over (a, b), infinite limits allowed.
template <typename F>
double integrate(F f, double a, double b, double tol = 1e-12) {
    boost::math::quadrature::tanh_sinh<double> integrator;
    return integrator.integrate(f, a, b, tol);
}

/// E g(Z) for a density on the real line, split at 0 for accuracy.
template <typename Pdf, typename G>
double expectation(Pdf pdf, G g) {
    const double inf = std::numeric_limits<double>::infinity();
    auto h = [&](double z) {
        const double w = pdf(z);
        return w == 0.0 ? 0.0 : g(z) * w;
    };
    return integrate(h, -inf, 0.0) + integrate(h, 0.0, inf);
}

/// Root in k > 0 of E[(a Z^2 + b)^k] = 1 via bisection on a scalar quadrature.
template <typename Pdf>
double garch11_kappa(Pdf pdf, double a, double b, double lo, double hi) {
    auto f = [&](double k) { return expectation(pdf, [&](double z) { return std::pow(a * z * z + b, k); }) - 1.0; };
    boost::math::tools::eps_tolerance<double> tol(40);
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::bisect(f, lo, hi, tol, iters);
    return 0.5 * (r.first + r.second);
}

/// Spectral radius from a dense eigensolver.
inline double spectral_radius(const Eigen::MatrixXd& a) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
    double r = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) r = std::max(r, std::abs(es.eigenvalues()[i]));
    return r;
}

/// Inverse-cdf sampler from a tabulated cdf of an arbitrary density.
class InverseCdfSampler {
public:
    template <typename Pdf>
    InverseCdfSampler(Pdf pdf, double lo, double hi, std::size_t grid) : x_(grid), c_(grid) {
        const double h = (hi - lo) / static_cast<double>(grid - 1);
        const double inf = std::numeric_limits<double>::infinity();
        x_[0] = lo;
        c_[0] = integrate(pdf, -inf, lo);
        for (std::size_t i = 1; i < grid; ++i) {
            x_[i] = lo + h * static_cast<double>(i);
            c_[i] = c_[i - 1] + integrate(pdf, x_[i - 1], x_[i]);
        }
    }

    template <typename Rng>
    double operator()(Rng& rng) {
        double u = std::uniform_real_distribution<double>(c_.front(), c_.back())(rng);
        auto it = std::upper_bound(c_.begin(), c_.end(), u);
        if (it == c_.begin()) return x_.front();
        if (it == c_.end()) return x_.back();
        const auto i = static_cast<std::size_t>(it - c_.begin());
        const double w = (u - c_[i - 1]) / (c_[i] - c_[i - 1]);
        return x_[i - 1] + w * (x_[i] - x_[i - 1]);
    }

private:
    std::vector<double> x_;
    std::vector<double> c_;
};

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    return d;
}

}  // namespace oracle
