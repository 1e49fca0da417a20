#pragma once

#include "garchtail/errors.hpp"
#include "garchtail/rng.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace garchtail {

enum class InnovationKind { Gaussian, ScaledT, SkewT };

inline std::string_view to_string(InnovationKind kind) noexcept {
    switch (kind) {
        case InnovationKind::Gaussian: return "gaussian";
        case InnovationKind::ScaledT: return "scaled_t";
        case InnovationKind::SkewT: return "skew_t";
    }
    return "unknown";
}

inline InnovationKind parse_innovation_kind(std::string_view name) {
    if (name == "gaussian" || name == "normal") return InnovationKind::Gaussian;
    if (name == "scaled_t" || name == "t") return InnovationKind::ScaledT;
    if (name == "skew_t" || name == "skewt") return InnovationKind::SkewT;
    throw Error(ErrorKind::Config, "unknown innovation kind '" + std::string(name) + "'");
}

/**
 * @brief Zero-mean, unit-variance innovation law.
 *
 * The skew Student-t is the Azzalini-Capitanio family St(mu, omega, xi, nu)
 * with location and scale pinned so that E(Z) = 0 and Var(Z) = 1. ScaledT is
 * the xi = 0 member, i.e. T * sqrt((nu - 2) / nu) for T ~ t_nu.
 */
struct Innovation {
    InnovationKind kind = InnovationKind::Gaussian;
    double nu = std::numeric_limits<double>::infinity();
    double xi = 0.0;
    double mu = 0.0;
    double omega = 1.0;

    [[nodiscard]] bool symmetric() const noexcept { return kind != InnovationKind::SkewT || xi == 0.0; }

    /// Largest p with E|Z|^p finite (infinite for the Gaussian).
    [[nodiscard]] double moment_limit() const noexcept {
        return kind == InnovationKind::Gaussian ? std::numeric_limits<double>::infinity() : nu;
    }
};

/// Mean of the unstandardized skew-t: xi / sqrt(1 + xi^2) * sqrt(nu/pi) * Gamma((nu-1)/2) / Gamma(nu/2).
inline double skew_t_mean_coefficient(double nu, double xi) {
    const double shape = xi / std::sqrt(1.0 + xi * xi);
    const double log_ratio = std::lgamma(0.5 * (nu - 1.0)) - std::lgamma(0.5 * nu);
    return shape * std::sqrt(nu / std::numbers::pi) * std::exp(log_ratio);
}

inline Innovation standardize(InnovationKind kind, double nu = 0.0, double xi = 0.0) {
    Innovation inn;
    inn.kind = kind;
    if (kind == InnovationKind::Gaussian) return inn;
    if (!(nu > 2.0)) throw Error(ErrorKind::InvalidDof, "degrees of freedom must exceed 2, got " + std::to_string(nu));
    inn.nu = nu;
    inn.xi = kind == InnovationKind::SkewT ? xi : 0.0;
    const double b = kind == InnovationKind::SkewT ? skew_t_mean_coefficient(nu, inn.xi) : 0.0;
    const double var_unit = nu / (nu - 2.0) - b * b;
    if (!(var_unit > 0.0)) {
        throw Error(ErrorKind::NonPositiveVariance, "nu/(nu-2) - b^2 is not positive for nu=" + std::to_string(nu) +
                                                        ", xi=" + std::to_string(xi));
    }
    inn.omega = 1.0 / std::sqrt(var_unit);
    inn.mu = -inn.omega * b;
    return inn;
}

namespace detail {

inline double t_pdf(double x, double nu) { return boost::math::pdf(boost::math::students_t_distribution<double>(nu), x); }
inline double t_cdf(double x, double nu) { return boost::math::cdf(boost::math::students_t_distribution<double>(nu), x); }

inline boost::math::quadrature::exp_sinh<double>& half_line_integrator() {
    thread_local boost::math::quadrature::exp_sinh<double> integrator;
    return integrator;
}

/// Integral of f over [a, inf).
template <typename F>
double integrate_tail(F&& f, double a, double tol = 1e-11) {
    auto& integrator = half_line_integrator();
    if (a == 0.0) return integrator.integrate(f, tol);
    return integrator.integrate([&](double x) { return f(a + x); }, tol);
}

}  // namespace detail

inline double density(const Innovation& inn, double z) {
    switch (inn.kind) {
        case InnovationKind::Gaussian:
            return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
        case InnovationKind::ScaledT:
        case InnovationKind::SkewT: {
            const double zs = (z - inn.mu) / inn.omega;
            const double base = detail::t_pdf(zs, inn.nu) / inn.omega;
            if (inn.xi == 0.0) return base;
            const double arg = zs * inn.xi * std::sqrt((inn.nu + 1.0) / (inn.nu + zs * zs));
            return 2.0 * base * detail::t_cdf(arg, inn.nu + 1.0);
        }
    }
    return 0.0;
}

/// P(Z > y), integrated directly in the tail to keep relative precision.
inline double survival(const Innovation& inn, double y) {
    if (inn.kind == InnovationKind::Gaussian) {
        return boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(), y));
    }
    if (inn.xi == 0.0) return detail::t_cdf(-(y - inn.mu) / inn.omega, inn.nu);
    if (y >= 0.0) return detail::integrate_tail([&](double z) { return density(inn, z); }, y);
    const double lower = detail::integrate_tail([&](double t) { return density(inn, -t); }, -y);
    return 1.0 - lower;
}

inline double cdf(const Innovation& inn, double z) {
    if (inn.kind == InnovationKind::Gaussian) {
        return boost::math::cdf(boost::math::normal_distribution<double>(), z);
    }
    if (inn.xi == 0.0) return detail::t_cdf((z - inn.mu) / inn.omega, inn.nu);
    if (z <= 0.0) return detail::integrate_tail([&](double t) { return density(inn, -t); }, -z);
    return 1.0 - survival(inn, z);
}

/**
 * @brief Limit of P(Z > x | |Z| > x) as x grows.
 *
 * For the skew-t the density tails behave like f_T(z/omega) F_T(+-xi sqrt(nu+1); nu+1),
 * so the limit is F_T(xi sqrt(nu+1); nu+1).
 */
inline double delta_z(const Innovation& inn) {
    if (inn.symmetric()) return 0.5;
    return detail::t_cdf(inn.xi * std::sqrt(inn.nu + 1.0), inn.nu + 1.0);
}

/// P(Z > y | |Z| > y) for y > 0; falls back to the limit once both tails underflow.
inline double tail_ratio(const Innovation& inn, double y) {
    if (inn.symmetric()) return 0.5;
    const double up = survival(inn, y);
    const double lo = cdf(inn, -y);
    const double total = up + lo;
    if (!(total > 0.0)) return delta_z(inn);
    return up / total;
}

/// E f(Z) by double-exponential quadrature on each half line.
template <typename F>
double expect(const Innovation& inn, F&& f, double tol = 1e-11) {
    auto weighted = [&](double z) {
        const double w = density(inn, z);
        return w == 0.0 ? 0.0 : f(z) * w;
    };
    const double pos = detail::integrate_tail(weighted, 0.0, tol);
    const double neg = detail::integrate_tail([&](double z) { return weighted(-z); }, 0.0, tol);
    return pos + neg;
}

/**
 * @brief Fixed double-exponential nodes for expectations under the innovation law.
 *
 * Nodes z = +-exp(pi/2 sinh t) on a uniform t-grid; weights include the density,
 * so E g(Z) ~ sum_i w_i g(z_i). Reusable across many integrands g, which is
 * what makes tabulating E(u + (1 - u) Z^2)^k over u cheap.
 */
struct DensityNodes {
    std::vector<double> z;
    std::vector<double> w;
    double cutoff = 0.0;     ///< |z| beyond which the nodes stop
    double tail_coef = 0.0;  ///< sum over both sides of lim |z|^(nu+1) f(z)
    double tail_index = std::numeric_limits<double>::infinity();

    /// Integral of |z|^p f(z) over |z| > cutoff from the power-law tail of f; zero for light tails.
    [[nodiscard]] double tail_power_moment(double p) const {
        if (!std::isfinite(tail_index) || tail_coef == 0.0) return 0.0;
        if (p >= tail_index) return std::numeric_limits<double>::infinity();
        return tail_coef * std::pow(cutoff, p - tail_index) / (tail_index - p);
    }

    template <typename G>
    [[nodiscard]] double expect(G&& g) const {
        double s = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) s += w[i] * g(z[i]);
        return s;
    }
};

inline DensityNodes density_nodes(const Innovation& inn, double h = 1.0 / 64.0, double t_max = 4.0) {
    DensityNodes nodes;
    const auto n = static_cast<int>(std::ceil(t_max / h));
    for (int j = -n; j <= n; ++j) {
        const double t = h * j;
        const double x = std::exp(0.5 * std::numbers::pi * std::sinh(t));
        const double dx = 0.5 * std::numbers::pi * std::cosh(t) * x * h;
        for (double z : {x, -x}) {
            const double f = density(inn, z);
            if (f > 0.0 && std::isfinite(x)) {
                nodes.z.push_back(z);
                nodes.w.push_back(f * dx);
            }
        }
    }
    if (inn.kind != InnovationKind::Gaussian) {
        // The last node stands for the cell up to t_n + h/2; the tail beyond is added analytically.
        nodes.cutoff = std::exp(0.5 * std::numbers::pi * std::sinh(h * (n + 0.5)));
        nodes.tail_index = inn.nu;
        const double scale = std::pow(nodes.cutoff, inn.nu + 1.0);
        nodes.tail_coef = scale * (density(inn, nodes.cutoff) + density(inn, -nodes.cutoff));
    }
    return nodes;
}

/// E|Z|^p; infinite when p reaches the tail index of the innovation.
inline double abs_moment(const Innovation& inn, double p) {
    if (p >= inn.moment_limit()) return std::numeric_limits<double>::infinity();
    return expect(inn, [p](double z) { return std::pow(std::abs(z), p); });
}

/// E[(Z^+)^p].
inline double positive_moment(const Innovation& inn, double p) {
    if (p >= inn.moment_limit()) return std::numeric_limits<double>::infinity();
    return detail::integrate_tail(
        [&](double z) {
            const double w = density(inn, z);
            return w == 0.0 ? 0.0 : std::pow(z, p) * w;
        },
        0.0);
}

/**
 * @brief Draws Z by the stochastic representation.
 *
 * Skew-t: mu + omega * (d|U0| + sqrt(1-d^2) U1) / sqrt(W/nu), d = xi/sqrt(1+xi^2),
 * U0, U1 standard normal, W ~ chi^2_nu.
 */
class InnovationSampler {
public:
    explicit InnovationSampler(const Innovation& inn)
        : inn_(inn),
          chi2_(std::isfinite(inn.nu) ? inn.nu : 1.0),
          shape_(inn.xi / std::sqrt(1.0 + inn.xi * inn.xi)),
          shape_c_(std::sqrt(1.0 - shape_ * shape_)) {}

    double operator()(Rng& rng) {
        if (inn_.kind == InnovationKind::Gaussian) return normal_(rng);
        const double scale = std::sqrt(chi2_(rng) / inn_.nu);
        if (inn_.xi == 0.0) return inn_.omega * normal_(rng) / scale;
        const double u0 = normal_(rng);
        const double u1 = normal_(rng);
        const double y = shape_ * std::abs(u0) + shape_c_ * u1;
        return inn_.mu + inn_.omega * y / scale;
    }

    double squared(Rng& rng) {
        const double z = (*this)(rng);
        return z * z;
    }

    [[nodiscard]] const Innovation& innovation() const noexcept { return inn_; }

private:
    Innovation inn_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::chi_squared_distribution<double> chi2_;
    double shape_;
    double shape_c_;
};

inline std::vector<double> sample(const Innovation& inn, std::size_t n, StreamKey key) {
    auto rng = key.domain("innovations").rng();
    InnovationSampler draw(inn);
    std::vector<double> out(n);
    for (auto& z : out) z = draw(rng);
    return out;
}

}  // namespace garchtail
