#pragma once

#include "garchtail/errors.hpp"
#include "garchtail/garch_spec.hpp"
#include "garchtail/innovations.hpp"
#include "garchtail/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace garchtail {

/// One draw of the random pair (A_t, B_t) together with its dominant eigenvalue.
struct MatrixSample {
    Eigen::MatrixXd a;
    Eigen::VectorXd b;
    double z2 = 0.0;
    double lambda = 0.0;
};

/// Entrywise absolute sum.
inline double matrix_norm(const Eigen::MatrixXd& a) { return a.cwiseAbs().sum(); }

/**
 * @brief Spectral radius of a small nonnegative matrix by power iteration.
 *
 * Iterates on A + sI with s tracking the current estimate, so imprimitive
 * matrices (e.g. ARCH(2) with alpha_1 = 0) converge and small radii keep
 * relative accuracy. Stops when the Collatz-Wielandt bracket of A closes or
 * the ratio estimate settles.
 */
inline double dominant_eigenvalue(const Eigen::MatrixXd& a, double tol = 1e-10, int max_iter = 10000) {
    const auto d = a.rows();
    if (d == 0 || a.cols() != d) throw Error(ErrorKind::Dimension, "dominant_eigenvalue needs a square matrix");
    const double total = matrix_norm(a);
    if (total == 0.0) return 0.0;
    Eigen::VectorXd x = Eigen::VectorXd::Constant(d, 1.0 / static_cast<double>(d));
    double estimate = total / static_cast<double>(d);
    int settled = 0;
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd y = a * x;
        const double ratio = y.sum();
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            const double r = y[i] / x[i];
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
        if (hi - lo <= tol * hi) return 0.5 * (lo + hi);
        if (ratio == 0.0) return 0.0;
        const double change = std::abs(ratio - estimate);
        settled = change <= 1e-3 * tol * ratio ? settled + 1 : 0;
        if (settled >= 5) return ratio;
        const double shift = std::max(ratio, 1e-300);
        const Eigen::VectorXd next = y + shift * x;
        x = next / next.sum();
        estimate = ratio;
    }
    throw Error(ErrorKind::Convergence, "power iteration did not reach tolerance");
}

/**
 * @brief Perron root of A(z2) from its scalar characteristic equation.
 *
 * The positive eigenvalue solves sum_{i=1}^{m} (z2 alpha_i + beta_i) lambda^{-i} = 1,
 * m = max(p, q), with missing coefficients read as zero. Solved by monotone
 * Newton steps in mu = 1/lambda.
 */
inline double perron_root(const GarchSpec& spec, double z2) {
    const int m = std::max(spec.p, spec.q);
    double c_buf[64];
    std::vector<double> c_heap;
    double* c = c_buf;
    if (m > 64) {
        c_heap.resize(static_cast<std::size_t>(m));
        c = c_heap.data();
    }
    double mu = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= m; ++i) {
        c[i - 1] = z2 * spec.alpha_at(i) + spec.beta_at(i);
        if (c[i - 1] > 0.0) mu = std::min(mu, std::pow(c[i - 1], -1.0 / i));
    }
    if (!std::isfinite(mu)) return 0.0;
    if (m == 1) return c[0];
    for (int it = 0; it < 200; ++it) {
        double g = -1.0;
        double dg = 0.0;
        double pw = 1.0;
        for (int i = 1; i <= m; ++i) {
            dg += i * c[i - 1] * pw;
            pw *= mu;
            g += c[i - 1] * pw;
        }
        const double next = mu - g / dg;
        if (!(next < mu) || mu - next <= 1e-16 * mu) {
            mu = std::min(mu, next);
            break;
        }
        mu = next;
    }
    return 1.0 / mu;
}

inline MatrixSample build_matrix(const GarchSpec& spec, double z2) {
    const int p = spec.p;
    const int q = spec.q;
    const int d = p + q;
    if (d < 1) throw Error(ErrorKind::Dimension, "p + q must be at least 1");
    MatrixSample s;
    s.z2 = z2;
    s.a = Eigen::MatrixXd::Zero(d, d);
    s.b = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < q; ++i) s.a(0, i) = spec.alpha[i] * z2;
    for (int j = 0; j < p; ++j) s.a(0, q + j) = spec.beta[j] * z2;
    for (int i = 1; i < q; ++i) s.a(i, i - 1) = 1.0;
    if (p >= 1) {
        for (int i = 0; i < q; ++i) s.a(q, i) = spec.alpha[i];
        for (int j = 0; j < p; ++j) s.a(q, q + j) = spec.beta[j];
        for (int j = 1; j < p; ++j) s.a(q + j, q + j - 1) = 1.0;
        s.b[q] = spec.alpha0;
    }
    s.b[0] = spec.alpha0 * z2;
    s.lambda = perron_root(spec, z2);
    return s;
}

/// c(theta) = alpha . theta_x + beta . theta_sigma, the common factor of rows 1 and q+1.
inline double drive(const GarchSpec& spec, std::span<const double> theta) {
    double c = 0.0;
    for (int i = 0; i < spec.q; ++i) c += spec.alpha[i] * theta[i];
    for (int j = 0; j < spec.p; ++j) c += spec.beta[j] * theta[spec.q + j];
    return c;
}

/// Mass carried by the shift rows: theta summed without the last entry of each block.
inline double shifted_mass(const GarchSpec& spec, std::span<const double> theta) {
    double d = 0.0;
    for (int i = 0; i + 1 < spec.q; ++i) d += theta[i];
    for (int j = 0; j + 1 < spec.p; ++j) d += theta[spec.q + j];
    return d;
}

/// ||A(z2) theta||_1 for nonnegative theta = (z2 + [p >= 1]) c(theta) + shifted mass.
inline double apply_norm(const GarchSpec& spec, std::span<const double> theta, double z2) {
    return (z2 + (spec.p >= 1 ? 1.0 : 0.0)) * drive(spec, theta) + shifted_mass(spec, theta);
}

/// out = A(z2) theta without forming the matrix. out must not alias theta.
inline void apply(const GarchSpec& spec, std::span<const double> theta, double z2, std::span<double> out) {
    const int q = spec.q;
    const int p = spec.p;
    const double c = drive(spec, theta);
    out[0] = z2 * c;
    for (int i = 1; i < q; ++i) out[i] = theta[i - 1];
    if (p >= 1) {
        out[q] = c;
        for (int j = 1; j < p; ++j) out[q + j] = theta[q + j - 1];
    }
}

/// Simulated path; entries before burn_in are warm-up.
struct ProcessPath {
    std::vector<double> x2;
    std::vector<double> sigma2;
    std::size_t burn_in = 0;

    [[nodiscard]] std::size_t size() const noexcept { return x2.size(); }
};

inline constexpr double kOverflowGuard = 1e300;

/// Starting level for the state: alpha0 / (1 - phi) when finite, else alpha0.
inline double initial_level(const GarchSpec& spec) {
    const double phi = spec.phi();
    return phi < 1.0 ? spec.alpha0 / (1.0 - phi) : spec.alpha0;
}

/**
 * @brief Scalar GARCH recursion holding the lagged state.
 *
 * state() is the SRE vector Y_t = (X2_t..X2_{t-q+1}, sigma2_t..sigma2_{t-p+1}).
 */
class GarchRecursion {
public:
    explicit GarchRecursion(const GarchSpec& spec)
        : spec_(spec), x_(static_cast<std::size_t>(spec.q), initial_level(spec)),
          s_(static_cast<std::size_t>(spec.p), initial_level(spec)) {}

    /// Advances one step with innovation square z2; returns sigma2_t.
    double step(double z2) {
        double sigma2 = spec_.alpha0;
        for (int i = 0; i < spec_.q; ++i) sigma2 += spec_.alpha[i] * x_[i];
        for (int j = 0; j < spec_.p; ++j) sigma2 += spec_.beta[j] * s_[j];
        if (!(sigma2 <= kOverflowGuard)) throw Error(ErrorKind::Explosion, "sigma2 exceeded the overflow guard");
        const double x2 = sigma2 * z2;
        if (!x_.empty()) {
            std::copy_backward(x_.begin(), x_.end() - 1, x_.end());
            x_[0] = x2;
        }
        if (!s_.empty()) {
            std::copy_backward(s_.begin(), s_.end() - 1, s_.end());
            s_[0] = sigma2;
        }
        last_x2_ = x2;
        last_sigma2_ = sigma2;
        return sigma2;
    }

    [[nodiscard]] double x2() const noexcept { return last_x2_; }
    [[nodiscard]] double sigma2() const noexcept { return last_sigma2_; }

    void state(std::span<double> out) const {
        std::copy(x_.begin(), x_.end(), out.begin());
        std::copy(s_.begin(), s_.end(), out.begin() + static_cast<std::ptrdiff_t>(x_.size()));
    }

private:
    GarchSpec spec_;
    std::vector<double> x_;
    std::vector<double> s_;
    double last_x2_ = 0.0;
    double last_sigma2_ = 0.0;
};

inline void check_path_args(std::size_t n, std::size_t n_b) {
    if (!(n > n_b)) throw Error(ErrorKind::Config, "simulate needs n > n_b");
}

/// Simulates n values (the first n_b flagged as burn-in) with the scalar recursion.
inline ProcessPath simulate(const GarchSpec& spec, std::size_t n, std::size_t n_b, StreamKey key) {
    check_path_args(n, n_b);
    auto rng = key.domain("simulate").rng();
    InnovationSampler draw(spec.innovation);
    GarchRecursion rec(spec);
    ProcessPath path;
    path.burn_in = n_b;
    path.x2.resize(n);
    path.sigma2.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        path.sigma2[t] = rec.step(draw.squared(rng));
        path.x2[t] = rec.x2();
    }
    return path;
}

/// Same draws as simulate, iterating Y_t = A_t Y_{t-1} + B_t with dense matrices.
inline ProcessPath simulate_sre(const GarchSpec& spec, std::size_t n, std::size_t n_b, StreamKey key) {
    check_path_args(n, n_b);
    auto rng = key.domain("simulate").rng();
    InnovationSampler draw(spec.innovation);
    const auto q = static_cast<Eigen::Index>(spec.q);
    Eigen::VectorXd y = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(spec.dim()), initial_level(spec));
    ProcessPath path;
    path.burn_in = n_b;
    path.x2.resize(n);
    path.sigma2.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double z2 = draw.squared(rng);
        const MatrixSample m = build_matrix(spec, z2);
        double sigma2 = spec.alpha0;
        if (spec.p == 0) {
            for (Eigen::Index i = 0; i < q; ++i) sigma2 += spec.alpha[static_cast<std::size_t>(i)] * y[i];
        }
        y = m.a * y + m.b;
        if (!(y.maxCoeff() <= kOverflowGuard)) throw Error(ErrorKind::Explosion, "state exceeded the overflow guard");
        path.x2[t] = y[0];
        path.sigma2[t] = spec.p >= 1 ? y[q] : sigma2;
    }
    return path;
}

}  // namespace garchtail
