#pragma once

#include "garchtail/errors.hpp"
#include "garchtail/innovations.hpp"

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

namespace garchtail {

/**
 * @brief GARCH(p,q) model: sigma2_t = alpha0 + sum alpha_i X2_{t-i} + sum beta_j sigma2_{t-j}.
 *
 * alpha has q entries (lagged squared observations), beta has p entries
 * (lagged variances). p = 0 is the ARCH(q) case.
 */
struct GarchSpec {
    int p = 1;
    int q = 1;
    double alpha0 = 1e-5;
    std::vector<double> alpha{0.1};
    std::vector<double> beta{0.8};
    Innovation innovation{};

    /// Dimension of the state vector (X2_t..X2_{t-q+1}, sigma2_t..sigma2_{t-p+1}).
    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(p + q); }

    [[nodiscard]] double sum_alpha() const { return std::accumulate(alpha.begin(), alpha.end(), 0.0); }
    [[nodiscard]] double sum_beta() const { return std::accumulate(beta.begin(), beta.end(), 0.0); }
    [[nodiscard]] double phi() const { return sum_alpha() + sum_beta(); }

    [[nodiscard]] bool is_igarch(double tol = 1e-12) const { return std::abs(phi() - 1.0) <= tol; }

    /// Index of the sigma2_t coordinate (0-based), or the X2 share when p = 0.
    [[nodiscard]] std::size_t sigma_index() const noexcept { return static_cast<std::size_t>(q); }

    /// Coefficient on lag i (1-based) of the scalar characteristic equation, zero padded.
    [[nodiscard]] double alpha_at(int i) const noexcept { return i >= 1 && i <= q ? alpha[i - 1] : 0.0; }
    [[nodiscard]] double beta_at(int i) const noexcept { return i >= 1 && i <= p ? beta[i - 1] : 0.0; }

    void validate() const {
        if (p < 0 || q < 0 || p + q < 1) throw Error(ErrorKind::Dimension, "need p >= 0, q >= 0 and p + q >= 1");
        if (q < 1) throw Error(ErrorKind::Config, "q must be at least 1");
        if (alpha.size() != static_cast<std::size_t>(q)) {
            throw Error(ErrorKind::Dimension, "alpha has " + std::to_string(alpha.size()) + " entries, q = " +
                                                  std::to_string(q));
        }
        if (beta.size() != static_cast<std::size_t>(p)) {
            throw Error(ErrorKind::Dimension, "beta has " + std::to_string(beta.size()) + " entries, p = " +
                                                  std::to_string(p));
        }
        if (!(alpha0 > 0.0)) throw Error(ErrorKind::Config, "alpha0 must be positive");
        for (double a : alpha) {
            if (!(a >= 0.0)) throw Error(ErrorKind::Config, "alpha coefficients must be nonnegative");
        }
        for (double b : beta) {
            if (!(b >= 0.0)) throw Error(ErrorKind::Config, "beta coefficients must be nonnegative");
        }
        if (!(alpha.back() > 0.0)) throw Error(ErrorKind::Config, "alpha_q must be positive");
        if (p >= 1 && !(beta.back() > 0.0)) throw Error(ErrorKind::Config, "beta_p must be positive");
    }
};

inline GarchSpec make_spec(int p, int q, double alpha0, std::vector<double> alpha, std::vector<double> beta,
                           Innovation innovation) {
    GarchSpec spec;
    spec.p = p;
    spec.q = q;
    spec.alpha0 = alpha0;
    spec.alpha = std::move(alpha);
    spec.beta = std::move(beta);
    spec.innovation = innovation;
    spec.validate();
    return spec;
}

inline GarchSpec garch11(double a1, double b1, Innovation innovation, double alpha0 = 1e-5) {
    return make_spec(1, 1, alpha0, {a1}, {b1}, innovation);
}

}  // namespace garchtail
