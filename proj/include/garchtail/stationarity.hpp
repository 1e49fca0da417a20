#pragma once

#include "garchtail/errors.hpp"
#include "garchtail/garch_spec.hpp"
#include "garchtail/innovations.hpp"
#include "garchtail/parallel.hpp"
#include "garchtail/rng.hpp"
#include "garchtail/sre.hpp"
#include "garchtail/stats.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace garchtail {

/// E ln lambda(Z^2) by quadrature over the innovation density.
inline double e_log_lambda(const GarchSpec& spec) {
    // ARCH roots vanish at z = 0; keep z^2 off zero so the log stays finite.
    return expect(spec.innovation, [&](double z) {
        return std::log(perron_root(spec, std::max(z * z, std::numeric_limits<double>::min())));
    });
}

/// E lambda(Z^2)^k; lambda grows like Z^2, so the moment needs 2k below the innovation tail index.
inline double e_lambda_pow(const GarchSpec& spec, double k) {
    if (2.0 * k >= spec.innovation.moment_limit()) {
        throw Error(ErrorKind::MomentDiverged, "E lambda^k is infinite for k = " + std::to_string(k) +
                                                   " with nu = " + std::to_string(spec.innovation.nu));
    }
    return expect(spec.innovation, [&](double z) { return std::pow(perron_root(spec, z * z), k); });
}

/// eta = -ln E(lambda^kappa) / kappa.
inline double eta_from_kappa(const GarchSpec& spec, double kappa) {
    if (!(kappa > 0.0)) throw Error(ErrorKind::Config, "kappa must be positive");
    return -std::log(e_lambda_pow(spec, kappa)) / kappa;
}

/// gamma = E ln lambda - ln E(lambda^kappa) / kappa.
inline double gamma_combined(const GarchSpec& spec, double kappa) {
    return e_log_lambda(spec) + eta_from_kappa(spec, kappa);
}

/// One replicate of t^{-1} ln ||A_t ... A_1|| computed without rescaling.
struct NaiveTrace {
    std::vector<std::size_t> t;
    std::vector<double> gamma_t;
    std::size_t t_reached = 0;
    bool underflow = false;

    [[nodiscard]] double final_gamma() const {
        return gamma_t.empty() ? std::numeric_limits<double>::quiet_NaN() : gamma_t.back();
    }
};

namespace detail {

inline std::vector<std::size_t> checkpoints(std::size_t t, std::size_t count) {
    std::vector<std::size_t> out;
    count = std::max<std::size_t>(1, std::min(count, t));
    for (std::size_t i = 1; i <= count; ++i) out.push_back(std::max<std::size_t>(1, t * i / count));
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace detail

/**
 * @brief Direct product estimate of the top Lyapunov exponent.
 *
 * The running product is never rescaled; once its norm underflows to zero the
 * replicate stops and is flagged.
 */
inline std::vector<NaiveTrace> gamma_naive(const GarchSpec& spec, std::size_t t, std::size_t replicates, StreamKey key,
                                           std::size_t n_checkpoints = 200, unsigned workers = 1) {
    if (t < 1) throw Error(ErrorKind::Config, "gamma_naive needs t >= 1");
    const auto marks = detail::checkpoints(t, n_checkpoints);
    std::vector<NaiveTrace> out(replicates);
    const auto d = static_cast<Eigen::Index>(spec.dim());
    parallel_for(replicates, workers, [&](std::size_t r) {
        auto rng = key.domain("gamma_naive").sub(r).rng();
        InnovationSampler draw(spec.innovation);
        Eigen::MatrixXd prod = Eigen::MatrixXd::Identity(d, d);
        NaiveTrace& tr = out[r];
        std::size_t next = 0;
        for (std::size_t s = 1; s <= t; ++s) {
            prod = build_matrix(spec, draw.squared(rng)).a * prod;
            const double norm = matrix_norm(prod);
            if (!(norm > 0.0) || !std::isfinite(norm)) {
                tr.underflow = true;
                tr.t_reached = s - 1;
                return;
            }
            if (s == marks[next]) {
                tr.t.push_back(s);
                tr.gamma_t.push_back(std::log(norm) / static_cast<double>(s));
                ++next;
            }
        }
        tr.t_reached = t;
    });
    return out;
}

struct GammaTracePoint {
    std::size_t t = 0;
    double gamma_t = 0.0;     ///< mean over replicates of t^{-1} ln ||A_t...A_1||
    double eta_t = 0.0;       ///< mean over replicates of t^{-1} ln ||Delta_t||
    double c_condition = 0.0; ///< mean over replicates of t^{-1} ln ||C_t|| = eta_t - eta
    double c_spread = 0.0;    ///< standard deviation of t^{-1} ln ||C_t|| across replicates
};

struct GammaReport {
    std::optional<double> gamma_naive;
    bool naive_underflow = false;
    double gamma_rescaled = 0.0;
    double eta = 0.0;
    double eta_stderr = 0.0;
    double eta_plain = 0.0; ///< average of t^{-1} ln ||Delta_t|| without the half-window correction
    double e_log_lambda = 0.0;
    double e_log_lambda_mc = 0.0;
    double e_log_lambda_mc_stderr = 0.0;
    std::size_t t_used = 0;
    std::size_t replicates = 0;
    double mc_stderr = 0.0;
    bool stable_flags = false; ///< any non-finite value in the rescaled product
    bool condition_suspect = false;
    std::vector<double> eta_replicates;
    std::vector<GammaTracePoint> trace;
};

/**
 * @brief Lyapunov exponent through the eigenvalue-rescaled product.
 *
 * Delta_t = prod A_i / lambda_i is kept as a unit-norm matrix plus its log-norm.
 * Per replicate eta is estimated as (ln||Delta_t|| - ln||Delta_{t/2}||) / (t/2),
 * which removes the O(1/t) offset carried by t^{-1} ln||Delta_t||.
 * E ln lambda is integrated by quadrature; the Monte Carlo mean of ln lambda_i is
 * reported alongside.
 */
inline GammaReport gamma_stable(const GarchSpec& spec, std::size_t t, std::size_t replicates, StreamKey key,
                                unsigned workers = 1, std::size_t n_checkpoints = 100) {
    if (t < 2) throw Error(ErrorKind::Config, "gamma_stable needs t >= 2");
    if (replicates < 1) throw Error(ErrorKind::Config, "gamma_stable needs at least one replicate");
    const auto marks = detail::checkpoints(t, n_checkpoints);
    const std::size_t half = t / 2;
    const auto d = static_cast<Eigen::Index>(spec.dim());

    struct Replicate {
        double eta = 0.0;
        double eta_plain = 0.0;
        double sum_log_lambda = 0.0;
        double sum_log_lambda_sq = 0.0;
        bool flagged = false;
        std::vector<double> eta_t;
        std::vector<double> gamma_t;
    };
    std::vector<Replicate> reps(replicates);

    parallel_for(replicates, workers, [&](std::size_t r) {
        auto rng = key.domain("gamma_stable").sub(r).rng();
        InnovationSampler draw(spec.innovation);
        Replicate& rep = reps[r];
        Eigen::MatrixXd unit = Eigen::MatrixXd::Identity(d, d) / static_cast<double>(d);
        double log_norm = std::log(static_cast<double>(d));
        double log_norm_half = 0.0;
        std::size_t next = 0;
        for (std::size_t s = 1; s <= t; ++s) {
            const MatrixSample m = build_matrix(spec, draw.squared(rng));
            const double ll = std::log(m.lambda);
            rep.sum_log_lambda += ll;
            rep.sum_log_lambda_sq += ll * ll;
            unit = (m.a / m.lambda) * unit;
            const double norm = matrix_norm(unit);
            if (!(norm > 0.0) || !std::isfinite(norm) || !std::isfinite(ll)) {
                rep.flagged = true;
                break;
            }
            unit /= norm;
            log_norm += std::log(norm);
            if (s == half) log_norm_half = log_norm;
            if (s == marks[next]) {
                const double e = log_norm / static_cast<double>(s);
                rep.eta_t.push_back(e);
                rep.gamma_t.push_back(e + rep.sum_log_lambda / static_cast<double>(s));
                ++next;
            }
        }
        rep.eta_plain = log_norm / static_cast<double>(t);
        rep.eta = (log_norm - log_norm_half) / static_cast<double>(t - half);
    });

    GammaReport out;
    out.t_used = t;
    out.replicates = replicates;
    std::vector<double> plain;
    double sum_ll = 0.0, sum_ll2 = 0.0;
    for (const auto& rep : reps) {
        out.stable_flags = out.stable_flags || rep.flagged;
        out.eta_replicates.push_back(rep.eta);
        plain.push_back(rep.eta_plain);
        sum_ll += rep.sum_log_lambda;
        sum_ll2 += rep.sum_log_lambda_sq;
    }
    const double n_ll = static_cast<double>(t) * static_cast<double>(replicates);
    out.e_log_lambda_mc = sum_ll / n_ll;
    out.e_log_lambda_mc_stderr = std::sqrt(std::max(0.0, sum_ll2 / n_ll - out.e_log_lambda_mc * out.e_log_lambda_mc) / n_ll);
    out.eta = detail::mean(out.eta_replicates);
    out.eta_stderr = detail::stderr_of_mean(out.eta_replicates);
    out.eta_plain = detail::mean(plain);
    out.e_log_lambda = e_log_lambda(spec);
    out.gamma_rescaled = out.e_log_lambda + out.eta;
    out.mc_stderr = out.eta_stderr;

    if (!out.stable_flags) {
        for (std::size_t i = 0; i < marks.size(); ++i) {
            GammaTracePoint pt;
            pt.t = marks[i];
            std::vector<double> c;
            double g = 0.0, e = 0.0;
            for (const auto& rep : reps) {
                g += rep.gamma_t[i];
                e += rep.eta_t[i];
                c.push_back(rep.eta_t[i] - out.eta);
            }
            pt.gamma_t = g / static_cast<double>(replicates);
            pt.eta_t = e / static_cast<double>(replicates);
            pt.c_condition = detail::mean(c);
            pt.c_spread = replicates > 1 ? detail::stderr_of_mean(c) * std::sqrt(static_cast<double>(replicates)) : 0.0;
            out.trace.push_back(pt);
        }
        // Under the almost-sure limit the replicates contract around zero; flag a
        // trace whose spread does not shrink over the second half.
        if (out.trace.size() >= 4 && replicates > 1) {
            const auto& mid = out.trace[out.trace.size() / 2];
            const auto& end = out.trace.back();
            out.condition_suspect = end.c_spread > mid.c_spread * 1.05 || std::abs(end.c_condition) > 3.0 * end.c_spread + 1e-3;
        }
    }
    return out;
}

enum class Verdict { StationaryBySufficiency, StationaryByGamma, NotStationary, Inconclusive };

inline const char* to_string(Verdict v) noexcept {
    switch (v) {
        case Verdict::StationaryBySufficiency: return "StationaryBySufficiency";
        case Verdict::StationaryByGamma: return "StationaryByGamma";
        case Verdict::NotStationary: return "NotStationary";
        case Verdict::Inconclusive: return "Inconclusive";
    }
    return "Inconclusive";
}

struct StationarityBudget {
    std::size_t t = 30000;
    std::size_t replicates = 10;
    unsigned workers = 1;
};

struct StationarityResult {
    Verdict verdict = Verdict::Inconclusive;
    std::string reason;
    std::optional<GammaReport> report;
};

/**
 * @brief Strict-stationarity decision.
 *
 * phi <= 1 is sufficient and sum(beta) >= 1 rules stationarity out; otherwise
 * gamma is estimated and compared with two standard errors.
 */
inline StationarityResult check_stationarity(const GarchSpec& spec, const StationarityBudget& budget, StreamKey key) {
    StationarityResult out;
    if (spec.phi() <= 1.0 + 1e-12) {
        out.verdict = Verdict::StationaryBySufficiency;
        out.reason = "sum(alpha) + sum(beta) <= 1";
        return out;
    }
    if (spec.sum_beta() >= 1.0) {
        out.verdict = Verdict::NotStationary;
        out.reason = "sum(beta) >= 1";
        return out;
    }
    out.report = gamma_stable(spec, budget.t, budget.replicates, key, budget.workers);
    const double g = out.report->gamma_rescaled;
    const double se = out.report->mc_stderr;
    if (g + 2.0 * se < 0.0) {
        out.verdict = Verdict::StationaryByGamma;
        out.reason = "gamma + 2 se < 0";
    } else if (g - 2.0 * se > 0.0) {
        out.verdict = Verdict::NotStationary;
        out.reason = "gamma - 2 se > 0";
    } else {
        out.verdict = Verdict::Inconclusive;
        out.reason = "gamma within two standard errors of 0";
    }
    return out;
}

}  // namespace garchtail
