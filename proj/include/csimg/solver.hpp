#ifndef CSIMG_SOLVER_HPP
#define CSIMG_SOLVER_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "csimg/operator.hpp"

namespace csimg {

/// Thrown when an iterate turns non-finite.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::int64_t iteration, const std::string& what_part)
        : std::runtime_error("solver diverged at iteration " + std::to_string(iteration) +
                             ": non-finite " + what_part),
          iteration(iteration) {}
    std::int64_t iteration;
};

/// Primal-dual hybrid gradient parameters. The step-size certificate
/// tau*sigma*L^2 <= 1 (L = operator-norm estimate of the solved, possibly
/// rescaled, operator) is enforced unless allow_uncertified_steps is set;
/// the certificate value is measured and recorded either way.
struct PdhgParams {
    double theta = 1.0;
    // Nonpositive sigma/tau mean "auto": both are set to 0.99/L from a power-
    // iteration estimate of the (rescaled) operator norm, which certifies
    // tau*sigma*L^2 <= 1 by construction.
    double sigma = 0.0;
    double tau = 0.0;
    std::int64_t max_iters = 2000;
    double residual_tol = 1e-9;
    bool rescale_by_sqrtN = true;
    bool allow_uncertified_steps = false;
    /// Known bound on the operator norm of the *rescaled* operator; estimated
    /// by power iteration when absent and a certificate is required.
    std::optional<double> operator_norm_hint;
    bool keep_iterate_log = false;
    /// If set, run exactly max_iters iterations, ignoring the stopping rule.
    bool fixed_iterations = false;
};

struct IterateRecord {
    std::int64_t iter;
    double objective;
    double feasibility;
};

struct SolveResult {
    Vec x_hat;
    std::int64_t iterations_run = 0;
    double final_feasibility = 0.0;  // ||A x - y||_2, original (unscaled) units
    double objective = 0.0;          // ||x||_1
    bool converged = false;
    double step_certificate = 0.0;   // measured tau*sigma*L^2
    Vec xi;                          // final dual variable (rescaled-problem units)
    std::vector<IterateRecord> iterate_log;
};

inline Complex complex_sign(Complex z) {
    const double a = std::abs(z);
    return a == 0.0 ? Complex(0.0, 0.0) : z / a;
}

/// S_tau(z) = sgn(z)(|z| - tau) for |z| >= tau, else 0.
inline Complex soft_threshold(Complex z, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("soft_threshold: tau must be positive");
    const double a = std::abs(z);
    return a >= tau ? complex_sign(z) * (a - tau) : Complex(0.0, 0.0);
}

/// Coordinatewise soft thresholding, the prox of tau*||.||_1.
inline Vec prox_l1(const Vec& z, double tau) {
    Vec out(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) out[i] = soft_threshold(z[i], tau);
    return out;
}

/// Noise-free dual update  xi <- xi + sigma (A xbar - y).
inline Vec dual_step_equality(const Vec& xi, const Vec& Axbar, const Vec& y, double sigma) {
    if (xi.size() != Axbar.size() || xi.size() != y.size())
        throw std::invalid_argument("dual_step_equality: dimension mismatch");
    return xi + sigma * (Axbar - y);
}

/// Noisy-case dual update: prox of the conjugate of the eta-ball indicator.
/// Returns 0 if ||sigma^-1 xi + A xbar - y|| <= eta, else the shrunk residual.
inline Vec dual_step_ball(const Vec& xi, const Vec& Axbar, const Vec& y, double sigma,
                          double eta) {
    if (xi.size() != Axbar.size() || xi.size() != y.size())
        throw std::invalid_argument("dual_step_ball: dimension mismatch");
    if (sigma <= 0.0 || eta < 0.0)
        throw std::invalid_argument("dual_step_ball: need sigma > 0, eta >= 0");
    Vec w = xi + sigma * (Axbar - y);
    const double nw = w.norm();
    if (nw <= eta * sigma) return Vec::Zero(xi.size());
    return (1.0 - eta * sigma / nw) * w;
}

namespace detail {

/// Shared Chambolle-Pock loop. eta < 0 selects the equality-constrained
/// problem; eta >= 0 the eta-ball (BPDN) problem. Everything runs on the
/// rescaled operator when requested; feasibility is converted back to the
/// caller's units.
inline SolveResult pdhg_solve(const ScatteringOperator& op, const Vec& y, double eta,
                              PdhgParams params, const Vec* warm_x = nullptr,
                              const Vec* warm_xi = nullptr) {
    if (y.size() != op.rows())
        throw std::invalid_argument("solve: y has length " + std::to_string(y.size()) +
                                    ", expected " + std::to_string(op.rows()));
    const std::int64_t N = op.N();
    const double scale = params.rescale_by_sqrtN ? std::sqrt(static_cast<double>(N)) : 1.0;
    const Vec ys = y / scale;
    const double eta_s = eta >= 0.0 ? eta / scale : -1.0;

    // Step-size certificate on the rescaled operator.
    double L;
    if (params.operator_norm_hint) {
        L = *params.operator_norm_hint;
    } else {
        Rng prng(0xc3a7);
        L = op.operator_norm(30, prng) / scale;
    }
    if (params.sigma <= 0.0 || params.tau <= 0.0) {
        const double step = 0.99 / std::max(L, 1e-300);
        if (params.sigma <= 0.0) params.sigma = step;
        if (params.tau <= 0.0) params.tau = step;
    }
    const double certificate = params.tau * params.sigma * L * L;
    if (!params.allow_uncertified_steps && certificate > 1.0)
        throw std::invalid_argument(
            "step sizes violate tau*sigma*L^2 <= 1 (got " + std::to_string(certificate) +
            "); pass allow_uncertified_steps to override");

    SolveResult res;
    res.step_certificate = certificate;

    Vec x = warm_x ? *warm_x : Vec::Zero(N);
    Vec x_prev = x;
    Vec xi = warm_xi ? *warm_xi : Vec::Zero(op.rows());
    Vec Ax = warm_x ? Vec(op.apply(x) / scale) : Vec::Zero(op.rows());
    Vec Ax_prev = Ax;  // tracks (A/scale) x
    const double feas_ref = std::max(1.0, ys.norm());

    double obj = 0.0;
    std::vector<double> obj_hist;
    bool converged = false;
    std::int64_t it = 0;
    for (; it < params.max_iters; ++it) {
        // A xbar from tracked products: xbar = x + theta (x - x_prev)
        Vec Axbar = (1.0 + params.theta) * Ax - params.theta * Ax_prev;
        xi = eta_s >= 0.0 ? dual_step_ball(xi, Axbar, ys, params.sigma, eta_s)
                          : dual_step_equality(xi, Axbar, ys, params.sigma);
        Vec z = x - params.tau * (op.apply_adjoint(xi) / scale);
        x_prev = std::move(x);
        x = prox_l1(z, params.tau);
        Ax_prev = std::move(Ax);
        Ax = op.apply(x) / scale;

        obj = x.lpNorm<1>();
        const double feas_scaled =
            eta_s >= 0.0 ? std::max(0.0, (Ax - ys).norm() - eta_s) : (Ax - ys).norm();
        if (!std::isfinite(obj) || !std::isfinite(feas_scaled))
            throw DivergenceError(it + 1, !std::isfinite(obj) ? "primal iterate" : "residual");

        if (params.keep_iterate_log)
            res.iterate_log.push_back({it + 1, obj, feas_scaled * scale});

        if (!params.fixed_iterations) {
            obj_hist.push_back(obj);
            const std::size_t h = obj_hist.size();
            const bool obj_settled =
                h > 10 && std::abs(obj_hist[h - 1] - obj_hist[h - 11]) <= params.residual_tol;
            if (feas_scaled * scale <= params.residual_tol && obj_settled) {
                converged = true;
                ++it;
                break;
            }
        }
    }

    res.x_hat = std::move(x);
    res.xi = std::move(xi);
    res.iterations_run = it;
    res.objective = obj;
    const double final_res = (op.apply(res.x_hat) - y).norm();
    res.final_feasibility = final_res;
    // converged contract: feasibility within residual_tol of the target set
    res.converged = converged;
    return res;
}

}  // namespace detail

/// Equality-constrained l1 minimization (basis pursuit) via Chambolle-Pock.
inline SolveResult solve_bp(const ScatteringOperator& op, const Vec& y,
                            const PdhgParams& params = {}) {
    return detail::pdhg_solve(op, y, -1.0, params);
}

/// Noise-constrained l1 minimization (basis pursuit denoising),
/// ||A x - y||_2 <= eta.
inline SolveResult solve_bpdn(const ScatteringOperator& op, const Vec& y, double eta,
                              const PdhgParams& params = {}) {
    if (eta < 0.0) throw std::invalid_argument("solve_bpdn: eta must be >= 0");
    return detail::pdhg_solve(op, y, eta, params);
}

}  // namespace csimg

#endif  // CSIMG_SOLVER_HPP
