#ifndef CSIMG_EXPERIMENTS_HPP
#define CSIMG_EXPERIMENTS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "csimg/certificates.hpp"
#include "csimg/operator.hpp"
#include "csimg/solver.hpp"

namespace csimg {

// Stability constants of the noise-constrained recovery bound.
inline constexpr double kStabilityC1 = 4.0 * (1.0 + 1.4142135623730951) + 8.0 * 1.7320508075688772;
inline constexpr double kStabilityC2 = 4.0 * (1.0 + 2.449489742783178);

/// Exactly s-sparse complex reflectivity vector: uniform random support,
/// Steinhaus phases, moduli uniform in the dynamic range.
struct Scene {
    Vec x;
    std::vector<std::int64_t> support;
    double range_lo = 1.0, range_hi = 10.0;
    std::int64_t sparsity() const { return static_cast<std::int64_t>(support.size()); }
};

inline Scene random_scene(std::int64_t N, std::int64_t s, double lo, double hi, Rng& rng) {
    if (s < 1 || s > N) throw std::invalid_argument("random_scene: need 1 <= s <= N");
    if (!(0.0 < lo && lo <= hi))
        throw std::invalid_argument("random_scene: need 0 < lo <= hi");
    // partial Fisher-Yates for a uniform s-subset
    std::vector<std::int64_t> idx(static_cast<std::size_t>(N));
    std::iota(idx.begin(), idx.end(), 0);
    for (std::int64_t i = 0; i < s; ++i) {
        const auto j = i + static_cast<std::int64_t>(
                               rng.uniform_index(static_cast<std::uint64_t>(N - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    Scene sc;
    sc.range_lo = lo;
    sc.range_hi = hi;
    sc.support.assign(idx.begin(), idx.begin() + s);
    std::sort(sc.support.begin(), sc.support.end());
    sc.x = Vec::Zero(N);
    for (auto l : sc.support) sc.x[l] = rng.steinhaus() * rng.uniform(lo, hi);
    return sc;
}

/// iid complex Gaussian vector with per-entry variance eta^2 (Re and Im are
/// independent real Gaussians with variance eta^2/2 each).
inline Vec gaussian_noise(std::int64_t m, double eta, Rng& rng) {
    if (eta < 0.0) throw std::invalid_argument("gaussian_noise: eta must be >= 0");
    Vec e(m);
    for (std::int64_t i = 0; i < m; ++i)
        e[i] = eta == 0.0 ? Complex(0, 0) : rng.complex_gaussian(eta * eta);
    return e;
}

/// sigma_s(x)_1: sum of the N-s smallest moduli.
inline double best_s_term_error(const Vec& x, std::int64_t s) {
    if (s < 0) throw std::invalid_argument("best_s_term_error: s must be >= 0");
    if (s >= x.size()) return 0.0;
    std::vector<double> mods(static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) mods[static_cast<std::size_t>(i)] = std::abs(x[i]);
    std::sort(mods.begin(), mods.end());
    return std::accumulate(mods.begin(), mods.end() - s, 0.0);
}

/// Success criterion of the recovery experiments: l2 error at most 1e-3
/// (closed inequality).
inline bool recovery_success(const Vec& x_true, const Vec& x_hat) {
    if (x_true.size() != x_hat.size())
        throw std::invalid_argument("recovery_success: dimension mismatch");
    return (x_hat - x_true).norm() <= 1e-3;
}

struct L0Solution {
    std::vector<std::int64_t> support;
    Vec coefficients;  // aligned with support
    double residual = 0.0;
};

/// Exhaustive sparsest-solution search, ground truth at tiny scale only.
/// Returns the smallest support (ties: smaller residual, then lexicographic)
/// whose least-squares fit reaches residual <= 1e-8 ||y||.
inline std::optional<L0Solution> l0_oracle(const ScatteringOperator& op, const Vec& y,
                                           std::int64_t s_max) {
    const std::int64_t N = op.N();
    if (N > 20 || s_max > 3)
        throw std::invalid_argument("l0_oracle: budget exceeded (requires N <= 20, s_max <= 3)");
    const double tol = 1e-8 * y.norm();
    if (y.norm() == 0.0) return L0Solution{{}, Vec(0), 0.0};

    std::optional<L0Solution> best;
    std::vector<std::int64_t> supp;
    auto try_support = [&](const std::vector<std::int64_t>& T) {
        Mat AT(op.rows(), static_cast<std::int64_t>(T.size()));
        for (std::size_t i = 0; i < T.size(); ++i)
            AT.col(static_cast<Eigen::Index>(i)) = op.column(T[i]);
        Vec c = AT.colPivHouseholderQr().solve(y);
        const double r = (AT * c - y).norm();
        if (r <= tol && (!best || r < best->residual)) best = L0Solution{T, c, r};
    };
    // supports in order of increasing size, lexicographic within a size
    std::function<void(std::int64_t, std::int64_t)> rec = [&](std::int64_t start,
                                                              std::int64_t remaining) {
        if (remaining == 0) {
            try_support(supp);
            return;
        }
        for (std::int64_t l = start; l <= N - remaining; ++l) {
            supp.push_back(l);
            rec(l + 1, remaining - 1);
            supp.pop_back();
        }
    };
    for (std::int64_t s = 1; s <= s_max && !best; ++s) rec(0, s);
    return best;
}

struct L1Bracket {
    double lower = 0.0;
    double upper = 0.0;
    double width() const { return upper - lower; }
};

/// Duality sandwich around min ||z||_1 s.t. Az = y: the upper bound is the
/// l1 norm of the minimum-norm feasible point, the lower bound is the dual
/// objective Re<y,w> of a projected-ascent iterate with ||A^* w||_inf <= 1.
inline L1Bracket l1_lp_oracle(const ScatteringOperator& op, const Vec& y,
                              std::int64_t ascent_steps = 2000) {
    if (op.N() > 12 || op.rows() > 16)
        throw std::invalid_argument("l1_lp_oracle: budget exceeded (requires N <= 12, m <= 16)");
    L1Bracket br;
    if (y.norm() == 0.0) return br;

    Mat A(op.rows(), op.N());
    for (std::int64_t l = 0; l < op.N(); ++l) A.col(l) = op.column(l);

    Vec z = A.completeOrthogonalDecomposition().solve(y);
    if ((A * z - y).norm() > 1e-8 * y.norm())
        throw std::runtime_error("l1_lp_oracle: y is not in the range of A");
    br.upper = z.lpNorm<1>();

    Vec w = Vec::Zero(op.rows());
    const double step = 1.0 / std::max(1.0, y.norm());
    for (std::int64_t it = 0; it < ascent_steps; ++it) {
        w += step * y;
        const double g = (A.adjoint() * w).lpNorm<Eigen::Infinity>();
        if (g > 1.0) w /= g;
        br.lower = std::max(br.lower, std::real(y.dot(w)));
    }
    return br;
}

struct ErrorBoundCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    bool satisfied = false;
};

/// Worst-case stability bound ||x - x_hat||_2 <= C1 sqrt(s) eta + C2 sigma_s(x)_1,
/// with eta the per-row noise scale (||e||_2 <= eta * n).
inline ErrorBoundCheck error_bound_check(const Vec& x, const Vec& x_hat, std::int64_t s,
                                         double eta_row) {
    ErrorBoundCheck c;
    c.lhs = (x - x_hat).norm();
    c.rhs = kStabilityC1 * std::sqrt(static_cast<double>(s)) * eta_row +
            kStabilityC2 * best_s_term_error(x, s);
    c.satisfied = c.lhs <= c.rhs;
    return c;
}

struct TransitionPoint {
    std::int64_t n = 0;
    double success_rate = 0.0;
    std::int64_t trials = 0;
    std::int64_t divergences = 0;
};

struct TransitionCurve {
    std::vector<TransitionPoint> points;
    std::int64_t s = 0;
    std::int64_t N = 0;
    std::uint64_t master_seed = 0;
};

/// Solver settings used by the experiment protocols. The defaults are the
/// reproduction settings: theta = 1, sigma = 1, tau = 0.5 on A/sqrt(N); the
/// measured step certificate is recorded per solve.
inline PdhgParams experiment_solver_params(std::int64_t max_iters = 800) {
    PdhgParams p;
    p.theta = 1.0;
    p.sigma = 1.0;
    p.tau = 0.5;
    p.max_iters = max_iters;
    p.rescale_by_sqrtN = true;
    p.allow_uncertified_steps = true;  // certificate still measured and reported
    return p;
}

/// Measurement-scaled residual tolerance so the stopping rule tracks the
/// 1e-3 recovery criterion across problem sizes.
inline double default_residual_tol(std::int64_t N, double y_norm) {
    return 1e-6 * (std::sqrt(static_cast<double>(N)) + y_norm);
}

/// Empirical recovery rate vs antenna count. One fixed scene for the whole
/// curve; each (n, trial) gets a fresh antenna draw, a noiseless measurement
/// and an equality-constrained solve. Divergences count as failures.
inline TransitionCurve phase_transition(const ImagingConfig& cfg, std::int64_t s,
                                        const std::vector<std::int64_t>& n_list,
                                        std::int64_t trials, Rng& rng,
                                        PdhgParams params = experiment_solver_params(),
                                        std::pair<double, double> dynamic_range = {1.0, 10.0}) {
    const std::int64_t N = cfg.grid_size();
    for (auto n : n_list) {
        if (n < 1) throw std::invalid_argument("phase_transition: all n must be >= 1");
        if (n * n * N > ScatteringOperator::kDefaultElementBudget)
            throw std::invalid_argument("phase_transition: n^2*N exceeds the element budget");
    }
    TransitionCurve curve;
    curve.s = s;
    curve.N = N;
    curve.master_seed = rng.seed();

    Rng scene_rng = rng.split(0);
    const Scene scene =
        s == 0 ? Scene{Vec::Zero(N), {}, dynamic_range.first, dynamic_range.second}
               : random_scene(N, s, dynamic_range.first, dynamic_range.second, scene_rng);

    for (std::size_t i = 0; i < n_list.size(); ++i) {
        TransitionPoint pt;
        pt.n = n_list[i];
        pt.trials = trials;
        for (std::int64_t t = 0; t < trials; ++t) {
            Rng sub = rng.split(1 + static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(t));
            const AntennaArray arr = sample_antennas(cfg, pt.n, sub);
            const ScatteringOperator op = ScatteringOperator::build(cfg, arr);
            const Vec y = op.apply(scene.x);
            PdhgParams p = params;
            p.residual_tol = default_residual_tol(N, y.norm());
            try {
                const SolveResult res = solve_bp(op, y, p);
                if (recovery_success(scene.x, res.x_hat)) pt.success_rate += 1.0;
            } catch (const DivergenceError&) {
                ++pt.divergences;
            }
        }
        pt.success_rate /= static_cast<double>(trials);
        curve.points.push_back(pt);
    }
    return curve;
}

/// First n in the curve whose success rate reaches 1/2.
inline std::optional<std::int64_t> half_crossing(const TransitionCurve& curve) {
    for (const auto& p : curve.points)
        if (p.success_rate >= 0.5) return p.n;
    return std::nullopt;
}

struct RocPoint {
    double threshold = 0.0;
    double p_detect = 0.0;
    double p_false_alarm = 0.0;
    std::int64_t trials = 0;
};

/// Noise level for the ROC protocol: either a fixed per-entry eta or an SNR
/// in dB resolved per trial as eta = ||Ax||_2 / (n * 10^(snr/20)), so that
/// E||e||_2^2 = n^2 eta^2 matches the realized signal energy.
struct NoiseSpec {
    std::optional<double> eta;
    std::optional<double> snr_db;
};

/// ROC protocol: fixed scene; per trial a fresh operator draw and noise
/// realization, one noise-constrained solve, then a threshold sweep over the
/// recovered moduli. Detection and false-alarm counts are both normalized by
/// the number of scatterers. The BPDN radius is the information-model bound
/// eta * n, not the realized noise norm.
inline std::vector<RocPoint> roc_curve(const Scene& scene, std::int64_t n,
                                       const NoiseSpec& noise,
                                       const std::vector<double>& tau_list,
                                       std::int64_t trials, const ImagingConfig& cfg,
                                       Rng& rng,
                                       PdhgParams params = experiment_solver_params()) {
    if (!noise.eta && !noise.snr_db)
        throw std::invalid_argument("roc_curve: noise spec needs eta or snr_db");
    const std::int64_t N = cfg.grid_size();
    if (scene.x.size() != N) throw std::invalid_argument("roc_curve: scene/config mismatch");
    const double s = static_cast<double>(scene.sparsity());

    std::vector<bool> in_T(static_cast<std::size_t>(N), false);
    for (auto l : scene.support) in_T[static_cast<std::size_t>(l)] = true;

    std::vector<RocPoint> roc(tau_list.size());
    for (std::size_t i = 0; i < tau_list.size(); ++i)
        roc[i] = {tau_list[i], 0.0, 0.0, trials};

    for (std::int64_t t = 0; t < trials; ++t) {
        Rng sub = rng.split(static_cast<std::uint64_t>(t));
        const AntennaArray arr = sample_antennas(cfg, n, sub);
        const ScatteringOperator op = ScatteringOperator::build(cfg, arr);
        const Vec y0 = op.apply(scene.x);
        const double eta =
            noise.eta ? *noise.eta
                      : y0.norm() / (static_cast<double>(n) * std::pow(10.0, *noise.snr_db / 20.0));
        Rng noise_rng = sub.split(0xe);
        const Vec y = y0 + gaussian_noise(op.rows(), eta, noise_rng);
        const double radius = eta * static_cast<double>(n);
        PdhgParams p = params;
        p.residual_tol = default_residual_tol(N, y.norm());
        Vec x_hat;
        try {
            x_hat = solve_bpdn(op, y, radius, p).x_hat;
        } catch (const DivergenceError&) {
            continue;  // counted as zero detections at every threshold
        }
        for (auto& pt : roc) {
            for (std::int64_t l = 0; l < N; ++l) {
                if (std::abs(x_hat[l]) < pt.threshold) continue;
                if (in_T[static_cast<std::size_t>(l)])
                    pt.p_detect += 1.0;
                else
                    pt.p_false_alarm += 1.0;
            }
        }
    }
    for (auto& pt : roc) {
        pt.p_detect /= s * static_cast<double>(trials);
        pt.p_false_alarm /= s * static_cast<double>(trials);
    }
    return roc;
}

// -- CSV output with a regeneration-sufficient metadata block ----------------

inline void write_metadata_block(std::ofstream& f,
                                 const std::map<std::string, std::string>& meta) {
    for (const auto& [k, v] : meta) f << "# " << k << " = " << v << "\n";
}

inline void write_transition_csv(const std::string& path, const TransitionCurve& curve,
                                 std::map<std::string, std::string> meta = {}) {
    std::ofstream f(path, std::ios::binary);  // binary: LF line endings everywhere
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    meta["s"] = std::to_string(curve.s);
    meta["N"] = std::to_string(curve.N);
    meta["master_seed"] = std::to_string(curve.master_seed);
    write_metadata_block(f, meta);
    f << "n,success_rate,trials\n";
    f.precision(17);
    for (const auto& p : curve.points)
        f << p.n << ',' << p.success_rate << ',' << p.trials << "\n";
}

inline void write_roc_csv(const std::string& path, const std::vector<RocPoint>& roc,
                          std::map<std::string, std::string> meta = {}) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    write_metadata_block(f, meta);
    f << "tau,p_detect,p_false_alarm,trials\n";
    f.precision(17);
    for (const auto& p : roc)
        f << p.threshold << ',' << p.p_detect << ',' << p.p_false_alarm << ',' << p.trials
          << "\n";
}

}  // namespace csimg

#endif  // CSIMG_EXPERIMENTS_HPP
