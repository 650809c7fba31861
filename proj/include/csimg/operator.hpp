#ifndef CSIMG_OPERATOR_HPP
#define CSIMG_OPERATOR_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "csimg/geometry.hpp"
#include "csimg/rng.hpp"

namespace csimg {

using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

enum class OperatorMode { Dense, MatrixFreeDirect, MatrixFreeFactorized };

inline std::string to_string(OperatorMode m) {
    switch (m) {
        case OperatorMode::Dense: return "dense";
        case OperatorMode::MatrixFreeDirect: return "matrix-free-direct";
        case OperatorMode::MatrixFreeFactorized: return "matrix-free-factorized";
    }
    return "?";
}

/// Bounded orthonormal system: an indexed family of unit-modulus functions on
/// a sample domain. The evaluator must return unit-modulus values; violations
/// are rejected at matrix build time.
struct BosSystem {
    std::int64_t N = 0;
    std::function<Complex(std::int64_t, const Eigen::Vector2d&)> evaluator;
};

/// The n^2 x N sensing operator with entries A_{(j,k),l} = Phi_l(b_j) Phi_l(b_k).
/// Every entry is a product of two unit-modulus factors, so |A_{(j,k),l}| = 1
/// and every column has l2-norm exactly n.
///
/// Row flattening is transmitter-major and fixed: with 0-based j (transmit)
/// and k (receive), flat = j*n + k. All consumers use this bijection.
///
/// Internally the operator stores the n x N factor matrix M, M(j,l) = Phi_l(b_j);
/// the full matrix is only materialized in dense mode. apply/adjoint in the
/// matrix-free modes go through M with two rank-structured products, which is
/// O(n^2 N) flops but BLAS3-shaped.
class ScatteringOperator {
public:
    /// Scattering-kernel operator: Phi_l(b) = Ghat(b, r_l).
    static ScatteringOperator build(const ImagingConfig& cfg, const AntennaArray& array,
                                    OperatorMode mode = OperatorMode::MatrixFreeDirect,
                                    std::int64_t element_budget = kDefaultElementBudget) {
        const TargetGrid grid(cfg);
        const std::int64_t n = array.n();
        const std::int64_t N = grid.size();
        Mat M(n, N);
        for (std::int64_t l = 0; l < N; ++l) {
            const Eigen::Vector2d p = grid.transverse(l);
            for (std::int64_t j = 0; j < n; ++j)
                M(j, l) = green_paraxial(p, array.positions[static_cast<std::size_t>(j)], cfg);
        }
        ScatteringOperator op(std::move(M), mode, element_budget);
        op.grid_side_ = grid.side();
        op.factorized_ctx_ = FactorizedContext{cfg.wavelength(), cfg.range(), cfg.mesh(),
                                               cfg.halfsize(), array.positions};
        return op;
    }

    /// General BOS sampling operator from explicit sample points.
    static ScatteringOperator from_bos(const BosSystem& sys,
                                       const std::vector<Eigen::Vector2d>& samples,
                                       OperatorMode mode = OperatorMode::MatrixFreeDirect,
                                       std::int64_t element_budget = kDefaultElementBudget) {
        const auto n = static_cast<std::int64_t>(samples.size());
        Mat M(n, sys.N);
        for (std::int64_t l = 0; l < sys.N; ++l)
            for (std::int64_t j = 0; j < n; ++j) {
                const Complex v = sys.evaluator(l, samples[static_cast<std::size_t>(j)]);
                if (std::abs(std::abs(v) - 1.0) > 1e-9)
                    throw std::invalid_argument(
                        "BosSystem: evaluator returned non-unit-modulus value |Phi| = " +
                        std::to_string(std::abs(v)));
                M(j, l) = v;
            }
        return ScatteringOperator(std::move(M), mode, element_budget);
    }

    std::int64_t n() const { return M_.rows(); }
    std::int64_t N() const { return M_.cols(); }
    std::int64_t rows() const { return n() * n(); }
    OperatorMode mode() const { return mode_; }
    const Mat& factor() const { return M_; }

    /// Dense entries; only available in dense mode.
    const Mat& dense() const {
        if (mode_ != OperatorMode::Dense)
            throw std::logic_error("ScatteringOperator: dense entries not materialized");
        return A_;
    }

    /// Column a_l of the full matrix, O(n^2).
    Vec column(std::int64_t l) const {
        const std::int64_t nn = n();
        Vec c(nn * nn);
        for (std::int64_t j = 0; j < nn; ++j)
            for (std::int64_t k = 0; k < nn; ++k) c[j * nn + k] = M_(j, l) * M_(k, l);
        return c;
    }

    /// y = A x. Dense mode uses the materialized matrix; the matrix-free
    /// modes evaluate through the factor M resp. the diagonal/Fourier/diagonal
    /// factorization, so the three routes are independent cross-checks.
    Vec apply(const Vec& x) const {
        if (x.size() != N())
            throw std::invalid_argument("apply: x has length " + std::to_string(x.size()) +
                                        ", expected " + std::to_string(N()));
        switch (mode_) {
            case OperatorMode::Dense: return A_ * x;
            case OperatorMode::MatrixFreeFactorized: return apply_factorized(x);
            case OperatorMode::MatrixFreeDirect: break;
        }
        return apply_direct(x);
    }

    /// A* y for the flat row layout above. Same route in all modes.
    Vec apply_adjoint(const Vec& y) const {
        const std::int64_t nn = n();
        if (y.size() != nn * nn)
            throw std::invalid_argument("apply_adjoint: y has length " +
                                        std::to_string(y.size()) + ", expected " +
                                        std::to_string(nn * nn));
        Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic,
                                       Eigen::RowMajor>>
            Y(y.data(), nn, nn);
        const Mat Mc = M_.conjugate();
        Mat B = Y * Mc;                       // n x N
        return (Mc.cwiseProduct(B)).colwise().sum().transpose();
    }

    /// Born measurement y = A x + e.
    Vec measure(const Vec& x, const std::optional<Vec>& noise = std::nullopt) const {
        Vec y = apply(x);
        if (noise) {
            if (noise->size() != y.size())
                throw std::invalid_argument("measure: noise length mismatch");
            y += *noise;
        }
        return y;
    }

    /// Explicit evaluation of the aperture-square/Fourier factorization: a
    /// grid-phase diagonal, a nonequispaced exponential sum at the pairwise
    /// antenna nodes, and an antenna-phase diagonal. Requires the square-grid
    /// scattering construction. Direct evaluation (no gridded FFT).
    Vec apply_factorized(const Vec& x) const {
        if (!factorized_ctx_ || grid_side_ * grid_side_ != N())
            throw std::logic_error("apply_factorized: requires a square-grid scattering operator");
        const auto& ctx = *factorized_ctx_;
        const std::int64_t nn = n();
        const std::int64_t N1 = grid_side_;
        const double lz = ctx.lambda * ctx.z0;

        // grid axis coordinates; flat = (k-1)*N1 + (l-1) with x along k
        Eigen::VectorXd gc(N1);
        for (std::int64_t i = 0; i < N1; ++i)
            gc[i] = -ctx.L + static_cast<double>(i + 1) * ctx.d0;

        // pre-phase diagonal on the grid, folded into x as an N1 x N1 array
        Mat W(N1, N1);
        for (std::int64_t a = 0; a < N1; ++a)
            for (std::int64_t b = 0; b < N1; ++b)
                W(a, b) = std::polar(1.0, 2.0 * kPi * (gc[a] * gc[a] + gc[b] * gc[b]) / lz) *
                          x[a * N1 + b];

        // post-phase diagonal per antenna
        Vec post(nn);
        for (std::int64_t j = 0; j < nn; ++j)
            post[j] = std::polar(1.0, kPi * ctx.antennas[static_cast<std::size_t>(j)]
                                                .squaredNorm() / lz);
        const Complex phase0 = std::polar(1.0, 4.0 * kPi * ctx.z0 / ctx.lambda);

        Vec y(nn * nn);
        Vec ex(N1), ey(N1);
        for (std::int64_t j = 0; j < nn; ++j) {
            for (std::int64_t k = 0; k < nn; ++k) {
                const Eigen::Vector2d node = ctx.antennas[static_cast<std::size_t>(j)] +
                                             ctx.antennas[static_cast<std::size_t>(k)];
                for (std::int64_t i = 0; i < N1; ++i) {
                    ex[i] = std::polar(1.0, -2.0 * kPi * gc[i] * node.x() / lz);
                    ey[i] = std::polar(1.0, -2.0 * kPi * gc[i] * node.y() / lz);
                }
                const Vec t = W * ey;
                y[j * nn + k] =
                    phase0 * post[j] * post[k] * (ex.array() * t.array()).sum();
            }
        }
        return y;
    }

    /// Power-iteration estimate of ||A||_{2->2} through A*A. Monotone
    /// nondecreasing in the iteration count and never above the true norm.
    double operator_norm(std::int64_t iters, Rng& rng) const {
        if (iters < 1) throw std::invalid_argument("operator_norm: iters must be >= 1");
        Vec v(N());
        for (std::int64_t i = 0; i < N(); ++i)
            v[i] = Complex(rng.gaussian(0.0, 1.0), rng.gaussian(0.0, 1.0));
        v.normalize();
        double best = 0.0;
        for (std::int64_t it = 0; it < iters; ++it) {
            Vec w = apply_adjoint(apply(v));   // A*A v
            const double rayleigh = std::real(v.dot(w));  // = ||A v||^2 for unit v
            best = std::max(best, rayleigh);
            const double norm = w.norm();
            if (norm == 0.0) break;
            v = w / norm;
        }
        return std::sqrt(best);
    }

    /// Unnormalized Gram of a column subset: (A_T^* A_T)_{l,lt} = (m_l^* m_lt)^2,
    /// where m_l are columns of the factor M. Exact algebra of the product
    /// structure, O(n s^2) instead of O(n^2 s^2).
    Mat gram(const std::vector<std::int64_t>& T) const {
        const auto s = static_cast<std::int64_t>(T.size());
        Mat MT(n(), s);
        for (std::int64_t i = 0; i < s; ++i) MT.col(i) = M_.col(T[static_cast<std::size_t>(i)]);
        Mat G = MT.adjoint() * MT;
        return G.array().square().matrix();
    }

    // -- export ------------------------------------------------------------

    /// Binary layout: magic "CSIMGA1\0", int64 rows, int64 cols, int32 mode,
    /// then row-major interleaved re/im doubles. Dense mode only.
    void write_binary(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open for writing: " + path);
        const char magic[8] = {'C', 'S', 'I', 'M', 'G', 'A', '1', '\0'};
        f.write(magic, 8);
        const std::int64_t r = rows(), c = N();
        const std::int32_t m = static_cast<std::int32_t>(mode_);
        f.write(reinterpret_cast<const char*>(&r), 8);
        f.write(reinterpret_cast<const char*>(&c), 8);
        f.write(reinterpret_cast<const char*>(&m), 4);
        const std::int64_t nn = n();
        std::vector<double> row(static_cast<std::size_t>(2 * c));
        for (std::int64_t j = 0; j < nn; ++j)
            for (std::int64_t k = 0; k < nn; ++k) {
                for (std::int64_t l = 0; l < c; ++l) {
                    const Complex a = M_(j, l) * M_(k, l);
                    row[static_cast<std::size_t>(2 * l)] = a.real();
                    row[static_cast<std::size_t>(2 * l + 1)] = a.imag();
                }
                f.write(reinterpret_cast<const char*>(row.data()),
                        static_cast<std::streamsize>(row.size() * sizeof(double)));
            }
        if (!f) throw std::runtime_error("write failed: " + path);
    }

    /// CSV: one line per flat row, re,im pairs.
    void write_csv(const std::string& path) const {
        std::ofstream f(path);
        if (!f) throw std::runtime_error("cannot open for writing: " + path);
        f.precision(17);
        const std::int64_t nn = n();
        for (std::int64_t j = 0; j < nn; ++j)
            for (std::int64_t k = 0; k < nn; ++k) {
                for (std::int64_t l = 0; l < N(); ++l) {
                    const Complex a = M_(j, l) * M_(k, l);
                    f << (l ? "," : "") << a.real() << ',' << a.imag();
                }
                f << '\n';
            }
    }

    static constexpr std::int64_t kDefaultElementBudget = 200'000'000;

private:
    ScatteringOperator(Mat M, OperatorMode mode, std::int64_t element_budget)
        : M_(std::move(M)), mode_(mode) {
        const std::int64_t elems = n() * n() * N();
        if (mode_ == OperatorMode::Dense) {
            if (elems > element_budget)
                throw std::runtime_error("dense build refused: n^2*N = " +
                                         std::to_string(elems) + " exceeds element budget " +
                                         std::to_string(element_budget));
            A_.resize(rows(), N());
            // fill unordered pairs once so rows (j,k) and (k,j) are bitwise equal
            for (std::int64_t l = 0; l < N(); ++l)
                for (std::int64_t j = 0; j < n(); ++j)
                    for (std::int64_t k = j; k < n(); ++k) {
                        const Complex v = M_(j, l) * M_(k, l);
                        A_(j * n() + k, l) = v;
                        A_(k * n() + j, l) = v;
                    }
        }
    }

    Vec apply_direct(const Vec& x) const {
        const std::int64_t nn = n();
        Mat S = M_ * x.asDiagonal();          // n x N
        Mat Y = S * M_.transpose();           // n x n, Y(j,k) = sum_l M(j,l) M(k,l) x_l
        Vec y(nn * nn);
        for (std::int64_t j = 0; j < nn; ++j)
            for (std::int64_t k = 0; k < nn; ++k) y[j * nn + k] = Y(j, k);
        return y;
    }

    struct FactorizedContext {
        double lambda, z0, d0, L;
        std::vector<Eigen::Vector2d> antennas;
    };

    Mat M_;   // n x N factor, M(j,l) = Phi_l(b_j)
    Mat A_;   // dense entries, dense mode only
    OperatorMode mode_;
    std::int64_t grid_side_ = 0;
    std::optional<FactorizedContext> factorized_ctx_;
};

/// Dense n^2 x N sampling matrix of a BOS, row (j,k) = v(b_j,b_k)^*.
inline Mat build_bos_matrix(const BosSystem& sys,
                            const std::vector<Eigen::Vector2d>& samples) {
    return ScatteringOperator::from_bos(sys, samples, OperatorMode::Dense).dense();
}

}  // namespace csimg

#endif  // CSIMG_OPERATOR_HPP
