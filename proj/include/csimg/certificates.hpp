#ifndef CSIMG_CERTIFICATES_HPP
#define CSIMG_CERTIFICATES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "csimg/operator.hpp"
#include "csimg/solver.hpp"

namespace csimg {

/// Outcome of checking the dual-certificate recovery conditions on one draw.
/// All quantities refer to the column-normalized operator At = A/n.
struct CertificateReport {
    double gram_deviation = 0.0;    // ||At_T^* At_T - Id||_{2->2}
    double sign_match_error = 0.0;  // ||u_T - sign(x)_T||_inf
    double offsupport_max = 0.0;    // ||u_{T^c}||_inf
    double dual_norm = 0.0;         // ||v||_2
    double bound_dual = 0.0;        // sqrt(2 s)
    bool passed = false;

    std::string to_json() const {
        std::ostringstream os;
        os.precision(17);
        os << "{\"gram_deviation\":" << gram_deviation
           << ",\"sign_match_error\":" << sign_match_error
           << ",\"offsupport_max\":" << offsupport_max << ",\"dual_norm\":" << dual_norm
           << ",\"bound_dual\":" << bound_dual << ",\"passed\":" << (passed ? "true" : "false")
           << "}";
        return os.str();
    }
};

/// ||(1/n^2) A_T^* A_T - Id||_{2->2} on the column subset T.
inline double gram_deviation(const ScatteringOperator& op,
                             const std::vector<std::int64_t>& T) {
    if (T.empty()) throw std::invalid_argument("gram_deviation: T must be nonempty");
    const double n2 = static_cast<double>(op.n()) * static_cast<double>(op.n());
    Mat G = op.gram(T) / n2;
    G -= Mat::Identity(G.rows(), G.cols());
    Eigen::SelfAdjointEigenSolver<Mat> es(G, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Least-squares dual certificate v = At_T (At_T^* At_T)^{-1} sign_pattern and
/// u = At^* v, on the rescaled operator At = A/n. By construction u_T equals
/// the sign pattern up to the linear-solve residual.
inline std::pair<Vec, Vec> build_certificate(const ScatteringOperator& op,
                                             const std::vector<std::int64_t>& T,
                                             const Vec& sign_pattern) {
    const auto s = static_cast<std::int64_t>(T.size());
    if (sign_pattern.size() != s)
        throw std::invalid_argument("build_certificate: sign pattern length != |T|");
    const double n = static_cast<double>(op.n());
    const double dev = gram_deviation(op, T);
    if (dev >= 1.0 - 1e-6)
        throw std::runtime_error("build_certificate: Gram deviation " + std::to_string(dev) +
                                 " >= 1, A_T is rank deficient or near-singular");

    Mat G = op.gram(T) / (n * n);  // At_T^* At_T
    Eigen::LDLT<Mat> ldlt(G);
    Vec w = ldlt.solve(sign_pattern);
    w += ldlt.solve(sign_pattern - G * w);  // one refinement step

    // v = At_T w assembled from columns
    Vec v = Vec::Zero(op.rows());
    for (std::int64_t i = 0; i < s; ++i)
        v += (w[i] / n) * op.column(T[static_cast<std::size_t>(i)]);
    Vec u = op.apply_adjoint(v) / n;
    return {u, v};
}

/// Evaluates the four recovery conditions for a support and sign pattern.
inline CertificateReport verify_certificate(const ScatteringOperator& op,
                                            const std::vector<std::int64_t>& T,
                                            const Vec& sign_pattern, std::int64_t s) {
    CertificateReport rep;
    rep.gram_deviation = gram_deviation(op, T);
    rep.bound_dual = std::sqrt(2.0 * static_cast<double>(s));
    const auto [u, v] = build_certificate(op, T, sign_pattern);

    std::vector<bool> in_T(static_cast<std::size_t>(op.N()), false);
    for (std::size_t i = 0; i < T.size(); ++i) {
        in_T[static_cast<std::size_t>(T[i])] = true;
        rep.sign_match_error =
            std::max(rep.sign_match_error, std::abs(u[T[i]] - sign_pattern[static_cast<Eigen::Index>(i)]));
    }
    for (std::int64_t l = 0; l < op.N(); ++l)
        if (!in_T[static_cast<std::size_t>(l)])
            rep.offsupport_max = std::max(rep.offsupport_max, std::abs(u[l]));
    rep.dual_norm = v.norm();

    rep.passed = rep.gram_deviation <= 0.5 && rep.sign_match_error <= 1e-8 &&
                 rep.offsupport_max <= 0.5 && rep.dual_norm <= rep.bound_dual;
    return rep;
}

/// max over l in T^c, lt in T of |<a_l, a_lt>| (unnormalized columns).
inline double coherence(const ScatteringOperator& op, const std::vector<std::int64_t>& T) {
    if (T.empty() || static_cast<std::int64_t>(T.size()) == op.N())
        throw std::invalid_argument("coherence: need nonempty T with nonempty complement");
    std::vector<bool> in_T(static_cast<std::size_t>(op.N()), false);
    for (auto t : T) in_T[static_cast<std::size_t>(t)] = true;

    // <a_l, a_lt> = (m_l^* m_lt)^2 through the factor matrix
    Mat MT(op.n(), static_cast<std::int64_t>(T.size()));
    for (std::size_t i = 0; i < T.size(); ++i)
        MT.col(static_cast<Eigen::Index>(i)) = op.factor().col(T[i]);
    Mat C = MT.adjoint() * op.factor();  // s x N
    double mu = 0.0;
    for (std::int64_t l = 0; l < op.N(); ++l) {
        if (in_T[static_cast<std::size_t>(l)]) continue;
        for (Eigen::Index i = 0; i < C.rows(); ++i) {
            const double c = std::abs(C(i, l));
            mu = std::max(mu, c * c);
        }
    }
    return mu;
}

}  // namespace csimg

#endif  // CSIMG_CERTIFICATES_HPP
