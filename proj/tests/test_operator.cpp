#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>

#include "csimg/geometry.hpp"
#include "csimg/operator.hpp"

using namespace csimg;
using Catch::Matchers::WithinAbs;

namespace {
ImagingConfig small_config() {
    return ImagingConfig(0.03, 30.0, 10000.0, 10.0, 20.0);  // N1 = 4, N = 16, rho = 1
}

ScatteringOperator make_op(std::int64_t n, OperatorMode mode = OperatorMode::Dense,
                           std::uint64_t seed = 1) {
    const ImagingConfig cfg = small_config();
    Rng rng(seed);
    return ScatteringOperator::build(cfg, sample_antennas(cfg, n, rng), mode);
}
}  // namespace

TEST_CASE("dense build: unit-modulus entries, column norms, row symmetry") {
    const ScatteringOperator op = make_op(4);
    const Mat& A = op.dense();
    REQUIRE(A.rows() == 16);
    REQUIRE(A.cols() == 16);
    double dev = 0.0;
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            dev = std::max(dev, std::abs(std::abs(A(i, j)) - 1.0));
    CHECK(dev <= 1e-12);

    const double n = static_cast<double>(op.n());
    for (Eigen::Index l = 0; l < A.cols(); ++l)
        CHECK(std::abs(A.col(l).norm() - n) <= 1e-10 * n);

    Rng rng(77);
    for (int t = 0; t < 10; ++t) {
        const auto j = static_cast<std::int64_t>(rng.uniform_index(4));
        const auto k = static_cast<std::int64_t>(rng.uniform_index(4));
        CHECK((A.row(j * 4 + k) - A.row(k * 4 + j)).norm() == 0.0);
    }
}

TEST_CASE("1x1 operator is a single unit-modulus entry") {
    const ImagingConfig cfg(0.03, 30.0, 10000.0, 10.0, 5.1);  // N1 = 1
    REQUIRE(cfg.grid_size() == 1);
    Rng rng(2);
    const ScatteringOperator op = ScatteringOperator::build(cfg, sample_antennas(cfg, 1, rng));
    CHECK(op.rows() == 1);
    CHECK_THAT(std::abs(op.column(0)[0]), WithinAbs(1.0, 1e-14));
}

TEST_CASE("element budget guard refuses oversized dense builds") {
    const ImagingConfig cfg = small_config();
    Rng rng(3);
    const AntennaArray arr = sample_antennas(cfg, 4, rng);
    CHECK_THROWS_AS(ScatteringOperator::build(cfg, arr, OperatorMode::Dense, 100),
                    std::runtime_error);
    // matrix-free modes only store the n x N factor, so the same budget is fine
    CHECK_NOTHROW(ScatteringOperator::build(cfg, arr, OperatorMode::MatrixFreeDirect, 100));
}

TEST_CASE("BOS constructor: Fourier closed form and scattering cross-check") {
    // Fourier system Phi_l(t) = exp(2 pi i l t) on [0,1]: the (j,k) row entry
    // is Phi_l(b_j) Phi_l(b_k) = exp(2 pi i l (b_j + b_k)).
    BosSystem fourier;
    fourier.N = 3;
    fourier.evaluator = [](std::int64_t l, const Eigen::Vector2d& b) {
        return std::polar(1.0, 2.0 * kPi * static_cast<double>(l) * b.x());
    };
    const std::vector<Eigen::Vector2d> samples = {{0.15, 0.0}, {0.67, 0.0}};
    const ScatteringOperator op = ScatteringOperator::from_bos(fourier, samples);
    REQUIRE(op.rows() == 4);
    for (std::int64_t l = 0; l < 3; ++l) {
        const Complex expect = std::polar(1.0, 2.0 * kPi * static_cast<double>(l) * (0.15 + 0.67));
        CHECK_THAT(std::abs(op.column(l)[0 * 2 + 1] - expect), WithinAbs(0.0, 1e-12));
    }

    // scattering-kernel system reproduces the scattering constructor entrywise
    const ImagingConfig cfg = small_config();
    Rng rng(5);
    const AntennaArray arr = sample_antennas(cfg, 3, rng);
    const ScatteringOperator direct = ScatteringOperator::build(cfg, arr);
    const TargetGrid grid(cfg);
    BosSystem scatter;
    scatter.N = cfg.grid_size();
    scatter.evaluator = [&](std::int64_t l, const Eigen::Vector2d& b) {
        return green_paraxial(grid.transverse(l), b, cfg);
    };
    const ScatteringOperator via_bos = ScatteringOperator::from_bos(scatter, arr.positions);
    for (std::int64_t l = 0; l < cfg.grid_size(); ++l)
        CHECK((direct.column(l) - via_bos.column(l)).lpNorm<Eigen::Infinity>() <= 1e-12);

    BosSystem bad;
    bad.N = 2;
    bad.evaluator = [](std::int64_t, const Eigen::Vector2d&) { return Complex(0.5, 0.0); };
    CHECK_THROWS_AS(ScatteringOperator::from_bos(bad, samples), std::invalid_argument);
}

TEST_CASE("apply matches dense matvec; adjoint identity; basis probe") {
    const ScatteringOperator op = make_op(4);
    Rng rng(8);
    Vec x(op.N());
    for (Eigen::Index i = 0; i < x.size(); ++i)
        x[i] = Complex(rng.gaussian(0, 1), rng.gaussian(0, 1));

    CHECK(op.apply(Vec::Zero(op.N())).norm() == 0.0);
    const Vec y_dense = op.dense() * x;
    CHECK((op.apply(x) - y_dense).norm() <= 1e-10 * y_dense.norm());

    // x = e_l gives column a_l
    Vec e = Vec::Zero(op.N());
    e[5] = 1.0;
    CHECK((op.apply(e) - op.column(5)).norm() <= 1e-12);

    // adjoint identity <Ax, y> = <x, A*y> for all modes
    for (OperatorMode mode : {OperatorMode::Dense, OperatorMode::MatrixFreeDirect,
                              OperatorMode::MatrixFreeFactorized}) {
        const ScatteringOperator m = make_op(4, mode);
        Vec y(m.rows());
        for (Eigen::Index i = 0; i < y.size(); ++i)
            y[i] = Complex(rng.gaussian(0, 1), rng.gaussian(0, 1));
        const Complex lhs = y.dot(m.apply(x));
        const Complex rhs = m.apply_adjoint(y).dot(x);
        CHECK(std::abs(lhs - rhs) <= 1e-10 * x.norm() * y.norm());
    }

    CHECK_THROWS_AS(op.apply(Vec::Zero(op.N() + 1)), std::invalid_argument);
    CHECK_THROWS_AS(op.apply_adjoint(Vec::Zero(op.rows() + 1)), std::invalid_argument);
}

TEST_CASE("factorized apply agrees with dense apply") {
    const ScatteringOperator dense = make_op(2);
    const ScatteringOperator fact = make_op(2, OperatorMode::MatrixFreeFactorized);
    Rng rng(13);
    Vec x(dense.N());
    for (Eigen::Index i = 0; i < x.size(); ++i)
        x[i] = Complex(rng.gaussian(0, 1), rng.gaussian(0, 1));
    const Vec yd = dense.apply(x);
    const Vec yf = fact.apply(x);
    CHECK((yd - yf).norm() <= 1e-8 * yd.norm());

    CHECK(fact.apply(Vec::Zero(fact.N())).norm() == 0.0);

    // single nonzero entry: closed-form column times the coefficient
    Vec e = Vec::Zero(fact.N());
    e[7] = Complex(0.3, -1.1);
    CHECK((fact.apply(e) - dense.column(7) * e[7]).norm() <= 1e-8 * static_cast<double>(fact.n()));
}

TEST_CASE("measure adds the supplied noise exactly") {
    const ScatteringOperator op = make_op(3);
    Rng rng(21);
    Vec x(op.N()), e(op.rows());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = Complex(rng.gaussian(0, 1), 0.0);
    for (Eigen::Index i = 0; i < e.size(); ++i) e[i] = Complex(rng.gaussian(0, 1), rng.gaussian(0, 1));
    CHECK((op.measure(x) - op.apply(x)).norm() == 0.0);
    CHECK((op.measure(Vec::Zero(op.N()), e) - e).norm() == 0.0);
    CHECK_THAT((op.measure(x, e) - op.apply(x)).norm(), WithinAbs(e.norm(), 1e-12));
    Vec wrong(op.rows() + 2);
    CHECK_THROWS_AS(op.measure(x, wrong), std::invalid_argument);
}

TEST_CASE("operator norm: power iteration vs dense eigensolver oracle") {
    const ScatteringOperator op = make_op(2, OperatorMode::Dense, 17);
    // oracle: largest eigenvalue of A^* A by a dense self-adjoint eigensolver
    const Mat G = op.dense().adjoint() * op.dense();
    Eigen::SelfAdjointEigenSolver<Mat> es(G, Eigen::EigenvaluesOnly);
    const double truth = std::sqrt(es.eigenvalues().maxCoeff());

    Rng rng(23);
    const double est = op.operator_norm(200, rng);
    CHECK_THAT(est, WithinAbs(truth, 1e-6 * truth));
    CHECK(est <= truth * (1.0 + 1e-12));

    // never exceeds the Frobenius norm n sqrt(N) of a unit-modulus matrix
    const double frob = static_cast<double>(op.n()) *
                        std::sqrt(static_cast<double>(op.N()));
    CHECK(est <= frob);
    CHECK_THROWS_AS(op.operator_norm(0, rng), std::invalid_argument);
}

TEST_CASE("gram of a column subset matches explicit column inner products") {
    const ScatteringOperator op = make_op(3, OperatorMode::MatrixFreeDirect, 29);
    const std::vector<std::int64_t> T = {1, 4, 9, 14};
    const Mat G = op.gram(T);
    for (std::size_t i = 0; i < T.size(); ++i)
        for (std::size_t j = 0; j < T.size(); ++j) {
            const Complex direct = op.column(T[i]).dot(op.column(T[j]));  // conjugates first arg
            const double scale = static_cast<double>(op.n()) * static_cast<double>(op.n());
            CHECK(std::abs(G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - direct) <=
                  1e-10 * scale);
        }
}

TEST_CASE("binary and CSV export round-trip") {
    const ScatteringOperator op = make_op(2, OperatorMode::Dense, 31);
    const std::string bin = "op_test.bin";
    const std::string csv = "op_test.csv";
    op.write_binary(bin);
    op.write_csv(csv);

    std::ifstream f(bin, std::ios::binary);
    REQUIRE(f.good());
    char magic[8];
    f.read(magic, 8);
    CHECK(std::string(magic, 7) == "CSIMGA1");
    std::int64_t rows = 0, cols = 0;
    f.read(reinterpret_cast<char*>(&rows), 8);
    f.read(reinterpret_cast<char*>(&cols), 8);
    CHECK(rows == op.rows());
    CHECK(cols == op.N());
    std::int32_t mode = -1;
    f.read(reinterpret_cast<char*>(&mode), 4);
    CHECK(mode == 0);
    double re = 0, im = 0;
    f.read(reinterpret_cast<char*>(&re), 8);
    f.read(reinterpret_cast<char*>(&im), 8);
    CHECK_THAT(Complex(re, im).real(), WithinAbs(op.dense()(0, 0).real(), 1e-15));
    CHECK_THAT(Complex(re, im).imag(), WithinAbs(op.dense()(0, 0).imag(), 1e-15));

    std::ifstream c(csv);
    std::size_t lines = 0;
    std::string line;
    while (std::getline(c, line)) {
        CHECK(!line.empty());
        ++lines;
    }
    CHECK(lines == static_cast<std::size_t>(op.rows()));
    std::remove(bin.c_str());
    std::remove(csv.c_str());
}
