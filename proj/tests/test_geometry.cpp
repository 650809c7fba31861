#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <sstream>

#include "csimg/geometry.hpp"

using namespace csimg;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {
ImagingConfig headline_config() {
    // lambda=0.03, B=30, z0=10000, d0=10, L=400 -> rho=1, N1=80, N=6400
    return ImagingConfig(0.03, 30.0, 10000.0, 10.0, 400.0);
}
}  // namespace

TEST_CASE("aperture condition accepts integer ratios and rejects others") {
    const ImagingConfig cfg = headline_config();
    CHECK_THAT(cfg.aperture_ratio(), WithinAbs(1.0, 1e-12));
    CHECK(cfg.grid_side() == 80);
    CHECK(cfg.grid_size() == 6400);

    // rho = 1.3: message must name the aperture condition
    CHECK_THROWS_WITH(ImagingConfig(0.03, 39.0, 10000.0, 10.0, 400.0),
                      ContainsSubstring("aperture condition"));
    CHECK_THROWS_AS(ImagingConfig(-0.03, 30.0, 10000.0, 10.0, 400.0), std::invalid_argument);
    // rho = 2 is fine
    CHECK_NOTHROW(ImagingConfig(0.03, 30.0, 5000.0, 10.0, 400.0));
}

TEST_CASE("config text round-trip and parse errors") {
    const ImagingConfig cfg = headline_config();
    std::istringstream in(cfg.to_text());
    const ImagingConfig back = ImagingConfig::from_text(in);
    CHECK(back.wavelength() == cfg.wavelength());
    CHECK(back.aperture() == cfg.aperture());
    CHECK(back.range() == cfg.range());
    CHECK(back.mesh() == cfg.mesh());
    CHECK(back.halfsize() == cfg.halfsize());

    std::istringstream bad("lambda_m = 0.03\nnot a key value line\n");
    CHECK_THROWS_WITH(ImagingConfig::from_text(bad), ContainsSubstring("line 2"));
    std::istringstream badnum("lambda_m = zebra\n");
    CHECK_THROWS_WITH(ImagingConfig::from_text(badnum), ContainsSubstring("line 1"));
    std::istringstream missing("lambda_m = 0.03\n");
    CHECK_THROWS_WITH(ImagingConfig::from_text(missing), ContainsSubstring("missing key"));
}

TEST_CASE("target grid index map is a bijection with lexicographic coordinates") {
    const ImagingConfig cfg(0.03, 30.0, 10000.0, 10.0, 40.0);  // N1 = 8
    const TargetGrid grid(cfg);
    REQUIRE(grid.side() == 8);
    for (std::int64_t flat = 0; flat < grid.size(); ++flat) {
        const auto [k, l] = grid.double_index(flat);
        CHECK(grid.flat_index(k, l) == flat);
        const Eigen::Vector3d p = grid.point(flat);
        CHECK_THAT(p.x(), WithinAbs(-40.0 + 10.0 * static_cast<double>(k), 1e-12));
        CHECK_THAT(p.y(), WithinAbs(-40.0 + 10.0 * static_cast<double>(l), 1e-12));
        CHECK(p.z() == cfg.range());
    }
    // lexicographic: flat increases with (k, l) in order
    CHECK(grid.flat_index(1, 1) == 0);
    CHECK(grid.flat_index(1, 2) == 1);
    CHECK(grid.flat_index(2, 1) == grid.side());
}

TEST_CASE("sample_antennas: domain membership, determinism, error case") {
    const ImagingConfig cfg = headline_config();
    Rng rng(42);
    const AntennaArray a = sample_antennas(cfg, 50, rng);
    REQUIRE(a.n() == 50);
    for (const auto& b : a.positions) {
        CHECK(b.x() >= -15.0);
        CHECK(b.x() <= 15.0);
        CHECK(b.y() >= -15.0);
        CHECK(b.y() <= 15.0);
    }
    Rng rng2(42);
    const AntennaArray a2 = sample_antennas(cfg, 50, rng2);
    for (std::size_t i = 0; i < a.positions.size(); ++i)
        CHECK(a.positions[i] == a2.positions[i]);

    Rng rng3(7);
    CHECK_THROWS_AS(sample_antennas(cfg, 0, rng3), std::invalid_argument);
}

TEST_CASE("green_exact closed-form values") {
    const double lambda = 0.03;
    const Eigen::Vector3d b(0, 0, 0);
    // distance exactly lambda: full-period phase, value 1/(4 pi lambda)
    Complex g = green_exact({lambda, 0, 0}, b, lambda);
    CHECK_THAT(g.real(), WithinAbs(1.0 / (4.0 * kPi * lambda), 1e-12));
    CHECK_THAT(g.imag(), WithinAbs(0.0, 1e-12));
    // distance lambda/2: phase pi
    g = green_exact({lambda / 2.0, 0, 0}, b, lambda);
    CHECK_THAT(g.real(), WithinAbs(-1.0 / (4.0 * kPi * (lambda / 2.0)), 1e-10));
    CHECK_THAT(g.imag(), WithinAbs(0.0, 1e-10));
    // modulus identity on a generic pair
    const Eigen::Vector3d r(3.0, -2.0, 11.0);
    const Eigen::Vector3d b2(0.5, 1.5, 0.0);
    CHECK_THAT(std::abs(green_exact(r, b2, lambda)), WithinAbs(1.0 / (4.0 * kPi * (r - b2).norm()), 1e-12));
    CHECK_THROWS_AS(green_exact(r, r, lambda), std::domain_error);
}

TEST_CASE("green_paraxial: zero-offset value and unit modulus") {
    const ImagingConfig cfg = headline_config();
    const Complex on_axis = green_paraxial({3.0, -7.0}, {3.0, -7.0}, cfg);
    const Complex expect = std::polar(1.0, 2.0 * kPi * cfg.range() / cfg.wavelength());
    CHECK_THAT(std::abs(on_axis - expect), WithinAbs(0.0, 1e-12));

    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const Eigen::Vector2d r(rng.uniform(-400, 400), rng.uniform(-400, 400));
        const Eigen::Vector2d b(rng.uniform(-15, 15), rng.uniform(-15, 15));
        CHECK_THAT(std::abs(green_paraxial(r, b, cfg)), WithinAbs(1.0, 1e-14));
    }
}

TEST_CASE("quadrature Gram of grid functions is the identity") {
    // Oracle: tensor-product midpoint quadrature over the antenna square.
    // Diagonal entries are exactly 1 for unit-modulus functions, so the rule's
    // resolution is validated on off-diagonals directly.
    const ImagingConfig cfg(0.03, 30.0, 10000.0, 10.0, 40.0);  // N1 = 8, rho = 1
    const TargetGrid grid(cfg);
    Rng rng(11);
    std::vector<std::int64_t> idx;
    for (int i = 0; i < 5; ++i)
        idx.push_back(static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(grid.size()))));

    const int Q = 256;
    const double B = cfg.aperture(), h = B / Q;
    std::vector<std::vector<Complex>> vals(idx.size(), std::vector<Complex>(static_cast<std::size_t>(Q) * Q));
    for (std::size_t f = 0; f < idx.size(); ++f) {
        const Eigen::Vector2d r = grid.transverse(idx[f]);
        for (int a = 0; a < Q; ++a)
            for (int c = 0; c < Q; ++c) {
                const Eigen::Vector2d b(-B / 2 + (a + 0.5) * h, -B / 2 + (c + 0.5) * h);
                vals[f][static_cast<std::size_t>(a) * Q + c] = green_paraxial(r, b, cfg);
            }
    }
    for (std::size_t f = 0; f < idx.size(); ++f)
        for (std::size_t g = 0; g < idx.size(); ++g) {
            Complex acc = 0;
            for (std::size_t q = 0; q < vals[f].size(); ++q) acc += vals[f][q] * std::conj(vals[g][q]);
            acc *= h * h / (B * B);
            const double expect = (idx[f] == idx[g]) ? 1.0 : 0.0;
            CHECK_THAT(std::abs(acc - expect), WithinAbs(0.0, 1e-6));
        }
}

TEST_CASE("paraxial error report: finite, zero on axis, shrinking with range") {
    const ImagingConfig near(0.03, 30.0, 5000.0, 10.0, 40.0);   // rho = 2
    const ImagingConfig far(0.03, 30.0, 10000.0, 10.0, 40.0);   // rho = 1
    Rng r1(5), r2(5);
    const auto rep_near = paraxial_error_report(near, 200, r1);
    const auto rep_far = paraxial_error_report(far, 200, r2);
    CHECK(std::isfinite(rep_near.max_error_lambda));
    CHECK(rep_far.max_error_lambda < rep_near.max_error_lambda);
    CHECK(rep_far.mean_error_lambda <= rep_far.max_error_lambda);

    // on-axis pair: the expansion is exact
    const Eigen::Vector3d r(3.0, 4.0, far.range());
    const Eigen::Vector3d b(3.0, 4.0, 0.0);
    CHECK((r - b).norm() == far.range());
}

TEST_CASE("headline config reports rho = 1 and passes the far-field sanity check") {
    const ImagingConfig cfg = headline_config();
    CHECK(cfg.aperture_ratio() == Catch::Approx(1.0));
    Rng rng(9);
    const auto rep = paraxial_error_report(cfg, 100, rng);
    CHECK(rep.pairs == 100);
    CHECK(std::isfinite(rep.max_error_lambda));
}
