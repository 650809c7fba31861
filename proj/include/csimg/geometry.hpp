#ifndef CSIMG_GEOMETRY_HPP
#define CSIMG_GEOMETRY_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "csimg/rng.hpp"

namespace csimg {

inline constexpr double kPi = 3.14159265358979323846;
using Complex = std::complex<double>;

/// Physical imaging setup: wavelength, antenna aperture, range to the target
/// plane, grid mesh and half-size. Construction enforces the aperture
/// condition rho = d0*B/(lambda*z0) being a positive integer, which makes the
/// paraxial Green's functions an orthonormal family over the antenna square.
class ImagingConfig {
public:
    ImagingConfig(double wavelength_lambda, double aperture_B, double range_z0,
                  double mesh_d0, double halfsize_L,
                  Eigen::Vector2d antenna_domain_center = Eigen::Vector2d::Zero())
        : lambda_(wavelength_lambda),
          B_(aperture_B),
          z0_(range_z0),
          d0_(mesh_d0),
          L_(halfsize_L),
          center_(antenna_domain_center) {
        if (lambda_ <= 0 || B_ <= 0 || z0_ <= 0 || d0_ <= 0 || L_ <= 0)
            throw std::invalid_argument("ImagingConfig: all lengths must be positive");
        const double rho = aperture_ratio();
        const double nearest = std::round(rho);
        if (nearest < 1.0 || std::abs(rho - nearest) > 1e-9 * rho)
            throw std::invalid_argument(
                "ImagingConfig: aperture condition violated, rho = d0*B/(lambda*z0) = " +
                std::to_string(rho) + " is not a positive integer (rel tol 1e-9)");
        grid_side_ = static_cast<std::int64_t>(std::floor(2.0 * L_ / d0_));
        if (grid_side_ < 1)
            throw std::invalid_argument("ImagingConfig: grid has no points (2L < d0)");
    }

    double wavelength() const { return lambda_; }
    double aperture() const { return B_; }
    double range() const { return z0_; }
    double mesh() const { return d0_; }
    double halfsize() const { return L_; }
    const Eigen::Vector2d& antenna_domain_center() const { return center_; }

    double aperture_ratio() const { return d0_ * B_ / (lambda_ * z0_); }
    std::int64_t grid_side() const { return grid_side_; }         // N1
    std::int64_t grid_size() const { return grid_side_ * grid_side_; }  // N = N1^2

    /// Far-field sanity z0 >= 10(B+L). Advisory only; the paraxial error
    /// report quantifies the actual Taylor remainder.
    bool far_field_ok() const { return z0_ >= 10.0 * (B_ + L_); }

    /// Flat key=value serialization.
    std::string to_text() const {
        std::ostringstream os;
        os.precision(17);
        os << "lambda_m = " << lambda_ << "\n"
           << "aperture_m = " << B_ << "\n"
           << "range_m = " << z0_ << "\n"
           << "mesh_m = " << d0_ << "\n"
           << "halfsize_m = " << L_ << "\n"
           << "domain_center_x_m = " << center_.x() << "\n"
           << "domain_center_y_m = " << center_.y() << "\n";
        return os.str();
    }

    static ImagingConfig from_text(std::istream& in) {
        std::map<std::string, double> kv;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("config parse error at line " +
                                         std::to_string(lineno) + ": missing '='");
            std::string key = line.substr(0, eq);
            key.erase(0, key.find_first_not_of(" \t"));
            key.erase(key.find_last_not_of(" \t") + 1);
            try {
                kv[key] = std::stod(line.substr(eq + 1));
            } catch (const std::exception&) {
                throw std::runtime_error("config parse error at line " +
                                         std::to_string(lineno) + ": bad number for key '" +
                                         key + "'");
            }
        }
        auto need = [&](const std::string& k) {
            auto it = kv.find(k);
            if (it == kv.end())
                throw std::runtime_error("config parse error: missing key '" + k + "'");
            return it->second;
        };
        Eigen::Vector2d c(kv.count("domain_center_x_m") ? kv["domain_center_x_m"] : 0.0,
                          kv.count("domain_center_y_m") ? kv["domain_center_y_m"] : 0.0);
        return ImagingConfig(need("lambda_m"), need("aperture_m"), need("range_m"),
                             need("mesh_m"), need("halfsize_m"), c);
    }

    static ImagingConfig from_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("cannot open config file: " + path);
        return from_text(f);
    }

private:
    double lambda_, B_, z0_, d0_, L_;
    Eigen::Vector2d center_;
    std::int64_t grid_side_;
};

/// n antenna positions in the side-B square centered on the configured
/// antenna domain center.
struct AntennaArray {
    std::vector<Eigen::Vector2d> positions;
    std::int64_t n() const { return static_cast<std::int64_t>(positions.size()); }
};

/// The discretized target plane z = z0. Points are lexicographic in (k, l),
/// r = (-L + k*d0, -L + l*d0, z0) for k, l in 1..N1; flat = (k-1)*N1 + (l-1).
class TargetGrid {
public:
    explicit TargetGrid(const ImagingConfig& cfg)
        : N1_(cfg.grid_side()), d0_(cfg.mesh()), L_(cfg.halfsize()), z0_(cfg.range()) {}

    std::int64_t size() const { return N1_ * N1_; }
    std::int64_t side() const { return N1_; }

    std::int64_t flat_index(std::int64_t k, std::int64_t l) const {  // 1-based (k,l)
        return (k - 1) * N1_ + (l - 1);
    }
    std::pair<std::int64_t, std::int64_t> double_index(std::int64_t flat) const {
        return {flat / N1_ + 1, flat % N1_ + 1};
    }

    Eigen::Vector3d point(std::int64_t flat) const {
        const auto [k, l] = double_index(flat);
        return {-L_ + static_cast<double>(k) * d0_, -L_ + static_cast<double>(l) * d0_, z0_};
    }
    Eigen::Vector2d transverse(std::int64_t flat) const {
        const auto [k, l] = double_index(flat);
        return {-L_ + static_cast<double>(k) * d0_, -L_ + static_cast<double>(l) * d0_};
    }

private:
    std::int64_t N1_;
    double d0_, L_, z0_;
};

/// n iid uniform draws from the antenna square. Deterministic given the rng.
inline AntennaArray sample_antennas(const ImagingConfig& cfg, std::int64_t n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("sample_antennas: n must be >= 1");
    const double half = cfg.aperture() / 2.0;
    const Eigen::Vector2d c = cfg.antenna_domain_center();
    AntennaArray arr;
    arr.positions.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const double x = rng.uniform(c.x() - half, c.x() + half);
        const double y = rng.uniform(c.y() - half, c.y() + half);
        arr.positions.emplace_back(x, y);
    }
    return arr;
}

/// Free-space Helmholtz Green's function exp(2*pi*i*|r-b|/lambda)/(4*pi*|r-b|).
inline Complex green_exact(const Eigen::Vector3d& r, const Eigen::Vector3d& b,
                           double lambda) {
    const double d = (r - b).norm();
    if (d == 0.0) throw std::domain_error("green_exact: singular at r == b");
    return std::polar(1.0 / (4.0 * kPi * d), 2.0 * kPi * d / lambda);
}

/// Normalized paraxial Green's function
/// Ghat(b, r) = exp(2*pi*i*z0/lambda) * exp(i*pi*|(x,y)-(xi,eta)|^2/(lambda*z0)).
/// Unit modulus always; r lives on the z = z0 plane, b on z = 0.
inline Complex green_paraxial(const Eigen::Vector2d& r_transverse,
                              const Eigen::Vector2d& b, const ImagingConfig& cfg) {
    const double z0 = cfg.range();
    const double lam = cfg.wavelength();
    const double q = (r_transverse - b).squaredNorm();
    return std::polar(1.0, 2.0 * kPi * z0 / lam + kPi * q / (lam * z0));
}

struct ParaxialErrorReport {
    double max_error_lambda = 0.0;   // max |dist - paraxial dist| in wavelengths
    double mean_error_lambda = 0.0;
    std::int64_t pairs = 0;
};

/// Samples random (antenna, grid point) pairs and reports the Taylor-remainder
/// of the paraxial distance approximation in units of lambda.
inline ParaxialErrorReport paraxial_error_report(const ImagingConfig& cfg,
                                                 std::int64_t sample_pairs, Rng& rng) {
    if (sample_pairs < 1)
        throw std::invalid_argument("paraxial_error_report: sample_pairs must be >= 1");
    const TargetGrid grid(cfg);
    ParaxialErrorReport rep;
    rep.pairs = sample_pairs;
    double sum = 0.0;
    for (std::int64_t i = 0; i < sample_pairs; ++i) {
        Rng sub = rng.split(static_cast<std::uint64_t>(i));
        AntennaArray a = sample_antennas(cfg, 1, sub);
        const auto flat = static_cast<std::int64_t>(sub.uniform_index(
            static_cast<std::uint64_t>(grid.size())));
        const Eigen::Vector3d r = grid.point(flat);
        const Eigen::Vector3d b(a.positions[0].x(), a.positions[0].y(), 0.0);
        const double exact = (r - b).norm();
        const double approx =
            cfg.range() + (grid.transverse(flat) - a.positions[0]).squaredNorm() /
                              (2.0 * cfg.range());
        const double err = std::abs(exact - approx) / cfg.wavelength();
        rep.max_error_lambda = std::max(rep.max_error_lambda, err);
        sum += err;
    }
    rep.mean_error_lambda = sum / static_cast<double>(sample_pairs);
    return rep;
}

}  // namespace csimg

#endif  // CSIMG_GEOMETRY_HPP
