#ifndef CSIMG_TOOLS_MEASUREMENT_IO_HPP
#define CSIMG_TOOLS_MEASUREMENT_IO_HPP

// Binary measurement container written by `simulate` and read by `recover`.
// Layout (little-endian):
//   bytes 0..7   magic "CSMEAS01"
//   u64          length of the config text block
//   bytes        config text (key = value lines)
//   i64 n        antennas, then n (x, y) double pairs
//   i64 N        grid size, then N (re, im) double pairs for the scene x
//   i64 s        support size, then s i64 indices
//   i64 m        measurement count (= n^2), then m (re, im) double pairs for y
//   f64 eta      per-entry noise scale used when simulating (0 = noiseless)
// Parse errors report the byte offset at which the file stopped making sense.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "csimg/geometry.hpp"
#include "csimg/operator.hpp"

namespace csimg::tools {

struct Measurement {
    std::string config_text;
    AntennaArray array;
    Vec x;
    std::vector<std::int64_t> support;
    Vec y;
    double eta = 0.0;
};

inline constexpr char kMeasMagic[8] = {'C', 'S', 'M', 'E', 'A', 'S', '0', '1'};

inline void write_measurement(const std::string& path, const Measurement& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    auto put = [&](const void* p, std::size_t b) { f.write(static_cast<const char*>(p), static_cast<std::streamsize>(b)); };
    put(kMeasMagic, 8);
    const std::uint64_t clen = m.config_text.size();
    put(&clen, 8);
    put(m.config_text.data(), m.config_text.size());
    const std::int64_t n = m.array.n();
    put(&n, 8);
    for (const auto& b : m.array.positions) {
        const double xy[2] = {b.x(), b.y()};
        put(xy, 16);
    }
    const std::int64_t N = m.x.size();
    put(&N, 8);
    for (std::int64_t i = 0; i < N; ++i) {
        const double ri[2] = {m.x[i].real(), m.x[i].imag()};
        put(ri, 16);
    }
    const std::int64_t s = static_cast<std::int64_t>(m.support.size());
    put(&s, 8);
    for (auto l : m.support) put(&l, 8);
    const std::int64_t mm = m.y.size();
    put(&mm, 8);
    for (std::int64_t i = 0; i < mm; ++i) {
        const double ri[2] = {m.y[i].real(), m.y[i].imag()};
        put(ri, 16);
    }
    put(&m.eta, 8);
    if (!f) throw std::runtime_error("write failed: " + path);
}

class MeasurementParseError : public std::runtime_error {
public:
    MeasurementParseError(const std::string& path, std::uint64_t offset, const std::string& why)
        : std::runtime_error(path + ": parse error at byte offset " + std::to_string(offset) +
                             ": " + why) {}
};

inline Measurement read_measurement(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    std::uint64_t off = 0;
    auto get = [&](void* p, std::size_t b, const char* what) {
        f.read(static_cast<char*>(p), static_cast<std::streamsize>(b));
        if (!f) throw MeasurementParseError(path, off, std::string("truncated while reading ") + what);
        off += b;
    };
    char magic[8];
    get(magic, 8, "magic");
    for (int i = 0; i < 8; ++i)
        if (magic[i] != kMeasMagic[i])
            throw MeasurementParseError(path, 0, "bad magic (expected CSMEAS01)");
    std::uint64_t clen = 0;
    get(&clen, 8, "config length");
    if (clen > (1u << 20)) throw MeasurementParseError(path, off - 8, "implausible config length");
    Measurement m;
    m.config_text.resize(clen);
    if (clen) get(m.config_text.data(), clen, "config text");

    std::int64_t n = 0;
    get(&n, 8, "antenna count");
    if (n < 1 || n > 1'000'000) throw MeasurementParseError(path, off - 8, "implausible antenna count");
    m.array.positions.resize(static_cast<std::size_t>(n));
    for (auto& b : m.array.positions) {
        double xy[2];
        get(xy, 16, "antenna position");
        b = {xy[0], xy[1]};
    }
    std::int64_t N = 0;
    get(&N, 8, "grid size");
    if (N < 1 || N > 100'000'000) throw MeasurementParseError(path, off - 8, "implausible grid size");
    m.x.resize(N);
    for (std::int64_t i = 0; i < N; ++i) {
        double ri[2];
        get(ri, 16, "scene entry");
        m.x[i] = {ri[0], ri[1]};
    }
    std::int64_t s = 0;
    get(&s, 8, "support size");
    if (s < 0 || s > N) throw MeasurementParseError(path, off - 8, "support size out of range");
    m.support.resize(static_cast<std::size_t>(s));
    for (auto& l : m.support) {
        get(&l, 8, "support index");
        if (l < 0 || l >= N) throw MeasurementParseError(path, off - 8, "support index out of range");
    }
    std::int64_t mm = 0;
    get(&mm, 8, "measurement count");
    if (mm != n * n) throw MeasurementParseError(path, off - 8, "measurement count is not n^2");
    m.y.resize(mm);
    for (std::int64_t i = 0; i < mm; ++i) {
        double ri[2];
        get(ri, 16, "measurement entry");
        m.y[i] = {ri[0], ri[1]};
    }
    get(&m.eta, 8, "noise scale");
    return m;
}

}  // namespace csimg::tools

#endif  // CSIMG_TOOLS_MEASUREMENT_IO_HPP
