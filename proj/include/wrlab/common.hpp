#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wrlab {

inline constexpr int kMaxDim = 3;

/// Points are stored with a fixed capacity of three coordinates; unused
/// trailing coordinates are zero.
using Point = std::array<double, kMaxDim>;

/// Base of all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input or configuration. The CLI maps this to exit code 2.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Quadrature or linear-solver failure. The CLI maps this to exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

void check_dim(int n);

/// Lebesgue measure of the unit ball in R^n.
double unit_ball_volume(int n);

inline double dot(const Point& a, const Point& b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Point& a, int n) { return std::sqrt(dot(a, a, n)); }

inline double distance(const Point& a, const Point& b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline Point axpy(const Point& base, double s, const Point& dir) {
    return {base[0] + s * dir[0], base[1] + s * dir[1], base[2] + s * dir[2]};
}

Point make_point(std::span<const double> coords);

std::string format_point(const Point& p, int n);

/// Shortest round-trip decimal representation, locale independent.
std::string format_double(double v);

/// Uniform draw in [0, 1) from the top 53 bits (same on every platform,
/// unlike std::uniform_real_distribution).
inline double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
/// splitmix64 of (seed, a, b); independent streams per sample and purpose.
std::uint64_t stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Worker cap for parallel loops (default 1).
void set_thread_count(int threads);
int thread_count();

/// Runs body(i) for i in [0, count). Results must be written to per-index
/// slots; the first exception by index is rethrown, so behaviour does not depend
/// on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace wrlab
