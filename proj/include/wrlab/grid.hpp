#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wrlab/common.hpp"

namespace wrlab {

/// Uniform space-time grid: nodes lower + h * (i_0, ..., i_{n-1}) with
/// 0 <= i_d < nx, times t0 + k * tau for 0 <= k < nt. Spatial flat indices are
/// row-major (last axis fastest); full indices are time-major.
struct Grid {
    int n = 2;
    Point lower{0.0, 0.0, 0.0};
    double h = 0.0;
    int nx = 0;
    double t0 = 0.0;
    double tau = 0.0;
    int nt = 0;

    void validate() const;
    std::size_t spatial() const;
    std::size_t size() const { return spatial() * static_cast<std::size_t>(nt); }
    std::size_t index(int k, std::size_t i) const { return static_cast<std::size_t>(k) * spatial() + i; }
    double time(int k) const { return t0 + tau * k; }
    std::array<int, 3> multi(std::size_t i) const;
    std::size_t flat(const std::array<int, 3>& m) const;
    Point node(std::size_t i) const;
    /// Flat offset of a neighbour displaced by `d` (each entry in {-1,0,1}).
    long offset(const std::array<int, 3>& d) const;
    bool on_box_edge(std::size_t i) const;
};

enum class NodeKind : std::uint8_t { outside = 0, interior = 1, boundary = 2 };

/// Classification of every grid node of a space-time domain.
struct SpaceTimeDomain {
    Grid grid;
    std::vector<NodeKind> kind;
    int first_level = 0;  ///< bottom slice
    int last_level = 0;   ///< top slice
    /// Spatial slices are the open balls B(centre(k), radius) when radius > 0.
    std::function<Point(int)> centre;
    double radius = 0.0;

    bool is(int k, std::size_t i, NodeKind kd) const { return kind[grid.index(k, i)] == kd; }
    std::size_t count(NodeKind kd) const;
};

struct GridFunction {
    Grid grid;
    std::vector<double> values;

    GridFunction() = default;
    explicit GridFunction(const Grid& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}
    double& at(int k, std::size_t i) { return values[grid.index(k, i)]; }
    double at(int k, std::size_t i) const { return values[grid.index(k, i)]; }
};

struct NodeMask {
    Grid grid;
    std::vector<std::uint8_t> flags;

    NodeMask() = default;
    explicit NodeMask(const Grid& g) : grid(g), flags(g.size(), 0) {}
    bool at(int k, std::size_t i) const { return flags[grid.index(k, i)] != 0; }
    std::size_t count() const;
};

/// Flat binary layout: magic "WRLG", u32 version, u32 n, u32 nx, u32 nt, f64 h,
/// f64 tau, f64 lower[3], f64 t0, then nt * nx^n f64 values (time-major,
/// row-major). Little-endian host order.
void write_grid_function(const std::string& path, const GridFunction& u);
GridFunction read_grid_function(const std::string& path);
/// Columns t, x1..xn, value.
void write_grid_function_csv(const std::string& path, const GridFunction& u);

}  // namespace wrlab
