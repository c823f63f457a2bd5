#include "wrlab/grid.hpp"

#include <cstring>
#include <fstream>

namespace wrlab {

void Grid::validate() const {
    check_dim(n);
    if (!(h > 0.0) || !(tau > 0.0)) throw DomainError("grid spacing and time step must be positive");
    if (nx < 9) throw DomainError("grid needs at least 9 nodes per spatial axis");
    if (nt < 2) throw DomainError("grid needs at least two time levels");
}

std::size_t Grid::spatial() const {
    std::size_t s = 1;
    for (int d = 0; d < n; ++d) s *= static_cast<std::size_t>(nx);
    return s;
}

std::array<int, 3> Grid::multi(std::size_t i) const {
    std::array<int, 3> m{0, 0, 0};
    for (int d = n - 1; d >= 0; --d) {
        m[d] = static_cast<int>(i % static_cast<std::size_t>(nx));
        i /= static_cast<std::size_t>(nx);
    }
    return m;
}

std::size_t Grid::flat(const std::array<int, 3>& m) const {
    std::size_t i = 0;
    for (int d = 0; d < n; ++d) i = i * static_cast<std::size_t>(nx) + static_cast<std::size_t>(m[d]);
    return i;
}

Point Grid::node(std::size_t i) const {
    const auto m = multi(i);
    Point p{0.0, 0.0, 0.0};
    for (int d = 0; d < n; ++d) p[d] = lower[d] + h * m[d];
    return p;
}

long Grid::offset(const std::array<int, 3>& dv) const {
    long o = 0;
    for (int d = 0; d < n; ++d) o = o * nx + dv[d];
    return o;
}

bool Grid::on_box_edge(std::size_t i) const {
    const auto m = multi(i);
    for (int d = 0; d < n; ++d) {
        if (m[d] == 0 || m[d] == nx - 1) return true;
    }
    return false;
}

std::size_t SpaceTimeDomain::count(NodeKind kd) const {
    std::size_t c = 0;
    for (auto k : kind) c += k == kd ? 1 : 0;
    return c;
}

std::size_t NodeMask::count() const {
    std::size_t c = 0;
    for (auto f : flags) c += f ? 1 : 0;
    return c;
}

namespace {
constexpr char kMagic[4] = {'W', 'R', 'L', 'G'};

template <class T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DomainError("truncated grid function file");
    return v;
}
}  // namespace

void write_grid_function(const std::string& path, const GridFunction& u) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DomainError("cannot write " + path);
    out.write(kMagic, 4);
    put<std::uint32_t>(out, 1);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(u.grid.n));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(u.grid.nx));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(u.grid.nt));
    put(out, u.grid.h);
    put(out, u.grid.tau);
    for (double v : u.grid.lower) put(out, v);
    put(out, u.grid.t0);
    out.write(reinterpret_cast<const char*>(u.values.data()), static_cast<std::streamsize>(u.values.size() * sizeof(double)));
}

GridFunction read_grid_function(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("cannot read " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw DomainError("not a grid function file: " + path);
    if (get<std::uint32_t>(in) != 1) throw DomainError("unsupported grid function version");
    Grid g;
    g.n = static_cast<int>(get<std::uint32_t>(in));
    g.nx = static_cast<int>(get<std::uint32_t>(in));
    g.nt = static_cast<int>(get<std::uint32_t>(in));
    g.h = get<double>(in);
    g.tau = get<double>(in);
    for (double& v : g.lower) v = get<double>(in);
    g.t0 = get<double>(in);
    check_dim(g.n);
    GridFunction u(g);
    in.read(reinterpret_cast<char*>(u.values.data()), static_cast<std::streamsize>(u.values.size() * sizeof(double)));
    if (!in) throw DomainError("truncated grid function payload");
    return u;
}

void write_grid_function_csv(const std::string& path, const GridFunction& u) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write " + path);
    out << "t";
    for (int d = 0; d < u.grid.n; ++d) out << ",x" << (d + 1);
    out << ",value\n";
    for (int k = 0; k < u.grid.nt; ++k) {
        for (std::size_t i = 0; i < u.grid.spatial(); ++i) {
            const Point p = u.grid.node(i);
            out << format_double(u.grid.time(k));
            for (int d = 0; d < u.grid.n; ++d) out << "," << format_double(p[d]);
            out << "," << format_double(u.at(k, i)) << "\n";
        }
    }
}

}  // namespace wrlab
