#include "wrlab/common.hpp"

#include <atomic>
#include <charconv>
#include <exception>
#include <thread>
#include <vector>
#include <algorithm>

namespace wrlab {

void check_dim(int n) {
    if (n < 1 || n > kMaxDim) {
        throw DomainError("dimension must be 1, 2 or 3, got " + std::to_string(n));
    }
}

double unit_ball_volume(int n) {
    check_dim(n);
    return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

Point make_point(std::span<const double> coords) {
    if (coords.size() > static_cast<std::size_t>(kMaxDim)) {
        throw DomainError("point has more than three coordinates");
    }
    Point p{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < coords.size(); ++i) p[i] = coords[i];
    return p;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_point(const Point& p, int n) {
    std::string s;
    for (int i = 0; i < n; ++i) {
        if (i) s += ',';
        s += format_double(p[i]);
    }
    return s;
}

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int threads) {
    if (threads < 1) throw DomainError("thread count must be at least 1");
    g_threads = threads;
}

int thread_count() { return g_threads; }

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(g_threads.load()), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::uint64_t stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xd1b54a32d192ed03ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace wrlab
