// Runs acceptance criteria 1..17 and prints one line per criterion.
// Usage: acceptance [--seed S] [--threads T] [id ...]

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "wrlab/common.hpp"
#include "wrlab/suite.hpp"

using namespace wrlab;

int main(int argc, char** argv) {
    std::uint64_t seed = 1;
    std::vector<int> ids;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--seed" && i + 1 < argc) {
            seed = std::strtoull(argv[++i], nullptr, 10);
        } else if (a == "--threads" && i + 1 < argc) {
            set_thread_count(std::atoi(argv[++i]));
        } else {
            ids.push_back(std::atoi(a.c_str()));
        }
    }
    int failed = 0;
    try {
        run_suite(seed, ids, [&](const SuiteOutcome& o) {
            const bool ok = o.report.passed();
            failed += ok ? 0 : 1;
            std::printf("criterion %2d  %-40s %s  (%.1f s)\n", o.id, criterion_title(o.id).c_str(), ok ? "PASS" : "FAIL",
                        o.seconds);
            if (!ok) {
                // first failing checks, depth first
                std::vector<const Report*> stack{&o.report};
                int shown = 0;
                while (!stack.empty() && shown < 8) {
                    const Report* r = stack.back();
                    stack.pop_back();
                    for (const auto& c : r->checks) {
                        if (c.pass || shown >= 8) continue;
                        std::printf("    %s: %s  lhs=%s rhs=%s %s\n", r->name.c_str(), c.name.c_str(),
                                    format_double(c.lhs).c_str(), format_double(c.rhs).c_str(), c.detail.c_str());
                        ++shown;
                    }
                    for (auto it = r->children.rbegin(); it != r->children.rend(); ++it) stack.push_back(&*it);
                }
            }
            std::fflush(stdout);
        });
    } catch (const std::exception& e) {
        std::printf("error: %s\n", e.what());
        return 2;
    }
    return failed == 0 ? 0 : 1;
}
