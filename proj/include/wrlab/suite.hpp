#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wrlab/common.hpp"
#include "wrlab/report.hpp"

namespace wrlab {

/// Acceptance criteria 1..17. Each criterion yields one report whose checks
/// carry the stated tolerances; the criterion passes iff the report does.
inline constexpr int kCriteria = 17;

std::string criterion_title(int id);

/// Criteria 1..16. Reports contain no timing or host data, so equal seeds give
/// byte-identical JSON.
Report run_criterion(int id, std::uint64_t seed);

/// Criterion 17: reruns every criterion in `first` (ids 1..16 in order) and
/// compares the serialized reports byte for byte.
Report reproducibility_check(const std::vector<Report>& first, std::uint64_t seed);

struct SuiteOutcome {
    int id = 0;
    Report report;
    double seconds = 0.0;
};

/// Runs the selected criteria (all when empty); criterion 17 reruns the others
/// with twice the worker count. `on_done` sees each outcome as it completes.
std::vector<SuiteOutcome> run_suite(std::uint64_t seed, const std::vector<int>& only = {},
                                    const std::function<void(const SuiteOutcome&)>& on_done = {});

/// Top-level report with one child per criterion.
Report suite_report(const std::vector<SuiteOutcome>& outcomes, std::uint64_t seed);

}  // namespace wrlab
