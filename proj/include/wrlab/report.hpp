#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace wrlab {

using Json = nlohmann::ordered_json;

/// One asserted inequality or property. For inequalities, margin is rhs - lhs
/// oriented so that a non-negative margin means pass.
struct Check {
    std::string name;
    bool pass = true;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;
    std::string detail;
};

struct FittedConstant {
    std::string name;
    double value = 0.0;
    /// max/min over the refinement levels; 1 when only one level was run.
    double refinement_spread = 1.0;
    std::vector<double> per_grid;
};

class Report {
public:
    explicit Report(std::string name = "") : name(std::move(name)) {}

    std::string name;
    Json config = Json::object();
    Json summary = Json::object();
    std::vector<Json> rows;
    std::vector<FittedConstant> fitted;
    std::vector<Check> checks;
    std::vector<Report> children;

    void check_le(const std::string& what, double lhs, double rhs, const std::string& detail = "");
    void check_ge(const std::string& what, double lhs, double rhs, const std::string& detail = "");
    void check(const std::string& what, bool pass, const std::string& detail = "");
    void fit(const std::string& what, const std::vector<double>& per_grid);

    bool passed() const;
    std::size_t violations() const;
    Json to_json() const;
};

/// CSV with '.' decimals and shortest round-trip numbers.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace wrlab
