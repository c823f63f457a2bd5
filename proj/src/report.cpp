#include "wrlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "wrlab/common.hpp"

namespace wrlab {

namespace {

Json number(double v) {
    if (!std::isfinite(v)) return Json(nullptr);
    return Json(v);
}

}  // namespace

void Report::check_le(const std::string& what, double lhs, double rhs, const std::string& detail) {
    const bool ok = lhs <= rhs;
    checks.push_back({what, ok, lhs, rhs, rhs - lhs, detail});
}

void Report::check_ge(const std::string& what, double lhs, double rhs, const std::string& detail) {
    const bool ok = lhs >= rhs;
    checks.push_back({what, ok, lhs, rhs, lhs - rhs, detail});
}

void Report::check(const std::string& what, bool pass, const std::string& detail) {
    checks.push_back({what, pass, std::nan(""), std::nan(""), std::nan(""), detail});
}

void Report::fit(const std::string& what, const std::vector<double>& per_grid) {
    FittedConstant c;
    c.name = what;
    c.per_grid = per_grid;
    if (!per_grid.empty()) {
        c.value = per_grid.back();
        const auto [lo, hi] = std::minmax_element(per_grid.begin(), per_grid.end());
        c.refinement_spread = (*lo > 0.0) ? *hi / *lo : std::numeric_limits<double>::infinity();
    }
    fitted.push_back(c);
}

std::size_t Report::violations() const {
    std::size_t v = 0;
    for (const auto& c : checks) v += c.pass ? 0 : 1;
    for (const auto& r : children) v += r.violations();
    return v;
}

bool Report::passed() const { return violations() == 0; }

Json Report::to_json() const {
    Json j;
    j["schema"] = 1;
    j["name"] = name;
    j["passed"] = passed();
    j["violations"] = violations();
    j["config"] = config;
    j["summary"] = summary;
    Json fc = Json::array();
    for (const auto& f : fitted) {
        Json e;
        e["name"] = f.name;
        e["value"] = number(f.value);
        e["refinement_spread"] = number(f.refinement_spread);
        Json pg = Json::array();
        for (double v : f.per_grid) pg.push_back(number(v));
        e["per_grid"] = pg;
        fc.push_back(e);
    }
    j["fitted_constants"] = fc;
    Json cs = Json::array();
    for (const auto& c : checks) {
        Json e;
        e["name"] = c.name;
        e["pass"] = c.pass;
        e["lhs"] = number(c.lhs);
        e["rhs"] = number(c.rhs);
        e["margin"] = number(c.margin);
        if (!c.detail.empty()) e["detail"] = c.detail;
        cs.push_back(e);
    }
    j["verdicts"] = cs;
    Json rs = Json::array();
    for (const auto& r : rows) rs.push_back(r);
    j["rows"] = rs;
    if (!children.empty()) {
        Json ch = Json::array();
        for (const auto& r : children) ch.push_back(r.to_json());
        j["children"] = ch;
    }
    return j;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write " + path);
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << format_double(r[i]);
        out << "\n";
    }
}

}  // namespace wrlab
