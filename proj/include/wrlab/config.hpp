#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wrlab/weights.hpp"

namespace wrlab {

/// Parses the weight grammar used in config files and on the command line, e.g.
/// `power(alpha=0.3)`, `product(log(center=0.2,0), log(center=-0.3,0.1))`,
/// `sum(2*power(alpha=0.1), 0.5*log())`, `truncate(power(alpha=-0.4), upper=4)`,
/// `mollify(log(), eps=0.05)`, `pow(power(alpha=0.3), e=-2)`.
Weight parse_weight(const std::string& text, int n);

/// Line-oriented `key = value` configuration with dotted section keys.
class Config {
public:
    static Config parse(const std::string& text);
    static Config load(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long get_int(const std::string& key, long fallback) const;
    std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }
    std::string dump() const;

private:
    std::map<std::string, std::string> values_;
};

double parse_number(const std::string& text, const std::string& what);

}  // namespace wrlab
