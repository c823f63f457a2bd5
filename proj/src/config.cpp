#include "wrlab/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace wrlab {

double parse_number(const std::string& text, const std::string& what) {
    std::size_t b = 0;
    std::size_t e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    const char* first = text.data() + b;
    if (b < e && *first == '+') ++first;
    double v = 0.0;
    auto res = std::from_chars(first, text.data() + e, v);
    if (res.ec != std::errc() || res.ptr != text.data() + e || b == e) {
        throw DomainError("cannot parse number for " + what + ": '" + text + "'");
    }
    return v;
}

namespace {

struct Token {
    enum Kind { ident, number, lparen, rparen, comma, equals, star, end } kind;
    std::string text;
};

class Lexer {
public:
    explicit Lexer(const std::string& s) : s_(s) {}
    Token next() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (pos_ >= s_.size()) return {Token::end, ""};
        const char c = s_[pos_];
        switch (c) {
            case '(': ++pos_; return {Token::lparen, "("};
            case ')': ++pos_; return {Token::rparen, ")"};
            case ',': ++pos_; return {Token::comma, ","};
            case '=': ++pos_; return {Token::equals, "="};
            case '*': ++pos_; return {Token::star, "*"};
            default: break;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t b = pos_;
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
            return {Token::ident, s_.substr(b, pos_ - b)};
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
            const std::size_t b = pos_;
            ++pos_;
            while (pos_ < s_.size()) {
                const char d = s_[pos_];
                const bool exp_sign = (d == '-' || d == '+') && (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E');
                if (std::isdigit(static_cast<unsigned char>(d)) || d == '.' || d == 'e' || d == 'E' || exp_sign) ++pos_;
                else break;
            }
            return {Token::number, s_.substr(b, pos_ - b)};
        }
        throw DomainError("unexpected character '" + std::string(1, c) + "' in weight spec");
    }

private:
    const std::string& s_;
    std::size_t pos_ = 0;
};

class WeightParser {
public:
    WeightParser(const std::string& text, int n) : lex_(text), n_(n) { advance(); }

    Weight parse_all() {
        Weight w = parse_weight();
        if (tok_.kind != Token::end) fail("trailing input '" + tok_.text + "'");
        return w;
    }

private:
    struct Args {
        std::map<std::string, std::vector<double>> named;
        std::vector<std::pair<double, Weight>> weights;
    };

    [[noreturn]] void fail(const std::string& msg) const { throw DomainError("weight spec: " + msg); }
    void advance() { tok_ = lex_.next(); }
    void expect(Token::Kind k, const char* what) {
        if (tok_.kind != k) fail(std::string("expected ") + what + " near '" + tok_.text + "'");
        advance();
    }

    Weight parse_weight() {
        if (tok_.kind != Token::ident) fail("expected a weight name near '" + tok_.text + "'");
        const std::string name = tok_.text;
        advance();
        expect(Token::lparen, "'('");
        Args args;
        std::string last_key;
        while (tok_.kind != Token::rparen) {
            if (tok_.kind == Token::ident) {
                // Either key=value or a nested weight.
                Lexer probe = lex_;
                Token after = probe.next();
                if (after.kind == Token::equals) {
                    last_key = tok_.text;
                    advance();
                    advance();
                    if (tok_.kind != Token::number) fail("expected a number after '" + last_key + "='");
                    args.named[last_key].push_back(parse_number(tok_.text, last_key));
                    advance();
                } else {
                    args.weights.emplace_back(1.0, parse_weight());
                    last_key.clear();
                }
            } else if (tok_.kind == Token::number) {
                const double v = parse_number(tok_.text, name);
                advance();
                if (tok_.kind == Token::star) {
                    advance();
                    args.weights.emplace_back(v, parse_weight());
                    last_key.clear();
                } else {
                    if (last_key.empty()) fail("stray number in " + name + "(...)");
                    args.named[last_key].push_back(v);
                }
            } else {
                fail("unexpected '" + tok_.text + "' in " + name + "(...)");
            }
            if (tok_.kind == Token::comma) advance();
            else if (tok_.kind != Token::rparen) fail("expected ',' or ')' in " + name + "(...)");
        }
        advance();
        return build(name, args);
    }

    double scalar(const Args& a, const std::string& key, const std::string& name) const {
        auto it = a.named.find(key);
        if (it == a.named.end()) fail(name + " requires " + key + "=");
        if (it->second.size() != 1) fail(name + ": " + key + " takes one value");
        return it->second.front();
    }
    std::optional<double> opt_scalar(const Args& a, const std::string& key, const std::string& name) const {
        if (!a.named.count(key)) return std::nullopt;
        return scalar(a, key, name);
    }
    Point center(const Args& a, const std::string& name) const {
        auto it = a.named.find("center");
        if (it == a.named.end()) return {0.0, 0.0, 0.0};
        if (static_cast<int>(it->second.size()) != n_) {
            fail(name + ": center needs " + std::to_string(n_) + " coordinates");
        }
        return make_point(it->second);
    }
    void check_keys(const Args& a, const std::string& name, std::initializer_list<const char*> allowed) const {
        for (const auto& [k, v] : a.named) {
            bool ok = false;
            for (const char* al : allowed) ok = ok || k == al;
            if (!ok) fail(name + ": unknown key '" + k + "'");
        }
    }
    const Weight& single(const Args& a, const std::string& name) const {
        if (a.weights.size() != 1 || a.weights.front().first != 1.0) fail(name + " takes exactly one weight");
        return a.weights.front().second;
    }

    Weight build(const std::string& name, const Args& a) const {
        if (name == "constant") {
            check_keys(a, name, {"c"});
            return Weight::constant(opt_scalar(a, "c", name).value_or(1.0), n_);
        }
        if (name == "power") {
            check_keys(a, name, {"alpha", "center", "claim"});
            const bool claim = opt_scalar(a, "claim", name).value_or(0.0) != 0.0;
            return Weight::power(scalar(a, "alpha", name), center(a, name), n_, claim);
        }
        if (name == "log" || name == "logtype") {
            check_keys(a, name, {"center"});
            return Weight::logtype(center(a, name), n_);
        }
        if (name == "product") {
            check_keys(a, name, {});
            std::vector<Weight> f;
            for (const auto& [c, w] : a.weights) {
                if (c != 1.0) fail("product factors take no coefficient");
                f.push_back(w);
            }
            return Weight::product(f);
        }
        if (name == "sum") {
            check_keys(a, name, {});
            return Weight::weighted_sum(a.weights);
        }
        if (name == "truncate") {
            check_keys(a, name, {"lower", "upper"});
            const auto lo = opt_scalar(a, "lower", name);
            const auto hi = opt_scalar(a, "upper", name);
            const Weight& base = single(a, name);
            if (lo && hi) return wrlab::truncate(base, TruncationMode::band(*lo, *hi));
            if (hi) return wrlab::truncate(base, TruncationMode::upper_at(*hi));
            if (lo) return wrlab::truncate(base, TruncationMode::lower_at(*lo));
            fail("truncate needs lower= and/or upper=");
        }
        if (name == "mollify") {
            check_keys(a, name, {"eps", "tol"});
            return wrlab::mollify(single(a, name), scalar(a, "eps", name), opt_scalar(a, "tol", name).value_or(1e-9));
        }
        if (name == "pow") {
            check_keys(a, name, {"e"});
            return Weight::power_of(single(a, name), scalar(a, "e", name));
        }
        fail("unknown weight kind '" + name + "'");
    }

    Lexer lex_;
    Token tok_{Token::end, ""};
    int n_;
};

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

Weight parse_weight(const std::string& text, int n) {
    check_dim(n);
    WeightParser p(text, n);
    return p.parse_all();
}

Config Config::parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw DomainError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw DomainError("config line " + std::to_string(lineno) + ": empty key");
        for (char c : key) {
            if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) {
                throw DomainError("config line " + std::to_string(lineno) + ": bad key '" + key + "'");
            }
        }
        cfg.values_[key] = value;
    }
    return cfg;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_number(it->second, key);
}

long Config::get_int(const std::string& key, long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const double v = parse_number(it->second, key);
    if (v != std::floor(v)) throw DomainError("config key " + key + " must be an integer");
    return static_cast<long>(v);
}

std::uint64_t Config::get_seed(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::uint64_t v = 0;
    const std::string& s = it->second;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw DomainError("config key " + key + " must be a non-negative integer");
    return v;
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(item, key));
    if (out.empty()) throw DomainError("config key " + key + " is empty");
    return out;
}

std::string Config::dump() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

}  // namespace wrlab
