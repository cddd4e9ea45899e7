#include "specgram/qexpr.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

#include "specgram/errors.hpp"

namespace specgram {

namespace {

std::string strip(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double parse_number(const std::string& s, const std::string& full) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("q expression '" + full + "': cannot parse number '" + s + "'");
    }
}

// exponent: a plain number or "(a/b)"
double parse_exponent(std::string s, const std::string& full) {
    s = strip(s);
    if (!s.empty() && s.front() == '(' && s.back() == ')') {
        std::string inner = strip(s.substr(1, s.size() - 2));
        std::size_t slash = inner.find('/');
        if (slash != std::string::npos) {
            double a = parse_number(strip(inner.substr(0, slash)), full);
            double b = parse_number(strip(inner.substr(slash + 1)), full);
            if (b == 0.0) throw ConfigError("q expression '" + full + "': division by zero");
            return a / b;
        }
        return parse_number(inner, full);
    }
    return parse_number(s, full);
}

double parse_term(std::string s, double n, const std::string& full) {
    s = strip(s);
    if (s == "n") return n;
    if (s == "sqrt(n)") return std::sqrt(n);
    if (s.rfind("n^", 0) == 0) return std::pow(n, parse_exponent(s.substr(2), full));
    return parse_number(s, full);
}

}  // namespace

double eval_q_expression(const std::string& expr, int n) {
    if (n < 1) throw ConfigError("q expression: n must be positive");
    const std::string s = strip(expr);
    if (s.empty()) throw ConfigError("q expression: empty");
    const double nd = static_cast<double>(n);
    std::size_t star = s.find('*');
    double value;
    if (star != std::string::npos) {
        double coef = parse_number(strip(s.substr(0, star)), s);
        value = coef * parse_term(s.substr(star + 1), nd, s);
    } else {
        value = parse_term(s, nd, s);
    }
    if (!(value > 0.0) || !std::isfinite(value))
        throw ConfigError("q expression '" + s + "' does not evaluate to a positive number");
    return value;
}

}  // namespace specgram
