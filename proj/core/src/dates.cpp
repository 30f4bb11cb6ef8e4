#include "macroq/dates.hpp"

#include "macroq/errors.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>

namespace macroq {

namespace {

bool parse_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

std::string_view trimmed(const std::string& text) {
    size_t b = 0, e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    return std::string_view(text).substr(b, e - b);
}

bool try_parse_month(std::string_view s, MonthDate& out) {
    // YYYY-MM
    if (auto dash = s.find('-'); dash != std::string_view::npos) {
        int y = 0, m = 0;
        if (!parse_int(s.substr(0, dash), y)) return false;
        if (!parse_int(s.substr(dash + 1), m)) return false;
        if (m < 1 || m > 12) return false;
        out = MonthDate{y, m};
        return true;
    }
    // M/D/YYYY
    auto first = s.find('/');
    if (first == std::string_view::npos) return false;
    auto second = s.find('/', first + 1);
    if (second == std::string_view::npos) return false;
    int m = 0, d = 0, y = 0;
    if (!parse_int(s.substr(0, first), m)) return false;
    if (!parse_int(s.substr(first + 1, second - first - 1), d)) return false;
    if (!parse_int(s.substr(second + 1), y)) return false;
    if (m < 1 || m > 12 || d < 1 || d > 31) return false;
    out = MonthDate{y, m};
    return true;
}

} // namespace

std::string MonthDate::str() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month);
    return buf;
}

MonthDate parse_month(const std::string& text) {
    MonthDate d;
    if (!try_parse_month(trimmed(text), d)) {
        throw DataError("unparseable month '" + text + "' (expected YYYY-MM or M/D/YYYY)");
    }
    return d;
}

bool looks_like_month(const std::string& text) {
    MonthDate d;
    return try_parse_month(trimmed(text), d);
}

} // namespace macroq
