#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace macroq {

/// Month-resolution calendar date. All series in this project are monthly;
/// there is deliberately no day arithmetic.
struct MonthDate {
    int year = 0;
    int month = 1; // 1..12

    static MonthDate from_index(int idx) {
        MonthDate d;
        d.year = idx / 12;
        d.month = idx % 12 + 1;
        return d;
    }

    int index() const { return year * 12 + (month - 1); }

    MonthDate plus_months(int m) const { return from_index(index() + m); }

    friend int months_between(MonthDate a, MonthDate b) { return b.index() - a.index(); }

    auto operator<=>(const MonthDate& other) const { return index() <=> other.index(); }
    bool operator==(const MonthDate& other) const { return index() == other.index(); }

    std::string str() const; // "YYYY-MM"
};

/// Parses "YYYY-MM" or "M/D/YYYY" (the day is ignored). Throws DataError
/// with the offending text otherwise.
MonthDate parse_month(const std::string& text);

bool looks_like_month(const std::string& text);

} // namespace macroq
