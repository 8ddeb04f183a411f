#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace acr {

/// Calendar date with day precision. Total order via the civil-day number.
struct Date {
    std::int32_t year = 0;
    std::uint8_t month = 0;
    std::uint8_t day = 0;

    static bool is_valid(int year, int month, int day);

    /// Parses strict `YYYY-MM-DD`. Returns nullopt on malformed or invalid dates.
    static std::optional<Date> parse(const std::string& text);

    std::string to_string() const;

    /// Days since 1970-01-01 (may be negative).
    std::int64_t serial() const;

    friend bool operator==(const Date& a, const Date& b) {
        return a.year == b.year && a.month == b.month && a.day == b.day;
    }
    friend bool operator!=(const Date& a, const Date& b) { return !(a == b); }
    friend bool operator<(const Date& a, const Date& b) { return a.serial() < b.serial(); }
    friend bool operator<=(const Date& a, const Date& b) { return a.serial() <= b.serial(); }
    friend bool operator>(const Date& a, const Date& b) { return b < a; }
    friend bool operator>=(const Date& a, const Date& b) { return b <= a; }
};

/// Date offset by a number of days.
Date add_days(const Date& d, std::int64_t days);

/// Closed interval over dates; either bound may be unknown.
struct DateInterval {
    std::optional<Date> start;
    std::optional<Date> end;

    bool operator==(const DateInterval& other) const = default;
};

}  // namespace acr
