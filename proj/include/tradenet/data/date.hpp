#pragma once

#include <chrono>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "tradenet/core/error.hpp"
#include "tradenet/core/text.hpp"

namespace tradenet {

/// Calendar date stored as days since 1970-01-01 (proleptic Gregorian).
class Date {
public:
    constexpr Date() = default;

    static Date from_ymd(int y, unsigned m, unsigned d) {
        const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
        if (!ymd.ok()) {
            fail(ErrorKind::value, "invalid date " + std::to_string(y) + "-" + std::to_string(m) + "-" + std::to_string(d));
        }
        return Date(std::chrono::sys_days{ymd}.time_since_epoch().count());
    }

    /// Parses YYYY-MM-DD.
    static Date parse(std::string_view s) {
        s = text::trim(s);
        const auto parts = text::split(s, '-');
        int y;
        unsigned m, d;
        if (parts.size() != 3 || parts[0].size() != 4 || parts[1].size() != 2 || parts[2].size() != 2 ||
            !text::parse_int(parts[0], y) || !text::parse_int(parts[1], m) || !text::parse_int(parts[2], d)) {
            fail(ErrorKind::parse, "cannot parse date '" + std::string(s) + "' (expected YYYY-MM-DD)");
        }
        return from_ymd(y, m, d);
    }

    static constexpr Date from_days(long days) { return Date(days); }

    constexpr long days() const { return days_; }

    std::chrono::year_month_day ymd() const {
        return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{days_}}};
    }

    /// 0 = Monday ... 6 = Sunday.
    int weekday() const {
        const std::chrono::weekday wd{std::chrono::sys_days{std::chrono::days{days_}}};
        return static_cast<int>((wd.c_encoding() + 6) % 7);
    }

    Date plus_days(long n) const { return Date(days_ + n); }

    std::string str() const {
        const auto d = ymd();
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                      static_cast<unsigned>(d.day()));
        return buf;
    }

    friend constexpr auto operator<=>(const Date&, const Date&) = default;

private:
    constexpr explicit Date(long days) : days_(days) {}
    long days_ = 0;
};

}  // namespace tradenet
