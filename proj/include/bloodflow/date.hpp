#pragma once

#include "bloodflow/error.hpp"

#include <chrono>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

namespace bloodflow {

// Calendar day with ISO-8601 text form (YYYY-MM-DD).
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::chrono::sys_days days) : days_(days) {}

    static Date from_ymd(int year, unsigned month, unsigned day) {
        const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                              std::chrono::day{day}};
        if (!ymd.ok()) throw ValidationError("invalid calendar date");
        return Date(std::chrono::sys_days{ymd});
    }

    static Date parse(std::string_view text) {
        if (text.size() != 10 || text[4] != '-' || text[7] != '-')
            throw ValidationError("expected YYYY-MM-DD, got '" + std::string(text) + "'");
        auto digits = [&](std::size_t pos, std::size_t len) {
            int v = 0;
            for (std::size_t i = pos; i < pos + len; ++i) {
                if (text[i] < '0' || text[i] > '9')
                    throw ValidationError("expected YYYY-MM-DD, got '" + std::string(text) + "'");
                v = v * 10 + (text[i] - '0');
            }
            return v;
        };
        return from_ymd(digits(0, 4), static_cast<unsigned>(digits(5, 2)),
                        static_cast<unsigned>(digits(8, 2)));
    }

    std::string iso() const {
        const std::chrono::year_month_day ymd{days_};
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
        return buf;
    }

    constexpr std::chrono::sys_days sys_days() const { return days_; }
    constexpr long serial() const { return static_cast<long>(days_.time_since_epoch().count()); }

    constexpr Date operator+(int n) const { return Date(days_ + std::chrono::days{n}); }
    constexpr Date operator-(int n) const { return Date(days_ - std::chrono::days{n}); }
    friend constexpr int operator-(Date a, Date b) {
        return static_cast<int>((a.days_ - b.days_).count());
    }

    friend constexpr auto operator<=>(Date, Date) = default;
    friend constexpr bool operator==(Date, Date) = default;

private:
    std::chrono::sys_days days_{};
};

}  // namespace bloodflow
