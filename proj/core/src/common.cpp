#include "satqfl/common.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace satqfl {

namespace {

constexpr double kSecondsPerDay = 86400.0;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

int parse_int(std::string_view text, std::size_t pos, std::size_t len) {
    if (pos + len > text.size()) {
        throw std::invalid_argument("timestamp too short");
    }
    int value = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        const char c = text[i];
        if (c < '0' || c > '9') {
            throw std::invalid_argument("timestamp: expected digit in '" + std::string(text) + "'");
        }
        value = value * 10 + (c - '0');
    }
    return value;
}

void expect_char(std::string_view text, std::size_t pos, char c) {
    if (pos >= text.size() || text[pos] != c) {
        throw std::invalid_argument("timestamp: expected '" + std::string(1, c) + "' in '" +
                                    std::string(text) + "'");
    }
}

}  // namespace

UtcTime utc_from_civil(int year, unsigned month, unsigned day, int hour, int minute, double second) {
    using namespace std::chrono;
    const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    if (!ymd.ok()) {
        throw std::invalid_argument("invalid calendar date");
    }
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return {static_cast<double>(days) * kSecondsPerDay + hour * 3600.0 + minute * 60.0 + second};
}

std::string to_iso8601(UtcTime t) {
    using namespace std::chrono;
    const double day_index = std::floor(t.unix_seconds / kSecondsPerDay);
    double within = t.unix_seconds - day_index * kSecondsPerDay;
    // Round to milliseconds first so 59.9996 s does not print as "60".
    auto millis = static_cast<long long>(std::llround(within * 1000.0));
    auto day_count = static_cast<long long>(day_index);
    if (millis >= 86'400'000LL) {
        millis -= 86'400'000LL;
        ++day_count;
    }
    const year_month_day ymd{sys_days{days{day_count}}};
    const long long secs = millis / 1000;
    const long long frac = millis % 1000;
    char buf[64];
    if (frac == 0) {
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", int(ymd.year()),
                      unsigned(ymd.month()), unsigned(ymd.day()), secs / 3600, (secs / 60) % 60,
                      secs % 60);
    } else {
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lld.%03lldZ", int(ymd.year()),
                      unsigned(ymd.month()), unsigned(ymd.day()), secs / 3600, (secs / 60) % 60,
                      secs % 60, frac);
    }
    return buf;
}

UtcTime parse_iso8601(std::string_view text) {
    const int year = parse_int(text, 0, 4);
    expect_char(text, 4, '-');
    const int month = parse_int(text, 5, 2);
    expect_char(text, 7, '-');
    const int day = parse_int(text, 8, 2);
    if (text.size() < 11 || (text[10] != 'T' && text[10] != ' ')) {
        throw std::invalid_argument("timestamp: expected 'T' in '" + std::string(text) + "'");
    }
    const int hour = parse_int(text, 11, 2);
    expect_char(text, 13, ':');
    const int minute = parse_int(text, 14, 2);
    expect_char(text, 16, ':');
    double second = parse_int(text, 17, 2);
    std::size_t pos = 19;
    if (pos < text.size() && text[pos] == '.') {
        double scale = 0.1;
        ++pos;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
            second += (text[pos] - '0') * scale;
            scale /= 10.0;
            ++pos;
        }
    }
    if (pos < text.size() && text[pos] == 'Z') {
        ++pos;
    }
    if (pos != text.size()) {
        throw std::invalid_argument("timestamp: trailing characters in '" + std::string(text) + "'");
    }
    if (hour > 23 || minute > 59 || second >= 61.0) {
        throw std::invalid_argument("timestamp: time of day out of range");
    }
    return utc_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day), hour,
                          minute, second);
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

int Rng::bit() { return static_cast<int>(next_u64() >> 63); }

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) {
        throw std::invalid_argument("Rng::below requires n > 0");
    }
    // Rejection sampling on the top of the range keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    if (has_spare_normal_) {
        has_spare_normal_ = false;
        return spare_normal_;
    }
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_normal_ = radius * std::sin(angle);
    has_spare_normal_ = true;
    return radius * std::cos(angle);
}

std::uint64_t Rng::derive(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = splitmix64(seed);
    for (const auto tag : tags) {
        h = splitmix64(h ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
    }
    return h;
}

}  // namespace satqfl
