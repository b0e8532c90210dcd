#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace satqfl {

using Vec3 = Eigen::Vector3d;

/// UTC instant as seconds since the Unix epoch (leap seconds ignored).
struct UtcTime {
    double unix_seconds = 0.0;

    auto operator<=>(const UtcTime&) const = default;
    bool operator==(const UtcTime&) const = default;
};

inline UtcTime operator+(UtcTime t, double seconds) { return {t.unix_seconds + seconds}; }
inline UtcTime operator-(UtcTime t, double seconds) { return {t.unix_seconds - seconds}; }
inline double operator-(UtcTime a, UtcTime b) { return a.unix_seconds - b.unix_seconds; }

UtcTime utc_from_civil(int year, unsigned month, unsigned day, int hour = 0, int minute = 0,
                       double second = 0.0);

/// "YYYY-MM-DDTHH:MM:SSZ", with milliseconds appended when the instant is not whole-second.
std::string to_iso8601(UtcTime t);

/// Accepts "YYYY-MM-DDTHH:MM:SS[.fff][Z]"; throws std::invalid_argument otherwise.
UtcTime parse_iso8601(std::string_view text);

/// Deterministic random stream. The engine is mt19937_64 (bit-exact across standard
/// libraries); every distribution on top of it is implemented here so results do not
/// depend on the implementation of <random> distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    int bit();
    /// Uniform integer in [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n);
    double normal();

    template <typename RandomIt>
    void shuffle(RandomIt first, RandomIt last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            const auto j = below(i);
            std::iter_swap(first + static_cast<std::ptrdiff_t>(i - 1),
                           first + static_cast<std::ptrdiff_t>(j));
        }
    }

    template <typename Range>
    void shuffle(Range& range) {
        shuffle(std::begin(range), std::end(range));
    }

    /// Child seed for an independent stream identified by `tags`.
    static std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

private:
    std::mt19937_64 engine_;
    bool has_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

}  // namespace satqfl
