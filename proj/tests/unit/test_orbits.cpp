#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "satqfl/orbits.hpp"

using namespace satqfl;
using namespace satqfl::orbits;

namespace {

constexpr double kPi = std::numbers::pi;

const std::string kStarlink1008 =
    "STARLINK-1008\n"
    "1 44714U 19074B   25112.58592294  .00005641  00000+0  39726-3 0  9991\n"
    "2 44714  53.0538 188.1053 0001311  93.0175 267.0964 15.06401971300352\n";

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Bisection on E - e sin E - M over [0, 2pi]; independent of the Newton solver.
double kepler_by_bisection(double m, double e) {
    double lo = 0.0;
    double hi = 2.0 * kPi;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid - e * std::sin(mid) - m < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

OrbitalElements circular(double a_km) {
    OrbitalElements el;
    el.semi_major_axis_km = a_km;
    el.eccentricity = 0.0;
    el.inclination_rad = 0.9;
    el.raan_rad = 1.3;
    el.arg_perigee_rad = 0.4;
    el.mean_anomaly_at_epoch_rad = 0.7;
    el.epoch = utc_from_civil(2025, 4, 24);
    return el;
}

}  // namespace

TEST(Tle, ParsesStarlink1008) {
    const auto recs = parse_tle(kStarlink1008);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].name, "STARLINK-1008");
    EXPECT_EQ(recs[0].catalog_number, 44714);
    EXPECT_DOUBLE_EQ(recs[0].inclination_deg, 53.0538);
    EXPECT_DOUBLE_EQ(recs[0].raan_deg, 188.1053);
    EXPECT_DOUBLE_EQ(recs[0].mean_motion_rev_per_day, 15.06401971);
    EXPECT_DOUBLE_EQ(recs[0].eccentricity, 0.0001311);
    EXPECT_EQ(recs[0].epoch_year, 2025);
}

TEST(Tle, AlteredFinalDigitIsChecksumError) {
    std::string text = kStarlink1008;
    const auto pos = text.find("9991\n");
    text[pos + 3] = '2';
    try {
        parse_tle(text);
        FAIL() << "expected ChecksumError";
    } catch (const ChecksumError& e) {
        EXPECT_EQ(e.line_no(), 2);
    }
}

TEST(Tle, EmptyInputGivesNoRecords) {
    EXPECT_TRUE(parse_tle("").empty());
    EXPECT_TRUE(parse_tle("\n\n").empty());
}

TEST(Tle, TruncatedLineIsMalformed) {
    std::string text = kStarlink1008;
    text.erase(text.find("9991\n"), 4);
    EXPECT_THROW(parse_tle(text), MalformedLine);
    EXPECT_THROW(parse_tle("STARLINK-1008\n"), MalformedLine);
}

TEST(Tle, Checksum) {
    EXPECT_EQ(checksum("1 44714U 19074B   25112.58592294  .00005641  00000+0  39726-3 0  999"), 1);
    EXPECT_EQ(checksum(std::string(68, '0')), 0);
    EXPECT_EQ(checksum(std::string(10, '1') + std::string(58, ' ')), 0);
    EXPECT_EQ(checksum("-" + std::string(67, ' ')), 1);
}

TEST(Tle, RoundTripsEveryFixtureRecord) {
    const auto text = read_file(std::string(SATQFL_DATA_DIR) + "/starlink_50.tle");
    const auto recs = parse_tle(text);
    ASSERT_EQ(recs.size(), 50u);
    std::string rebuilt;
    for (const auto& r : recs) {
        rebuilt += format_tle(r);
    }
    EXPECT_EQ(rebuilt, text);
    EXPECT_EQ(parse_tle(rebuilt), recs);
}

TEST(Elements, SemiMajorAxisFromMeanMotion) {
    const auto el = elements_from_tle(parse_tle(kStarlink1008)[0]);
    const double n = 15.06401971 * 2.0 * kPi / 86400.0;
    EXPECT_NEAR(el.semi_major_axis_km, std::cbrt(kMuKm3PerS2 / (n * n)), 1e-9);
    EXPECT_NEAR(el.semi_major_axis_km, 6.93e3, 10.0);
    EXPECT_GT(el.semi_major_axis_km, kEarthRadiusKm);
    EXPECT_NEAR(el.inclination_rad, 53.0538 * kPi / 180.0, 1e-15);
}

TEST(Elements, GeostationaryPeriod) {
    auto rec = parse_tle(kStarlink1008)[0];
    rec.eccentricity = 0.0;
    rec.mean_motion_rev_per_day = 86400.0 / 86164.0;
    const auto el = elements_from_tle(rec);
    EXPECT_NEAR(el.semi_major_axis_km, 42164.0, 1.0);
    EXPECT_EQ(el.eccentricity, 0.0);
    EXPECT_NEAR(el.period_s(), 86164.0, 1e-6);
}

TEST(Kepler, MatchesBisectionOracle) {
    EXPECT_NEAR(solve_kepler(1.0, 0.1), kepler_by_bisection(1.0, 0.1), 1e-12);
    EXPECT_NEAR(solve_kepler(1.0, 0.1), 1.08860, 1e-5);
}

TEST(Kepler, ResidualBelowTolerance) {
    Rng rng(17);
    for (int i = 0; i < 2000; ++i) {
        const double m = rng.uniform() * 2.0 * kPi;
        const double e = rng.uniform() * 0.9;
        const double big_e = solve_kepler(m, e);
        EXPECT_LT(std::abs(big_e - e * std::sin(big_e) - m), 1e-12) << "M=" << m << " e=" << e;
    }
}

TEST(Kepler, CircularOrbitIsIdentity) {
    EXPECT_DOUBLE_EQ(solve_kepler(0.7, 0.0), 0.7);
}

TEST(Propagate, CircularRadiusAtEpoch) {
    const auto el = circular(6928.0);
    const auto s = propagate(el, el.epoch);
    EXPECT_NEAR(s.position_km.norm(), 6928.0, 1e-9);
}

TEST(Propagate, HalfPeriodIsAntipodalInPlane) {
    const auto el = circular(6928.0);
    const auto a = propagate(el, el.epoch);
    const auto b = propagate(el, el.epoch + el.period_s() / 2.0);
    EXPECT_NEAR(a.position_km.normalized().dot(b.position_km.normalized()), -1.0, 1e-9);
}

TEST(Propagate, EnergyConservedOverSixHours) {
    const auto el = elements_from_tle(parse_tle(kStarlink1008)[0]);
    const auto t0 = utc_from_civil(2025, 4, 24, 10, 6, 29.0);
    const double e0 = specific_energy(propagate(el, t0));
    EXPECT_NEAR(e0, -kMuKm3PerS2 / (2.0 * el.semi_major_axis_km), 1e-9 * std::abs(e0));
    for (int k = 0; k <= 720; ++k) {
        const double e = specific_energy(propagate(el, t0 + 30.0 * k));
        EXPECT_LT(std::abs((e - e0) / e0), 1e-9);
    }
}

TEST(Propagate, StaysAboveEarth) {
    const auto recs = parse_tle(read_file(std::string(SATQFL_DATA_DIR) + "/starlink_50.tle"));
    const auto t0 = utc_from_civil(2025, 4, 24, 10, 6, 29.0);
    for (const auto& r : recs) {
        const auto el = elements_from_tle(r);
        for (int k = 0; k < 24; ++k) {
            EXPECT_GT(propagate(el, t0 + 900.0 * k).position_km.norm(), kEarthRadiusKm);
        }
    }
}

TEST(Station, EquatorPrimeMeridianAtZeroSiderealAngle) {
    const GroundStation gs{"origin", 0.0, 0.0, 0.0};
    const auto p = station_position(gs, 0.0);
    EXPECT_NEAR(p.x(), 6378.137, 1e-9);
    EXPECT_NEAR(p.y(), 0.0, 1e-9);
    EXPECT_NEAR(p.z(), 0.0, 1e-9);
}

TEST(Station, PoleIsInvariantUnderRotation) {
    const GroundStation gs{"pole", 90.0, 45.0, 0.0};
    const auto t0 = utc_from_civil(2025, 4, 24);
    const auto a = station_eci(gs, t0).position_km;
    const auto b = station_eci(gs, t0 + 12345.0).position_km;
    EXPECT_NEAR(a.x(), 0.0, 1e-9);
    EXPECT_NEAR(a.y(), 0.0, 1e-9);
    EXPECT_NEAR(a.z(), kEarthRadiusKm, 1e-9);
    EXPECT_NEAR((a - b).norm(), 0.0, 1e-9);
}

TEST(Station, PeriodicOverOneSiderealDay) {
    const GroundStation gs{"Tokyo", 35.6762, 139.6503, 0.04};
    const auto t0 = utc_from_civil(2025, 4, 24, 10, 6, 29.0);
    const double sidereal_day = 2.0 * kPi / kEarthRotationRadPerS;
    const auto a = station_eci(gs, t0).position_km;
    const auto b = station_eci(gs, t0 + sidereal_day).position_km;
    EXPECT_LT((a - b).norm(), 1e-6);
}

TEST(Station, RejectsOutOfRangeCoordinates) {
    EXPECT_THROW(validate(GroundStation{"bad", 91.0, 0.0, 0.0}), std::invalid_argument);
    EXPECT_THROW(validate(GroundStation{"bad", 0.0, 181.0, 0.0}), std::invalid_argument);
    EXPECT_NO_THROW(validate(GroundStation{"ok", -90.0, 180.0, 0.0}));
}

TEST(Gmst, WrapsIntoOneTurn) {
    const double g = gmst(utc_from_civil(2025, 4, 24, 10, 6, 29.0));
    EXPECT_GE(g, 0.0);
    EXPECT_LT(g, 2.0 * kPi);
    EXPECT_NEAR(gmst(UtcTime{kJ2000UnixSeconds}), kGmstAtJ2000Rad, 1e-12);
}
