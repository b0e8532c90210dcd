#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "satqfl/common.hpp"

namespace satqfl::orbits {

inline constexpr double kEarthRadiusKm = 6378.137;
inline constexpr double kMuKm3PerS2 = 398600.4418;
inline constexpr double kEarthRotationRadPerS = 7.2921159e-5;
inline constexpr double kGmstAtJ2000Rad = 4.894961;
/// 2000-01-01T12:00:00 expressed as Unix seconds.
inline constexpr double kJ2000UnixSeconds = 946728000.0;
inline constexpr int kKeplerMaxIterations = 50;
inline constexpr double kKeplerTolerance = 1e-12;

class OrbitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ChecksumError : public OrbitError {
public:
    explicit ChecksumError(int line_no);
    int line_no() const noexcept { return line_no_; }

private:
    int line_no_;
};

class MalformedLine : public OrbitError {
public:
    MalformedLine(int line_no, std::string reason);
    int line_no() const noexcept { return line_no_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    int line_no_;
    std::string reason_;
};

class NonConvergence : public OrbitError {
public:
    using OrbitError::OrbitError;
};

/// One decoded two-line element set. The optional fields that the propagator ignores
/// (drag terms, designator, counters) are kept verbatim so that formatting a parsed
/// record reproduces the original lines byte for byte.
struct TleRecord {
    std::string name;
    int catalog_number = 0;
    char classification = 'U';
    std::string international_designator;  // line 1 columns 10-17
    int epoch_year = 2000;                  // four-digit year
    double epoch_day = 1.0;                 // fractional day of year, 1.0 = Jan 1 00:00
    std::string mean_motion_dot;            // line 1 columns 34-43
    std::string mean_motion_ddot;           // line 1 columns 45-52
    std::string bstar;                      // line 1 columns 54-61
    char ephemeris_type = '0';
    std::string element_set_number;         // line 1 columns 65-68
    double inclination_deg = 0.0;
    double raan_deg = 0.0;
    double eccentricity = 0.0;
    double arg_perigee_deg = 0.0;
    double mean_anomaly_deg = 0.0;
    double mean_motion_rev_per_day = 0.0;
    std::string revolution_number;          // line 2 columns 64-68
    int line1_checksum = 0;
    int line2_checksum = 0;

    UtcTime epoch() const;
    bool operator==(const TleRecord&) const = default;
};

struct OrbitalElements {
    double semi_major_axis_km = 0.0;
    double eccentricity = 0.0;
    double inclination_rad = 0.0;
    double raan_rad = 0.0;
    double arg_perigee_rad = 0.0;
    double mean_anomaly_at_epoch_rad = 0.0;
    UtcTime epoch;

    double mean_motion_rad_per_s() const;
    double period_s() const;
};

struct EciState {
    Vec3 position_km = Vec3::Zero();
    Vec3 velocity_km_s = Vec3::Zero();
    UtcTime time;
};

struct GroundStation {
    std::string name;
    double latitude_deg = 0.0;
    double longitude_deg = 0.0;
    double altitude_km = 0.0;
};

/// Mod-10 TLE checksum over the first 68 characters: digits count at face value,
/// '-' counts as 1, everything else as 0.
int checksum(std::string_view line);

/// Parses name/line1/line2 triples. Blank lines are skipped.
std::vector<TleRecord> parse_tle(std::string_view text);

/// Inverse of parse_tle for one record (three newline-terminated lines).
std::string format_tle(const TleRecord& rec);

OrbitalElements elements_from_tle(const TleRecord& rec);

/// Solves M = E - e sin E by Newton iteration; throws NonConvergence after
/// kKeplerMaxIterations steps.
double solve_kepler(double mean_anomaly_rad, double eccentricity);

/// Two-body Keplerian propagation to `t`.
EciState propagate(const OrbitalElements& el, UtcTime t);

/// Greenwich mean sidereal angle in [0, 2pi) under the linear rotation model.
double gmst(UtcTime t);

/// Station position for a given sidereal angle on a spherical Earth.
Vec3 station_position(const GroundStation& gs, double gmst_rad);

EciState station_eci(const GroundStation& gs, UtcTime t);

/// Specific orbital energy v^2/2 - mu/r in km^2/s^2.
double specific_energy(const EciState& state);

void validate(const GroundStation& gs);

}  // namespace satqfl::orbits
