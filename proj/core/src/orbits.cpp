#include "satqfl/orbits.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace satqfl::orbits {

namespace {

constexpr double kDegToRad = M_PI / 180.0;
constexpr double kTwoPi = 2.0 * M_PI;
constexpr std::size_t kLineLength = 69;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

double parse_double(std::string_view field, int line_no, const char* what) {
    field = trim(field);
    if (!field.empty() && field.front() == '+') {
        field.remove_prefix(1);
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
        throw MalformedLine(line_no, std::string("bad ") + what + " field '" + std::string(field) + "'");
    }
    return value;
}

int parse_int(std::string_view field, int line_no, const char* what) {
    field = trim(field);
    int value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
        throw MalformedLine(line_no, std::string("bad ") + what + " field '" + std::string(field) + "'");
    }
    return value;
}

void check_line(std::string_view line, char tag, int line_no) {
    if (line.size() != kLineLength) {
        throw MalformedLine(line_no, "expected " + std::to_string(kLineLength) + " characters, got " +
                                         std::to_string(line.size()));
    }
    if (line[0] != tag || line[1] != ' ') {
        throw MalformedLine(line_no, std::string("line must start with '") + tag + " '");
    }
    const char last = line[68];
    if (last < '0' || last > '9') {
        throw MalformedLine(line_no, "checksum column is not a digit");
    }
    if (checksum(line) != last - '0') {
        throw ChecksumError(line_no);
    }
}

std::string with_checksum(std::string body) {
    body.push_back(static_cast<char>('0' + checksum(body)));
    return body;
}

double wrap_two_pi(double angle) {
    angle = std::fmod(angle, kTwoPi);
    return angle < 0.0 ? angle + kTwoPi : angle;
}

}  // namespace

ChecksumError::ChecksumError(int line_no)
    : OrbitError("TLE checksum mismatch on line " + std::to_string(line_no)), line_no_(line_no) {}

MalformedLine::MalformedLine(int line_no, std::string reason)
    : OrbitError("malformed TLE line " + std::to_string(line_no) + ": " + reason),
      line_no_(line_no),
      reason_(std::move(reason)) {}

UtcTime TleRecord::epoch() const {
    return utc_from_civil(epoch_year, 1, 1) + (epoch_day - 1.0) * 86400.0;
}

double OrbitalElements::mean_motion_rad_per_s() const {
    return std::sqrt(kMuKm3PerS2 / (semi_major_axis_km * semi_major_axis_km * semi_major_axis_km));
}

double OrbitalElements::period_s() const { return kTwoPi / mean_motion_rad_per_s(); }

int checksum(std::string_view line) {
    int sum = 0;
    const std::size_t n = std::min<std::size_t>(line.size(), 68);
    for (std::size_t i = 0; i < n; ++i) {
        const char c = line[i];
        if (c >= '0' && c <= '9') {
            sum += c - '0';
        } else if (c == '-') {
            sum += 1;
        }
    }
    return sum % 10;
}

std::vector<TleRecord> parse_tle(std::string_view text) {
    struct NumberedLine {
        std::string_view text;
        int line_no;
    };
    std::vector<NumberedLine> lines;
    int line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view raw = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        while (!raw.empty() && (raw.back() == '\r' || raw.back() == ' ')) {
            raw.remove_suffix(1);
        }
        if (!trim(raw).empty()) {
            lines.push_back({raw, line_no});
        }
    }
    if (lines.size() % 3 != 0) {
        throw MalformedLine(lines.back().line_no, "input is not a sequence of name/line1/line2 triples");
    }

    std::vector<TleRecord> records;
    records.reserve(lines.size() / 3);
    for (std::size_t i = 0; i < lines.size(); i += 3) {
        const auto& name = lines[i];
        const auto& l1 = lines[i + 1];
        const auto& l2 = lines[i + 2];
        check_line(l1.text, '1', l1.line_no);
        check_line(l2.text, '2', l2.line_no);

        TleRecord rec;
        std::string_view nm = trim(name.text);
        if (nm.size() > 2 && nm[0] == '0' && nm[1] == ' ') {
            nm.remove_prefix(2);
        }
        rec.name = std::string(nm);

        const std::string_view a = l1.text;
        const std::string_view b = l2.text;
        rec.catalog_number = parse_int(a.substr(2, 5), l1.line_no, "catalog number");
        if (parse_int(b.substr(2, 5), l2.line_no, "catalog number") != rec.catalog_number) {
            throw MalformedLine(l2.line_no, "catalog number differs from line 1");
        }
        rec.classification = a[7];
        rec.international_designator = std::string(a.substr(9, 8));
        const int yy = parse_int(a.substr(18, 2), l1.line_no, "epoch year");
        rec.epoch_year = yy < 57 ? 2000 + yy : 1900 + yy;
        rec.epoch_day = parse_double(a.substr(20, 12), l1.line_no, "epoch day");
        rec.mean_motion_dot = std::string(a.substr(33, 10));
        rec.mean_motion_ddot = std::string(a.substr(44, 8));
        rec.bstar = std::string(a.substr(53, 8));
        rec.ephemeris_type = a[62];
        rec.element_set_number = std::string(a.substr(64, 4));
        rec.line1_checksum = a[68] - '0';

        rec.inclination_deg = parse_double(b.substr(8, 8), l2.line_no, "inclination");
        rec.raan_deg = parse_double(b.substr(17, 8), l2.line_no, "RAAN");
        const std::string_view ecc = trim(b.substr(26, 7));
        if (ecc.size() != 7 || ecc.find_first_not_of("0123456789") != std::string_view::npos) {
            throw MalformedLine(l2.line_no, "eccentricity must be 7 digits with implied decimal point");
        }
        rec.eccentricity = parse_int(ecc, l2.line_no, "eccentricity") * 1e-7;
        rec.arg_perigee_deg = parse_double(b.substr(34, 8), l2.line_no, "argument of perigee");
        rec.mean_anomaly_deg = parse_double(b.substr(43, 8), l2.line_no, "mean anomaly");
        rec.mean_motion_rev_per_day = parse_double(b.substr(52, 11), l2.line_no, "mean motion");
        rec.revolution_number = std::string(b.substr(63, 5));
        rec.line2_checksum = b[68] - '0';

        if (!(rec.eccentricity >= 0.0 && rec.eccentricity < 1.0)) {
            throw MalformedLine(l2.line_no, "eccentricity outside [0, 1)");
        }
        if (!(rec.mean_motion_rev_per_day > 0.0 && rec.mean_motion_rev_per_day < 20.0)) {
            throw MalformedLine(l2.line_no, "mean motion outside (0, 20) rev/day");
        }
        if (!(rec.inclination_deg >= 0.0 && rec.inclination_deg <= 180.0)) {
            throw MalformedLine(l2.line_no, "inclination outside [0, 180] degrees");
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::string format_tle(const TleRecord& rec) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "1 %05d%c %-8.8s %02d%012.8f %10.10s %8.8s %8.8s %c %4.4s",
                  rec.catalog_number, rec.classification, rec.international_designator.c_str(),
                  rec.epoch_year % 100, rec.epoch_day, rec.mean_motion_dot.c_str(),
                  rec.mean_motion_ddot.c_str(), rec.bstar.c_str(), rec.ephemeris_type,
                  rec.element_set_number.c_str());
    const std::string line1 = with_checksum(buf);
    std::snprintf(buf, sizeof buf, "2 %05d %8.4f %8.4f %07ld %8.4f %8.4f %11.8f%5.5s", rec.catalog_number,
                  rec.inclination_deg, rec.raan_deg, std::lround(rec.eccentricity * 1e7),
                  rec.arg_perigee_deg, rec.mean_anomaly_deg, rec.mean_motion_rev_per_day,
                  rec.revolution_number.c_str());
    const std::string line2 = with_checksum(buf);
    return rec.name + "\n" + line1 + "\n" + line2 + "\n";
}

OrbitalElements elements_from_tle(const TleRecord& rec) {
    const double period = 86400.0 / rec.mean_motion_rev_per_day;
    const double ratio = period / kTwoPi;
    OrbitalElements el;
    el.semi_major_axis_km = std::cbrt(kMuKm3PerS2 * ratio * ratio);
    el.eccentricity = rec.eccentricity;
    el.inclination_rad = rec.inclination_deg * kDegToRad;
    el.raan_rad = rec.raan_deg * kDegToRad;
    el.arg_perigee_rad = rec.arg_perigee_deg * kDegToRad;
    el.mean_anomaly_at_epoch_rad = rec.mean_anomaly_deg * kDegToRad;
    el.epoch = rec.epoch();
    return el;
}

double solve_kepler(double mean_anomaly_rad, double eccentricity) {
    double e_anom = eccentricity < 0.8 ? mean_anomaly_rad : M_PI;
    for (int i = 0; i < kKeplerMaxIterations; ++i) {
        const double f = e_anom - eccentricity * std::sin(e_anom) - mean_anomaly_rad;
        const double step = f / (1.0 - eccentricity * std::cos(e_anom));
        e_anom -= step;
        if (std::abs(step) < kKeplerTolerance) {
            return e_anom;
        }
    }
    throw NonConvergence("Kepler solver did not converge for e=" + std::to_string(eccentricity));
}

EciState propagate(const OrbitalElements& el, UtcTime t) {
    const double n = el.mean_motion_rad_per_s();
    double m = wrap_two_pi(el.mean_anomaly_at_epoch_rad + n * (t - el.epoch));
    if (m > M_PI) {
        m -= kTwoPi;
    }
    const double e = el.eccentricity;
    const double a = el.semi_major_axis_km;
    const double big_e = solve_kepler(m, e);
    const double cos_e = std::cos(big_e);
    const double sin_e = std::sin(big_e);
    const double root = std::sqrt(1.0 - e * e);
    const double r = a * (1.0 - e * cos_e);

    const Vec3 pos_pf{a * (cos_e - e), a * root * sin_e, 0.0};
    const double vscale = std::sqrt(kMuKm3PerS2 * a) / r;
    const Vec3 vel_pf{-vscale * sin_e, vscale * root * cos_e, 0.0};

    // Perifocal -> ECI: Rz(raan) * Rx(inc) * Rz(argp).
    const Eigen::Matrix3d rot =
        (Eigen::AngleAxisd(el.raan_rad, Vec3::UnitZ()) * Eigen::AngleAxisd(el.inclination_rad, Vec3::UnitX()) *
         Eigen::AngleAxisd(el.arg_perigee_rad, Vec3::UnitZ()))
            .toRotationMatrix();
    return {rot * pos_pf, rot * vel_pf, t};
}

double gmst(UtcTime t) {
    return wrap_two_pi(kGmstAtJ2000Rad + kEarthRotationRadPerS * (t.unix_seconds - kJ2000UnixSeconds));
}

Vec3 station_position(const GroundStation& gs, double gmst_rad) {
    const double r = kEarthRadiusKm + gs.altitude_km;
    const double lat = gs.latitude_deg * kDegToRad;
    const double angle = gs.longitude_deg * kDegToRad + gmst_rad;
    return {r * std::cos(lat) * std::cos(angle), r * std::cos(lat) * std::sin(angle), r * std::sin(lat)};
}

EciState station_eci(const GroundStation& gs, UtcTime t) {
    const Vec3 pos = station_position(gs, gmst(t));
    const Vec3 vel = Vec3{0.0, 0.0, kEarthRotationRadPerS}.cross(pos);
    return {pos, vel, t};
}

double specific_energy(const EciState& state) {
    return 0.5 * state.velocity_km_s.squaredNorm() - kMuKm3PerS2 / state.position_km.norm();
}

void validate(const GroundStation& gs) {
    if (!(std::abs(gs.latitude_deg) <= 90.0)) {
        throw std::invalid_argument("ground station '" + gs.name + "': |latitude| must be <= 90");
    }
    if (!(std::abs(gs.longitude_deg) <= 180.0)) {
        throw std::invalid_argument("ground station '" + gs.name + "': |longitude| must be <= 180");
    }
}

}  // namespace satqfl::orbits
