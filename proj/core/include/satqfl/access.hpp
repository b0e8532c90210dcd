#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "satqfl/orbits.hpp"

namespace satqfl::access {

/// Satellites are identified by catalog number, stations by their index in the
/// scenario's station list.
using SatId = int;
using StationId = int;

struct NodeId {
    enum class Kind { Satellite, Station };
    Kind kind = Kind::Satellite;
    int id = 0;

    static NodeId satellite(SatId id) { return {Kind::Satellite, id}; }
    static NodeId station(StationId id) { return {Kind::Station, id}; }

    auto operator<=>(const NodeId&) const = default;
    bool operator==(const NodeId&) const = default;
};

std::string to_string(const NodeId& node);

struct RoutingConfig {
    int h_max = 4;
    double l_max_s = 0.1;
    double min_elevation_deg = 0.0;
    double isl_altitude_margin_km = 80.0;
    double per_hop_latency_s = 0.02;

    double blocking_radius_km() const { return orbits::kEarthRadiusKm + isl_altitude_margin_km; }
    void validate() const;
};

struct AccessSnapshot {
    UtcTime time;
    std::vector<SatId> satellites;                      // sorted
    std::set<std::pair<SatId, StationId>> sat_ground_edges;
    std::set<std::pair<SatId, SatId>> isl_edges;        // (lo, hi), lo < hi
};

struct Partition {
    std::set<SatId> primaries;
    std::set<SatId> secondaries;
    std::map<SatId, SatId> assignment;     // secondary -> primary
    std::map<SatId, int> hops;             // secondary -> ISL hops to its primary
    std::map<SatId, StationId> primary_station;  // lowest-id visible station
};

struct ContactWindow {
    NodeId a;
    NodeId b;
    UtcTime t_start;
    UtcTime t_end;

    bool contains(UtcTime t) const { return t_start <= t && t < t_end; }
};

/// Elevation of the satellite above the station's local horizon, in degrees.
double elevation_deg(const orbits::EciState& sat, const orbits::EciState& gs);

/// Inclusive elevation mask.
bool los_sat_ground(const orbits::EciState& sat, const orbits::EciState& gs, double min_elevation_deg);

/// True iff the segment p1-p2 stays outside the sphere of `blocking_radius_km`.
bool los_sat_sat(const orbits::EciState& p1, const orbits::EciState& p2, double blocking_radius_km);

AccessSnapshot snapshot(const std::map<SatId, orbits::EciState>& sat_states,
                        const std::map<StationId, orbits::EciState>& gs_states, const RoutingConfig& cfg);

Partition partition(const AccessSnapshot& snap, const RoutingConfig& cfg);

std::set<SatId> participating_set(const AccessSnapshot& snap, const RoutingConfig& cfg);
std::set<SatId> participating_set(const Partition& part, const RoutingConfig& cfg);

/// Merges per-sample edges into maximal windows [first sample, last sample + dt).
/// Output is sorted by (a, b, t_start).
std::vector<ContactWindow> contact_windows(std::span<const AccessSnapshot> snapshots, double sample_time_s);

/// Shortest ISL path from `from` to `to` (both inclusive); ties resolved towards
/// lower satellite ids. Empty when unreachable.
std::vector<SatId> shortest_isl_path(const AccessSnapshot& snap, SatId from, SatId to);

/// Time-indexed view over a sampled access timeline: snapshots, merged contact
/// windows, per-sample partitions and routing queries. Topology at time t is the
/// snapshot of the sample interval [t_k, t_k + dt) containing t, matching the
/// window closure convention.
class ContactPlan {
public:
    ContactPlan(std::vector<AccessSnapshot> snapshots, double sample_time_s, RoutingConfig cfg);

    const std::vector<AccessSnapshot>& snapshots() const { return snapshots_; }
    const std::vector<ContactWindow>& windows() const { return windows_; }
    const std::vector<Partition>& partitions() const { return partitions_; }
    const RoutingConfig& routing() const { return cfg_; }
    double sample_time_s() const { return sample_time_s_; }
    UtcTime start() const;
    /// End of the last sample interval.
    UtcTime end() const;

    std::optional<std::size_t> sample_index(UtcTime t) const;

    /// Window id (index into windows()) of the window for {a, b} containing t.
    std::optional<std::size_t> window_containing(NodeId a, NodeId b, UtcTime t) const;

    /// First window for {a, b} that is open at or after `from` and opens before
    /// `deadline`. Delivery time is max(from, window.t_start).
    std::optional<std::size_t> next_window(NodeId a, NodeId b, UtcTime from, UtcTime deadline) const;

    std::vector<SatId> route(SatId from, SatId to, UtcTime t) const;

private:
    static std::pair<NodeId, NodeId> key(NodeId a, NodeId b);

    std::vector<AccessSnapshot> snapshots_;
    double sample_time_s_;
    RoutingConfig cfg_;
    std::vector<ContactWindow> windows_;
    std::vector<Partition> partitions_;
    std::map<std::pair<NodeId, NodeId>, std::vector<std::size_t>> by_pair_;
};

}  // namespace satqfl::access
