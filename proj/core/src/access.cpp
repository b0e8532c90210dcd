#include "satqfl/access.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace satqfl::access {

namespace {

constexpr double kRadToDeg = 180.0 / M_PI;

std::map<SatId, std::vector<SatId>> adjacency(const AccessSnapshot& snap) {
    std::map<SatId, std::vector<SatId>> adj;
    for (const auto id : snap.satellites) {
        adj[id];
    }
    for (const auto& [a, b] : snap.isl_edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    for (auto& [id, nbrs] : adj) {
        std::sort(nbrs.begin(), nbrs.end());
    }
    return adj;
}

}  // namespace

std::string to_string(const NodeId& node) {
    return (node.kind == NodeId::Kind::Satellite ? "sat:" : "gs:") + std::to_string(node.id);
}

void RoutingConfig::validate() const {
    if (h_max < 1) {
        throw std::invalid_argument("routing.h_max must be >= 1");
    }
    if (!(l_max_s > 0.0)) {
        throw std::invalid_argument("routing.l_max_s must be > 0");
    }
    if (per_hop_latency_s < 0.0) {
        throw std::invalid_argument("routing.per_hop_latency_s must be >= 0");
    }
}

double elevation_deg(const orbits::EciState& sat, const orbits::EciState& gs) {
    const Vec3 zenith = gs.position_km.normalized();
    const Vec3 line = sat.position_km - gs.position_km;
    const double norm = line.norm();
    if (norm == 0.0) {
        return 90.0;
    }
    const double cos_zenith = std::clamp(zenith.dot(line) / norm, -1.0, 1.0);
    return 90.0 - std::acos(cos_zenith) * kRadToDeg;
}

bool los_sat_ground(const orbits::EciState& sat, const orbits::EciState& gs, double min_elevation_deg) {
    return elevation_deg(sat, gs) >= min_elevation_deg;
}

bool los_sat_sat(const orbits::EciState& p1, const orbits::EciState& p2, double blocking_radius_km) {
    const Vec3& a = p1.position_km;
    const Vec3 d = p2.position_km - a;
    const double len2 = d.squaredNorm();
    // Parameter of the origin's projection onto the infinite line through a and b.
    const double s = len2 > 0.0 ? -a.dot(d) / len2 : 0.0;
    if (s <= 0.0 || s >= 1.0) {
        // Closest point is an endpoint; both endpoints lie outside the sphere.
        return true;
    }
    return (a + s * d).norm() > blocking_radius_km;
}

AccessSnapshot snapshot(const std::map<SatId, orbits::EciState>& sat_states,
                        const std::map<StationId, orbits::EciState>& gs_states, const RoutingConfig& cfg) {
    AccessSnapshot snap;
    if (!sat_states.empty()) {
        snap.time = sat_states.begin()->second.time;
    } else if (!gs_states.empty()) {
        snap.time = gs_states.begin()->second.time;
    }
    const double blocking = cfg.blocking_radius_km();
    for (auto it = sat_states.begin(); it != sat_states.end(); ++it) {
        snap.satellites.push_back(it->first);
        for (const auto& [gid, gs] : gs_states) {
            if (los_sat_ground(it->second, gs, cfg.min_elevation_deg)) {
                snap.sat_ground_edges.emplace(it->first, gid);
            }
        }
        for (auto jt = std::next(it); jt != sat_states.end(); ++jt) {
            if (los_sat_sat(it->second, jt->second, blocking)) {
                snap.isl_edges.emplace(it->first, jt->first);
            }
        }
    }
    return snap;
}

Partition partition(const AccessSnapshot& snap, const RoutingConfig& cfg) {
    Partition part;
    for (const auto& [sat, gs] : snap.sat_ground_edges) {
        part.primaries.insert(sat);
        part.primary_station.try_emplace(sat, gs);  // set order gives the lowest station first
    }
    for (const auto id : snap.satellites) {
        if (!part.primaries.contains(id)) {
            part.secondaries.insert(id);
        }
    }

    // Level-synchronous multi-source BFS from all primaries. Every node of one
    // frontier sits at the same distance, so taking the minimum owner among
    // same-level discoverers yields the lowest-catalog primary on ties.
    const auto adj = adjacency(snap);
    std::map<SatId, SatId> owner;
    for (const auto p : part.primaries) {
        owner[p] = p;
    }
    std::vector<SatId> frontier(part.primaries.begin(), part.primaries.end());
    for (int depth = 1; depth <= cfg.h_max && !frontier.empty(); ++depth) {
        std::map<SatId, SatId> discovered;
        for (const auto u : frontier) {
            const auto found = adj.find(u);
            if (found == adj.end()) {
                continue;
            }
            for (const auto v : found->second) {
                if (owner.contains(v)) {
                    continue;
                }
                auto [slot, inserted] = discovered.try_emplace(v, owner[u]);
                if (!inserted) {
                    slot->second = std::min(slot->second, owner[u]);
                }
            }
        }
        frontier.clear();
        for (const auto& [v, o] : discovered) {
            owner[v] = o;
            part.assignment[v] = o;
            part.hops[v] = depth;
            frontier.push_back(v);
        }
    }
    return part;
}

std::set<SatId> participating_set(const Partition& part, const RoutingConfig& cfg) {
    std::set<SatId> out(part.primaries.begin(), part.primaries.end());
    for (const auto& [sec, hops] : part.hops) {
        if (hops * cfg.per_hop_latency_s <= cfg.l_max_s) {
            out.insert(sec);
        }
    }
    return out;
}

std::set<SatId> participating_set(const AccessSnapshot& snap, const RoutingConfig& cfg) {
    return participating_set(partition(snap, cfg), cfg);
}

std::vector<ContactWindow> contact_windows(std::span<const AccessSnapshot> snapshots, double sample_time_s) {
    if (!(sample_time_s > 0.0)) {
        throw std::invalid_argument("contact_windows: sample time must be positive");
    }
    // Per pair, the list of sample indices at which the edge exists.
    std::map<std::pair<NodeId, NodeId>, std::vector<std::size_t>> presence;
    for (std::size_t k = 0; k < snapshots.size(); ++k) {
        for (const auto& [sat, gs] : snapshots[k].sat_ground_edges) {
            presence[{NodeId::satellite(sat), NodeId::station(gs)}].push_back(k);
        }
        for (const auto& [a, b] : snapshots[k].isl_edges) {
            presence[{NodeId::satellite(a), NodeId::satellite(b)}].push_back(k);
        }
    }
    std::vector<ContactWindow> windows;
    for (const auto& [pair, samples] : presence) {
        std::size_t run_start = samples.front();
        for (std::size_t i = 1; i <= samples.size(); ++i) {
            if (i == samples.size() || samples[i] != samples[i - 1] + 1) {
                const std::size_t run_end = samples[i - 1];
                windows.push_back({pair.first, pair.second, snapshots[run_start].time,
                                   snapshots[run_end].time + sample_time_s});
                if (i < samples.size()) {
                    run_start = samples[i];
                }
            }
        }
    }
    return windows;
}

std::vector<SatId> shortest_isl_path(const AccessSnapshot& snap, SatId from, SatId to) {
    if (from == to) {
        return {from};
    }
    const auto adj = adjacency(snap);
    if (!adj.contains(from) || !adj.contains(to)) {
        return {};
    }
    std::map<SatId, SatId> parent{{from, from}};
    std::vector<SatId> frontier{from};
    while (!frontier.empty() && !parent.contains(to)) {
        std::vector<SatId> next;
        for (const auto u : frontier) {
            for (const auto v : adj.at(u)) {
                if (parent.try_emplace(v, u).second) {
                    next.push_back(v);
                }
            }
        }
        std::sort(next.begin(), next.end());
        frontier = std::move(next);
    }
    if (!parent.contains(to)) {
        return {};
    }
    std::vector<SatId> path{to};
    while (path.back() != from) {
        path.push_back(parent.at(path.back()));
    }
    std::reverse(path.begin(), path.end());
    return path;
}

ContactPlan::ContactPlan(std::vector<AccessSnapshot> snapshots, double sample_time_s, RoutingConfig cfg)
    : snapshots_(std::move(snapshots)), sample_time_s_(sample_time_s), cfg_(cfg) {
    cfg_.validate();
    for (std::size_t k = 1; k < snapshots_.size(); ++k) {
        const double gap = snapshots_[k].time - snapshots_[k - 1].time;
        if (std::abs(gap - sample_time_s_) > 1e-6) {
            throw std::invalid_argument("ContactPlan: snapshots must be equally spaced by the sample time");
        }
    }
    windows_ = contact_windows(snapshots_, sample_time_s_);
    for (std::size_t i = 0; i < windows_.size(); ++i) {
        by_pair_[{windows_[i].a, windows_[i].b}].push_back(i);
    }
    partitions_.reserve(snapshots_.size());
    for (const auto& snap : snapshots_) {
        partitions_.push_back(partition(snap, cfg_));
    }
}

UtcTime ContactPlan::start() const { return snapshots_.empty() ? UtcTime{} : snapshots_.front().time; }

UtcTime ContactPlan::end() const {
    return snapshots_.empty() ? UtcTime{} : snapshots_.back().time + sample_time_s_;
}

std::optional<std::size_t> ContactPlan::sample_index(UtcTime t) const {
    if (snapshots_.empty() || t < start() || !(t < end())) {
        return std::nullopt;
    }
    auto k = static_cast<std::size_t>(std::floor((t - start()) / sample_time_s_));
    k = std::min(k, snapshots_.size() - 1);
    // Guard against rounding at interval edges.
    while (k > 0 && t < snapshots_[k].time) {
        --k;
    }
    while (k + 1 < snapshots_.size() && !(t < snapshots_[k + 1].time)) {
        ++k;
    }
    return k;
}

std::pair<NodeId, NodeId> ContactPlan::key(NodeId a, NodeId b) {
    if (a.kind == NodeId::Kind::Station && b.kind == NodeId::Kind::Satellite) {
        return {b, a};
    }
    if (a.kind == b.kind && b < a) {
        return {b, a};
    }
    return {a, b};
}

std::optional<std::size_t> ContactPlan::window_containing(NodeId a, NodeId b, UtcTime t) const {
    const auto found = by_pair_.find(key(a, b));
    if (found == by_pair_.end()) {
        return std::nullopt;
    }
    for (const auto idx : found->second) {
        if (windows_[idx].contains(t)) {
            return idx;
        }
    }
    return std::nullopt;
}

std::optional<std::size_t> ContactPlan::next_window(NodeId a, NodeId b, UtcTime from, UtcTime deadline) const {
    const auto found = by_pair_.find(key(a, b));
    if (found == by_pair_.end()) {
        return std::nullopt;
    }
    for (const auto idx : found->second) {
        const auto& w = windows_[idx];
        if (from < w.t_end) {
            const UtcTime delivery = std::max(from, w.t_start);
            if (delivery < deadline) {
                return idx;
            }
            return std::nullopt;
        }
    }
    return std::nullopt;
}

std::vector<SatId> ContactPlan::route(SatId from, SatId to, UtcTime t) const {
    const auto k = sample_index(t);
    if (!k) {
        return {};
    }
    return shortest_isl_path(snapshots_[*k], from, to);
}

}  // namespace satqfl::access
