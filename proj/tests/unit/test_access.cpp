#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

#include "satqfl/access.hpp"

using namespace satqfl;
using namespace satqfl::access;
using orbits::EciState;

namespace {

EciState at(const Vec3& p) {
    EciState s;
    s.position_km = p;
    return s;
}

// Builds a snapshot from explicit edge lists; ISL pairs are normalized to (lo, hi).
AccessSnapshot make_snapshot(std::vector<SatId> sats, std::vector<std::pair<SatId, StationId>> ground,
                             std::vector<std::pair<SatId, SatId>> isl, UtcTime t = {}) {
    AccessSnapshot s;
    s.time = t;
    s.satellites = std::move(sats);
    for (const auto& g : ground) {
        s.sat_ground_edges.insert(g);
    }
    for (auto [a, b] : isl) {
        s.isl_edges.insert({std::min(a, b), std::max(a, b)});
    }
    return s;
}

RoutingConfig routing(int h_max = 4) {
    RoutingConfig cfg;
    cfg.h_max = h_max;
    cfg.l_max_s = 1.0;
    return cfg;
}

}  // namespace

TEST(LineOfSight, ZenithPassIsVisible) {
    const orbits::GroundStation gs{"eq", 10.0, 20.0, 0.0};
    const auto station = orbits::station_eci(gs, UtcTime{1.0e9});
    const auto sat = at(station.position_km.normalized() * (orbits::kEarthRadiusKm + 550.0));
    EXPECT_NEAR(elevation_deg(sat, station), 90.0, 1e-9);
    EXPECT_TRUE(los_sat_ground(sat, station, 10.0));
}

TEST(LineOfSight, AntipodeIsHidden) {
    const orbits::GroundStation gs{"eq", 10.0, 20.0, 0.0};
    const auto station = orbits::station_eci(gs, UtcTime{1.0e9});
    const auto sat = at(-station.position_km.normalized() * (orbits::kEarthRadiusKm + 550.0));
    EXPECT_FALSE(los_sat_ground(sat, station, 0.0));
}

TEST(LineOfSight, ElevationMaskIsInclusive) {
    const auto station = at(Vec3(orbits::kEarthRadiusKm, 0.0, 0.0));
    const auto sat = at(Vec3(orbits::kEarthRadiusKm + 300.0, 900.0, 0.0));
    const double el = elevation_deg(sat, station);
    EXPECT_TRUE(los_sat_ground(sat, station, el));
    EXPECT_FALSE(los_sat_ground(sat, station, std::nextafter(el, 90.0)));
}

TEST(LineOfSight, AntipodalSatellitesAreBlocked) {
    const double r = orbits::kEarthRadiusKm + 550.0;
    EXPECT_FALSE(los_sat_sat(at(Vec3(r, 0, 0)), at(Vec3(-r, 0, 0)), orbits::kEarthRadiusKm + 80.0));
}

TEST(LineOfSight, NearbyNeighboursSeeEachOther) {
    const double r = orbits::kEarthRadiusKm + 550.0;
    const double ang = 100.0 / r;
    EXPECT_TRUE(los_sat_sat(at(Vec3(r, 0, 0)), at(Vec3(r * std::cos(ang), r * std::sin(ang), 0)),
                            orbits::kEarthRadiusKm + 80.0));
}

TEST(LineOfSight, ChordClosestApproachBelowBlockingRadius) {
    // closest approach 7000/sqrt(2) = 4949.7 km < 6478 km
    EXPECT_FALSE(los_sat_sat(at(Vec3(7000, 0, 0)), at(Vec3(0, 7000, 0)), 6478.0));
    // closest approach 7000 cos(15 deg) = 6761.5 km > 6478 km
    const double c = std::cos(0.5235987755982988);
    const double s = std::sin(0.5235987755982988);
    EXPECT_TRUE(los_sat_sat(at(Vec3(7000, 0, 0)), at(Vec3(7000 * c, 7000 * s, 0)), 6478.0));
}

TEST(Snapshot, OneSatelliteOverOneStation) {
    const auto station = at(Vec3(orbits::kEarthRadiusKm, 0, 0));
    const auto sat = at(Vec3(orbits::kEarthRadiusKm + 550.0, 0, 0));
    const auto snap = snapshot({{1, sat}}, {{0, station}}, routing());
    EXPECT_EQ(snap.sat_ground_edges.size(), 1u);
    EXPECT_TRUE(snap.isl_edges.empty());
}

TEST(Snapshot, TwoVisibleSatellitesNoStations) {
    const double r = orbits::kEarthRadiusKm + 550.0;
    const auto snap = snapshot({{2, at(Vec3(r, 0, 0))}, {1, at(Vec3(r, 100, 0))}}, {}, routing());
    EXPECT_TRUE(snap.sat_ground_edges.empty());
    ASSERT_EQ(snap.isl_edges.size(), 1u);
    EXPECT_EQ(*snap.isl_edges.begin(), std::make_pair(1, 2));
    EXPECT_EQ(snap.satellites, (std::vector<SatId>{1, 2}));
}

TEST(Partition, AllGroundVisibleMeansNoSecondaries) {
    const auto snap = make_snapshot({1, 2, 3}, {{1, 0}, {2, 1}, {3, 0}}, {{1, 2}});
    const auto p = partition(snap, routing());
    EXPECT_EQ(p.primaries.size(), 3u);
    EXPECT_TRUE(p.secondaries.empty());
    EXPECT_EQ(p.primary_station.at(2), 1);
}

TEST(Partition, HopBoundLimitsAssignment) {
    // 3 - 2 - 1(primary)
    const auto snap = make_snapshot({1, 2, 3}, {{1, 0}}, {{1, 2}, {2, 3}});
    const auto two = partition(snap, routing(2));
    EXPECT_EQ(two.assignment.at(3), 1);
    EXPECT_EQ(two.hops.at(3), 2);
    const auto one = partition(snap, routing(1));
    EXPECT_FALSE(one.assignment.contains(3));
    EXPECT_TRUE(one.secondaries.contains(3));
}

TEST(Partition, TieGoesToLowestCatalogPrimary) {
    const auto snap = make_snapshot({3, 5, 7}, {{7, 0}, {3, 1}}, {{5, 7}, {5, 3}});
    EXPECT_EQ(partition(snap, routing()).assignment.at(5), 3);
}

TEST(Partition, NearestPrimaryWinsOverLowerId) {
    // 10 - 11 - 12 - 20 with primaries 10 and 20: 12 is one hop from 20
    const auto snap = make_snapshot({10, 11, 12, 20}, {{10, 0}, {20, 0}}, {{10, 11}, {11, 12}, {12, 20}});
    const auto p = partition(snap, routing());
    EXPECT_EQ(p.assignment.at(12), 20);
    EXPECT_EQ(p.assignment.at(11), 10);
}

TEST(Partition, IsADisjointCover) {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<SatId> sats;
        for (int i = 0; i < 20; ++i) {
            sats.push_back(100 + i);
        }
        std::vector<std::pair<SatId, StationId>> ground;
        std::vector<std::pair<SatId, SatId>> isl;
        for (const auto s : sats) {
            if (rng.uniform() < 0.2) {
                ground.push_back({s, static_cast<StationId>(rng.below(3))});
            }
            for (const auto t : sats) {
                if (s < t && rng.uniform() < 0.1) {
                    isl.push_back({s, t});
                }
            }
        }
        const auto snap = make_snapshot(sats, ground, isl);
        const auto p = partition(snap, routing(3));
        for (const auto s : sats) {
            EXPECT_NE(p.primaries.contains(s), p.secondaries.contains(s));
        }
        for (const auto& [sec, prim] : p.assignment) {
            EXPECT_TRUE(p.secondaries.contains(sec));
            EXPECT_TRUE(p.primaries.contains(prim));
            const auto path = shortest_isl_path(snap, sec, prim);
            ASSERT_FALSE(path.empty());
            EXPECT_EQ(static_cast<int>(path.size()) - 1, p.hops.at(sec));
            EXPECT_LE(p.hops.at(sec), 3);
        }
    }
}

TEST(Participation, IsolatedSatelliteExcluded) {
    const auto snap = make_snapshot({1, 2}, {{1, 0}}, {});
    const auto c = participating_set(snap, routing());
    EXPECT_TRUE(c.contains(1));
    EXPECT_FALSE(c.contains(2));
}

TEST(Participation, LatencyBudgetExcludesDeepSecondaries) {
    const auto snap = make_snapshot({1, 2, 3, 4}, {{1, 0}}, {{1, 2}, {2, 3}, {3, 4}});
    RoutingConfig cfg;
    cfg.h_max = 4;
    cfg.per_hop_latency_s = 0.020;
    cfg.l_max_s = 0.050;
    const auto c = participating_set(snap, cfg);
    EXPECT_EQ(c, (std::set<SatId>{1, 2, 3}));
}

TEST(Windows, MergesConsecutiveSamples) {
    const UtcTime t0{1000.0};
    std::vector<AccessSnapshot> snaps;
    for (int k = 0; k < 5; ++k) {
        snaps.push_back(make_snapshot({1, 2}, {}, k <= 2 ? std::vector<std::pair<SatId, SatId>>{{1, 2}}
                                                         : std::vector<std::pair<SatId, SatId>>{},
                                      t0 + 30.0 * k));
    }
    const auto w = contact_windows(snaps, 30.0);
    ASSERT_EQ(w.size(), 1u);
    EXPECT_EQ(w[0].t_start, t0);
    EXPECT_EQ(w[0].t_end, t0 + 90.0);
}

TEST(Windows, GapSplitsWindows) {
    const UtcTime t0{1000.0};
    std::vector<AccessSnapshot> snaps;
    for (int k = 0; k < 3; ++k) {
        snaps.push_back(make_snapshot({1, 2}, {{1, 4}},
                                      k != 1 ? std::vector<std::pair<SatId, SatId>>{{1, 2}}
                                             : std::vector<std::pair<SatId, SatId>>{},
                                      t0 + 30.0 * k));
    }
    const auto w = contact_windows(snaps, 30.0);
    int isl = 0;
    for (const auto& win : w) {
        EXPECT_LT(win.t_start, win.t_end);
        isl += win.b.kind == NodeId::Kind::Satellite;
    }
    EXPECT_EQ(isl, 2);
    EXPECT_EQ(w.size(), 3u);
}

TEST(Windows, EmptyInput) {
    EXPECT_TRUE(contact_windows({}, 30.0).empty());
}

TEST(Routing, ShortestPathPrefersLowerIds) {
    // 1 -> {2, 3} -> 4
    const auto snap = make_snapshot({1, 2, 3, 4}, {}, {{1, 3}, {3, 4}, {1, 2}, {2, 4}});
    EXPECT_EQ(shortest_isl_path(snap, 1, 4), (std::vector<SatId>{1, 2, 4}));
    EXPECT_EQ(shortest_isl_path(snap, 4, 1), (std::vector<SatId>{4, 2, 1}));
    EXPECT_EQ(shortest_isl_path(snap, 2, 2), (std::vector<SatId>{2}));
    const auto split = make_snapshot({1, 2}, {}, {});
    EXPECT_TRUE(shortest_isl_path(split, 1, 2).empty());
}

TEST(ContactPlanQueries, WindowLookupsUseHalfOpenIntervals) {
    const UtcTime t0{0.0};
    std::vector<AccessSnapshot> snaps;
    for (int k = 0; k < 4; ++k) {
        snaps.push_back(make_snapshot({1, 2}, {{1, 0}},
                                      k >= 2 ? std::vector<std::pair<SatId, SatId>>{{1, 2}}
                                             : std::vector<std::pair<SatId, SatId>>{},
                                      t0 + 30.0 * k));
    }
    const ContactPlan plan(snaps, 30.0, routing());
    EXPECT_EQ(plan.end(), t0 + 120.0);
    EXPECT_EQ(plan.sample_index(t0 + 59.0), 1u);
    EXPECT_FALSE(plan.sample_index(t0 + 120.0).has_value());

    const auto a = NodeId::satellite(1);
    const auto b = NodeId::satellite(2);
    EXPECT_FALSE(plan.window_containing(a, b, t0 + 59.9).has_value());
    const auto id = plan.window_containing(b, a, t0 + 60.0);
    ASSERT_TRUE(id.has_value());
    EXPECT_FALSE(plan.window_containing(a, b, t0 + 120.0).has_value());

    EXPECT_EQ(plan.next_window(a, b, t0, t0 + 100.0), id);
    EXPECT_FALSE(plan.next_window(a, b, t0, t0 + 60.0).has_value());
    EXPECT_TRUE(plan.route(1, 2, t0 + 10.0).empty());
    EXPECT_EQ(plan.route(1, 2, t0 + 70.0), (std::vector<SatId>{1, 2}));
    EXPECT_EQ(plan.partitions().size(), 4u);
}
