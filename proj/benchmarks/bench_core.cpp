#include <benchmark/benchmark.h>

#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "satqfl/access.hpp"
#include "satqfl/harness.hpp"
#include "satqfl/orbits.hpp"
#include "satqfl/qfl.hpp"
#include "satqfl/quantumsim.hpp"
#include "satqfl/security.hpp"

using namespace satqfl;

namespace {

std::vector<orbits::TleRecord> fixture() {
    std::ifstream in(std::string(SATQFL_DATA_DIR) + "/starlink_50.tle");
    std::stringstream ss;
    ss << in.rdbuf();
    return orbits::parse_tle(ss.str());
}

const UtcTime kEpoch = utc_from_civil(2025, 4, 24, 10, 6, 29.0);

void BM_Propagate(benchmark::State& state) {
    const auto el = orbits::elements_from_tle(fixture().front());
    double t = 0.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(orbits::propagate(el, kEpoch + t));
        t += 30.0;
    }
}
BENCHMARK(BM_Propagate);

void BM_Snapshot(benchmark::State& state) {
    const auto records = fixture();
    const auto stations =
        harness::load_ground_stations(std::string(SATQFL_DATA_DIR) + "/ground_stations.json");
    std::map<access::SatId, orbits::EciState> sats;
    const auto n = static_cast<std::size_t>(state.range(0));
    for (std::size_t i = 0; i < n && i < records.size(); ++i) {
        sats[static_cast<access::SatId>(i + 1)] = orbits::propagate(orbits::elements_from_tle(records[i]), kEpoch);
    }
    std::map<access::StationId, orbits::EciState> gs;
    for (std::size_t i = 0; i < stations.size(); ++i) {
        gs[static_cast<access::StationId>(i + 1)] = orbits::station_eci(stations[i], kEpoch);
    }
    const access::RoutingConfig cfg;
    for (auto _ : state) {
        const auto snap = access::snapshot(sats, gs, cfg);
        benchmark::DoNotOptimize(access::partition(snap, cfg));
    }
}
BENCHMARK(BM_Snapshot)->Arg(8)->Arg(50);

void BM_GateApply(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    quantum::Statevector sv(n);
    const auto u = quantum::Gate::u(n / 2, 0.3, 0.2, 0.1);
    for (auto _ : state) {
        sv.apply(u);
        benchmark::ClobberMemory();
    }
}
BENCHMARK(BM_GateApply)->Arg(4)->Arg(8)->Arg(12);

void BM_Gradient(benchmark::State& state) {
    qfl::ModelShape shape;
    shape.layers = static_cast<int>(state.range(0));
    Rng rng(1);
    const auto angles = qfl::random_angles(shape, rng);
    std::vector<qfl::Example> batch(16);
    for (auto& ex : batch) {
        for (int q = 0; q < shape.qubits; ++q) {
            ex.features.push_back(rng.uniform() * std::numbers::pi);
        }
        ex.label = static_cast<int>(rng.below(2));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(qfl::gradient(shape, angles, batch));
    }
}
BENCHMARK(BM_Gradient)->Arg(1)->Arg(2);

void BM_Bb84(benchmark::State& state) {
    Rng rng(2);
    const int n = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(security::run_bb84(n, {}, 0.25, 0.10, rng));
    }
}
BENCHMARK(BM_Bb84)->Arg(256)->Arg(4096);

}  // namespace

BENCHMARK_MAIN();
