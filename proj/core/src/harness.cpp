#include "satqfl/harness.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace satqfl::harness {

namespace {

constexpr std::uint64_t kInitTag = 0x696e'6974ULL;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> known) {
    if (!obj.is_object()) {
        throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
    }
    for (const auto& [key, value] : obj.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
            throw ConfigError(join(path, key), "unknown field");
        }
    }
}

template <typename T>
void read(const json& obj, const std::string& path, const char* key, T& out) {
    const auto found = obj.find(key);
    if (found == obj.end()) {
        return;
    }
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!found->is_boolean()) {
                throw ConfigError(join(path, key), "expected a boolean");
            }
        } else if constexpr (std::is_integral_v<T>) {
            if (!found->is_number_integer()) {
                throw ConfigError(join(path, key), "expected an integer");
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!found->is_number()) {
                throw ConfigError(join(path, key), "expected a number");
            }
        } else {
            if (!found->is_string()) {
                throw ConfigError(join(path, key), "expected a string");
            }
        }
        out = found->get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(join(path, key), e.what());
    }
}

void require(bool ok, const std::string& field, const std::string& message) {
    if (!ok) {
        throw ConfigError(field, message);
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

std::vector<orbits::GroundStation> stations_from_json(const json& arr, const std::string& path) {
    if (!arr.is_array()) {
        throw ConfigError(path, "expected an array of stations");
    }
    std::vector<orbits::GroundStation> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto where = path + "[" + std::to_string(i) + "]";
        reject_unknown(arr[i], where, {"name", "latitude", "longitude", "altitude"});
        orbits::GroundStation gs;
        read(arr[i], where, "name", gs.name);
        read(arr[i], where, "latitude", gs.latitude_deg);
        read(arr[i], where, "longitude", gs.longitude_deg);
        read(arr[i], where, "altitude", gs.altitude_km);
        try {
            orbits::validate(gs);
        } catch (const std::exception& e) {
            throw ConfigError(where, e.what());
        }
        out.push_back(gs);
    }
    return out;
}

json read_json_file(const std::filesystem::path& path, const std::string& field) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(field, "cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(field, std::string("invalid JSON: ") + e.what());
    }
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    return out;
}

json node_json(const access::NodeId& n) { return access::to_string(n); }

}  // namespace

// --- configuration ---------------------------------------------------------

SecuritySetting parse_security(const std::string& text) {
    using scheduler::TransportKind;
    if (text == "plaintext") {
        return {TransportKind::Plaintext, 0};
    }
    if (text == "otp") {
        return {TransportKind::Otp, 0};
    }
    if (text == "aead") {
        return {TransportKind::Aead, 0};
    }
    const std::string prefix = "teleport_partial(";
    if (text.rfind(prefix, 0) == 0 && text.size() > prefix.size() + 1 && text.back() == ')') {
        const auto inner = text.substr(prefix.size(), text.size() - prefix.size() - 1);
        int i = 0;
        const auto [end, ec] = std::from_chars(inner.data(), inner.data() + inner.size(), i);
        if (ec == std::errc{} && end == inner.data() + inner.size() && i >= 0) {
            return {TransportKind::TeleportPartial, i};
        }
    }
    throw std::invalid_argument("security must be plaintext, otp, aead or teleport_partial(i), got '" + text + "'");
}

std::string to_string(const SecuritySetting& s) {
    if (s.kind == scheduler::TransportKind::TeleportPartial) {
        return "teleport_partial(" + std::to_string(s.teleport_count) + ")";
    }
    return scheduler::to_string(s.kind);
}

int ScenarioConfig::samples() const {
    return static_cast<int>(std::floor(duration_hours * 3600.0 / sample_time_s + 1e-9)) + 1;
}

std::vector<orbits::GroundStation> load_ground_stations(const std::filesystem::path& path) {
    return stations_from_json(read_json_file(path, "ground_stations"), "ground_stations");
}

ScenarioConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
    reject_unknown(doc, "",
                   {"tle_path", "n_satellites", "start_time", "duration_hours", "sample_time_s", "ground_stations",
                    "routing", "topology", "mode", "security", "transport", "timing", "staleness", "training",
                    "dataset", "seed"});
    ScenarioConfig cfg;

    std::string tle;
    read(doc, "", "tle_path", tle);
    if (!tle.empty()) {
        cfg.tle_path = resolve(base_dir, tle);
    } else {
        cfg.tle_path.clear();
    }
    read(doc, "", "n_satellites", cfg.n_satellites);
    require(cfg.n_satellites >= 1, "n_satellites", "must be >= 1");

    std::string start;
    read(doc, "", "start_time", start);
    if (!start.empty()) {
        try {
            cfg.start_time = parse_iso8601(start);
        } catch (const std::exception& e) {
            throw ConfigError("start_time", e.what());
        }
    }
    read(doc, "", "duration_hours", cfg.duration_hours);
    require(cfg.duration_hours > 0.0, "duration_hours", "must be > 0");
    read(doc, "", "sample_time_s", cfg.sample_time_s);
    require(cfg.sample_time_s > 0.0, "sample_time_s", "must be > 0");

    if (const auto gs = doc.find("ground_stations"); gs != doc.end()) {
        if (gs->is_string()) {
            const auto path = resolve(base_dir, gs->get<std::string>());
            cfg.ground_stations = stations_from_json(read_json_file(path, "ground_stations"), "ground_stations");
        } else {
            cfg.ground_stations = stations_from_json(*gs, "ground_stations");
        }
    }

    if (const auto r = doc.find("routing"); r != doc.end()) {
        reject_unknown(*r, "routing",
                       {"h_max", "l_max_s", "min_elevation_deg", "isl_altitude_margin_km", "per_hop_latency_s"});
        read(*r, "routing", "h_max", cfg.routing.h_max);
        read(*r, "routing", "l_max_s", cfg.routing.l_max_s);
        read(*r, "routing", "min_elevation_deg", cfg.routing.min_elevation_deg);
        read(*r, "routing", "isl_altitude_margin_km", cfg.routing.isl_altitude_margin_km);
        read(*r, "routing", "per_hop_latency_s", cfg.routing.per_hop_latency_s);
    }
    try {
        cfg.routing.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("routing", e.what());
    }

    if (const auto t = doc.find("topology"); t != doc.end()) {
        reject_unknown(*t, "topology", {"kind", "primaries"});
        read(*t, "topology", "kind", cfg.topology.kind);
        read(*t, "topology", "primaries", cfg.topology.full_mesh_primaries);
    }
    require(cfg.topology.kind == "tle" || cfg.topology.kind == "full_mesh", "topology.kind",
            "must be \"tle\" or \"full_mesh\"");
    if (cfg.topology.kind == "tle") {
        require(!cfg.tle_path.empty(), "tle_path", "required for the tle topology");
        require(!cfg.ground_stations.empty(), "ground_stations", "required for the tle topology");
    } else {
        require(cfg.topology.full_mesh_primaries >= 1 && cfg.topology.full_mesh_primaries <= cfg.n_satellites,
                "topology.primaries", "must lie in [1, n_satellites]");
    }

    std::string mode;
    read(doc, "", "mode", mode);
    if (!mode.empty()) {
        try {
            cfg.mode = scheduler::mode_from_string(mode);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("mode", e.what());
        }
    }
    std::string security;
    read(doc, "", "security", security);
    if (!security.empty()) {
        try {
            cfg.security = parse_security(security);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("security", e.what());
        }
    }

    if (const auto tr = doc.find("transport"); tr != doc.end()) {
        reject_unknown(*tr, "transport",
                       {"link_rate_bps", "qkd_seconds_per_qubit", "teleport_seconds", "sample_fraction",
                        "qber_threshold", "aead_qkd_qubits", "adversary"});
        read(*tr, "transport", "link_rate_bps", cfg.transport.link_rate_bps);
        read(*tr, "transport", "qkd_seconds_per_qubit", cfg.transport.qkd_seconds_per_qubit);
        read(*tr, "transport", "teleport_seconds", cfg.transport.teleport_seconds);
        read(*tr, "transport", "sample_fraction", cfg.transport.sample_fraction);
        read(*tr, "transport", "qber_threshold", cfg.transport.qber_threshold);
        read(*tr, "transport", "aead_qkd_qubits", cfg.transport.aead_qkd_qubits);
        std::string adversary = "none";
        read(*tr, "transport", "adversary", adversary);
        require(adversary == "none" || adversary == "intercept_resend", "transport.adversary",
                "must be \"none\" or \"intercept_resend\"");
        cfg.transport.channel.adversary =
            adversary == "none" ? security::Adversary::None : security::Adversary::InterceptResend;
    }

    if (const auto tm = doc.find("timing"); tm != doc.end()) {
        reject_unknown(*tm, "timing", {"round_duration_s", "train_seconds_per_sample", "global_every_n_rounds"});
        read(*tm, "timing", "round_duration_s", cfg.timing.round_duration_s);
        read(*tm, "timing", "train_seconds_per_sample", cfg.timing.train_seconds_per_sample);
        read(*tm, "timing", "global_every_n_rounds", cfg.timing.global_every_n_rounds);
    }
    try {
        cfg.timing.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("timing", e.what());
    }
    const double ratio = cfg.timing.round_duration_s / cfg.sample_time_s;
    require(std::abs(ratio - std::round(ratio)) < 1e-9, "timing.round_duration_s",
            "must be a whole multiple of sample_time_s");

    cfg.staleness.delta_max_s = 2.0 * cfg.timing.round_duration_s;
    if (const auto st = doc.find("staleness"); st != doc.end()) {
        reject_unknown(*st, "staleness", {"delta_max_s", "p_min_floor", "carry_over"});
        if (const auto dm = st->find("delta_max_s"); dm != st->end() && dm->is_string()) {
            require(dm->get<std::string>() == "inf", "staleness.delta_max_s", "expected a number or \"inf\"");
            cfg.staleness.delta_max_s = std::numeric_limits<double>::infinity();
        } else {
            read(*st, "staleness", "delta_max_s", cfg.staleness.delta_max_s);
        }
        read(*st, "staleness", "p_min_floor", cfg.staleness.p_min_floor);
        read(*st, "staleness", "carry_over", cfg.staleness.carry_over);
    }
    try {
        cfg.staleness.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("staleness", e.what());
    }

    int declared_d = -1;
    if (const auto tr = doc.find("training"); tr != doc.end()) {
        reject_unknown(*tr, "training",
                       {"d", "qubits", "layers", "epochs", "learning_rate", "batch_size", "rounds", "readout_scale"});
        read(*tr, "training", "d", declared_d);
        read(*tr, "training", "qubits", cfg.shape.qubits);
        read(*tr, "training", "layers", cfg.shape.layers);
        read(*tr, "training", "readout_scale", cfg.shape.readout_scale);
        read(*tr, "training", "epochs", cfg.train.epochs);
        read(*tr, "training", "learning_rate", cfg.train.learning_rate);
        read(*tr, "training", "batch_size", cfg.train.batch_size);
        read(*tr, "training", "rounds", cfg.rounds);
    }
    require(cfg.shape.qubits >= 1 && cfg.shape.qubits <= quantum::kMaxQubits, "training.qubits",
            "must lie in [1, 12]");
    require(cfg.shape.layers >= 1, "training.layers", "must be >= 1");
    require(cfg.shape.readout_scale > 0.0, "training.readout_scale", "must be > 0");
    require(declared_d < 0 || static_cast<std::size_t>(declared_d) == cfg.shape.param_count(), "training.d",
            "must equal 3 * qubits * layers = " + std::to_string(cfg.shape.param_count()));
    require(cfg.train.epochs >= 1, "training.epochs", "must be >= 1");
    require(cfg.train.learning_rate >= 0.0, "training.learning_rate", "must be >= 0");
    require(cfg.train.batch_size >= 1, "training.batch_size", "must be >= 1");
    require(cfg.rounds >= 0, "training.rounds", "must be >= 0");
    const double horizon = cfg.duration_hours * 3600.0;
    require(cfg.rounds * cfg.timing.round_duration_s <= horizon + 1e-6, "training.rounds",
            "rounds * round_duration_s exceeds the scenario duration");

    cfg.dataset.reduce_to = cfg.shape.qubits;
    if (const auto ds = doc.find("dataset"); ds != doc.end()) {
        reject_unknown(*ds, "dataset",
                       {"source", "reduce_to", "train_fraction", "distribution", "synthetic_rows",
                        "synthetic_features", "synthetic_classes"});
        std::string source;
        read(*ds, "dataset", "source", source);
        if (!source.empty()) {
            cfg.dataset.source = source == "synthetic" ? source : resolve(base_dir, source).string();
        }
        read(*ds, "dataset", "reduce_to", cfg.dataset.reduce_to);
        read(*ds, "dataset", "train_fraction", cfg.dataset.train_fraction);
        std::string dist = "round_robin";
        read(*ds, "dataset", "distribution", dist);
        require(dist == "round_robin" || dist == "label_skew", "dataset.distribution",
                "must be \"round_robin\" or \"label_skew\"");
        cfg.dataset.distribution = dist == "round_robin" ? ShardPolicy::RoundRobin : ShardPolicy::LabelSkew;
        read(*ds, "dataset", "synthetic_rows", cfg.dataset.synthetic_rows);
        read(*ds, "dataset", "synthetic_features", cfg.dataset.synthetic_features);
        read(*ds, "dataset", "synthetic_classes", cfg.dataset.synthetic_classes);
    }
    require(cfg.dataset.reduce_to == cfg.shape.qubits, "dataset.reduce_to", "must equal training.qubits");
    require(cfg.dataset.train_fraction > 0.0 && cfg.dataset.train_fraction < 1.0, "dataset.train_fraction",
            "must lie in (0, 1)");
    require(cfg.dataset.synthetic_rows >= 2, "dataset.synthetic_rows", "must be >= 2");
    require(cfg.dataset.synthetic_features >= cfg.dataset.reduce_to, "dataset.synthetic_features",
            "must be >= reduce_to");
    require(cfg.dataset.synthetic_classes >= 2 && cfg.dataset.synthetic_classes <= 2 * cfg.shape.qubits,
            "dataset.synthetic_classes", "must lie in [2, 2 * qubits]");

    cfg.transport.kind = cfg.security.kind;
    cfg.transport.teleport_count = cfg.security.teleport_count;
    try {
        cfg.transport.validate(cfg.shape.param_count());
    } catch (const std::invalid_argument& e) {
        throw ConfigError("security", e.what());
    }

    if (const auto s = doc.find("seed"); s != doc.end()) {
        require(s->is_number_unsigned() || (s->is_number_integer() && s->get<std::int64_t>() >= 0), "seed",
                "expected a non-negative integer");
        cfg.seed = s->get<std::uint64_t>();
    }
    return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    return parse_config(read_json_file(path, "config"), path.parent_path());
}

// --- access timeline -------------------------------------------------------

Scenario build_scenario(const ScenarioConfig& cfg) {
    const int samples = cfg.samples();
    if (cfg.topology.kind == "full_mesh") {
        std::vector<access::SatId> sats(static_cast<std::size_t>(cfg.n_satellites));
        std::iota(sats.begin(), sats.end(), 1);
        const int stations = std::max<int>(1, static_cast<int>(cfg.ground_stations.size()));
        return {{}, cfg.ground_stations,
                full_mesh_plan(sats, stations, cfg.topology.full_mesh_primaries, cfg.start_time, samples,
                               cfg.sample_time_s, cfg.routing)};
    }

    std::ifstream in(cfg.tle_path);
    if (!in) {
        throw ConfigError("tle_path", "cannot open " + cfg.tle_path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    auto records = orbits::parse_tle(buf.str());
    if (static_cast<std::size_t>(cfg.n_satellites) > records.size()) {
        throw ConfigError("n_satellites", "requested " + std::to_string(cfg.n_satellites) + " satellites, file has " +
                                              std::to_string(records.size()));
    }
    records.resize(static_cast<std::size_t>(cfg.n_satellites));
    std::set<int> ids;
    std::vector<orbits::OrbitalElements> elements;
    for (const auto& r : records) {
        if (!ids.insert(r.catalog_number).second) {
            throw ConfigError("tle_path", "duplicate catalog number " + std::to_string(r.catalog_number));
        }
        elements.push_back(orbits::elements_from_tle(r));
    }

    std::vector<access::AccessSnapshot> snaps;
    snaps.reserve(static_cast<std::size_t>(samples));
    for (int k = 0; k < samples; ++k) {
        const UtcTime t = cfg.start_time + k * cfg.sample_time_s;
        std::map<access::SatId, orbits::EciState> sat_states;
        for (std::size_t i = 0; i < records.size(); ++i) {
            sat_states.emplace(records[i].catalog_number, orbits::propagate(elements[i], t));
        }
        std::map<access::StationId, orbits::EciState> gs_states;
        for (std::size_t g = 0; g < cfg.ground_stations.size(); ++g) {
            gs_states.emplace(static_cast<int>(g), orbits::station_eci(cfg.ground_stations[g], t));
        }
        auto snap = access::snapshot(sat_states, gs_states, cfg.routing);
        snap.time = t;
        snaps.push_back(std::move(snap));
    }
    return {std::move(records), cfg.ground_stations, access::ContactPlan(std::move(snaps), cfg.sample_time_s, cfg.routing)};
}

access::ContactPlan full_mesh_plan(const std::vector<access::SatId>& satellites, int stations, int primaries,
                                   UtcTime start, int samples, double sample_time_s,
                                   const access::RoutingConfig& routing) {
    std::vector<access::SatId> sats = satellites;
    std::sort(sats.begin(), sats.end());
    access::AccessSnapshot proto;
    proto.satellites = sats;
    for (std::size_t i = 0; i < sats.size(); ++i) {
        if (static_cast<int>(i) < primaries) {
            for (int g = 0; g < stations; ++g) {
                proto.sat_ground_edges.emplace(sats[i], g);
            }
        }
        for (std::size_t j = i + 1; j < sats.size(); ++j) {
            proto.isl_edges.emplace(sats[i], sats[j]);
        }
    }
    std::vector<access::AccessSnapshot> snaps(static_cast<std::size_t>(samples), proto);
    for (int k = 0; k < samples; ++k) {
        snaps[static_cast<std::size_t>(k)].time = start + k * sample_time_s;
    }
    return access::ContactPlan(std::move(snaps), sample_time_s, routing);
}

void write_contact_plan_csv(const std::filesystem::path& path, const access::ContactPlan& plan) {
    auto out = open_out(path);
    out << "a,b,t_start_iso,t_end_iso\n";
    for (const auto& w : plan.windows()) {
        out << access::to_string(w.a) << "," << access::to_string(w.b) << "," << to_iso8601(w.t_start) << ","
            << to_iso8601(w.t_end) << "\n";
    }
}

void write_partitions_jsonl(const std::filesystem::path& path, const access::ContactPlan& plan) {
    auto out = open_out(path);
    for (std::size_t k = 0; k < plan.snapshots().size(); ++k) {
        const auto& part = plan.partitions()[k];
        json line;
        line["sample"] = k;
        line["t"] = to_iso8601(plan.snapshots()[k].time);
        json primaries = json::array();
        for (const auto p : part.primaries) {
            json members = json::array();
            for (const auto& [sec, owner] : part.assignment) {
                if (owner == p) {
                    members.push_back({{"sat", sec}, {"hops", part.hops.at(sec)}});
                }
            }
            primaries.push_back({{"sat", p}, {"station", part.primary_station.at(p)}, {"secondaries", members}});
        }
        json unassigned = json::array();
        for (const auto s : part.secondaries) {
            if (!part.assignment.contains(s)) {
                unassigned.push_back(s);
            }
        }
        line["primaries"] = primaries;
        line["non_accessible"] = part.secondaries;
        line["unassigned"] = unassigned;
        out << line.dump() << "\n";
    }
}

// --- reports ---------------------------------------------------------------

std::vector<std::pair<std::string, std::pair<double, double>>> MetricsReport::summary() const {
    std::vector<std::pair<std::string, std::pair<double, double>>> out;
    if (rounds.empty()) {
        return out;
    }
    const auto column = [&](const std::string& name, double RoundMetrics::*field) {
        double total = 0.0;
        for (const auto& r : rounds) {
            total += r.*field;
        }
        out.push_back({name, {total / static_cast<double>(rounds.size()), rounds.back().*field}});
    };
    column("server_val_acc", &RoundMetrics::server_val_accuracy);
    column("server_test_acc", &RoundMetrics::server_test_accuracy);
    column("server_val_loss", &RoundMetrics::server_val_loss);
    column("device_train_acc", &RoundMetrics::device_train_accuracy);
    column("device_test_acc", &RoundMetrics::device_test_accuracy);
    column("device_val_loss", &RoundMetrics::device_val_loss);
    double comm = 0.0;
    for (const auto& r : rounds) {
        comm += r.communication_time_s;
    }
    out.push_back({"comm_time_s", {comm / static_cast<double>(rounds.size()), comm}});
    return out;
}

json to_json(const scheduler::RoundTrace& t) {
    json j;
    j["round"] = t.round;
    j["mode"] = scheduler::to_string(t.mode);
    j["t_round"] = to_iso8601(t.t_round);
    j["deadline"] = to_iso8601(t.deadline);
    j["status"] = t.status;
    j["global_aggregation"] = t.global_aggregation;
    j["global_version"] = t.global_version;
    json clusters = json::array();
    for (const auto& c : t.clusters) {
        clusters.push_back(
            {{"primary", c.primary}, {"station", c.station}, {"members", c.members}, {"accepted", c.accepted}});
    }
    j["clusters"] = clusters;
    j["unassigned"] = t.unassigned;
    json accepted = json::array();
    for (const auto& a : t.accepted) {
        accepted.push_back({{"origin", a.origin}, {"receiver", node_json(a.receiver)}, {"staleness_s", a.staleness_s}});
    }
    j["accepted"] = accepted;
    json rejected = json::array();
    for (const auto& r : t.rejected) {
        rejected.push_back({{"origin", r.origin},
                            {"receiver", r.receiver ? node_json(*r.receiver) : json(nullptr)},
                            {"reason", r.reason}});
    }
    j["rejected"] = rejected;
    json tx = json::array();
    for (const auto& x : t.transmissions) {
        tx.push_back({{"sender", node_json(x.sender)},
                      {"receiver", node_json(x.receiver)},
                      {"t", x.t.unix_seconds},
                      {"bytes", x.bytes},
                      {"window", x.window_id}});
    }
    j["transmissions"] = tx;
    j["deliveries"] = t.deliveries;
    j["communication_time_s"] = t.communication_time_s;
    j["server"] = {{"val_acc", t.server.val_accuracy},
                   {"test_acc", t.server.test_accuracy},
                   {"val_loss", t.server.val_loss}};
    j["device"] = {{"train_acc", t.device.train_accuracy},
                   {"test_acc", t.device.test_accuracy},
                   {"val_loss", t.device.val_loss},
                   {"devices", t.device.devices}};
    return j;
}

json to_json(const MetricsReport& report) {
    json j;
    j["name"] = report.name;
    json rounds = json::array();
    for (const auto& r : report.rounds) {
        rounds.push_back({{"round", r.round},
                          {"status", r.status},
                          {"server_val_acc", r.server_val_accuracy},
                          {"server_test_acc", r.server_test_accuracy},
                          {"server_val_loss", r.server_val_loss},
                          {"device_train_acc", r.device_train_accuracy},
                          {"device_test_acc", r.device_test_accuracy},
                          {"device_val_loss", r.device_val_loss},
                          {"comm_time_s", r.communication_time_s}});
    }
    j["rounds"] = rounds;
    json summary = json::object();
    for (const auto& [name, v] : report.summary()) {
        summary[name] = name == "comm_time_s" ? json{{"avg", v.first}, {"total", v.second}}
                                              : json{{"avg", v.first}, {"final", v.second}};
    }
    j["summary"] = summary;
    json participation = json::object();
    for (const auto& [sat, f] : report.participation) {
        participation[std::to_string(sat)] = f;
    }
    j["participation"] = participation;
    j["below_participation_floor"] = report.below_participation_floor;
    return j;
}

MetricsReport report_from_json(const json& doc) {
    MetricsReport r;
    try {
        r.name = doc.at("name").get<std::string>();
        for (const auto& x : doc.at("rounds")) {
            RoundMetrics m;
            m.round = x.at("round").get<int>();
            m.status = x.at("status").get<std::string>();
            m.server_val_accuracy = x.at("server_val_acc").get<double>();
            m.server_test_accuracy = x.at("server_test_acc").get<double>();
            m.server_val_loss = x.at("server_val_loss").get<double>();
            m.device_train_accuracy = x.at("device_train_acc").get<double>();
            m.device_test_accuracy = x.at("device_test_acc").get<double>();
            m.device_val_loss = x.at("device_val_loss").get<double>();
            m.communication_time_s = x.at("comm_time_s").get<double>();
            r.rounds.push_back(m);
        }
        if (const auto p = doc.find("participation"); p != doc.end()) {
            for (const auto& [sat, f] : p->items()) {
                r.participation[std::stoi(sat)] = f.get<double>();
            }
        }
        if (const auto b = doc.find("below_participation_floor"); b != doc.end()) {
            r.below_participation_floor = b->get<std::vector<int>>();
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed report: ") + e.what());
    }
    return r;
}

// --- experiments -----------------------------------------------------------

ExperimentResult run_rounds(const ScenarioConfig& cfg, const access::ContactPlan& plan, const PreparedData& data) {
    qfl::ModelShape shape = cfg.shape;
    shape.classes = data.class_count;
    shape.validate();

    qfl::ModelParams initial;
    Rng init_rng(Rng::derive(cfg.seed, {kInitTag}));
    initial.angles = qfl::random_angles(shape, init_rng);
    initial.produced_at = plan.start();

    scheduler::TransportConfig transport = cfg.transport;
    transport.kind = cfg.security.kind;
    transport.teleport_count = cfg.security.teleport_count;

    scheduler::RoundDriver driver(plan, data.shards, data.eval, shape, cfg.train, transport, cfg.timing,
                                  cfg.staleness, cfg.mode, cfg.seed, std::move(initial));
    if (cfg.rounds > driver.rounds_available()) {
        throw ConfigError("training.rounds", "only " + std::to_string(driver.rounds_available()) +
                                                 " rounds fit in the contact plan");
    }

    ExperimentResult result;
    result.report.name = scheduler::to_string(cfg.mode) + "/" + to_string(cfg.security);
    for (int r = 0; r < cfg.rounds; ++r) {
        scheduler::RoundTrace trace;
        try {
            trace = driver.run_round(r);
        } catch (const scheduler::NoParticipants&) {
            trace = driver.skip_round(r, "no_participants");
        }
        RoundMetrics m;
        m.round = r;
        m.status = trace.status;
        m.server_val_accuracy = trace.server.val_accuracy;
        m.server_test_accuracy = trace.server.test_accuracy;
        m.server_val_loss = trace.server.val_loss;
        m.device_train_accuracy = trace.device.train_accuracy;
        m.device_test_accuracy = trace.device.test_accuracy;
        m.device_val_loss = trace.device.val_loss;
        m.communication_time_s = trace.communication_time_s;
        result.report.rounds.push_back(m);
        result.traces.push_back(std::move(trace));
    }
    if (!result.traces.empty()) {
        std::vector<access::SatId> sats;
        for (const auto& [sat, shard] : data.shards) {
            sats.push_back(sat);
        }
        const auto part = scheduler::participation_monitor(result.traces, sats, cfg.staleness.p_min_floor);
        result.report.participation = part.frequency;
        result.report.below_participation_floor.assign(part.below_floor.begin(), part.below_floor.end());
    }
    return result;
}

ExperimentResult run_experiment(const ScenarioConfig& cfg, const std::optional<std::filesystem::path>& out_dir) {
    const auto scenario = build_scenario(cfg);
    const auto& snaps = scenario.plan.snapshots();
    const std::vector<access::SatId> sats = snaps.empty() ? std::vector<access::SatId>{} : snaps.front().satellites;
    const auto data = load_dataset(cfg.dataset, sats, cfg.seed);
    auto result = run_rounds(cfg, scenario.plan, data);

    if (!out_dir) {
        return result;
    }
    std::filesystem::create_directories(*out_dir);
    {
        auto out = open_out(*out_dir / "trace.jsonl");
        for (const auto& t : result.traces) {
            out << to_json(t).dump() << "\n";
        }
    }
    {
        auto out = open_out(*out_dir / "summary.csv");
        const auto summary = result.report.summary();
        out << "run";
        for (const auto& [name, v] : summary) {
            out << "," << name << (name == "comm_time_s" ? "_avg,comm_time_s_total" : "_avg," + name + "_final");
        }
        out << "\n" << result.report.name;
        for (const auto& [name, v] : summary) {
            out << "," << fmt(v.first) << "," << fmt(v.second);
        }
        out << "\n";
    }
    {
        auto acc = open_out(*out_dir / "accuracy.csv");
        auto loss = open_out(*out_dir / "loss.csv");
        auto comm = open_out(*out_dir / "comm_time.csv");
        acc << "round,status,server_val_acc,server_test_acc,device_train_acc,device_test_acc\n";
        loss << "round,status,server_val_loss,device_val_loss\n";
        comm << "round,status,comm_time_s,deliveries,transmissions\n";
        for (std::size_t i = 0; i < result.report.rounds.size(); ++i) {
            const auto& m = result.report.rounds[i];
            const auto& t = result.traces[i];
            acc << m.round << "," << m.status << "," << fmt(m.server_val_accuracy) << ","
                << fmt(m.server_test_accuracy) << "," << fmt(m.device_train_accuracy) << ","
                << fmt(m.device_test_accuracy) << "\n";
            loss << m.round << "," << m.status << "," << fmt(m.server_val_loss) << "," << fmt(m.device_val_loss)
                 << "\n";
            comm << m.round << "," << m.status << "," << fmt(m.communication_time_s) << "," << t.deliveries << ","
                 << t.transmissions.size() << "\n";
        }
    }
    {
        json report = to_json(result.report);
        report["config"] = {{"mode", scheduler::to_string(cfg.mode)},
                            {"security", to_string(cfg.security)},
                            {"seed", cfg.seed},
                            {"rounds", cfg.rounds},
                            {"n_satellites", cfg.n_satellites},
                            {"topology", cfg.topology.kind},
                            {"d", cfg.shape.param_count()},
                            {"qubits", cfg.shape.qubits},
                            {"layers", cfg.shape.layers},
                            {"class_count", data.class_count}};
        report["notes"] = json::array({"device_val_loss is the mean over devices that trained in the round, "
                                       "repeats the previous round when none did, and is defined in every mode",
                                       "global model downlink to satellites is not modeled"});
        auto out = open_out(*out_dir / "report.json");
        out << report.dump(2) << "\n";
    }
    return result;
}

ComparisonTable compare_runs(const std::vector<MetricsReport>& reports) {
    if (reports.size() < 2) {
        throw std::invalid_argument("compare_runs needs at least two reports");
    }
    for (const auto& r : reports) {
        if (r.rounds.size() != reports.front().rounds.size()) {
            throw ShapeMismatch("reports differ in round count: " + std::to_string(reports.front().rounds.size()) +
                                " vs " + std::to_string(r.rounds.size()));
        }
    }
    ComparisonTable table;
    std::vector<bool> higher_is_better;
    for (const auto& [name, v] : reports.front().summary()) {
        const bool acc = name.find("_acc") != std::string::npos;
        const bool comm = name == "comm_time_s";
        table.columns.push_back(comm ? "comm_time_avg_s" : name + "_avg");
        table.columns.push_back(comm ? "comm_time_total_s" : name + "_final");
        higher_is_better.push_back(acc);
        higher_is_better.push_back(acc);
    }
    for (const auto& r : reports) {
        table.runs.push_back(r.name);
        std::vector<double> row;
        for (const auto& [name, v] : r.summary()) {
            row.push_back(v.first);
            row.push_back(v.second);
        }
        table.values.push_back(std::move(row));
    }
    table.best.assign(reports.size(), std::vector<bool>(table.columns.size(), false));
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        double best = table.values[0][c];
        for (const auto& row : table.values) {
            best = higher_is_better[c] ? std::max(best, row[c]) : std::min(best, row[c]);
        }
        for (std::size_t r = 0; r < table.values.size(); ++r) {
            table.best[r][c] = table.values[r][c] == best;
        }
    }
    return table;
}

std::string render_markdown(const ComparisonTable& table) {
    std::ostringstream out;
    out << "| run |";
    for (const auto& c : table.columns) {
        out << " " << c << " |";
    }
    out << "\n|---|";
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        out << "---|";
    }
    out << "\n";
    for (std::size_t r = 0; r < table.runs.size(); ++r) {
        out << "| " << table.runs[r] << " |";
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            const auto v = fmt(table.values[r][c]);
            out << " " << (table.best[r][c] ? "**" + v + "**" : v) << " |";
        }
        out << "\n";
    }
    return out.str();
}

void write_comparison_csv(const std::filesystem::path& path, const ComparisonTable& table) {
    auto out = open_out(path);
    out << "run";
    for (const auto& c : table.columns) {
        out << "," << c << "," << c << "_best";
    }
    out << "\n";
    for (std::size_t r = 0; r < table.runs.size(); ++r) {
        out << table.runs[r];
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            out << "," << fmt(table.values[r][c]) << "," << (table.best[r][c] ? 1 : 0);
        }
        out << "\n";
    }
}

}  // namespace satqfl::harness
