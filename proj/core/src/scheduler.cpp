#include "satqfl/scheduler.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace satqfl::scheduler {

namespace {

constexpr std::uint64_t kTrainTag = 0x7472'6169'6eULL;
constexpr std::uint64_t kStationOffset = 1ULL << 32;

std::uint64_t node_code(NodeId n) {
    const auto id = static_cast<std::uint64_t>(static_cast<std::uint32_t>(n.id));
    return n.kind == NodeId::Kind::Station ? kStationOffset + id : id;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

}  // namespace

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::Sequential:
            return "sequential";
        case Mode::Simultaneous:
            return "simultaneous";
        case Mode::Asynchronous:
            return "asynchronous";
    }
    return "unknown";
}

Mode mode_from_string(std::string_view text) {
    const auto s = lower(text);
    if (s == "sequential") {
        return Mode::Sequential;
    }
    if (s == "simultaneous") {
        return Mode::Simultaneous;
    }
    if (s == "async" || s == "asynchronous") {
        return Mode::Asynchronous;
    }
    throw std::invalid_argument("unknown mode '" + std::string(text) + "'");
}

std::string to_string(TransportKind kind) {
    switch (kind) {
        case TransportKind::Plaintext:
            return "plaintext";
        case TransportKind::Otp:
            return "otp";
        case TransportKind::Aead:
            return "aead";
        case TransportKind::TeleportPartial:
            return "teleport_partial";
    }
    return "unknown";
}

void StalenessPolicy::validate() const {
    if (!(delta_max_s > 0.0)) {
        throw std::invalid_argument("staleness.delta_max_s must be > 0");
    }
    if (!(p_min_floor >= 0.0 && p_min_floor <= 1.0)) {
        throw std::invalid_argument("staleness.p_min_floor must lie in [0, 1]");
    }
}

void TransportConfig::validate(std::size_t param_count) const {
    if (kind == TransportKind::TeleportPartial &&
        (teleport_count < 0 || static_cast<std::size_t>(teleport_count) > param_count)) {
        throw std::invalid_argument("security.teleport_count must lie in [0, d]");
    }
    if (!(link_rate_bps > 0.0)) {
        throw std::invalid_argument("transport.link_rate_bps must be > 0");
    }
    if (qkd_seconds_per_qubit < 0.0 || teleport_seconds < 0.0) {
        throw std::invalid_argument("transport time constants must be >= 0");
    }
    if (!(sample_fraction > 0.0 && sample_fraction < 1.0)) {
        throw std::invalid_argument("security.sample_fraction must lie in (0, 1)");
    }
    if (aead_qkd_qubits < 16) {
        throw std::invalid_argument("security.aead_qkd_qubits must be >= 16");
    }
}

void TimingConfig::validate() const {
    if (!(round_duration_s > 0.0)) {
        throw std::invalid_argument("round_duration_s must be > 0");
    }
    if (train_seconds_per_sample < 0.0) {
        throw std::invalid_argument("train_seconds_per_sample must be >= 0");
    }
    if (global_every_n_rounds < 1) {
        throw std::invalid_argument("global_every_n_rounds must be >= 1");
    }
}

// --- PassContext -----------------------------------------------------------

PassContext::PassContext(const access::ContactPlan& plan, const std::map<SatId, qfl::LocalDataset>& shards,
                         const qfl::ModelShape& shape, const qfl::TrainOptions& train,
                         const TransportConfig& transport, const TimingConfig& timing, const StalenessPolicy& policy,
                         std::uint64_t seed, int round, UtcTime t_round, RoundTrace& trace)
    : plan_(plan),
      shards_(shards),
      shape_(shape),
      train_(train),
      transport_(transport),
      timing_(timing),
      policy_(policy),
      seed_(seed),
      round_(round),
      t_round_(t_round),
      trace_(trace) {}

std::size_t PassContext::data_size(SatId sat) const {
    const auto found = shards_.find(sat);
    return found == shards_.end() ? 0 : found->second.examples.size();
}

double PassContext::train_duration_s(SatId sat) const {
    return timing_.train_seconds_per_sample * static_cast<double>(data_size(sat)) * train_.epochs;
}

qfl::ModelParams PassContext::train(SatId sat, const qfl::ModelParams& start, UtcTime start_time) {
    const auto found = shards_.find(sat);
    if (found == shards_.end()) {
        throw std::logic_error("satellite " + std::to_string(sat) + " has no data shard");
    }
    Rng rng(Rng::derive(seed_, {static_cast<std::uint64_t>(round_), static_cast<std::uint64_t>(sat), kTrainTag}));
    auto model = qfl::local_train(shape_, start, found->second, train_, rng, start_time + train_duration_s(sat));
    local_models_.insert_or_assign(sat, model);
    return model;
}

void PassContext::reject(int origin, std::optional<NodeId> receiver, std::string_view why) {
    trace_.rejected.push_back({origin, receiver, std::string(why)});
}

bool PassContext::admit(const qfl::ModelParams& params, NodeId receiver) {
    const double staleness = std::max(0.0, t_round_ - params.produced_at);
    if (staleness > policy_.delta_max_s) {
        reject(params.origin, receiver, reason::kStale);
        return false;
    }
    trace_.accepted.push_back({params.origin, receiver, staleness});
    return true;
}

std::optional<PassContext::Transported> PassContext::transport(const qfl::ModelParams& params, NodeId from,
                                                               NodeId to, int hops) {
    auto& counter = message_index_[{from, to}];
    const std::uint64_t index = counter++;
    Rng rng(Rng::derive(seed_, {static_cast<std::uint64_t>(round_), node_code(from), node_code(to), index}));

    Transported out;
    double security_s = 0.0;
    if (transport_.kind == TransportKind::Plaintext) {
        out.angles = security::quantize_params(params.angles);
        out.bytes = security::kEnvelopeHeaderBytes + 2 * params.angles.size();
    } else {
        security::TransferOptions opt;
        opt.scheme = transport_.kind == TransportKind::Aead ? security::Scheme::Aead : security::Scheme::Otp;
        opt.channel = transport_.channel;
        opt.sample_fraction = transport_.sample_fraction;
        opt.qber_threshold = transport_.qber_threshold;
        opt.aead_qkd_qubits = transport_.aead_qkd_qubits;
        opt.nonce_counter = index;
        const auto mode = transport_.kind == TransportKind::TeleportPartial
                              ? security::TransferMode::partial(transport_.teleport_count)
                              : security::TransferMode::full();
        try {
            auto t = security::transfer_params(params.angles, mode, opt, rng);
            out.angles = std::move(t.received);
            // Two classical bits per teleported qubit, rounded up to whole bytes.
            out.bytes = t.envelope_bytes + (2 * t.teleports.size() + 7) / 8;
            security_s = t.qkd_qubits * transport_.qkd_seconds_per_qubit +
                         static_cast<double>(t.teleports.size()) * transport_.teleport_seconds;
        } catch (const security::QkdAbort&) {
            reject(params.origin, to, reason::kQkdAbort);
            return std::nullopt;
        } catch (const security::InsufficientKey&) {
            reject(params.origin, to, reason::kInsufficientKey);
            return std::nullopt;
        }
    }
    out.seconds = static_cast<double>(out.bytes) * 8.0 / transport_.link_rate_bps +
                  hops * plan_.routing().per_hop_latency_s + security_s;
    trace_.deliveries += 1;
    trace_.communication_time_s += out.seconds;
    return out;
}

std::optional<Delivery> PassContext::finish(const qfl::ModelParams& params, const Transported& moved, UtcTime t_send,
                                            NodeId receiver, bool keep_if_late) {
    const UtcTime arrival = t_send + moved.seconds;
    if (arrival > deadline()) {
        reject(params.origin, receiver, reason::kLate);
        if (keep_if_late && policy_.carry_over) {
            missed_.push_back(params);
        }
        return std::nullopt;
    }
    qfl::ModelParams received = params;
    received.angles = moved.angles;
    if (!admit(received, receiver)) {
        return std::nullopt;
    }
    return Delivery{std::move(received), arrival};
}

std::optional<Delivery> PassContext::send_routed(SatId from, SatId to, const qfl::ModelParams& params,
                                                 UtcTime t_send) {
    const NodeId receiver = NodeId::satellite(to);
    if (!(t_send < deadline())) {
        reject(params.origin, receiver, reason::kLate);
        return std::nullopt;
    }
    const auto path = plan_.route(from, to, t_send);
    if (path.size() < 2) {
        reject(params.origin, receiver, reason::kNoRoute);
        return std::nullopt;
    }
    const auto moved = transport(params, NodeId::satellite(from), receiver, static_cast<int>(path.size() - 1));
    if (!moved) {
        return std::nullopt;
    }
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        const auto a = NodeId::satellite(path[i]);
        const auto b = NodeId::satellite(path[i + 1]);
        const auto w = plan_.window_containing(a, b, t_send);
        if (!w) {
            throw std::logic_error("routed hop " + access::to_string(a) + " -> " + access::to_string(b) +
                                   " has no open window");
        }
        trace_.transmissions.push_back({a, b, t_send, moved->bytes, *w});
    }
    return finish(params, *moved, t_send, receiver, false);
}

std::optional<Delivery> PassContext::send_direct(SatId from, SatId to, const qfl::ModelParams& params,
                                                 UtcTime ready) {
    const auto a = NodeId::satellite(from);
    const auto b = NodeId::satellite(to);
    const auto w = plan_.next_window(a, b, ready, deadline());
    if (!w) {
        reject(params.origin, b, reason::kNoAccess);
        if (policy_.carry_over) {
            missed_.push_back(params);
        }
        return std::nullopt;
    }
    const UtcTime t_send = std::max(ready, plan_.windows()[*w].t_start);
    const auto moved = transport(params, a, b, 1);
    if (!moved) {
        return std::nullopt;
    }
    trace_.transmissions.push_back({a, b, t_send, moved->bytes, *w});
    return finish(params, *moved, t_send, b, true);
}

std::optional<Delivery> PassContext::send_ground(SatId primary, const qfl::ModelParams& params, UtcTime ready,
                                                 StationId& station) {
    const auto sat = NodeId::satellite(primary);
    std::set<StationId> stations;
    for (const auto& w : plan_.windows()) {
        if (w.a == sat && w.b.kind == NodeId::Kind::Station) {
            stations.insert(w.b.id);
        }
    }
    std::optional<std::size_t> best;
    UtcTime best_t;
    for (const auto gs : stations) {
        const auto w = plan_.next_window(sat, NodeId::station(gs), ready, deadline());
        if (!w) {
            continue;
        }
        const UtcTime t = std::max(ready, plan_.windows()[*w].t_start);
        if (!best || t < best_t) {  // stations ascend, so ties keep the lowest id
            best = w;
            best_t = t;
            station = gs;
        }
    }
    if (!best) {
        station = -1;
        reject(params.origin, std::nullopt, reason::kNoGroundAccess);
        return std::nullopt;
    }
    const auto receiver = NodeId::station(station);
    const auto moved = transport(params, sat, receiver, 1);
    if (!moved) {
        return std::nullopt;
    }
    trace_.transmissions.push_back({sat, receiver, best_t, moved->bytes, *best});
    return finish(params, *moved, best_t, receiver, false);
}

// --- passes ----------------------------------------------------------------

std::vector<SatId> chain_order(std::span<const SatId> members, const std::map<SatId, int>& hops) {
    std::vector<SatId> out(members.begin(), members.end());
    const auto hop = [&](SatId s) {
        const auto found = hops.find(s);
        return found == hops.end() ? std::numeric_limits<int>::max() : found->second;
    };
    std::sort(out.begin(), out.end(),
              [&](SatId a, SatId b) { return std::pair(hop(a), a) < std::pair(hop(b), b); });
    return out;
}

ClusterResult sequential_pass(PassContext& ctx, SatId primary, std::span<const SatId> chain,
                              const qfl::ModelParams& start) {
    ClusterResult r;
    r.model = start;
    r.ready = ctx.t_round();
    UtcTime t = ctx.t_round();
    for (std::size_t i = 0; i < chain.size(); ++i) {
        const SatId member = chain[i];
        const SatId next = i + 1 < chain.size() ? chain[i + 1] : primary;
        const auto trained = ctx.train(member, r.model, t);
        const auto delivered = ctx.send_routed(member, next, trained, trained.produced_at);
        if (delivered) {
            r.model = delivered->params;
            r.accepted.push_back(member);
            r.weight += static_cast<double>(ctx.data_size(member));
            t = delivered->arrival;
        } else {
            // The next member never receives the chain model and starts over from
            // the round's starting point once the handoff has failed.
            r.model = start;
            r.accepted.clear();
            r.weight = 0.0;
            t = trained.produced_at;
        }
    }
    r.ready = r.accepted.empty() ? ctx.t_round() : t;
    return r;
}

namespace {

ClusterResult average_cluster(PassContext& ctx, const qfl::ModelParams& start,
                              std::vector<std::pair<SatId, Delivery>> arrived) {
    ClusterResult r;
    r.ready = ctx.t_round();
    std::vector<qfl::WeightedUpdate> updates;
    for (auto& [sat, d] : arrived) {
        const double w = static_cast<double>(ctx.data_size(sat));
        r.weight += w;
        r.ready = std::max(r.ready, d.arrival);
        if (std::find(r.accepted.begin(), r.accepted.end(), sat) == r.accepted.end()) {
            r.accepted.push_back(sat);
        }
        updates.push_back({std::move(d.params), w});
    }
    r.model = updates.empty() ? start : qfl::fed_avg(updates);
    return r;
}

}  // namespace

ClusterResult simultaneous_pass(PassContext& ctx, SatId primary, std::span<const SatId> members,
                                const qfl::ModelParams& start) {
    std::vector<SatId> order(members.begin(), members.end());
    std::sort(order.begin(), order.end());
    std::vector<std::pair<SatId, Delivery>> arrived;
    for (const SatId s : order) {
        const auto trained = ctx.train(s, start, ctx.t_round());
        if (auto d = ctx.send_routed(s, primary, trained, trained.produced_at)) {
            arrived.emplace_back(s, std::move(*d));
        }
    }
    return average_cluster(ctx, start, std::move(arrived));
}

ClusterResult async_pass(PassContext& ctx, SatId primary, std::span<const SatId> members,
                         const qfl::ModelParams& start, std::span<const qfl::ModelParams> carried) {
    std::vector<SatId> order(members.begin(), members.end());
    std::sort(order.begin(), order.end());
    std::vector<std::pair<SatId, Delivery>> arrived;
    for (const SatId s : order) {
        const auto trained = ctx.train(s, start, ctx.t_round());
        if (auto d = ctx.send_direct(s, primary, trained, trained.produced_at)) {
            arrived.emplace_back(s, std::move(*d));
        }
    }
    for (const auto& old : carried) {
        if (auto d = ctx.send_direct(old.origin, primary, old, ctx.t_round())) {
            arrived.emplace_back(old.origin, std::move(*d));
        }
    }
    return average_cluster(ctx, start, std::move(arrived));
}

// --- RoundDriver -----------------------------------------------------------

RoundDriver::RoundDriver(const access::ContactPlan& plan, std::map<SatId, qfl::LocalDataset> shards, EvalData eval,
                         qfl::ModelShape shape, qfl::TrainOptions train, TransportConfig transport,
                         TimingConfig timing, StalenessPolicy policy, Mode mode, std::uint64_t seed,
                         qfl::ModelParams initial)
    : plan_(plan),
      shards_(std::move(shards)),
      eval_(std::move(eval)),
      shape_(shape),
      train_(train),
      transport_(transport),
      timing_(timing),
      policy_(policy),
      mode_(mode),
      seed_(seed),
      global_(std::move(initial)) {
    shape_.validate();
    timing_.validate();
    policy_.validate();
    transport_.validate(shape_.param_count());
    if (global_.angles.size() != shape_.param_count()) {
        throw qfl::ShapeError("initial model does not match the model shape");
    }
}

int RoundDriver::rounds_available() const {
    return static_cast<int>(std::floor((plan_.end() - plan_.start()) / timing_.round_duration_s + 1e-9));
}

EvalMetrics RoundDriver::evaluate(const std::vector<double>& angles) const {
    EvalMetrics m;
    m.val_accuracy = qfl::accuracy(shape_, angles, eval_.val);
    m.test_accuracy = qfl::accuracy(shape_, angles, eval_.test);
    m.val_loss = eval_.val.empty() ? 0.0 : qfl::loss(shape_, angles, eval_.val);
    return m;
}

RoundTrace RoundDriver::skip_round(int round, std::string status) {
    RoundTrace trace;
    trace.round = round;
    trace.mode = mode_;
    trace.t_round = plan_.start() + round * timing_.round_duration_s;
    trace.deadline = trace.t_round + timing_.round_duration_s;
    trace.status = std::move(status);
    trace.global_aggregation = false;
    global_.version += 1;
    trace.global_version = global_.version;
    trace.server = evaluate(global_.angles);
    trace.device = last_device_;
    trace.device.devices = 0;
    return trace;
}

RoundTrace RoundDriver::run_round(int round) {
    RoundTrace trace;
    trace.round = round;
    trace.mode = mode_;
    trace.t_round = plan_.start() + round * timing_.round_duration_s;
    trace.deadline = trace.t_round + timing_.round_duration_s;
    trace.global_aggregation = (round + 1) % timing_.global_every_n_rounds == 0;

    const auto k = plan_.sample_index(trace.t_round);
    if (!k) {
        throw std::out_of_range("round " + std::to_string(round) + " starts outside the contact plan");
    }
    const auto& part = plan_.partitions()[*k];
    if (part.primaries.empty()) {
        throw NoParticipants("no satellite has ground access at " + to_iso8601(trace.t_round));
    }
    const auto participants = access::participating_set(part, plan_.routing());

    std::map<SatId, std::vector<SatId>> clusters;
    for (const auto p : part.primaries) {
        clusters[p];
    }
    for (const auto s : part.secondaries) {
        const auto owner = part.assignment.find(s);
        if (owner != part.assignment.end() && participants.contains(s)) {
            clusters[owner->second].push_back(s);
        } else {
            trace.unassigned.push_back(s);
        }
    }

    PassContext ctx(plan_, shards_, shape_, train_, transport_, timing_, policy_, seed_, round, trace.t_round,
                    trace);
    std::vector<qfl::WeightedUpdate> ground;
    for (const auto& [primary, members] : clusters) {
        const auto cached = cluster_cache_.find(primary);
        const qfl::ModelParams& start = cached != cluster_cache_.end() ? cached->second : global_;

        ClusterTrace ct;
        ct.primary = primary;
        ClusterResult cluster;
        switch (mode_) {
            case Mode::Sequential: {
                ct.members = chain_order(members, part.hops);
                cluster = sequential_pass(ctx, primary, ct.members, start);
                break;
            }
            case Mode::Simultaneous:
                ct.members = members;
                cluster = simultaneous_pass(ctx, primary, members, start);
                break;
            case Mode::Asynchronous: {
                ct.members = members;
                std::vector<qfl::ModelParams> carried;
                for (const auto s : members) {
                    const auto found = pending_.find(s);
                    if (found != pending_.end()) {
                        carried.insert(carried.end(), found->second.begin(), found->second.end());
                    }
                }
                cluster = async_pass(ctx, primary, members, start, carried);
                break;
            }
        }
        ct.accepted = cluster.accepted;

        // The primary trains further on the cluster model, then uploads.
        const auto refined = ctx.train(primary, cluster.model, cluster.ready);
        const double weight = cluster.weight + static_cast<double>(ctx.data_size(primary));
        if (trace.global_aggregation) {
            StationId station = -1;
            if (auto d = ctx.send_ground(primary, refined, refined.produced_at, station)) {
                ground.push_back({std::move(d->params), weight});
            }
            ct.station = station;
        } else {
            cluster_cache_.insert_or_assign(primary, refined);
        }
        trace.clusters.push_back(std::move(ct));
    }

    pending_.clear();
    for (auto& m : ctx.missed()) {
        pending_[m.origin].push_back(std::move(m));
    }

    const int next_version = global_.version + 1;
    if (trace.global_aggregation) {
        if (!ground.empty()) {
            global_ = qfl::fed_avg(ground);
        }
        cluster_cache_.clear();
    }
    global_.version = next_version;
    global_.origin = -1;
    trace.global_version = global_.version;
    trace.server = evaluate(global_.angles);

    auto& locals = ctx.local_models();
    for (const auto& [sat, model] : locals) {
        const auto& shard = shards_.at(sat).examples;
        trace.device.train_accuracy += qfl::accuracy(shape_, model.angles, shard);
        trace.device.test_accuracy += qfl::accuracy(shape_, model.angles, eval_.test);
        trace.device.val_loss += eval_.val.empty() ? 0.0 : qfl::loss(shape_, model.angles, eval_.val);
    }
    trace.device.devices = static_cast<int>(locals.size());
    if (!locals.empty()) {
        const auto n = static_cast<double>(locals.size());
        trace.device.train_accuracy /= n;
        trace.device.test_accuracy /= n;
        trace.device.val_loss /= n;
        last_device_ = trace.device;
    } else {
        trace.device = last_device_;
        trace.device.devices = 0;
    }
    return trace;
}

// --- monitoring ------------------------------------------------------------

ParticipationReport participation_monitor(std::span<const RoundTrace> traces, std::span<const SatId> satellites,
                                          double p_min_floor) {
    if (traces.empty()) {
        throw std::invalid_argument("participation_monitor needs at least one round");
    }
    ParticipationReport report;
    std::map<SatId, int> counts;
    for (const auto s : satellites) {
        counts[s] = 0;
    }
    for (const auto& t : traces) {
        std::set<SatId> seen;
        for (const auto& a : t.accepted) {
            seen.insert(a.origin);
        }
        for (const auto s : seen) {
            if (counts.contains(s)) {
                counts[s] += 1;
            }
        }
    }
    for (const auto& [s, c] : counts) {
        const double f = static_cast<double>(c) / static_cast<double>(traces.size());
        report.frequency[s] = f;
        if (f < p_min_floor) {
            report.below_floor.insert(s);
        }
    }
    return report;
}

}  // namespace satqfl::scheduler
