#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "satqfl/access.hpp"
#include "satqfl/qfl.hpp"
#include "satqfl/security.hpp"

namespace satqfl::scheduler {

using access::NodeId;
using access::SatId;
using access::StationId;

enum class Mode { Sequential, Simultaneous, Asynchronous };

std::string to_string(Mode mode);
/// Accepts "sequential", "simultaneous", "async"/"asynchronous"; throws std::invalid_argument.
Mode mode_from_string(std::string_view text);

class NoParticipants : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StalenessPolicy {
    double delta_max_s = 720.0;  // infinity disables the bound
    double p_min_floor = 0.1;    // reported by participation_monitor only
    /// Keep async updates that missed their round and offer them again next round.
    bool carry_over = false;

    void validate() const;
};

enum class TransportKind { Plaintext, Otp, Aead, TeleportPartial };

std::string to_string(TransportKind kind);

struct TransportConfig {
    TransportKind kind = TransportKind::Plaintext;
    int teleport_count = 0;  // TeleportPartial only
    security::ChannelModel channel;
    double sample_fraction = 0.25;
    double qber_threshold = 0.10;
    int aead_qkd_qubits = 256;
    double link_rate_bps = 1.0e6;
    double qkd_seconds_per_qubit = 1.0e-4;
    double teleport_seconds = 1.0e-3;

    void validate(std::size_t param_count) const;
};

struct TimingConfig {
    double round_duration_s = 360.0;
    double train_seconds_per_sample = 0.05;
    int global_every_n_rounds = 1;

    void validate() const;
};

struct Transmission {
    NodeId sender;
    NodeId receiver;
    UtcTime t;
    std::size_t bytes = 0;
    std::size_t window_id = 0;
};

struct AcceptedUpdate {
    int origin = 0;
    NodeId receiver;
    double staleness_s = 0.0;
};

namespace reason {
inline constexpr std::string_view kNoAccess = "no_access";
inline constexpr std::string_view kLate = "late";
inline constexpr std::string_view kStale = "stale";
inline constexpr std::string_view kNoRoute = "no_route";
inline constexpr std::string_view kQkdAbort = "qkd_abort";
inline constexpr std::string_view kInsufficientKey = "insufficient_key";
inline constexpr std::string_view kNoGroundAccess = "no_ground_access";
inline constexpr std::string_view kNotParticipating = "not_participating";
}  // namespace reason

struct RejectedUpdate {
    int origin = 0;
    std::optional<NodeId> receiver;
    std::string reason;
};

struct ClusterTrace {
    SatId primary = 0;
    StationId station = -1;           // ground station used for the upload, -1 if none
    std::vector<SatId> members;       // secondaries, in pass order
    std::vector<SatId> accepted;      // members whose update reached the primary
};

struct EvalMetrics {
    double val_accuracy = 0.0;
    double test_accuracy = 0.0;
    double val_loss = 0.0;
};

struct DeviceMetrics {
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    double val_loss = 0.0;
    int devices = 0;
};

struct RoundTrace {
    int round = 0;
    Mode mode = Mode::Simultaneous;
    UtcTime t_round;
    UtcTime deadline;
    std::string status = "ok";  // or "no_participants"
    bool global_aggregation = true;
    int global_version = 0;
    std::vector<ClusterTrace> clusters;
    std::vector<SatId> unassigned;
    std::vector<AcceptedUpdate> accepted;
    std::vector<RejectedUpdate> rejected;
    std::vector<Transmission> transmissions;
    int deliveries = 0;
    double communication_time_s = 0.0;
    EvalMetrics server;
    DeviceMetrics device;
};

/// Server-held evaluation data.
struct EvalData {
    std::vector<qfl::Example> val;
    std::vector<qfl::Example> test;
};

struct Delivery {
    qfl::ModelParams params;  // as received (quantized)
    UtcTime arrival;
};

/// Everything a secondary-level pass needs for one round, plus the logging sink.
/// Transport randomness is keyed by (seed, round, sender, receiver, message index)
/// and training randomness by (seed, round, satellite), so outcomes do not depend
/// on the order in which passes run.
class PassContext {
public:
    PassContext(const access::ContactPlan& plan, const std::map<SatId, qfl::LocalDataset>& shards,
                const qfl::ModelShape& shape, const qfl::TrainOptions& train, const TransportConfig& transport,
                const TimingConfig& timing, const StalenessPolicy& policy, std::uint64_t seed, int round,
                UtcTime t_round, RoundTrace& trace);

    UtcTime t_round() const { return t_round_; }
    UtcTime deadline() const { return t_round_ + timing_.round_duration_s; }
    const access::ContactPlan& plan() const { return plan_; }
    const StalenessPolicy& policy() const { return policy_; }
    int round() const { return round_; }

    double train_duration_s(SatId sat) const;
    std::size_t data_size(SatId sat) const;

    /// local_train on the satellite's shard, finishing at start + train_duration_s.
    qfl::ModelParams train(SatId sat, const qfl::ModelParams& start, UtcTime start_time);

    /// Sends along the shortest ISL path of the snapshot containing t_send.
    std::optional<Delivery> send_routed(SatId from, SatId to, const qfl::ModelParams& params, UtcTime t_send);

    /// Waits for the first direct window from `ready` that opens before the deadline.
    std::optional<Delivery> send_direct(SatId from, SatId to, const qfl::ModelParams& params, UtcTime ready);

    /// First station window (any station, ties to the lowest id) from `ready`.
    std::optional<Delivery> send_ground(SatId primary, const qfl::ModelParams& params, UtcTime ready,
                                        StationId& station);

    /// Staleness gate; logs the verdict.
    bool admit(const qfl::ModelParams& params, NodeId receiver);

    void reject(int origin, std::optional<NodeId> receiver, std::string_view why);

    /// Async updates that missed their round, for carry-over.
    std::vector<qfl::ModelParams>& missed() { return missed_; }

    /// Models produced by local training this round, keyed by satellite.
    std::map<SatId, qfl::ModelParams>& local_models() { return local_models_; }

private:
    struct Transported {
        std::vector<double> angles;
        std::size_t bytes = 0;
        double seconds = 0.0;
    };

    std::optional<Transported> transport(const qfl::ModelParams& params, NodeId from, NodeId to, int hops);
    std::optional<Delivery> finish(const qfl::ModelParams& params, const Transported& moved, UtcTime t_send,
                                   NodeId receiver, bool keep_if_late);

    const access::ContactPlan& plan_;
    const std::map<SatId, qfl::LocalDataset>& shards_;
    const qfl::ModelShape& shape_;
    const qfl::TrainOptions& train_;
    const TransportConfig& transport_;
    const TimingConfig& timing_;
    const StalenessPolicy& policy_;
    std::uint64_t seed_;
    int round_;
    UtcTime t_round_;
    RoundTrace& trace_;
    std::map<std::pair<NodeId, NodeId>, std::uint64_t> message_index_;
    std::vector<qfl::ModelParams> missed_;
    std::map<SatId, qfl::ModelParams> local_models_;
};

struct ClusterResult {
    qfl::ModelParams model;
    UtcTime ready;                   // when the primary holds the cluster model
    std::vector<SatId> accepted;     // contributing secondaries
    double weight = 0.0;             // summed dataset size of contributors
};

/// Chain order is given by the caller. Each member trains on the model handed to
/// it and forwards the result; a failed handoff drops that member's update.
ClusterResult sequential_pass(PassContext& ctx, SatId primary, std::span<const SatId> chain,
                              const qfl::ModelParams& start);

/// All members train from `start` at t_round; the primary averages what arrives.
ClusterResult simultaneous_pass(PassContext& ctx, SatId primary, std::span<const SatId> members,
                                const qfl::ModelParams& start);

/// Members deliver over direct windows to the primary; misses are logged. `carried`
/// holds older updates offered again this round.
ClusterResult async_pass(PassContext& ctx, SatId primary, std::span<const SatId> members,
                         const qfl::ModelParams& start, std::span<const qfl::ModelParams> carried = {});

/// Sequential chain order: ascending hop count to the primary, ties by catalog number.
std::vector<SatId> chain_order(std::span<const SatId> members, const std::map<SatId, int>& hops);

class RoundDriver {
public:
    RoundDriver(const access::ContactPlan& plan, std::map<SatId, qfl::LocalDataset> shards, EvalData eval,
                qfl::ModelShape shape, qfl::TrainOptions train, TransportConfig transport, TimingConfig timing,
                StalenessPolicy policy, Mode mode, std::uint64_t seed, qfl::ModelParams initial);

    /// Executes round `round` starting at plan.start + round * round_duration.
    /// Throws NoParticipants when no satellite sees a ground station at t_round.
    RoundTrace run_round(int round);

    /// Records an empty round (global model carried over, version + 1).
    RoundTrace skip_round(int round, std::string status);

    const qfl::ModelParams& global() const { return global_; }
    int rounds_available() const;

private:
    EvalMetrics evaluate(const std::vector<double>& angles) const;

    const access::ContactPlan& plan_;
    std::map<SatId, qfl::LocalDataset> shards_;
    EvalData eval_;
    qfl::ModelShape shape_;
    qfl::TrainOptions train_;
    TransportConfig transport_;
    TimingConfig timing_;
    StalenessPolicy policy_;
    Mode mode_;
    std::uint64_t seed_;
    qfl::ModelParams global_;
    std::map<SatId, qfl::ModelParams> cluster_cache_;
    std::map<SatId, std::vector<qfl::ModelParams>> pending_;
    DeviceMetrics last_device_;  // repeated when a round trains nobody
};

struct ParticipationReport {
    std::map<SatId, double> frequency;
    std::set<SatId> below_floor;
};

/// Fraction of rounds in which each satellite had an update accepted.
ParticipationReport participation_monitor(std::span<const RoundTrace> traces, std::span<const SatId> satellites,
                                          double p_min_floor);

}  // namespace satqfl::scheduler
