#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "satqfl/access.hpp"
#include "satqfl/orbits.hpp"
#include "satqfl/qfl.hpp"
#include "satqfl/scheduler.hpp"

namespace satqfl::harness {

using json = nlohmann::json;

/// Invalid configuration; `field()` is the dotted path of the offending entry.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyShard : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RankError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ShapeMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Datasets

struct Table {
    Eigen::MatrixXd features;  // rows x raw feature count
    std::vector<int> labels;   // dense, 0-based
    int class_count = 0;
};

/// Numeric CSV whose last column is an integer label. A leading non-numeric row is
/// treated as a header. Labels are remapped to 0..K-1 in ascending order.
Table read_csv(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path, const Table& table);

/// Gaussian blobs with disjoint supports, one per class; linearly separable.
Table synthetic_blobs(int rows, int features, int classes, std::uint64_t seed);

struct PcaResult {
    Eigen::MatrixXd projected;           // rows x k
    Eigen::MatrixXd basis;               // cols x k, orthonormal columns
    Eigen::VectorXd explained_variance;  // length k, non-increasing
    Eigen::VectorXd mean;                // column means removed before projecting
};

/// Projection onto the top-k eigenvectors of the sample covariance. Each basis
/// vector's largest-magnitude entry is made positive. Throws RankError unless
/// 1 <= k <= min(rows, cols).
PcaResult pca_reduce(const Eigen::MatrixXd& matrix, int k);

enum class ShardPolicy { RoundRobin, LabelSkew };

struct DatasetSpec {
    std::string source = "synthetic";  // CSV path or "synthetic"
    int reduce_to = 4;
    double train_fraction = 0.9;
    ShardPolicy distribution = ShardPolicy::RoundRobin;
    int synthetic_rows = 1000;
    int synthetic_features = 8;
    int synthetic_classes = 2;
};

struct PreparedData {
    std::map<access::SatId, qfl::LocalDataset> shards;
    std::vector<qfl::Example> server_test;  // whole holdout
    scheduler::EvalData eval;               // holdout split into val and test halves
    int class_count = 0;
    std::size_t train_rows = 0;
};

/// Shuffle, split, standardize and PCA-reduce on the train split, scale into [0, pi]
/// with train statistics, then shard the train rows over `satellites`.
PreparedData prepare_dataset(const Table& table, const DatasetSpec& spec, const std::vector<access::SatId>& satellites,
                             std::uint64_t seed);

PreparedData load_dataset(const DatasetSpec& spec, const std::vector<access::SatId>& satellites,
                          std::uint64_t seed);

// ---------------------------------------------------------------------------
// Configuration

struct SecuritySetting {
    scheduler::TransportKind kind = scheduler::TransportKind::Plaintext;
    int teleport_count = 0;
};

/// "plaintext" | "otp" | "aead" | "teleport_partial(i)"
SecuritySetting parse_security(const std::string& text);
std::string to_string(const SecuritySetting& s);

struct TopologySpec {
    std::string kind = "tle";  // "tle" or "full_mesh"
    int full_mesh_primaries = 1;
};

struct ScenarioConfig {
    std::filesystem::path tle_path = "data/starlink_50.tle";
    int n_satellites = 50;
    UtcTime start_time = utc_from_civil(2025, 4, 24, 10, 6, 29.0);
    double duration_hours = 6.0;
    double sample_time_s = 30.0;
    std::vector<orbits::GroundStation> ground_stations;
    access::RoutingConfig routing;
    TopologySpec topology;
    scheduler::Mode mode = scheduler::Mode::Simultaneous;
    SecuritySetting security;
    scheduler::TransportConfig transport;  // kind/teleport_count follow `security`
    scheduler::TimingConfig timing;
    scheduler::StalenessPolicy staleness;
    qfl::ModelShape shape;  // classes is filled in from the dataset
    qfl::TrainOptions train;
    int rounds = 20;
    DatasetSpec dataset;
    std::uint64_t seed = 42;

    int samples() const;
};

/// Parses and validates a config document. Relative paths resolve against `base_dir`.
ScenarioConfig parse_config(const json& doc, const std::filesystem::path& base_dir = {});
ScenarioConfig load_config(const std::filesystem::path& path);

std::vector<orbits::GroundStation> load_ground_stations(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Access timeline

struct Scenario {
    std::vector<orbits::TleRecord> satellites;
    std::vector<orbits::GroundStation> stations;
    access::ContactPlan plan;
};

Scenario build_scenario(const ScenarioConfig& cfg);

/// Idealized plan: every ISL pair visible at every sample; the first `primaries`
/// satellites see every station, the rest see none.
access::ContactPlan full_mesh_plan(const std::vector<access::SatId>& satellites, int stations, int primaries,
                                   UtcTime start, int samples, double sample_time_s,
                                   const access::RoutingConfig& routing);

void write_contact_plan_csv(const std::filesystem::path& path, const access::ContactPlan& plan);
void write_partitions_jsonl(const std::filesystem::path& path, const access::ContactPlan& plan);

// ---------------------------------------------------------------------------
// Experiments

struct RoundMetrics {
    int round = 0;
    std::string status;
    double server_val_accuracy = 0.0;
    double server_test_accuracy = 0.0;
    double server_val_loss = 0.0;
    double device_train_accuracy = 0.0;
    double device_test_accuracy = 0.0;
    double device_val_loss = 0.0;
    double communication_time_s = 0.0;
};

struct MetricsReport {
    std::string name;
    std::vector<RoundMetrics> rounds;
    std::map<access::SatId, double> participation;
    std::vector<access::SatId> below_participation_floor;

    /// Column name -> (avg over rounds, final round). Comm time: (mean per round, total).
    std::vector<std::pair<std::string, std::pair<double, double>>> summary() const;
};

json to_json(const scheduler::RoundTrace& trace);
json to_json(const MetricsReport& report);
MetricsReport report_from_json(const json& doc);

struct ExperimentResult {
    MetricsReport report;
    std::vector<scheduler::RoundTrace> traces;
};

/// Runs `cfg.rounds` rounds. With `out_dir` set, writes trace.jsonl, summary.csv,
/// accuracy.csv, loss.csv, comm_time.csv and report.json there.
ExperimentResult run_experiment(const ScenarioConfig& cfg, const std::optional<std::filesystem::path>& out_dir = {});

/// Runs rounds on a prepared plan and dataset; used by run_experiment and tests.
ExperimentResult run_rounds(const ScenarioConfig& cfg, const access::ContactPlan& plan, const PreparedData& data);

struct ComparisonTable {
    std::vector<std::string> runs;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> values;  // [run][column]
    std::vector<std::vector<bool>> best;      // [run][column]
};

/// Side-by-side Avg/Final columns with the best entry per column flagged
/// (accuracy: highest; loss and communication time: lowest; ties all flagged).
ComparisonTable compare_runs(const std::vector<MetricsReport>& reports);

std::string render_markdown(const ComparisonTable& table);
void write_comparison_csv(const std::filesystem::path& path, const ComparisonTable& table);

}  // namespace satqfl::harness
