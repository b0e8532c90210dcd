#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "satqfl/harness.hpp"

using namespace satqfl;
using namespace satqfl::harness;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("satqfl_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json mesh_config() {
    return json::parse(R"({
        "topology": {"kind": "full_mesh", "primaries": 2},
        "n_satellites": 6,
        "duration_hours": 1,
        "sample_time_s": 30,
        "timing": {"round_duration_s": 360},
        "training": {"rounds": 3, "batch_size": 8},
        "dataset": {"synthetic_rows": 200},
        "seed": 5
    })");
}

std::string config_error_field(const json& doc) {
    try {
        parse_config(doc);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "<none>";
}

MetricsReport flat_report(const std::string& name, int rounds, double acc, double loss, double comm) {
    MetricsReport r;
    r.name = name;
    for (int i = 0; i < rounds; ++i) {
        RoundMetrics m;
        m.round = i;
        m.status = "ok";
        m.server_val_accuracy = m.server_test_accuracy = m.device_train_accuracy = m.device_test_accuracy = acc;
        m.server_val_loss = m.device_val_loss = loss;
        m.communication_time_s = comm;
        r.rounds.push_back(m);
    }
    return r;
}

}  // namespace

// --- datasets ----------------------------------------------------------------

TEST(Csv, RoundTripWithHeaderAndLabelRemap) {
    const auto dir = temp_dir("csv");
    {
        std::ofstream out(dir / "in.csv");
        out << "a,b,label\n1.5,2,7\n-3,4.25,3\n0,0,7\n";
    }
    const auto t = read_csv(dir / "in.csv");
    ASSERT_EQ(t.features.rows(), 3);
    ASSERT_EQ(t.features.cols(), 2);
    EXPECT_EQ(t.labels, (std::vector<int>{1, 0, 1}));
    EXPECT_EQ(t.class_count, 2);
    EXPECT_DOUBLE_EQ(t.features(1, 1), 4.25);
    write_csv(dir / "out.csv", t);
    const auto back = read_csv(dir / "out.csv");
    EXPECT_EQ(back.features, t.features);
    EXPECT_EQ(back.labels, t.labels);
}

TEST(Csv, WhitespaceSeparatedAndSchemaErrors) {
    const auto dir = temp_dir("csv_ws");
    {
        std::ofstream out(dir / "ws.txt");
        out << "1 2 3 1\n4 5 6 2\n";
    }
    EXPECT_EQ(read_csv(dir / "ws.txt").features.cols(), 3);
    {
        std::ofstream out(dir / "ragged.csv");
        out << "1,2,0\n3,1\n";
    }
    EXPECT_THROW(read_csv(dir / "ragged.csv"), SchemaError);
    {
        std::ofstream out(dir / "frac.csv");
        out << "1,2,0.5\n";
    }
    EXPECT_THROW(read_csv(dir / "frac.csv"), SchemaError);
    EXPECT_THROW(read_csv(dir / "missing.csv"), SchemaError);
}

TEST(Synthetic, BlobsHaveRequestedShapeAndBalancedLabels) {
    const auto t = synthetic_blobs(1000, 8, 2, 1);
    EXPECT_EQ(t.features.rows(), 1000);
    EXPECT_EQ(t.features.cols(), 8);
    EXPECT_EQ(t.class_count, 2);
    const auto ones = std::count(t.labels.begin(), t.labels.end(), 1);
    EXPECT_NEAR(static_cast<double>(ones), 500.0, 50.0);
    EXPECT_EQ(synthetic_blobs(50, 8, 2, 1).features, synthetic_blobs(50, 8, 2, 1).features);
}

TEST(Synthetic, BlobsAreLinearlySeparable) {
    const auto t = synthetic_blobs(1000, 8, 2, 2);
    for (Eigen::Index i = 0; i < t.features.rows(); ++i) {
        // class centres at 3 e_0 and 3 e_1, support radius 1.4
        EXPECT_EQ(t.features(i, 0) > t.features(i, 1), t.labels[static_cast<std::size_t>(i)] == 0) << "row " << i;
    }
    // Past `features` classes the centres flip sign: class 8 sits at -3 e_0.
    const auto wide = synthetic_blobs(90, 8, 9, 3);
    for (Eigen::Index i = 0; i < wide.features.rows(); ++i) {
        if (wide.labels[static_cast<std::size_t>(i)] == 8) {
            EXPECT_LT(wide.features(i, 0), -1.6);
        }
    }
}

TEST(Pca, LineDataHasNoResidual) {
    Eigen::MatrixXd m(50, 2);
    for (int i = 0; i < 50; ++i) {
        m(i, 0) = i * 0.3 - 2.0;
        m(i, 1) = 2.0 * m(i, 0) + 1.0;
    }
    const auto r = pca_reduce(m, 1);
    Eigen::MatrixXd centred = m.rowwise() - r.mean.transpose();
    const Eigen::MatrixXd recon = r.projected * r.basis.transpose();
    EXPECT_LT((centred - recon).squaredNorm() / 50.0, 1e-9);
}

TEST(Pca, FullRankPreservesVarianceWithOrthonormalBasis) {
    Rng rng(3);
    Eigen::MatrixXd m(100, 10);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            m(i, j) = rng.normal() * (1.0 + static_cast<double>(j));
        }
    }
    const auto r = pca_reduce(m, 10);
    EXPECT_LT((r.basis.transpose() * r.basis - Eigen::MatrixXd::Identity(10, 10)).norm(), 1e-9);
    Eigen::MatrixXd centred = m.rowwise() - r.mean.transpose();
    const double total = centred.squaredNorm();
    EXPECT_NEAR(r.projected.squaredNorm(), total, 1e-9 * total);
    EXPECT_LT((r.projected * r.basis.transpose() - centred).norm(), 1e-9 * std::sqrt(total));
    for (Eigen::Index k = 1; k < r.explained_variance.size(); ++k) {
        EXPECT_GE(r.explained_variance(k - 1), r.explained_variance(k));
    }
}

TEST(Pca, RankBounds) {
    const Eigen::MatrixXd m = Eigen::MatrixXd::Ones(5, 3);
    EXPECT_THROW(pca_reduce(m, 0), RankError);
    EXPECT_THROW(pca_reduce(m, 4), RankError);
}

TEST(Prepare, SplitScaleAndShard) {
    const auto table = synthetic_blobs(100, 8, 2, 4);
    DatasetSpec spec;
    spec.reduce_to = 4;
    const std::vector<access::SatId> sats{5, 6, 7};
    const auto data = prepare_dataset(table, spec, sats, 9);
    EXPECT_EQ(data.train_rows, 90u);
    EXPECT_EQ(data.server_test.size(), 10u);
    EXPECT_EQ(data.eval.val.size() + data.eval.test.size(), 10u);
    std::size_t total = 0;
    std::multiset<std::vector<double>> seen;
    for (const auto& [sat, shard] : data.shards) {
        EXPECT_EQ(shard.owner, sat);
        EXPECT_FALSE(shard.examples.empty());
        total += shard.examples.size();
        for (const auto& ex : shard.examples) {
            ASSERT_EQ(ex.features.size(), 4u);
            for (const double x : ex.features) {
                EXPECT_GE(x, 0.0);
                EXPECT_LE(x, std::numbers::pi);
            }
            seen.insert(ex.features);
        }
    }
    EXPECT_EQ(total, 90u);
    EXPECT_EQ(std::set<std::vector<double>>(seen.begin(), seen.end()).size(), 90u);
}

TEST(Prepare, LabelSkewStillCoversTheTrainSplit) {
    const auto table = synthetic_blobs(120, 8, 2, 5);
    DatasetSpec spec;
    spec.distribution = ShardPolicy::LabelSkew;
    const std::vector<access::SatId> sats{1, 2, 3, 4};
    const auto data = prepare_dataset(table, spec, sats, 3);
    std::size_t total = 0;
    for (const auto& [sat, shard] : data.shards) {
        total += shard.examples.size();
    }
    EXPECT_EQ(total, data.train_rows);
}

TEST(Prepare, MoreSatellitesThanRowsIsEmptyShard) {
    const auto table = synthetic_blobs(10, 8, 2, 6);
    std::vector<access::SatId> sats(20);
    std::iota(sats.begin(), sats.end(), 1);
    EXPECT_THROW(prepare_dataset(table, DatasetSpec{}, sats, 1), EmptyShard);
}

// --- configuration -------------------------------------------------------------

TEST(Security, ParseAndPrint) {
    for (const std::string s : {"plaintext", "otp", "aead", "teleport_partial(4)"}) {
        EXPECT_EQ(to_string(parse_security(s)), s);
    }
    EXPECT_EQ(parse_security("teleport_partial(4)").teleport_count, 4);
    for (const std::string s : {"", "rsa", "teleport_partial()", "teleport_partial(-1)", "teleport_partial(2"}) {
        EXPECT_THROW(parse_security(s), std::invalid_argument) << s;
    }
}

TEST(ConfigParse, DefaultsAndOverrides) {
    const auto cfg = parse_config(mesh_config());
    EXPECT_EQ(cfg.n_satellites, 6);
    EXPECT_EQ(cfg.samples(), 121);  // both ends of the hour
    EXPECT_EQ(cfg.rounds, 3);
    EXPECT_EQ(cfg.seed, 5u);
    EXPECT_EQ(cfg.shape.param_count(), 24u);
    EXPECT_DOUBLE_EQ(cfg.staleness.delta_max_s, 720.0);
    EXPECT_EQ(cfg.mode, scheduler::Mode::Simultaneous);
}

TEST(ConfigParse, ErrorsNameTheField) {
    auto doc = mesh_config();
    doc["routing"] = {{"bogus", 1}};
    EXPECT_EQ(config_error_field(doc), "routing.bogus");

    doc = mesh_config();
    doc["training"]["d"] = 25;
    EXPECT_EQ(config_error_field(doc), "training.d");

    doc = mesh_config();
    doc["training"]["rounds"] = 11;
    EXPECT_EQ(config_error_field(doc), "training.rounds");

    doc = mesh_config();
    doc["timing"]["round_duration_s"] = 45;
    EXPECT_EQ(config_error_field(doc), "timing.round_duration_s");

    doc = mesh_config();
    doc["security"] = "teleport_partial(30)";
    EXPECT_EQ(config_error_field(doc), "security");

    doc = mesh_config();
    doc["mode"] = "parallel";
    EXPECT_EQ(config_error_field(doc), "mode");

    doc = mesh_config();
    doc["dataset"]["train_fraction"] = 1.0;
    EXPECT_EQ(config_error_field(doc), "dataset.train_fraction");

    doc = mesh_config();
    doc["n_satellites"] = "six";
    EXPECT_EQ(config_error_field(doc), "n_satellites");

    doc = mesh_config();
    doc["topology"]["kind"] = "tle";
    EXPECT_EQ(config_error_field(doc), "tle_path");
    doc["tle_path"] = (fs::path(SATQFL_DATA_DIR) / "starlink_50.tle").string();
    EXPECT_EQ(config_error_field(doc), "ground_stations");
}

TEST(ConfigParse, InfiniteStalenessBound) {
    auto doc = mesh_config();
    doc["staleness"] = {{"delta_max_s", "inf"}};
    EXPECT_TRUE(std::isinf(parse_config(doc).staleness.delta_max_s));
    doc["staleness"] = {{"delta_max_s", "forever"}};
    EXPECT_EQ(config_error_field(doc), "staleness.delta_max_s");
}

TEST(ConfigParse, ShippedConfigsLoad) {
    for (const auto& entry : fs::directory_iterator(SATQFL_CONFIG_DIR)) {
        if (entry.path().extension() == ".json") {
            EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
        }
    }
}

// --- access timeline --------------------------------------------------------------

TEST(Scenario, FullMeshPlanShape) {
    const std::vector<access::SatId> sats{1, 2, 3, 4};
    const auto plan = full_mesh_plan(sats, 3, 2, UtcTime{0.0}, 10, 30.0, access::RoutingConfig{});
    EXPECT_EQ(plan.snapshots().size(), 10u);
    for (const auto& p : plan.partitions()) {
        EXPECT_EQ(p.primaries, (std::set<access::SatId>{1, 2}));
        EXPECT_EQ(p.assignment.at(3), 1);
        EXPECT_EQ(p.hops.at(4), 1);
    }
    // 6 ISL pairs + 2 primaries x 3 stations, each a single window over the run
    EXPECT_EQ(plan.windows().size(), 12u);
}

TEST(Scenario, StarlinkGroundVisibilityIsPartial) {
    auto cfg = load_config(fs::path(SATQFL_CONFIG_DIR) / "starlink_50.json");
    const auto sc = build_scenario(cfg);
    ASSERT_EQ(sc.plan.snapshots().size(), 721u);
    std::size_t min_visible = 50;
    std::size_t max_visible = 0;
    for (const auto& p : sc.plan.partitions()) {
        min_visible = std::min(min_visible, p.primaries.size());
        max_visible = std::max(max_visible, p.primaries.size());
        EXPECT_LT(p.primaries.size(), 50u);
    }
    EXPECT_GT(max_visible, 0u);
    EXPECT_LT(min_visible, max_visible);
}

TEST(Scenario, ContactPlanAndPartitionFiles) {
    auto doc = mesh_config();
    const auto cfg = parse_config(doc);
    const auto sc = build_scenario(cfg);
    const auto dir = temp_dir("scenario");
    write_contact_plan_csv(dir / "plan.csv", sc.plan);
    write_partitions_jsonl(dir / "parts.jsonl", sc.plan);
    std::ifstream csv(dir / "plan.csv");
    std::string header;
    std::getline(csv, header);
    EXPECT_EQ(header, "a,b,t_start_iso,t_end_iso");
    std::ifstream jl(dir / "parts.jsonl");
    std::string line;
    int n = 0;
    while (std::getline(jl, line)) {
        const auto j = json::parse(line);
        EXPECT_EQ(j["sample"].get<int>(), n);
        EXPECT_EQ(j["primaries"].size(), 2u);
        ++n;
    }
    EXPECT_EQ(n, cfg.samples());
}

// --- experiments ----------------------------------------------------------------

TEST(Experiment, ZeroRoundsGivesEmptyReport) {
    auto doc = mesh_config();
    doc["training"]["rounds"] = 0;
    const auto dir = temp_dir("zero_rounds");
    const auto res = run_experiment(parse_config(doc), dir);
    EXPECT_TRUE(res.report.rounds.empty());
    EXPECT_TRUE(fs::exists(dir / "report.json"));
    EXPECT_TRUE(fs::exists(dir / "summary.csv"));
}

TEST(Experiment, ReproducibleByteForByte) {
    const auto cfg = parse_config(mesh_config());
    const auto a = temp_dir("repro_a");
    const auto b = temp_dir("repro_b");
    run_experiment(cfg, a);
    run_experiment(cfg, b);
    for (const auto* f : {"trace.jsonl", "summary.csv", "accuracy.csv", "loss.csv", "comm_time.csv", "report.json"}) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
        EXPECT_FALSE(slurp(a / f).empty()) << f;
    }
}

TEST(Experiment, SecurityLayerDoesNotChangeLearning) {
    auto doc = mesh_config();
    const auto plain = run_experiment(parse_config(doc));
    doc["security"] = "aead";
    const auto aead = run_experiment(parse_config(doc));
    ASSERT_EQ(plain.report.rounds.size(), aead.report.rounds.size());
    for (std::size_t i = 0; i < plain.report.rounds.size(); ++i) {
        const auto& p = plain.report.rounds[i];
        const auto& s = aead.report.rounds[i];
        EXPECT_EQ(p.server_test_accuracy, s.server_test_accuracy);
        EXPECT_EQ(p.server_val_loss, s.server_val_loss);
        EXPECT_EQ(p.device_val_loss, s.device_val_loss);
        EXPECT_LT(p.communication_time_s, s.communication_time_s);
    }
}

TEST(Experiment, MetricsStayInRange) {
    const auto res = run_experiment(parse_config(mesh_config()));
    for (const auto& r : res.report.rounds) {
        for (const double a : {r.server_val_accuracy, r.server_test_accuracy, r.device_train_accuracy,
                               r.device_test_accuracy}) {
            EXPECT_GE(a, 0.0);
            EXPECT_LE(a, 1.0);
        }
        EXPECT_GT(r.communication_time_s, 0.0);
        EXPECT_TRUE(std::isfinite(r.device_val_loss));
    }
}

TEST(Report, JsonRoundTrip) {
    auto r = flat_report("x", 3, 0.5, 0.7, 1.25);
    r.participation = {{1, 1.0}, {2, 0.0}};
    r.below_participation_floor = {2};
    const auto back = report_from_json(to_json(r));
    EXPECT_EQ(back.name, "x");
    ASSERT_EQ(back.rounds.size(), 3u);
    EXPECT_EQ(back.rounds[2].communication_time_s, 1.25);
    EXPECT_EQ(back.participation, r.participation);
    EXPECT_EQ(back.below_participation_floor, r.below_participation_floor);
}

TEST(Report, SummaryAveragesAndFinals) {
    auto r = flat_report("x", 2, 0.5, 0.7, 1.0);
    r.rounds[1].server_test_accuracy = 0.9;
    r.rounds[1].communication_time_s = 3.0;
    const auto s = r.summary();
    const auto find = [&](const std::string& k) {
        return std::find_if(s.begin(), s.end(), [&](const auto& e) { return e.first == k; })->second;
    };
    EXPECT_DOUBLE_EQ(find("server_test_acc").first, 0.7);
    EXPECT_DOUBLE_EQ(find("server_test_acc").second, 0.9);
    EXPECT_DOUBLE_EQ(find("comm_time_s").first, 2.0);
    EXPECT_DOUBLE_EQ(find("comm_time_s").second, 4.0);
}

TEST(Compare, IdenticalReportsTieEverywhere) {
    const std::vector<MetricsReport> reps{flat_report("a", 4, 0.6, 0.5, 1.0), flat_report("b", 4, 0.6, 0.5, 1.0)};
    const auto t = compare_runs(reps);
    for (const auto& row : t.best) {
        EXPECT_TRUE(std::all_of(row.begin(), row.end(), [](bool b) { return b; }));
    }
}

TEST(Compare, BetterRunWinsEveryColumn) {
    const std::vector<MetricsReport> reps{flat_report("worse", 4, 0.6, 0.5, 2.0),
                                          flat_report("better", 4, 0.8, 0.3, 1.0)};
    const auto t = compare_runs(reps);
    EXPECT_EQ(t.runs, (std::vector<std::string>{"worse", "better"}));
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        EXPECT_TRUE(t.best[1][c]) << t.columns[c];
        EXPECT_FALSE(t.best[0][c]) << t.columns[c];
    }
    const auto md = render_markdown(t);
    EXPECT_NE(md.find("**0.8"), std::string::npos);
}

TEST(Compare, RoundCountMismatch) {
    const std::vector<MetricsReport> reps{flat_report("a", 4, 0.6, 0.5, 1.0), flat_report("b", 5, 0.6, 0.5, 1.0)};
    EXPECT_THROW(compare_runs(reps), ShapeMismatch);
    EXPECT_THROW(compare_runs({flat_report("a", 4, 0.6, 0.5, 1.0)}), std::invalid_argument);
}
