// satqfl: command-line front end for access simulation, training runs, report
// comparison and protocol demos.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 runtime error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "satqfl/harness.hpp"
#include "satqfl/security.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace satqfl;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string mode;
    std::string security;
    std::string out;
    std::vector<std::string> reports;
    int qubits = 64;
    bool eve = false;
    std::optional<double> theta;
    std::optional<double> phi;
};

harness::ScenarioConfig load(const Options& o) {
    if (o.config.empty()) {
        throw harness::ConfigError("--config", "required");
    }
    auto cfg = harness::load_config(o.config);
    if (o.seed) {
        cfg.seed = *o.seed;
    }
    if (!o.mode.empty()) {
        try {
            cfg.mode = scheduler::mode_from_string(o.mode);
        } catch (const std::invalid_argument& e) {
            throw harness::ConfigError("--mode", e.what());
        }
    }
    if (!o.security.empty()) {
        try {
            cfg.security = harness::parse_security(o.security);
            cfg.transport.kind = cfg.security.kind;
            cfg.transport.teleport_count = cfg.security.teleport_count;
            cfg.transport.validate(cfg.shape.param_count());
        } catch (const std::invalid_argument& e) {
            throw harness::ConfigError("--security", e.what());
        }
    }
    return cfg;
}

std::string bit_string(const std::vector<std::uint8_t>& bits) {
    std::string s;
    for (const auto b : bits) {
        s.push_back(b ? '1' : '0');
    }
    return s;
}

std::string basis_string(const std::vector<security::Basis>& bases) {
    std::string s;
    for (const auto b : bases) {
        s.push_back(b == security::Basis::Z ? 'Z' : 'X');
    }
    return s;
}

void emit(const Options& o, const std::string& file, const std::string& text) {
    if (o.out.empty()) {
        std::cout << text;
        return;
    }
    fs::create_directories(o.out);
    std::ofstream(fs::path(o.out) / file, std::ios::binary) << text;
    std::cout << "wrote " << (fs::path(o.out) / file).string() << "\n";
}

int simulate_access(const Options& o) {
    const auto cfg = load(o);
    const auto scenario = harness::build_scenario(cfg);
    const fs::path out = o.out.empty() ? fs::path(".") : fs::path(o.out);
    fs::create_directories(out);
    harness::write_contact_plan_csv(out / "contact_plan.csv", scenario.plan);
    harness::write_partitions_jsonl(out / "partitions.jsonl", scenario.plan);
    std::cout << scenario.plan.snapshots().size() << " samples, " << scenario.plan.windows().size()
              << " contact windows -> " << (out / "contact_plan.csv").string() << ", "
              << (out / "partitions.jsonl").string() << "\n";
    return 0;
}

int train(const Options& o) {
    const auto cfg = load(o);
    const fs::path out = o.out.empty() ? fs::path("run") : fs::path(o.out);
    const auto result = harness::run_experiment(cfg, out);
    std::cout << result.report.name << ": " << result.report.rounds.size() << " rounds -> " << out.string() << "\n";
    for (const auto& [name, v] : result.report.summary()) {
        std::cout << "  " << name << (name == "comm_time_s" ? " avg/total " : " avg/final ") << v.first << " / "
                  << v.second << "\n";
    }
    return 0;
}

int compare(const Options& o) {
    std::vector<harness::MetricsReport> reports;
    for (const auto& r : o.reports) {
        fs::path p(r);
        if (fs::is_directory(p)) {
            p /= "report.json";
        }
        std::ifstream in(p);
        if (!in) {
            throw harness::ConfigError("reports", "cannot open " + p.string());
        }
        reports.push_back(harness::report_from_json(json::parse(in)));
    }
    const auto table = harness::compare_runs(reports);
    std::cout << harness::render_markdown(table);
    if (!o.out.empty()) {
        fs::create_directories(o.out);
        harness::write_comparison_csv(fs::path(o.out) / "comparison.csv", table);
    }
    return 0;
}

int qkd_demo(const Options& o) {
    double sample_fraction = 0.25;
    double threshold = 0.10;
    std::uint64_t seed = o.seed.value_or(1);
    if (!o.config.empty()) {
        const auto cfg = load(o);
        sample_fraction = cfg.transport.sample_fraction;
        threshold = cfg.transport.qber_threshold;
        seed = cfg.seed;
    }
    security::ChannelModel channel;
    channel.adversary = o.eve ? security::Adversary::InterceptResend : security::Adversary::None;
    Rng rng(seed);
    const auto t = security::run_bb84(o.qubits, channel, sample_fraction, threshold, rng);
    json j;
    j["qubits"] = o.qubits;
    j["adversary"] = o.eve ? "intercept_resend" : "none";
    j["sender_bits"] = bit_string(t.sender_bits);
    j["sender_bases"] = basis_string(t.sender_bases);
    j["receiver_bases"] = basis_string(t.receiver_bases);
    j["receiver_results"] = bit_string(t.receiver_results);
    j["sifted_positions"] = t.sifted_positions;
    j["disclosed_positions"] = t.disclosed_positions;
    j["sample_errors"] = t.sample_errors;
    j["qber"] = t.qber;
    j["qber_threshold"] = threshold;
    j["aborted"] = t.aborted;
    j["sender_key"] = bit_string(t.sender_key.bits);
    j["receiver_key"] = bit_string(t.receiver_key.bits);
    j["keys_match"] = t.sender_key.bits == t.receiver_key.bits;
    emit(o, "qkd_transcript.jsonl", j.dump() + "\n");
    return 0;
}

int teleport_demo(const Options& o) {
    Rng rng(o.seed.value_or(1));
    const double theta = o.theta.value_or(rng.uniform() * std::numbers::pi);
    const double phi = o.phi.value_or((2.0 * rng.uniform() - 1.0) * std::numbers::pi);
    const auto r = security::teleport(theta, phi, rng);
    json j;
    j["theta"] = theta;
    j["phi"] = phi;
    j["classical_bits"] = r.classical_bits;
    j["recovered"] = {{"theta", r.theta}, {"phi", r.phi}};
    j["fidelity"] = r.fidelity;
    j["inverse_check_p0"] = r.inverse_check_p0;
    j["receiver_bloch"] = {r.receiver_bloch.x, r.receiver_bloch.y, r.receiver_bloch.z};
    j["receiver_measurement"] = r.receiver_bit;
    emit(o, "teleport_transcript.jsonl", j.dump() + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Secure quantum federated learning over LEO satellite constellations"};
    app.require_subcommand(1);
    Options o;

    const auto common = [&](CLI::App* sub, bool needs_config) {
        auto* cfg = sub->add_option("--config", o.config, "Scenario config (JSON)");
        if (needs_config) {
            cfg->required();
        }
        sub->add_option("--seed", o.seed, "Override the config seed");
        sub->add_option("--out", o.out, "Output directory");
    };

    auto* sim = app.add_subcommand("simulate-access", "TLE + stations -> contact plan CSV and partition JSONL");
    common(sim, true);
    sim->add_option("--mode", o.mode, "Ignored; accepted for uniformity");
    sim->add_option("--security", o.security, "Ignored; accepted for uniformity");

    auto* tr = app.add_subcommand("train", "Run a full federated training experiment");
    common(tr, true);
    tr->add_option("--mode", o.mode, "sequential | simultaneous | async");
    tr->add_option("--security", o.security, "plaintext | otp | aead | teleport_partial(i)");

    auto* cmp = app.add_subcommand("compare", "Compare report.json files side by side");
    cmp->add_option("reports", o.reports, "report.json files or run directories")->required()->expected(2, -1);
    cmp->add_option("--out", o.out, "Directory for comparison.csv");

    auto* qkd = app.add_subcommand("qkd-demo", "Run one BB84 session and print its transcript");
    common(qkd, false);
    qkd->add_option("--qubits", o.qubits, "Qubits sent")->check(CLI::Range(16, 1 << 20));
    qkd->add_flag("--eve", o.eve, "Insert an intercept-resend eavesdropper");

    auto* tel = app.add_subcommand("teleport-demo", "Teleport one U(theta, phi, 0)|0> state");
    common(tel, false);
    tel->add_option("--theta", o.theta, "Polar angle (rad)");
    tel->add_option("--phi", o.phi, "Azimuthal angle (rad)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (sim->parsed()) {
            return simulate_access(o);
        }
        if (tr->parsed()) {
            return train(o);
        }
        if (cmp->parsed()) {
            return compare(o);
        }
        if (qkd->parsed()) {
            return qkd_demo(o);
        }
        return teleport_demo(o);
    } catch (const harness::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
