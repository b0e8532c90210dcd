#include "satqfl/qfl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>
#include <tuple>

#include "satqfl/quantumsim.hpp"
#include "satqfl/security.hpp"

namespace satqfl::qfl {

namespace {

constexpr double kProbabilityFloor = 1e-12;
constexpr double kShift = std::numbers::pi / 2.0;

void check_inputs(const ModelShape& shape, std::span<const double> angles, std::span<const double> features) {
    if (angles.size() != shape.param_count()) {
        throw ShapeError("expected " + std::to_string(shape.param_count()) + " angles, got " +
                         std::to_string(angles.size()));
    }
    if (features.size() != static_cast<std::size_t>(shape.qubits)) {
        throw ShapeError("expected " + std::to_string(shape.qubits) + " features, got " +
                         std::to_string(features.size()));
    }
}

std::vector<double> run_circuit(const ModelShape& shape, std::span<const double> angles,
                                std::span<const double> features) {
    const int f = shape.qubits;
    quantum::Statevector s(f);
    for (int q = 0; q < f; ++q) {
        s.apply_single(q, quantum::u_matrix(features[static_cast<std::size_t>(q)], 0.0, 0.0));
    }
    for (int layer = 0; layer < shape.layers; ++layer) {
        for (int q = 0; q < f; ++q) {
            const auto k = static_cast<std::size_t>((layer * f + q) * 3);
            s.apply_single(q, quantum::u_matrix(angles[k], angles[k + 1], angles[k + 2]));
        }
        if (f == 2) {
            s.apply(quantum::Gate::cnot(0, 1));
        } else if (f > 2) {
            for (int q = 0; q < f; ++q) {
                s.apply(quantum::Gate::cnot(q, (q + 1) % f));
            }
        }
    }
    return quantum::expectation_z_all(s);
}

int class_qubit(const ModelShape& shape, int c) { return c % shape.qubits; }
double class_sign(const ModelShape& shape, int c) { return (c / shape.qubits) % 2 == 0 ? 1.0 : -1.0; }

std::vector<double> softmax_scores(const ModelShape& shape, std::span<const double> z) {
    std::vector<double> scores(static_cast<std::size_t>(shape.classes));
    for (int c = 0; c < shape.classes; ++c) {
        scores[static_cast<std::size_t>(c)] =
            shape.readout_scale * z[static_cast<std::size_t>(class_qubit(shape, c))] * class_sign(shape, c);
    }
    const double top = *std::max_element(scores.begin(), scores.end());
    double total = 0.0;
    for (auto& v : scores) {
        v = std::exp(v - top);
        total += v;
    }
    for (auto& v : scores) {
        v /= total;
    }
    return scores;
}

}  // namespace

void ModelShape::validate() const {
    if (qubits < 1 || qubits > quantum::kMaxQubits) {
        throw ShapeError("qubit count must lie in [1, " + std::to_string(quantum::kMaxQubits) + "]");
    }
    if (layers < 1) {
        throw ShapeError("layer count must be >= 1");
    }
    if (classes < 2 || classes > 2 * qubits) {
        throw ShapeError("class count must lie in [2, 2 * qubits]");
    }
    if (!(readout_scale > 0.0) || !std::isfinite(readout_scale)) {
        throw ShapeError("readout scale must be positive");
    }
}

std::vector<double> z_expectations(const ModelShape& shape, std::span<const double> angles,
                                   std::span<const double> features) {
    check_inputs(shape, angles, features);
    return run_circuit(shape, angles, features);
}

std::vector<double> z_jacobian(const ModelShape& shape, std::span<const double> angles,
                               std::span<const double> features) {
    check_inputs(shape, angles, features);
    const auto d = angles.size();
    const auto f = static_cast<std::size_t>(shape.qubits);
    std::vector<double> jac(d * f, 0.0);
    std::vector<double> shifted(angles.begin(), angles.end());
    for (std::size_t k = 0; k < d; ++k) {
        shifted[k] = angles[k] + kShift;
        const auto plus = run_circuit(shape, shifted, features);
        shifted[k] = angles[k] - kShift;
        const auto minus = run_circuit(shape, shifted, features);
        shifted[k] = angles[k];
        for (std::size_t q = 0; q < f; ++q) {
            jac[k * f + q] = (plus[q] - minus[q]) / 2.0;
        }
    }
    return jac;
}

std::vector<double> predict(const ModelShape& shape, std::span<const double> angles,
                            std::span<const double> features) {
    return softmax_scores(shape, z_expectations(shape, angles, features));
}

int predict_label(const ModelShape& shape, std::span<const double> angles, std::span<const double> features) {
    const auto p = predict(shape, angles, features);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

double loss(const ModelShape& shape, std::span<const double> angles, std::span<const Example> data) {
    if (data.empty()) {
        throw std::invalid_argument("loss: empty dataset");
    }
    double total = 0.0;
    for (const auto& ex : data) {
        const auto p = predict(shape, angles, ex.features);
        total -= std::log(std::max(p.at(static_cast<std::size_t>(ex.label)), kProbabilityFloor));
    }
    return total / static_cast<double>(data.size());
}

std::vector<double> gradient(const ModelShape& shape, std::span<const double> angles,
                             std::span<const Example> batch) {
    std::vector<double> grad(angles.size(), 0.0);
    if (angles.empty()) {
        return grad;
    }
    if (batch.empty()) {
        throw std::invalid_argument("gradient: empty batch");
    }
    const auto f = static_cast<std::size_t>(shape.qubits);
    for (const auto& ex : batch) {
        const auto z = z_expectations(shape, angles, ex.features);
        const auto p = softmax_scores(shape, z);
        const auto label = static_cast<std::size_t>(ex.label);
        // The floor clamps the loss flat below 1e-12, so its derivative vanishes there.
        if (p.at(label) < kProbabilityFloor) {
            continue;
        }
        std::vector<double> dz(f, 0.0);
        for (int c = 0; c < shape.classes; ++c) {
            const auto uc = static_cast<std::size_t>(c);
            const double dscore = p[uc] - (uc == label ? 1.0 : 0.0);
            dz[static_cast<std::size_t>(class_qubit(shape, c))] +=
                dscore * shape.readout_scale * class_sign(shape, c);
        }
        const auto jac = z_jacobian(shape, angles, ex.features);
        for (std::size_t k = 0; k < angles.size(); ++k) {
            double g = 0.0;
            for (std::size_t q = 0; q < f; ++q) {
                g += dz[q] * jac[k * f + q];
            }
            grad[k] += g;
        }
    }
    for (auto& g : grad) {
        g /= static_cast<double>(batch.size());
    }
    return grad;
}

double accuracy(const ModelShape& shape, std::span<const double> angles, std::span<const Example> data) {
    if (data.empty()) {
        return 0.0;
    }
    std::size_t hits = 0;
    for (const auto& ex : data) {
        hits += predict_label(shape, angles, ex.features) == ex.label ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

ModelParams local_train(const ModelShape& shape, const ModelParams& start, const LocalDataset& data,
                        const TrainOptions& options, Rng& rng, UtcTime completed_at) {
    if (options.learning_rate < 0.0 || options.batch_size < 1 || options.epochs < 0) {
        throw std::invalid_argument("local_train: invalid options");
    }
    ModelParams out = start;
    out.version = start.version + 1;
    out.origin = data.owner;
    out.produced_at = completed_at;
    if (data.examples.empty()) {
        return out;
    }
    std::vector<std::size_t> order(data.examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto batch = static_cast<std::size_t>(options.batch_size);
    std::vector<Example> chunk;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t first = 0; first < order.size(); first += batch) {
            chunk.clear();
            for (std::size_t i = first; i < std::min(first + batch, order.size()); ++i) {
                chunk.push_back(data.examples[order[i]]);
            }
            const auto g = gradient(shape, out.angles, chunk);
            for (std::size_t k = 0; k < g.size(); ++k) {
                out.angles[k] -= options.learning_rate * g[k];
            }
        }
    }
    return out;
}

ModelParams fed_avg(std::span<const WeightedUpdate> updates) {
    if (updates.empty()) {
        throw EmptyAggregation("fed_avg over an empty update list");
    }
    std::vector<const WeightedUpdate*> sorted;
    sorted.reserve(updates.size());
    double total = 0.0;
    for (const auto& u : updates) {
        if (!(u.weight >= 0.0) || !std::isfinite(u.weight)) {
            throw std::invalid_argument("fed_avg: weights must be finite and non-negative");
        }
        if (u.params.angles.size() != updates.front().params.angles.size()) {
            throw ShapeError("fed_avg: parameter vectors differ in length");
        }
        sorted.push_back(&u);
    }
    std::sort(sorted.begin(), sorted.end(), [](const WeightedUpdate* a, const WeightedUpdate* b) {
        return std::tie(a->params.origin, a->params.version, a->params.angles, a->weight) <
               std::tie(b->params.origin, b->params.version, b->params.angles, b->weight);
    });
    // The total is folded in canonical order too, or it would carry the input order.
    for (const auto* u : sorted) {
        total += u->weight;
    }
    if (!(total > 0.0)) {
        throw std::invalid_argument("fed_avg: weights sum to zero");
    }
    // Summing offsets from the first vector keeps identical inputs exactly fixed.
    const auto& base = sorted.front()->params.angles;
    ModelParams out;
    out.angles = base;
    std::vector<double> offset(base.size(), 0.0);
    for (const auto* u : sorted) {
        const double w = u->weight / total;
        for (std::size_t k = 0; k < base.size(); ++k) {
            offset[k] += w * (u->params.angles[k] - base[k]);
        }
        out.version = std::max(out.version, u->params.version);
        out.produced_at = std::max(out.produced_at, u->params.produced_at);
    }
    for (std::size_t k = 0; k < base.size(); ++k) {
        out.angles[k] += offset[k];
    }
    out.version += 1;
    out.origin = -1;
    return out;
}

ModelParams fed_avg(std::span<const ModelParams> updates) {
    std::vector<WeightedUpdate> weighted;
    weighted.reserve(updates.size());
    for (const auto& p : updates) {
        weighted.push_back({p, 1.0});
    }
    return fed_avg(weighted);
}

std::vector<double> random_angles(const ModelShape& shape, Rng& rng) {
    std::vector<double> out(shape.param_count());
    for (auto& a : out) {
        a = (2.0 * rng.uniform() - 1.0) * std::numbers::pi;
    }
    return out;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                           static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    os.write(bytes, 4);
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
    return std::uint32_t{b[at]} | (std::uint32_t{b[at + 1]} << 8) | (std::uint32_t{b[at + 2]} << 16) |
           (std::uint32_t{b[at + 3]} << 24);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelShape& shape, std::span<const double> angles) {
    if (angles.size() != shape.param_count()) {
        throw ShapeError("checkpoint: angle count does not match the shape");
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    put_u32(os, static_cast<std::uint32_t>(angles.size()));
    put_u32(os, static_cast<std::uint32_t>(shape.qubits));
    put_u32(os, static_cast<std::uint32_t>(shape.layers));
    put_u32(os, static_cast<std::uint32_t>(shape.classes));
    const auto body = security::serialize_params(angles);
    os.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw std::runtime_error("cannot open " + path.string());
    }
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (bytes.size() < 16) {
        throw ShapeError("checkpoint truncated");
    }
    Checkpoint cp;
    const auto d = get_u32(bytes, 0);
    cp.shape.qubits = static_cast<int>(get_u32(bytes, 4));
    cp.shape.layers = static_cast<int>(get_u32(bytes, 8));
    cp.shape.classes = static_cast<int>(get_u32(bytes, 12));
    if (d != cp.shape.param_count() || bytes.size() != 16 + 2 * std::size_t{d}) {
        throw ShapeError("checkpoint header does not match its body");
    }
    cp.angles = security::deserialize_params(std::span<const std::uint8_t>(bytes).subspan(16));
    return cp;
}

}  // namespace satqfl::qfl
