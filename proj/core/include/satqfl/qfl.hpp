#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "satqfl/common.hpp"

namespace satqfl::qfl {

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class EmptyAggregation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Variational classifier layout. Parameter k = ((layer * qubits + q) * 3 + j)
/// with j = 0, 1, 2 selecting (theta, phi, lambda) of that qubit's U gate.
struct ModelShape {
    int qubits = 4;
    int layers = 2;
    int classes = 2;
    /// Multiplies <Z> before the softmax; 1 keeps scores in [-1, 1].
    double readout_scale = 1.0;

    std::size_t param_count() const {
        return static_cast<std::size_t>(3 * qubits * layers);
    }
    void validate() const;
};

struct ModelParams {
    std::vector<double> angles;
    int version = 0;
    int origin = -1;  // satellite id, -1 for ground aggregates
    UtcTime produced_at;
};

struct Example {
    std::vector<double> features;
    int label = 0;
};

struct LocalDataset {
    std::vector<Example> examples;
    int owner = -1;
};

/// Per-qubit <Z> after encoding U(x_j, 0, 0) and `layers` rounds of rotations
/// plus a CNOT ring (j -> j+1 mod f for f > 2, a single CNOT for f = 2).
std::vector<double> z_expectations(const ModelShape& shape, std::span<const double> angles,
                                   std::span<const double> features);

/// d x f Jacobian of z_expectations by the parameter-shift rule, row-major by parameter.
std::vector<double> z_jacobian(const ModelShape& shape, std::span<const double> angles,
                               std::span<const double> features);

/// Class c scores readout_scale * <Z_{c mod f}> * (-1)^{floor(c / f)}; softmax over classes.
std::vector<double> predict(const ModelShape& shape, std::span<const double> angles,
                            std::span<const double> features);

int predict_label(const ModelShape& shape, std::span<const double> angles, std::span<const double> features);

/// Mean cross-entropy with probabilities floored at 1e-12.
double loss(const ModelShape& shape, std::span<const double> angles, std::span<const Example> data);

/// Exact gradient of `loss`: parameter-shift derivatives of each <Z_q> combined
/// through the softmax cross-entropy by the chain rule.
std::vector<double> gradient(const ModelShape& shape, std::span<const double> angles,
                             std::span<const Example> batch);

double accuracy(const ModelShape& shape, std::span<const double> angles, std::span<const Example> data);

struct TrainOptions {
    int epochs = 1;
    double learning_rate = 0.1;
    int batch_size = 16;
};

/// Mini-batch SGD; the batch order of each epoch is a shuffle drawn from `rng`.
ModelParams local_train(const ModelShape& shape, const ModelParams& start, const LocalDataset& data,
                        const TrainOptions& options, Rng& rng, UtcTime completed_at);

struct WeightedUpdate {
    ModelParams params;
    double weight = 1.0;
};

/// Componentwise weighted mean, folded in a canonical order (origin, version,
/// angles) so the result is independent of input order and exact on identical inputs.
ModelParams fed_avg(std::span<const WeightedUpdate> updates);

/// Equal-weight convenience overload.
ModelParams fed_avg(std::span<const ModelParams> updates);

/// Random angles in [-pi, pi).
std::vector<double> random_angles(const ModelShape& shape, Rng& rng);

struct Checkpoint {
    ModelShape shape;
    std::vector<double> angles;  // quantized
};

/// Header of four little-endian uint32 (d, f, L, class_count) then d 16-bit angles.
void save_checkpoint(const std::filesystem::path& path, const ModelShape& shape, std::span<const double> angles);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace satqfl::qfl
