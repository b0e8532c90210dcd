#pragma once

#include <array>
#include <complex>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "satqfl/common.hpp"

namespace satqfl::quantum {

using Amplitude = std::complex<double>;
using Matrix2 = std::array<std::array<Amplitude, 2>, 2>;

inline constexpr int kMaxQubits = 12;

class SizeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class TargetError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class GateKind { H, X, Z, CNOT, U };

/// For CNOT, targets = {control, target}. U carries (theta, phi, lambda).
struct Gate {
    GateKind kind = GateKind::H;
    std::vector<int> targets;
    double theta = 0.0;
    double phi = 0.0;
    double lambda = 0.0;

    static Gate h(int q) { return {GateKind::H, {q}}; }
    static Gate x(int q) { return {GateKind::X, {q}}; }
    static Gate z(int q) { return {GateKind::Z, {q}}; }
    static Gate cnot(int control, int target) { return {GateKind::CNOT, {control, target}}; }
    static Gate u(int q, double theta, double phi, double lambda) {
        return {GateKind::U, {q}, theta, phi, lambda};
    }
};

/// U(theta, phi, lambda) = [[cos t/2, -e^{i l} sin t/2], [e^{i p} sin t/2, e^{i(p+l)} cos t/2]].
Matrix2 u_matrix(double theta, double phi, double lambda);

/// Gate whose unitary is the adjoint of g's.
Gate inverse(const Gate& g);

/// Dense n-qubit pure state. Qubit 0 is the least significant bit of the basis index.
class Statevector {
public:
    explicit Statevector(int n_qubits);

    static Statevector from_amplitudes(std::vector<Amplitude> amplitudes);

    int qubits() const noexcept { return n_qubits_; }
    std::span<const Amplitude> amplitudes() const noexcept { return amps_; }
    double norm_squared() const;

    void apply(const Gate& g);
    void apply_single(int qubit, const Matrix2& m);

    /// Marginal probability that `qubit` reads 1.
    double probability_one(int qubit) const;

    /// Collapses `qubit` onto `bit` and renormalizes. Throws std::domain_error when
    /// the outcome has zero probability.
    void project(int qubit, int bit);

private:
    void check_qubit(int q) const;

    int n_qubits_;
    std::vector<Amplitude> amps_;
};

struct BlochVector {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

Statevector new_state(int n);
Statevector apply(Statevector state, const Gate& g);

/// Born-rule measurement; returns the bit and the collapsed state.
std::pair<int, Statevector> measure(Statevector state, int qubit, Rng& rng);

/// <Z> on `qubit`, i.e. P(0) - P(1).
double expectation_z(const Statevector& state, int qubit);

/// <Z> for every qubit in one pass over the amplitudes.
std::vector<double> expectation_z_all(const Statevector& state);

/// Bloch vector of the single-qubit reduced state.
BlochVector bloch_vector(const Statevector& state, int qubit);

/// |<a|b>|^2; insensitive to global phase.
double fidelity(const Statevector& a, const Statevector& b);

}  // namespace satqfl::quantum
