#include "satqfl/quantumsim.hpp"

#include <bit>
#include <cmath>
#include <string>

namespace satqfl::quantum {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

}  // namespace

Matrix2 u_matrix(double theta, double phi, double lambda) {
    const double c = std::cos(theta / 2.0);
    const double s = std::sin(theta / 2.0);
    return {{{Amplitude{c, 0.0}, -std::polar(s, lambda)},
             {std::polar(s, phi), std::polar(c, phi + lambda)}}};
}

Gate inverse(const Gate& g) {
    if (g.kind == GateKind::U) {
        return Gate::u(g.targets.at(0), -g.theta, -g.lambda, -g.phi);
    }
    return g;  // H, X, Z and CNOT are self-inverse
}

Statevector::Statevector(int n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw SizeError("qubit count " + std::to_string(n_qubits) + " outside [1, " +
                        std::to_string(kMaxQubits) + "]");
    }
    amps_.assign(std::size_t{1} << n_qubits, Amplitude{0.0, 0.0});
    amps_[0] = 1.0;
}

Statevector Statevector::from_amplitudes(std::vector<Amplitude> amplitudes) {
    const auto size = amplitudes.size();
    if (size < 2 || (size & (size - 1)) != 0) {
        throw SizeError("amplitude count must be a power of two >= 2");
    }
    Statevector state(std::countr_zero(size));
    state.amps_ = std::move(amplitudes);
    return state;
}

double Statevector::norm_squared() const {
    double total = 0.0;
    for (const auto& a : amps_) {
        total += std::norm(a);
    }
    return total;
}

void Statevector::check_qubit(int q) const {
    if (q < 0 || q >= n_qubits_) {
        throw TargetError("qubit index " + std::to_string(q) + " out of range for " +
                          std::to_string(n_qubits_) + " qubits");
    }
}

void Statevector::apply_single(int qubit, const Matrix2& m) {
    check_qubit(qubit);
    const std::size_t stride = std::size_t{1} << qubit;
    for (std::size_t base = 0; base < amps_.size(); base += 2 * stride) {
        for (std::size_t i = base; i < base + stride; ++i) {
            const Amplitude a0 = amps_[i];
            const Amplitude a1 = amps_[i + stride];
            amps_[i] = m[0][0] * a0 + m[0][1] * a1;
            amps_[i + stride] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

void Statevector::apply(const Gate& g) {
    const std::size_t expected = g.kind == GateKind::CNOT ? 2 : 1;
    if (g.targets.size() != expected) {
        throw TargetError("gate expects " + std::to_string(expected) + " target(s)");
    }
    for (const int q : g.targets) {
        check_qubit(q);
    }
    switch (g.kind) {
        case GateKind::H: {
            const std::size_t stride = std::size_t{1} << g.targets[0];
            for (std::size_t base = 0; base < amps_.size(); base += 2 * stride) {
                for (std::size_t i = base; i < base + stride; ++i) {
                    const Amplitude a0 = amps_[i];
                    const Amplitude a1 = amps_[i + stride];
                    amps_[i] = (a0 + a1) * kInvSqrt2;
                    amps_[i + stride] = (a0 - a1) * kInvSqrt2;
                }
            }
            break;
        }
        case GateKind::X: {
            const std::size_t mask = std::size_t{1} << g.targets[0];
            for (std::size_t i = 0; i < amps_.size(); ++i) {
                if ((i & mask) == 0) {
                    std::swap(amps_[i], amps_[i | mask]);
                }
            }
            break;
        }
        case GateKind::Z: {
            const std::size_t mask = std::size_t{1} << g.targets[0];
            for (std::size_t i = 0; i < amps_.size(); ++i) {
                if (i & mask) {
                    amps_[i] = -amps_[i];
                }
            }
            break;
        }
        case GateKind::CNOT: {
            if (g.targets[0] == g.targets[1]) {
                throw TargetError("CNOT control and target must differ");
            }
            const std::size_t control = std::size_t{1} << g.targets[0];
            const std::size_t target = std::size_t{1} << g.targets[1];
            for (std::size_t i = 0; i < amps_.size(); ++i) {
                if ((i & control) && !(i & target)) {
                    std::swap(amps_[i], amps_[i | target]);
                }
            }
            break;
        }
        case GateKind::U:
            apply_single(g.targets[0], u_matrix(g.theta, g.phi, g.lambda));
            break;
    }
}

double Statevector::probability_one(int qubit) const {
    check_qubit(qubit);
    const std::size_t mask = std::size_t{1} << qubit;
    double p = 0.0;
    for (std::size_t i = 0; i < amps_.size(); ++i) {
        if (i & mask) {
            p += std::norm(amps_[i]);
        }
    }
    return p;
}

void Statevector::project(int qubit, int bit) {
    check_qubit(qubit);
    const std::size_t mask = std::size_t{1} << qubit;
    const double p_one = probability_one(qubit);
    const double p = bit ? p_one : 1.0 - p_one;
    if (p <= 0.0) {
        throw std::domain_error("projection onto a zero-probability outcome");
    }
    const double scale = 1.0 / std::sqrt(p);
    for (std::size_t i = 0; i < amps_.size(); ++i) {
        const bool is_one = (i & mask) != 0;
        amps_[i] = (is_one == (bit != 0)) ? amps_[i] * scale : Amplitude{0.0, 0.0};
    }
}

Statevector new_state(int n) { return Statevector(n); }

Statevector apply(Statevector state, const Gate& g) {
    state.apply(g);
    return state;
}

std::pair<int, Statevector> measure(Statevector state, int qubit, Rng& rng) {
    const double p_one = state.probability_one(qubit);
    const int bit = rng.uniform() < p_one ? 1 : 0;
    state.project(qubit, bit);
    return {bit, std::move(state)};
}

double expectation_z(const Statevector& state, int qubit) { return 1.0 - 2.0 * state.probability_one(qubit); }

std::vector<double> expectation_z_all(const Statevector& state) {
    const int n = state.qubits();
    std::vector<double> z(static_cast<std::size_t>(n), 0.0);
    const auto amps = state.amplitudes();
    for (std::size_t i = 0; i < amps.size(); ++i) {
        const double p = std::norm(amps[i]);
        for (int q = 0; q < n; ++q) {
            z[static_cast<std::size_t>(q)] += (i >> q) & 1U ? -p : p;
        }
    }
    return z;
}

BlochVector bloch_vector(const Statevector& state, int qubit) {
    if (qubit < 0 || qubit >= state.qubits()) {
        throw TargetError("qubit index out of range");
    }
    // rho_01 = sum over pairs (i with bit 0, j = i | mask) of a_i conj(a_j).
    const std::size_t mask = std::size_t{1} << qubit;
    const auto amps = state.amplitudes();
    Amplitude rho01{0.0, 0.0};
    double p0 = 0.0;
    double p1 = 0.0;
    for (std::size_t i = 0; i < amps.size(); ++i) {
        if (i & mask) {
            p1 += std::norm(amps[i]);
        } else {
            p0 += std::norm(amps[i]);
            rho01 += amps[i] * std::conj(amps[i | mask]);
        }
    }
    return {2.0 * rho01.real(), -2.0 * rho01.imag(), p0 - p1};
}

double fidelity(const Statevector& a, const Statevector& b) {
    if (a.qubits() != b.qubits()) {
        throw SizeError("fidelity: qubit counts differ");
    }
    Amplitude overlap{0.0, 0.0};
    const auto x = a.amplitudes();
    const auto y = b.amplitudes();
    for (std::size_t i = 0; i < x.size(); ++i) {
        overlap += std::conj(x[i]) * y[i];
    }
    return std::norm(overlap);
}

}  // namespace satqfl::quantum
