#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "satqfl/common.hpp"
#include "satqfl/quantumsim.hpp"

namespace satqfl::security {

// ---------------------------------------------------------------------------
// Fixed-point parameter codec. Angles are wrapped into [-2pi, 2pi) (U gates are
// 4pi-periodic up to global phase) and stored as 16-bit little-endian integers.
// The same byte layout backs plaintext frames, cipher envelopes and checkpoints.

inline constexpr int kQuantBits = 16;
inline constexpr double kQuantRangeLow = -2.0 * std::numbers::pi;
inline constexpr double kQuantSpan = 4.0 * std::numbers::pi;

std::uint16_t quantize_angle(double angle);
double dequantize_angle(std::uint16_t code);
std::vector<double> quantize_params(std::span<const double> angles);
std::vector<std::uint8_t> serialize_params(std::span<const double> angles);
std::vector<double> deserialize_params(std::span<const std::uint8_t> bytes);

// ---------------------------------------------------------------------------
// Errors

class SecurityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class QkdAbort : public SecurityError {
public:
    explicit QkdAbort(double qber);
    double qber() const noexcept { return qber_; }

private:
    double qber_;
};

class InsufficientKey : public SecurityError {
public:
    using SecurityError::SecurityError;
};

class AuthFailure : public SecurityError {
public:
    using SecurityError::SecurityError;
};

class LengthMismatch : public SecurityError {
public:
    using SecurityError::SecurityError;
};

class WeakKey : public SecurityError {
public:
    using SecurityError::SecurityError;
};

class TeleportError : public SecurityError {
public:
    using SecurityError::SecurityError;
};

class EnvelopeFormatError : public SecurityError {
public:
    using SecurityError::SecurityError;
};

/// Reusing a one-time pad is a programming error, not a recoverable condition.
class KeyReuseError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// ---------------------------------------------------------------------------
// BB84

enum class Basis : std::uint8_t { Z = 0, X = 1 };
enum class Adversary { None, InterceptResend };

struct ChannelModel {
    Adversary adversary = Adversary::None;
};

struct SiftedKey {
    std::vector<std::uint8_t> bits;  // one bit per element
    int source_qubits = 0;
    double sample_qber = 0.0;
};

struct Bb84Transcript {
    std::vector<std::uint8_t> sender_bits;
    std::vector<Basis> sender_bases;
    std::vector<Basis> receiver_bases;
    std::vector<std::uint8_t> receiver_results;
    std::vector<std::size_t> sifted_positions;
    std::vector<std::size_t> disclosed_positions;
    int sample_errors = 0;
    double qber = 0.0;
    bool aborted = false;
    SiftedKey sender_key;
    SiftedKey receiver_key;
};

/// n random bits obtained by measuring H|0> on the statevector simulator.
std::vector<std::uint8_t> quantum_random_bits(std::size_t n, Rng& rng);

/// Prepares each bit in the sender's basis, passes it through the channel and
/// measures it in the receiver's basis.
std::vector<std::uint8_t> transmit_qubits(std::span<const std::uint8_t> bits,
                                          std::span<const Basis> sender_bases,
                                          std::span<const Basis> receiver_bases, const ChannelModel& channel,
                                          Rng& rng);

/// Positions (0-based) where the two basis strings agree.
std::vector<std::size_t> sift(std::span<const Basis> sender_bases, std::span<const Basis> receiver_bases);

/// Full protocol run that never throws on a high QBER; `aborted` records the verdict
/// and an aborted run keeps no key material.
Bb84Transcript run_bb84(int n, const ChannelModel& channel, double sample_fraction, double qber_threshold,
                        Rng& rng);

struct KeyPair {
    SiftedKey sender;
    SiftedKey receiver;
};

/// Throws QkdAbort when the sampled QBER exceeds the threshold and
/// InsufficientKey when fewer than 8 bits survive sifting.
KeyPair qkd_establish(int n, const ChannelModel& channel, double sample_fraction, double qber_threshold,
                      Rng& rng);

// ---------------------------------------------------------------------------
// Keys

using AeadKey = std::array<std::uint8_t, 32>;

/// One-time pad material; may be consumed exactly once.
class OtpKey {
public:
    explicit OtpKey(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}
    OtpKey(const OtpKey&) = delete;
    OtpKey& operator=(const OtpKey&) = delete;
    OtpKey(OtpKey&&) noexcept = default;
    OtpKey& operator=(OtpKey&&) noexcept = default;

    std::size_t size() const noexcept { return bytes_.size(); }
    bool spent() const noexcept { return spent_; }
    std::span<const std::uint8_t> peek() const noexcept { return bytes_; }
    std::vector<std::uint8_t> consume();

private:
    std::vector<std::uint8_t> bytes_;
    bool spent_ = false;
};

/// Sifted key bits handed out front to back; consumed bits never come back.
class KeyPool {
public:
    explicit KeyPool(SiftedKey key) : key_(std::move(key)) {}

    std::size_t remaining_bits() const noexcept { return key_.bits.size() - cursor_; }
    const SiftedKey& key() const noexcept { return key_; }

    /// Next 8*message_len bits packed MSB-first; throws InsufficientKey.
    OtpKey take_otp(std::size_t message_len);

private:
    SiftedKey key_;
    std::size_t cursor_ = 0;
};

std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> bits);

/// RFC 5869 HKDF with HMAC-SHA256.
std::vector<std::uint8_t> hkdf_sha256(std::span<const std::uint8_t> salt, std::span<const std::uint8_t> ikm,
                                      std::span<const std::uint8_t> info, std::size_t length);

AeadKey derive_aead_key(const SiftedKey& key);

/// Rejects all-zero pads of 16 bytes or more.
void check_key_randomness(std::span<const std::uint8_t> key);

// ---------------------------------------------------------------------------
// Envelope
//
// Binary layout: scheme tag (1) | param_count (4, big-endian) | quantization bits (2,
// big-endian) | nonce (12, AEAD only) | ciphertext | tag (16, AEAD only).

enum class Scheme : std::uint8_t { Otp = 1, Aead = 2 };

inline constexpr std::size_t kEnvelopeHeaderBytes = 7;
inline constexpr std::size_t kNonceBytes = 12;
inline constexpr std::size_t kTagBytes = 16;

struct CipherEnvelope {
    Scheme scheme = Scheme::Otp;
    std::uint32_t param_count = 0;
    std::uint16_t quantization = kQuantBits;
    std::vector<std::uint8_t> nonce;
    std::vector<std::uint8_t> ciphertext;
    std::vector<std::uint8_t> tag;

    std::vector<std::uint8_t> serialize() const;
    static CipherEnvelope parse(std::span<const std::uint8_t> bytes);
    std::size_t wire_size() const;
};

using Nonce = std::array<std::uint8_t, kNonceBytes>;

/// 4 zero bytes followed by the big-endian message counter.
Nonce counter_nonce(std::uint64_t counter);

CipherEnvelope encrypt_otp(std::span<const double> params, OtpKey& key);
std::vector<double> decrypt_otp(const CipherEnvelope& env, OtpKey& key);

CipherEnvelope encrypt_aead(std::span<const double> params, const AeadKey& key, const Nonce& nonce);
/// Verifies the tag before releasing any plaintext; throws AuthFailure.
std::vector<double> decrypt_aead(const CipherEnvelope& env, const AeadKey& key);

// ---------------------------------------------------------------------------
// Teleportation

struct TeleportResult {
    std::array<int, 2> classical_bits{};  // {cr[0] from Q, cr[1] from A}
    double theta = 0.0;                   // recovered
    double phi = 0.0;
    double fidelity = 0.0;
    double inverse_check_p0 = 0.0;  // P(|0>) after U(theta, phi, 0)^dagger on B
    quantum::BlochVector receiver_bloch;
    int receiver_bit = 0;  // final measurement of B into cr[2]
};

/// Three-qubit teleportation of U(theta, phi, 0)|0> from Q to B (Q=0, A=1, B=2).
TeleportResult teleport(double theta, double phi, Rng& rng);

/// Same circuit with the sender's measurement outcomes forced to {cr0, cr1}.
TeleportResult teleport_branch(double theta, double phi, int cr0, int cr1, Rng& rng);

// ---------------------------------------------------------------------------
// Parameter transfer

struct TransferMode {
    int teleport_count = 0;  // leading parameters sent by teleportation

    static TransferMode full() { return {0}; }
    static TransferMode partial(int i) { return {i}; }
};

struct TransferOptions {
    Scheme scheme = Scheme::Otp;
    ChannelModel channel;
    double sample_fraction = 0.25;
    double qber_threshold = 0.10;
    int aead_qkd_qubits = 256;
    std::uint64_t nonce_counter = 0;
};

struct TransferTranscript {
    std::vector<double> sent;      // quantized input
    std::vector<double> received;
    int teleport_count = 0;
    std::vector<TeleportResult> teleports;
    int qkd_qubits = 0;
    double qber = 0.0;
    std::size_t key_bits = 0;
    std::size_t envelope_bytes = 0;
    Scheme scheme = Scheme::Otp;
};

/// Qubits requested from QKD so that an OTP over `message_len` bytes is covered
/// with margin after sifting and QBER disclosure.
int otp_qkd_qubits(std::size_t message_len, double sample_fraction);

/// Sends params end to end: QKD keying, envelope for the encrypted part, pairwise
/// teleportation of the leading `mode.teleport_count` parameters. Throws QkdAbort
/// (nothing is released) when eavesdropping is detected.
TransferTranscript transfer_params(std::span<const double> params, TransferMode mode,
                                   const TransferOptions& options, Rng& rng);

}  // namespace satqfl::security
