#include "satqfl/security.hpp"

#include <sodium.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

namespace satqfl::security {

namespace {

constexpr std::uint32_t kCodeCount = 1U << kQuantBits;

void ensure_sodium() {
    static const bool ready = sodium_init() >= 0;
    if (!ready) {
        throw SecurityError("libsodium initialization failed");
    }
}

std::vector<std::uint8_t> header_bytes(Scheme scheme, std::uint32_t count, std::uint16_t quantization) {
    return {static_cast<std::uint8_t>(scheme),
            static_cast<std::uint8_t>(count >> 24),
            static_cast<std::uint8_t>(count >> 16),
            static_cast<std::uint8_t>(count >> 8),
            static_cast<std::uint8_t>(count),
            static_cast<std::uint8_t>(quantization >> 8),
            static_cast<std::uint8_t>(quantization)};
}

std::vector<std::uint8_t> hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data) {
    crypto_auth_hmacsha256_state state;
    crypto_auth_hmacsha256_init(&state, key.data(), key.size());
    crypto_auth_hmacsha256_update(&state, data.data(), data.size());
    std::vector<std::uint8_t> out(crypto_auth_hmacsha256_BYTES);
    crypto_auth_hmacsha256_final(&state, out.data());
    return out;
}

std::span<const std::uint8_t> as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

quantum::Statevector prepare_bb84(int bit, Basis basis) {
    quantum::Statevector q(1);
    if (bit) {
        q.apply(quantum::Gate::x(0));
    }
    if (basis == Basis::X) {
        q.apply(quantum::Gate::h(0));
    }
    return q;
}

int measure_bb84(quantum::Statevector q, Basis basis, Rng& rng) {
    if (basis == Basis::X) {
        q.apply(quantum::Gate::h(0));
    }
    return quantum::measure(std::move(q), 0, rng).first;
}

std::vector<Basis> random_bases(std::size_t n, Rng& rng) {
    const auto bits = quantum_random_bits(n, rng);
    std::vector<Basis> bases(n);
    std::transform(bits.begin(), bits.end(), bases.begin(), [](std::uint8_t b) { return Basis{b}; });
    return bases;
}

}  // namespace

// --- codec -----------------------------------------------------------------

std::uint16_t quantize_angle(double angle) {
    if (!std::isfinite(angle)) {
        throw std::invalid_argument("quantize_angle: non-finite angle");
    }
    double w = std::fmod(angle - kQuantRangeLow, kQuantSpan);
    if (w < 0.0) {
        w += kQuantSpan;
    }
    const auto q = std::llround(w * kCodeCount / kQuantSpan);
    return static_cast<std::uint16_t>(static_cast<std::uint64_t>(q) % kCodeCount);
}

double dequantize_angle(std::uint16_t code) { return code * kQuantSpan / kCodeCount + kQuantRangeLow; }

std::vector<double> quantize_params(std::span<const double> angles) {
    std::vector<double> out(angles.size());
    std::transform(angles.begin(), angles.end(), out.begin(),
                   [](double a) { return dequantize_angle(quantize_angle(a)); });
    return out;
}

std::vector<std::uint8_t> serialize_params(std::span<const double> angles) {
    std::vector<std::uint8_t> out;
    out.reserve(2 * angles.size());
    for (const double a : angles) {
        const auto q = quantize_angle(a);
        out.push_back(static_cast<std::uint8_t>(q & 0xFF));
        out.push_back(static_cast<std::uint8_t>(q >> 8));
    }
    return out;
}

std::vector<double> deserialize_params(std::span<const std::uint8_t> bytes) {
    if (bytes.size() % 2 != 0) {
        throw LengthMismatch("parameter byte string has odd length");
    }
    std::vector<double> out(bytes.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto q = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
        out[i] = dequantize_angle(q);
    }
    return out;
}

// --- BB84 ------------------------------------------------------------------

QkdAbort::QkdAbort(double qber)
    : SecurityError("QKD aborted: sampled QBER " + std::to_string(qber) + " exceeds threshold"), qber_(qber) {}

std::vector<std::uint8_t> quantum_random_bits(std::size_t n, Rng& rng) {
    std::vector<std::uint8_t> bits(n);
    for (auto& b : bits) {
        quantum::Statevector q(1);
        q.apply(quantum::Gate::h(0));
        b = static_cast<std::uint8_t>(quantum::measure(std::move(q), 0, rng).first);
    }
    return bits;
}

std::vector<std::uint8_t> transmit_qubits(std::span<const std::uint8_t> bits,
                                          std::span<const Basis> sender_bases,
                                          std::span<const Basis> receiver_bases, const ChannelModel& channel,
                                          Rng& rng) {
    if (bits.size() != sender_bases.size() || bits.size() != receiver_bases.size()) {
        throw std::invalid_argument("transmit_qubits: bit and basis strings differ in length");
    }
    std::vector<std::uint8_t> results(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        auto qubit = prepare_bb84(bits[i], sender_bases[i]);
        if (channel.adversary == Adversary::InterceptResend) {
            const Basis eve_basis = rng.bit() ? Basis::X : Basis::Z;
            const int eve_bit = measure_bb84(std::move(qubit), eve_basis, rng);
            qubit = prepare_bb84(eve_bit, eve_basis);
        }
        results[i] = static_cast<std::uint8_t>(measure_bb84(std::move(qubit), receiver_bases[i], rng));
    }
    return results;
}

std::vector<std::size_t> sift(std::span<const Basis> sender_bases, std::span<const Basis> receiver_bases) {
    if (sender_bases.size() != receiver_bases.size()) {
        throw std::invalid_argument("sift: basis strings differ in length");
    }
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < sender_bases.size(); ++i) {
        if (sender_bases[i] == receiver_bases[i]) {
            kept.push_back(i);
        }
    }
    return kept;
}

Bb84Transcript run_bb84(int n, const ChannelModel& channel, double sample_fraction, double qber_threshold,
                        Rng& rng) {
    if (n < 16) {
        throw std::invalid_argument("BB84 needs at least 16 qubits");
    }
    if (!(sample_fraction > 0.0 && sample_fraction < 1.0)) {
        throw std::invalid_argument("sample_fraction must lie in (0, 1)");
    }
    const auto count = static_cast<std::size_t>(n);
    Bb84Transcript t;
    t.sender_bits = quantum_random_bits(count, rng);
    t.sender_bases = random_bases(count, rng);
    t.receiver_bases = random_bases(count, rng);
    t.receiver_results = transmit_qubits(t.sender_bits, t.sender_bases, t.receiver_bases, channel, rng);
    t.sifted_positions = sift(t.sender_bases, t.receiver_bases);

    const std::size_t sifted = t.sifted_positions.size();
    t.sender_key.source_qubits = t.receiver_key.source_qubits = n;
    if (sifted < 8) {
        return t;
    }
    const auto disclose = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(sample_fraction * static_cast<double>(sifted))), 1, sifted - 1);
    std::vector<std::size_t> order(sifted);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    std::vector<bool> disclosed(sifted, false);
    for (std::size_t k = 0; k < disclose; ++k) {
        disclosed[order[k]] = true;
    }
    for (std::size_t k = 0; k < sifted; ++k) {
        const std::size_t pos = t.sifted_positions[k];
        if (disclosed[k]) {
            t.disclosed_positions.push_back(pos);
            t.sample_errors += t.sender_bits[pos] != t.receiver_results[pos] ? 1 : 0;
        } else {
            t.sender_key.bits.push_back(t.sender_bits[pos]);
            t.receiver_key.bits.push_back(t.receiver_results[pos]);
        }
    }
    t.qber = static_cast<double>(t.sample_errors) / static_cast<double>(disclose);
    t.sender_key.sample_qber = t.receiver_key.sample_qber = t.qber;
    t.aborted = t.qber > qber_threshold;
    if (t.aborted) {
        t.sender_key.bits.clear();
        t.receiver_key.bits.clear();
    }
    return t;
}

KeyPair qkd_establish(int n, const ChannelModel& channel, double sample_fraction, double qber_threshold,
                      Rng& rng) {
    auto t = run_bb84(n, channel, sample_fraction, qber_threshold, rng);
    if (t.sifted_positions.size() < 8) {
        throw InsufficientKey("only " + std::to_string(t.sifted_positions.size()) + " bits survived sifting");
    }
    if (t.aborted) {
        throw QkdAbort(t.qber);
    }
    return {std::move(t.sender_key), std::move(t.receiver_key)};
}

// --- keys ------------------------------------------------------------------

std::vector<std::uint8_t> OtpKey::consume() {
    if (spent_) {
        throw KeyReuseError("one-time pad already consumed");
    }
    spent_ = true;
    return bytes_;
}

std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> bits) {
    std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) {
            out[i / 8] |= static_cast<std::uint8_t>(0x80U >> (i % 8));
        }
    }
    return out;
}

OtpKey KeyPool::take_otp(std::size_t message_len) {
    const std::size_t need = 8 * message_len;
    if (need > remaining_bits()) {
        throw InsufficientKey("OTP needs " + std::to_string(need) + " key bits, " +
                              std::to_string(remaining_bits()) + " remain");
    }
    const auto first = key_.bits.begin() + static_cast<std::ptrdiff_t>(cursor_);
    auto bytes = pack_bits(std::span<const std::uint8_t>(&*first, need));
    cursor_ += need;
    return OtpKey(std::move(bytes));
}

std::vector<std::uint8_t> hkdf_sha256(std::span<const std::uint8_t> salt, std::span<const std::uint8_t> ikm,
                                      std::span<const std::uint8_t> info, std::size_t length) {
    ensure_sodium();
    if (length > 255 * crypto_auth_hmacsha256_BYTES) {
        throw std::invalid_argument("hkdf: output too long");
    }
    const std::vector<std::uint8_t> zero_salt(crypto_auth_hmacsha256_BYTES, 0);
    const auto prk = hmac_sha256(salt.empty() ? std::span<const std::uint8_t>(zero_salt) : salt, ikm);
    std::vector<std::uint8_t> okm;
    std::vector<std::uint8_t> block;
    for (std::uint8_t counter = 1; okm.size() < length; ++counter) {
        std::vector<std::uint8_t> msg(block);
        msg.insert(msg.end(), info.begin(), info.end());
        msg.push_back(counter);
        block = hmac_sha256(prk, msg);
        okm.insert(okm.end(), block.begin(), block.end());
    }
    okm.resize(length);
    return okm;
}

AeadKey derive_aead_key(const SiftedKey& key) {
    // The bit count is mixed into the input so keys of different lengths whose
    // packed bytes coincide still differ.
    auto ikm = pack_bits(key.bits);
    const auto len = static_cast<std::uint32_t>(key.bits.size());
    for (int shift = 24; shift >= 0; shift -= 8) {
        ikm.push_back(static_cast<std::uint8_t>(len >> shift));
    }
    const auto okm = hkdf_sha256(as_bytes("satqfl/qkd"), ikm, as_bytes("chacha20poly1305 key"), 32);
    AeadKey out{};
    std::copy(okm.begin(), okm.end(), out.begin());
    return out;
}

void check_key_randomness(std::span<const std::uint8_t> key) {
    if (key.size() >= 16 && std::all_of(key.begin(), key.end(), [](std::uint8_t b) { return b == 0; })) {
        throw WeakKey("all-zero pad rejected");
    }
}

// --- envelope --------------------------------------------------------------

std::size_t CipherEnvelope::wire_size() const {
    return kEnvelopeHeaderBytes + nonce.size() + ciphertext.size() + tag.size();
}

std::vector<std::uint8_t> CipherEnvelope::serialize() const {
    auto out = header_bytes(scheme, param_count, quantization);
    out.insert(out.end(), nonce.begin(), nonce.end());
    out.insert(out.end(), ciphertext.begin(), ciphertext.end());
    out.insert(out.end(), tag.begin(), tag.end());
    return out;
}

CipherEnvelope CipherEnvelope::parse(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kEnvelopeHeaderBytes) {
        throw EnvelopeFormatError("envelope shorter than its header");
    }
    CipherEnvelope env;
    if (bytes[0] != static_cast<std::uint8_t>(Scheme::Otp) && bytes[0] != static_cast<std::uint8_t>(Scheme::Aead)) {
        throw EnvelopeFormatError("unknown scheme tag " + std::to_string(bytes[0]));
    }
    env.scheme = Scheme{bytes[0]};
    env.param_count = (std::uint32_t{bytes[1]} << 24) | (std::uint32_t{bytes[2]} << 16) |
                      (std::uint32_t{bytes[3]} << 8) | std::uint32_t{bytes[4]};
    env.quantization = static_cast<std::uint16_t>((bytes[5] << 8) | bytes[6]);
    auto rest = bytes.subspan(kEnvelopeHeaderBytes);
    const std::size_t body = 2 * std::size_t{env.param_count};
    const std::size_t extra = env.scheme == Scheme::Aead ? kNonceBytes + kTagBytes : 0;
    if (rest.size() != body + extra) {
        throw EnvelopeFormatError("envelope length does not match param_count");
    }
    if (env.scheme == Scheme::Aead) {
        env.nonce.assign(rest.begin(), rest.begin() + kNonceBytes);
        rest = rest.subspan(kNonceBytes);
    }
    env.ciphertext.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(body));
    env.tag.assign(rest.begin() + static_cast<std::ptrdiff_t>(body), rest.end());
    return env;
}

Nonce counter_nonce(std::uint64_t counter) {
    Nonce n{};
    for (int i = 0; i < 8; ++i) {
        n[static_cast<std::size_t>(4 + i)] = static_cast<std::uint8_t>(counter >> (56 - 8 * i));
    }
    return n;
}

CipherEnvelope encrypt_otp(std::span<const double> params, OtpKey& key) {
    auto plain = serialize_params(params);
    if (key.size() < plain.size()) {
        throw LengthMismatch("OTP key shorter than the plaintext");
    }
    const auto pad = key.consume();
    CipherEnvelope env;
    env.scheme = Scheme::Otp;
    env.param_count = static_cast<std::uint32_t>(params.size());
    env.ciphertext.resize(plain.size());
    for (std::size_t i = 0; i < plain.size(); ++i) {
        env.ciphertext[i] = plain[i] ^ pad[i];
    }
    return env;
}

std::vector<double> decrypt_otp(const CipherEnvelope& env, OtpKey& key) {
    if (env.scheme != Scheme::Otp) {
        throw EnvelopeFormatError("envelope is not OTP");
    }
    if (env.ciphertext.size() != 2 * std::size_t{env.param_count} || key.size() < env.ciphertext.size()) {
        throw LengthMismatch("OTP key or ciphertext length does not match param_count");
    }
    const auto pad = key.consume();
    std::vector<std::uint8_t> plain(env.ciphertext.size());
    for (std::size_t i = 0; i < plain.size(); ++i) {
        plain[i] = env.ciphertext[i] ^ pad[i];
    }
    return deserialize_params(plain);
}

CipherEnvelope encrypt_aead(std::span<const double> params, const AeadKey& key, const Nonce& nonce) {
    ensure_sodium();
    const auto plain = serialize_params(params);
    CipherEnvelope env;
    env.scheme = Scheme::Aead;
    env.param_count = static_cast<std::uint32_t>(params.size());
    env.nonce.assign(nonce.begin(), nonce.end());
    const auto ad = header_bytes(env.scheme, env.param_count, env.quantization);
    env.ciphertext.resize(plain.size());
    env.tag.resize(kTagBytes);
    unsigned long long tag_len = 0;
    crypto_aead_chacha20poly1305_ietf_encrypt_detached(env.ciphertext.data(), env.tag.data(), &tag_len,
                                                       plain.data(), plain.size(), ad.data(), ad.size(),
                                                       nullptr, nonce.data(), key.data());
    return env;
}

std::vector<double> decrypt_aead(const CipherEnvelope& env, const AeadKey& key) {
    ensure_sodium();
    if (env.scheme != Scheme::Aead) {
        throw EnvelopeFormatError("envelope is not AEAD");
    }
    if (env.nonce.size() != kNonceBytes || env.tag.size() != kTagBytes ||
        env.ciphertext.size() != 2 * std::size_t{env.param_count}) {
        throw AuthFailure("malformed AEAD envelope");
    }
    const auto ad = header_bytes(env.scheme, env.param_count, env.quantization);
    std::vector<std::uint8_t> plain(env.ciphertext.size());
    if (crypto_aead_chacha20poly1305_ietf_decrypt_detached(plain.data(), nullptr, env.ciphertext.data(),
                                                           env.ciphertext.size(), env.tag.data(), ad.data(),
                                                           ad.size(), env.nonce.data(), key.data()) != 0) {
        throw AuthFailure("AEAD tag verification failed");
    }
    return deserialize_params(plain);
}

// --- teleportation ---------------------------------------------------------

namespace {

constexpr int kQ = 0;
constexpr int kA = 1;
constexpr int kB = 2;

quantum::Statevector entangle_and_encode(double theta, double phi) {
    quantum::Statevector s(3);
    s.apply(quantum::Gate::h(kA));
    s.apply(quantum::Gate::cnot(kA, kB));
    s.apply(quantum::Gate::u(kQ, theta, phi, 0.0));
    s.apply(quantum::Gate::cnot(kQ, kA));
    s.apply(quantum::Gate::h(kQ));
    return s;
}

TeleportResult finish_teleport(quantum::Statevector s, double theta, double phi, int cr0, int cr1, Rng& rng) {
    if (cr1) {
        s.apply(quantum::Gate::x(kB));
    }
    if (cr0) {
        s.apply(quantum::Gate::z(kB));
    }
    // After measuring Q and A only the amplitudes with those bits survive.
    const auto amps = s.amplitudes();
    const std::size_t base = static_cast<std::size_t>(cr0) | (static_cast<std::size_t>(cr1) << 1);
    auto received = quantum::Statevector::from_amplitudes({amps[base], amps[base | 4U]});
    auto target = quantum::Statevector(1);
    target.apply(quantum::Gate::u(0, theta, phi, 0.0));

    TeleportResult r;
    r.classical_bits = {cr0, cr1};
    r.fidelity = quantum::fidelity(target, received);
    r.receiver_bloch = quantum::bloch_vector(received, 0);

    auto check = received;
    check.apply(quantum::inverse(quantum::Gate::u(0, theta, phi, 0.0)));
    r.inverse_check_p0 = 1.0 - check.probability_one(0);
    if (r.inverse_check_p0 < 1.0 - 1e-9) {
        throw TeleportError("received state failed the inverse-unitary check (P0 = " +
                            std::to_string(r.inverse_check_p0) + ")");
    }
    r.theta = theta;
    r.phi = phi;
    r.receiver_bit = quantum::measure(std::move(s), kB, rng).first;
    return r;
}

}  // namespace

TeleportResult teleport(double theta, double phi, Rng& rng) {
    auto s = entangle_and_encode(theta, phi);
    auto [cr1, after_a] = quantum::measure(std::move(s), kA, rng);
    auto [cr0, after_q] = quantum::measure(std::move(after_a), kQ, rng);
    return finish_teleport(std::move(after_q), theta, phi, cr0, cr1, rng);
}

TeleportResult teleport_branch(double theta, double phi, int cr0, int cr1, Rng& rng) {
    auto s = entangle_and_encode(theta, phi);
    s.project(kA, cr1);
    s.project(kQ, cr0);
    return finish_teleport(std::move(s), theta, phi, cr0, cr1, rng);
}

// --- transfer --------------------------------------------------------------

int otp_qkd_qubits(std::size_t message_len, double sample_fraction) {
    // Half the qubits survive sifting and (1 - sample_fraction) of those stay
    // secret; 25% headroom plus a constant covers binomial spread.
    const double need_bits = 8.0 * static_cast<double>(message_len);
    const double expected_yield = 0.5 * (1.0 - sample_fraction);
    const auto n = static_cast<int>(std::ceil(need_bits / expected_yield * 1.25)) + 64;
    return std::max(n, 16);
}

TransferTranscript transfer_params(std::span<const double> params, TransferMode mode,
                                   const TransferOptions& options, Rng& rng) {
    if (mode.teleport_count < 0 || static_cast<std::size_t>(mode.teleport_count) > params.size()) {
        throw std::invalid_argument("teleport count must lie in [0, param_count]");
    }
    TransferTranscript t;
    t.scheme = options.scheme;
    t.teleport_count = mode.teleport_count;
    t.sent = quantize_params(params);
    t.received.assign(t.sent.size(), 0.0);

    const auto split = static_cast<std::size_t>(mode.teleport_count);
    const std::span<const double> remainder(t.sent.data() + split, t.sent.size() - split);

    // Key establishment and the envelope come first so an abort releases nothing.
    if (!remainder.empty()) {
        const int n = options.scheme == Scheme::Otp ? otp_qkd_qubits(2 * remainder.size(), options.sample_fraction)
                                                    : options.aead_qkd_qubits;
        auto keys = qkd_establish(n, options.channel, options.sample_fraction, options.qber_threshold, rng);
        t.qkd_qubits = n;
        t.qber = keys.sender.sample_qber;
        t.key_bits = keys.sender.bits.size();

        std::vector<std::uint8_t> wire;
        std::vector<double> decoded;
        if (options.scheme == Scheme::Otp) {
            KeyPool sender_pool(std::move(keys.sender));
            KeyPool receiver_pool(std::move(keys.receiver));
            auto sender_pad = sender_pool.take_otp(2 * remainder.size());
            auto receiver_pad = receiver_pool.take_otp(2 * remainder.size());
            check_key_randomness(sender_pad.peek());
            wire = encrypt_otp(remainder, sender_pad).serialize();
            decoded = decrypt_otp(CipherEnvelope::parse(wire), receiver_pad);
        } else {
            const auto sender_key = derive_aead_key(keys.sender);
            const auto receiver_key = derive_aead_key(keys.receiver);
            wire = encrypt_aead(remainder, sender_key, counter_nonce(options.nonce_counter)).serialize();
            decoded = decrypt_aead(CipherEnvelope::parse(wire), receiver_key);
        }
        t.envelope_bytes = wire.size();
        std::copy(decoded.begin(), decoded.end(), t.received.begin() + static_cast<std::ptrdiff_t>(split));
    }

    for (std::size_t i = 0; i < split; i += 2) {
        const double theta = t.sent[i];
        const double phi = i + 1 < split ? t.sent[i + 1] : 0.0;
        auto r = teleport(theta, phi, rng);
        t.received[i] = r.theta;
        if (i + 1 < split) {
            t.received[i + 1] = r.phi;
        }
        t.teleports.push_back(std::move(r));
    }
    return t;
}

}  // namespace satqfl::security
