#include "pufsim/protocols.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

#include "pufsim/sha256.hpp"

namespace pufsim::proto {

namespace {

struct ByteWriter {
    std::vector<uint8_t> out;

    void u8(uint8_t v) { out.push_back(v); }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
    }
    void bytes(const std::vector<uint8_t>& b) { out.insert(out.end(), b.begin(), b.end()); }
    void packed_bits(const std::vector<uint8_t>& bits) {
        std::vector<uint8_t> packed((bits.size() + 7) / 8, 0);
        for (size_t i = 0; i < bits.size(); ++i)
            if (bits[i]) packed[i / 8] |= uint8_t(0x80u >> (i % 8));
        bytes(packed);
    }
};

struct ByteReader {
    const std::vector<uint8_t>& in;
    size_t pos = 0;

    explicit ByteReader(const std::vector<uint8_t>& b) : in(b) {}

    uint8_t u8() {
        if (pos + 1 > in.size()) throw std::invalid_argument("payload truncated");
        return in[pos++];
    }
    uint32_t u32() {
        if (pos + 4 > in.size()) throw std::invalid_argument("payload truncated");
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(in[pos++]) << (8 * i);
        return v;
    }
    uint64_t u64() {
        if (pos + 8 > in.size()) throw std::invalid_argument("payload truncated");
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(in[pos++]) << (8 * i);
        return v;
    }
    std::vector<uint8_t> bytes(size_t n) {
        if (pos + n > in.size()) throw std::invalid_argument("payload truncated");
        std::vector<uint8_t> b(in.begin() + pos, in.begin() + pos + n);
        pos += n;
        return b;
    }
    std::vector<uint8_t> unpacked_bits(size_t n_bits) {
        std::vector<uint8_t> packed = bytes((n_bits + 7) / 8);
        std::vector<uint8_t> bits(n_bits);
        for (size_t i = 0; i < n_bits; ++i)
            bits[i] = (packed[i / 8] >> (7 - i % 8)) & 1;
        return bits;
    }
};

std::vector<uint8_t> encode_challenge_list(const std::vector<uint64_t>& seeds) {
    ByteWriter w;
    w.u32(uint32_t(seeds.size()));
    for (uint64_t s : seeds) w.u64(s);
    return std::move(w.out);
}

std::vector<uint64_t> decode_challenge_list(const std::vector<uint8_t>& payload) {
    ByteReader r(payload);
    std::vector<uint64_t> seeds(r.u32());
    for (uint64_t& s : seeds) s = r.u64();
    return seeds;
}

void encode_code(ByteWriter& w, const GaborCode& c) {
    w.u32(uint32_t(c.width));
    w.u32(uint32_t(c.height));
    w.packed_bits(c.bits);
}

std::vector<uint8_t> encode_codes(const std::vector<GaborCode>& codes) {
    ByteWriter w;
    w.u32(uint32_t(codes.size()));
    for (const GaborCode& c : codes) encode_code(w, c);
    return std::move(w.out);
}

void encode_helper(ByteWriter& w, const HelperData& h) {
    w.u32(uint32_t(h.rho));
    w.u32(uint32_t(h.n_blocks));
    w.u32(uint32_t(h.key_bits));
    w.u32(uint32_t(h.offset.size()));
    w.packed_bits(h.offset);
}

HelperData decode_helper(ByteReader& r) {
    HelperData h;
    h.rho = int(r.u32());
    h.n_blocks = int(r.u32());
    h.key_bits = int(r.u32());
    h.offset = r.unpacked_bits(r.u32());
    return h;
}

std::vector<uint8_t> encode_helper_list(const std::vector<HelperData>& hs) {
    ByteWriter w;
    w.u32(uint32_t(hs.size()));
    for (const HelperData& h : hs) encode_helper(w, h);
    return std::move(w.out);
}

std::vector<HelperData> decode_helper_list(const std::vector<uint8_t>& payload) {
    ByteReader r(payload);
    std::vector<HelperData> hs(r.u32());
    for (HelperData& h : hs) h = decode_helper(r);
    return hs;
}

std::vector<uint8_t> le64(uint64_t v) {
    std::vector<uint8_t> b(8);
    for (int i = 0; i < 8; ++i) b[i] = uint8_t(v >> (8 * i));
    return b;
}

Sha256::Digest confirm_digest(const StableKey& key) {
    Sha256 h;
    h.update("ot-confirm");
    std::vector<uint8_t> kb = key.bytes();
    h.update(kb.data(), kb.size());
    return h.finish();
}

StableKey combine_keys(const std::vector<StableKey>& keys, int key_bits) {
    if (keys.size() == 1) return keys[0];
    Sha256 h;
    h.update("ke-combine");
    for (const StableKey& k : keys) {
        std::vector<uint8_t> b = k.bytes();
        h.update(b.data(), b.size());
    }
    Sha256::Digest d = h.finish();
    StableKey out;
    out.bits.resize(key_bits);
    for (int i = 0; i < key_bits; ++i) out.bits[i] = (d[i / 8] >> (7 - i % 8)) & 1;
    return out;
}

double mean_code_fhd(const std::vector<GaborCode>& a, const std::vector<GaborCode>& b) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("code list size mismatch");
    double acc = 0;
    for (size_t i = 0; i < a.size(); ++i) acc += metrics::fhd(a[i], b[i]);
    return acc / double(a.size());
}

void check_tau(double tau) {
    if (!(tau > 0 && tau < 0.5))
        throw std::invalid_argument("tau must lie in (0, 0.5)");
}

}  // namespace

const char* payload_type_name(PayloadType t) {
    switch (t) {
        case PayloadType::challenge_list: return "challenge_list";
        case PayloadType::response_codes: return "response_codes";
        case PayloadType::helper_list: return "helper_list";
        case PayloadType::ciphertext: return "ciphertext";
        case PayloadType::tag: return "tag";
        case PayloadType::commitment: return "commitment";
    }
    return "unknown";
}

Message& Transcript::append(const std::string& from, const std::string& to,
                            PayloadType type, std::vector<uint8_t> payload) {
    Message m;
    m.from = from;
    m.to = to;
    m.seq = messages.size();
    m.type = type;
    m.payload = std::move(payload);
    messages.push_back(std::move(m));
    return messages.back();
}

void Transcript::record(const std::string& key, const std::string& value) {
    outcomes.emplace_back(key, value);
}

std::string Transcript::to_text() const {
    std::string out;
    for (const Message& m : messages) {
        out += "{\"seq\":" + std::to_string(m.seq) + ",\"from\":\"" + m.from +
               "\",\"to\":\"" + m.to + "\",\"type\":\"" + payload_type_name(m.type) +
               "\",\"payload_hex\":\"" + hex_encode(m.payload.data(), m.payload.size()) +
               "\"}\n";
    }
    for (const auto& [k, v] : outcomes) {
        out += "{\"outcome\":\"" + k + "\",\"value\":\"" + v + "\"}\n";
    }
    return out;
}

PufDevice PufDevice::make(fab::VoxelVolume volume, optics::OpticsConfig config) {
    config.validate();
    if (config.grid_nx < volume.nx || config.grid_ny < volume.ny)
        throw std::invalid_argument("optics grid smaller than the structure cross-section");
    if (config.grid_nx > volume.nx || config.grid_ny > volume.ny)
        volume = fab::embed(volume, config.grid_nx, config.grid_ny,
                            float(config.n_background));
    config.pitch_um = volume.pitch_um;
    PufDevice d;
    d.volume_ = std::make_shared<const fab::VoxelVolume>(std::move(volume));
    d.prop_ = std::make_shared<const optics::Propagator>(*d.volume_, config);
    d.config_ = config;
    return d;
}

Party make_party(std::string id, Role role, Capability capability, PufDevice puf) {
    if (role == Role::adversary && capability == Capability::none)
        throw std::invalid_argument("an adversary with no capability cannot exist");
    return Party{std::move(id), role, capability, std::move(puf)};
}

GaborCode respond(const PufDevice& device, uint64_t challenge_seed,
                  const GaborParams& gabor, QueryLedger* ledger,
                  const std::string& party_id) {
    optics::Challenge ch = optics::Challenge::random(challenge_seed);
    optics::ComplexField in = optics::make_challenge_field(ch, device.config());
    optics::ComplexField out = device.propagator().propagate(in);
    optics::SpeckleImage img = optics::image_response(out, device.config());
    if (ledger) ledger->push_back({party_id, challenge_seed});
    return metrics::gabor_digitize(img, gabor);
}

uint64_t derive_challenge_seed(std::string_view domain,
                               const std::vector<uint8_t>& data) {
    Sha256 h;
    h.update(domain);
    h.update(data.data(), data.size());
    return digest_to_u64(h.finish());
}

IdentifyResult group_identify(const Party& verifier, const Party& prover, int k,
                              double tau, CounterRng& rng, const GaborParams& gabor) {
    if (k < 1) throw std::invalid_argument("group_identify: k must be >= 1");
    check_tau(tau);

    IdentifyResult res;
    std::vector<uint64_t> seeds(k);
    for (uint64_t& s : seeds) s = rng.next_u64();
    res.transcript.append(verifier.id, prover.id, PayloadType::challenge_list,
                          encode_challenge_list(seeds));

    std::vector<GaborCode> prover_codes;
    prover_codes.reserve(k);
    for (uint64_t s : seeds) prover_codes.push_back(respond(prover.puf, s, gabor));
    res.transcript.append(prover.id, verifier.id, PayloadType::response_codes,
                          encode_codes(prover_codes));

    std::vector<GaborCode> verifier_codes;
    verifier_codes.reserve(k);
    for (uint64_t s : seeds) verifier_codes.push_back(respond(verifier.puf, s, gabor));

    res.mean_fhd = mean_code_fhd(verifier_codes, prover_codes);
    res.accepted = res.mean_fhd < tau;
    res.transcript.record("mean_fhd", std::to_string(res.mean_fhd));
    res.transcript.record("accepted", res.accepted ? "true" : "false");
    return res;
}

MacTag mac_tag(const PufDevice& sender, const std::vector<uint8_t>& message, int k,
               CounterRng& rng, const GaborParams& gabor) {
    if (message.empty()) throw std::invalid_argument("mac: message must be nonempty");
    if (k < 1) throw std::invalid_argument("mac: k must be >= 1");
    MacTag tag;
    tag.nonce = rng.next_u64();
    for (int i = 0; i < k; ++i) {
        std::vector<uint8_t> data = message;
        std::vector<uint8_t> n = le64(tag.nonce), idx = le64(uint64_t(i));
        data.insert(data.end(), n.begin(), n.end());
        data.insert(data.end(), idx.begin(), idx.end());
        tag.codes.push_back(respond(sender, derive_challenge_seed("mac", data), gabor));
    }
    return tag;
}

bool mac_verify(const PufDevice& receiver, const std::vector<uint8_t>& message,
                const MacTag& tag, double tau, const GaborParams& gabor,
                double* mean_fhd) {
    check_tau(tau);
    std::vector<GaborCode> expected;
    expected.reserve(tag.codes.size());
    for (size_t i = 0; i < tag.codes.size(); ++i) {
        std::vector<uint8_t> data = message;
        std::vector<uint8_t> n = le64(tag.nonce), idx = le64(uint64_t(i));
        data.insert(data.end(), n.begin(), n.end());
        data.insert(data.end(), idx.begin(), idx.end());
        expected.push_back(respond(receiver, derive_challenge_seed("mac", data), gabor));
    }
    double fhd = mean_code_fhd(expected, tag.codes);
    if (mean_fhd) *mean_fhd = fhd;
    return fhd < tau;
}

MacResult message_authenticate(const Party& sender, const Party& receiver,
                               const std::vector<uint8_t>& message, int k, double tau,
                               CounterRng& rng, const GaborParams& gabor) {
    MacResult res;
    res.transcript.append(sender.id, receiver.id, PayloadType::commitment, message);

    MacTag tag = mac_tag(sender.puf, message, k, rng, gabor);
    ByteWriter w;
    w.u64(tag.nonce);
    w.bytes(encode_codes(tag.codes));
    res.transcript.append(sender.id, receiver.id, PayloadType::tag, std::move(w.out));

    res.accepted = mac_verify(receiver.puf, message, tag, tau, gabor, &res.mean_fhd);
    res.transcript.record("mean_fhd", std::to_string(res.mean_fhd));
    res.transcript.record("accepted", res.accepted ? "true" : "false");
    return res;
}

KeyExchangeResult group_key_exchange(const std::vector<Party>& members,
                                     int n_challenges, const CodecParams& codec_params,
                                     CounterRng& rng, const GaborParams& gabor,
                                     bool mac_wrap, int mac_k, double mac_tau) {
    if (members.size() < 2)
        throw std::invalid_argument("group_key_exchange: need at least 2 members");
    if (n_challenges < 1)
        throw std::invalid_argument("group_key_exchange: need at least 1 challenge");
    codec_params.validate();

    KeyExchangeResult res;
    const Party& initiator = members[0];

    std::vector<uint64_t> seeds(n_challenges);
    for (uint64_t& s : seeds) s = rng.next_u64();

    std::vector<StableKey> enrolled;
    std::vector<HelperData> helpers;
    for (uint64_t s : seeds) {
        GaborCode code = respond(initiator.puf, s, gabor);
        codec::Enrollment e = codec::gen_helper(code, rng, codec_params);
        enrolled.push_back(std::move(e.key));
        helpers.push_back(std::move(e.helper));
    }

    auto broadcast = [&](PayloadType type, std::vector<uint8_t> payload) {
        if (mac_wrap) {
            MacTag tag = mac_tag(initiator.puf, payload, mac_k, rng, gabor);
            ByteWriter w;
            w.u64(tag.nonce);
            w.bytes(encode_codes(tag.codes));
            res.transcript.append(initiator.id, "*", type, payload);
            res.transcript.append(initiator.id, "*", PayloadType::tag, std::move(w.out));
            for (size_t m = 1; m < members.size(); ++m) {
                bool ok = mac_verify(members[m].puf, payload, tag, mac_tau, gabor);
                res.transcript.record("mac_" + members[m].id, ok ? "ok" : "bad");
            }
        } else {
            res.transcript.append(initiator.id, "*", type, std::move(payload));
        }
    };
    broadcast(PayloadType::challenge_list, encode_challenge_list(seeds));
    broadcast(PayloadType::helper_list, encode_helper_list(helpers));

    res.keys.push_back(combine_keys(enrolled, codec_params.key_bits));
    for (size_t m = 1; m < members.size(); ++m) {
        std::vector<StableKey> parts;
        for (size_t c = 0; c < seeds.size(); ++c) {
            GaborCode code = respond(members[m].puf, seeds[c], gabor);
            parts.push_back(codec::reconstruct(code, helpers[c]));
        }
        res.keys.push_back(combine_keys(parts, codec_params.key_bits));
    }
    res.all_equal = std::all_of(res.keys.begin(), res.keys.end(),
                                [&](const StableKey& k) { return k == res.keys[0]; });
    res.transcript.record("all_keys_equal", res.all_equal ? "true" : "false");
    return res;
}

StableKey ke_duplicate_attack(const Transcript& transcript, const Party& adversary,
                              const GaborParams& gabor) {
    if (adversary.capability == Capability::none)
        throw std::invalid_argument("ke_duplicate_attack: adversary needs a transcript tap");
    std::vector<uint64_t> seeds;
    std::vector<HelperData> helpers;
    for (const Message& m : transcript.messages) {
        if (m.type == PayloadType::challenge_list) seeds = decode_challenge_list(m.payload);
        if (m.type == PayloadType::helper_list) helpers = decode_helper_list(m.payload);
    }
    if (seeds.empty() || helpers.size() != seeds.size())
        throw std::invalid_argument("ke_duplicate_attack: transcript lacks KE broadcast");
    std::vector<StableKey> parts;
    for (size_t c = 0; c < seeds.size(); ++c) {
        GaborCode code = respond(adversary.puf, seeds[c], gabor);
        parts.push_back(codec::reconstruct(code, helpers[c]));
    }
    return combine_keys(parts, helpers[0].key_bits);
}

namespace {

uint64_t feistel_round_seed(uint64_t right, int round) {
    std::vector<uint8_t> data = le64(right);
    data.push_back(uint8_t(round));
    data.push_back(uint8_t(round >> 8));
    data.push_back(uint8_t(round >> 16));
    data.push_back(uint8_t(round >> 24));
    return derive_challenge_seed("feistel", data);
}

}  // namespace

FeistelCiphertext feistel_encrypt(uint64_t left, uint64_t right, int rounds,
                                  const PufDevice& device, const CodecParams& codec_params,
                                  CounterRng& rng, const GaborParams& gabor) {
    if (rounds < 4)
        throw std::invalid_argument("feistel_encrypt: need at least 4 rounds");
    if (codec_params.key_bits < 64)
        throw std::invalid_argument("feistel_encrypt: key_bits must be >= 64");
    FeistelCiphertext ct;
    for (int i = 0; i < rounds; ++i) {
        GaborCode code = respond(device, feistel_round_seed(right, i), gabor);
        codec::Enrollment e = codec::gen_helper(code, rng, codec_params);
        uint64_t new_right = left ^ e.key.low64();
        left = right;
        right = new_right;
        ct.round_helpers.push_back(std::move(e.helper));
    }
    ct.left = left;
    ct.right = right;
    return ct;
}

std::pair<uint64_t, uint64_t> feistel_decrypt(const FeistelCiphertext& ct,
                                              const PufDevice& device,
                                              const GaborParams& gabor) {
    uint64_t left = ct.left, right = ct.right;
    for (int i = int(ct.round_helpers.size()) - 1; i >= 0; --i) {
        uint64_t prev_right = left;
        GaborCode code = respond(device, feistel_round_seed(prev_right, i), gabor);
        StableKey key = codec::reconstruct(code, ct.round_helpers[i]);
        uint64_t prev_left = right ^ key.low64();
        left = prev_left;
        right = prev_right;
    }
    return {left, right};
}

OtRunResult ot_run(const Party& sender, const Party& receiver,
                   const std::array<std::vector<uint8_t>, 2>& messages, int choice_bit,
                   bool retain_duplicate, const CodecParams& codec_params,
                   CounterRng& rng, const GaborParams& gabor) {
    if (choice_bit != 0 && choice_bit != 1)
        throw std::invalid_argument("ot_run: choice bit must be 0 or 1");
    codec_params.validate();
    if (codec_params.key_bits % 8 != 0)
        throw std::invalid_argument("ot_run: key_bits must be a whole number of bytes");
    size_t mask_len = size_t(codec_params.key_bits) / 8;
    for (const auto& m : messages)
        if (m.size() != mask_len)
            throw std::invalid_argument("ot_run: messages must be key_bits/8 bytes");

    OtRunResult res;
    res.choice = choice_bit;
    res.duplicate_retained = retain_duplicate;

    // Enrollment phase on the sender's structure, before the transfer.
    uint64_t seeds[2] = {rng.next_u64(), rng.next_u64()};
    codec::Enrollment enr[2];
    for (int i = 0; i < 2; ++i) {
        GaborCode code = respond(sender.puf, seeds[i], gabor);
        enr[i] = codec::gen_helper(code, rng, codec_params);
    }

    // Physical transfer of the structure. Whether the sender kept a
    // duplicate is invisible on the wire.
    res.transcript.append(sender.id, receiver.id, PayloadType::commitment,
                          {'p', 'u', 'f', '-', 't', 'r', 'a', 'n', 's', 'f', 'e', 'r'});

    for (int i = 0; i < 2; ++i) {
        std::vector<uint8_t> key_bytes = enr[i].key.bytes();
        std::vector<uint8_t> masked = messages[i];
        for (size_t b = 0; b < masked.size(); ++b) masked[b] ^= key_bytes[b];
        ByteWriter w;
        w.u8(uint8_t(i));
        w.u64(seeds[i]);
        encode_helper(w, enr[i].helper);
        w.u32(uint32_t(masked.size()));
        w.bytes(masked);
        res.transcript.append(sender.id, receiver.id, PayloadType::ciphertext,
                              std::move(w.out));
    }

    // Honest receiver: single response query, to the chosen challenge only.
    GaborCode code = respond(receiver.puf, seeds[choice_bit], gabor,
                             &res.receiver_ledger, receiver.id);
    StableKey key = codec::reconstruct(code, enr[choice_bit].helper);

    const Message& ct = res.transcript.messages[1 + choice_bit];
    ByteReader r(ct.payload);
    r.u8();
    r.u64();
    decode_helper(r);
    std::vector<uint8_t> masked = r.bytes(r.u32());
    std::vector<uint8_t> key_bytes = key.bytes();
    res.received = masked;
    for (size_t b = 0; b < res.received.size(); ++b) res.received[b] ^= key_bytes[b];

    Sha256::Digest confirm = confirm_digest(key);
    res.transcript.append(receiver.id, sender.id, PayloadType::tag,
                          std::vector<uint8_t>(confirm.begin(), confirm.end()));
    res.transcript.record("receiver_queries", std::to_string(res.receiver_ledger.size()));
    return res;
}

OtAttackReport ot_duplicate_attack(const Transcript& transcript,
                                   const PufDevice& retained_duplicate,
                                   const GaborParams& gabor) {
    OtAttackReport rep;
    uint64_t seeds[2] = {0, 0};
    HelperData helpers[2];
    std::vector<uint8_t> masked[2];
    std::vector<uint8_t> confirm;
    bool have[2] = {false, false};
    for (const Message& m : transcript.messages) {
        if (m.type == PayloadType::ciphertext) {
            ByteReader r(m.payload);
            int idx = r.u8();
            if (idx != 0 && idx != 1) continue;
            seeds[idx] = r.u64();
            helpers[idx] = decode_helper(r);
            masked[idx] = r.bytes(r.u32());
            have[idx] = true;
        } else if (m.type == PayloadType::tag && m.payload.size() == 32) {
            confirm = m.payload;
        }
    }
    if (!have[0] || !have[1] || confirm.empty())
        throw std::invalid_argument("ot_duplicate_attack: transcript lacks an OT run");

    for (int i = 0; i < 2; ++i) {
        GaborCode code = respond(retained_duplicate, seeds[i], gabor);
        StableKey key = codec::reconstruct(code, helpers[i]);
        Sha256::Digest d = confirm_digest(key);
        if (std::equal(d.begin(), d.end(), confirm.begin())) {
            rep.conclusive = true;
            rep.recovered_choice = i;
        }
        std::vector<uint8_t> key_bytes = key.bytes();
        rep.recovered_messages[i] = masked[i];
        for (size_t b = 0; b < rep.recovered_messages[i].size(); ++b)
            rep.recovered_messages[i][b] ^= key_bytes[b];
    }
    rep.messages_recovered = rep.conclusive;
    return rep;
}

TagVerifyResult tag_verify(const Party& reference, const Party& label, int k, double tau,
                           CounterRng& rng, const GaborParams& gabor) {
    IdentifyResult id = group_identify(reference, label, k, tau, rng, gabor);
    TagVerifyResult res;
    res.genuine = id.accepted;
    res.mean_fhd = id.mean_fhd;
    res.transcript = std::move(id.transcript);
    res.transcript.record("label", res.genuine ? "genuine" : "counterfeit");
    return res;
}

}  // namespace pufsim::proto
