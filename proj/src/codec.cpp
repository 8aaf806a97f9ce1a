#include "pufsim/codec.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "pufsim/sha256.hpp"

namespace pufsim::codec {

namespace {

std::vector<uint8_t> pack_bits(const std::vector<uint8_t>& bits) {
    std::vector<uint8_t> bytes((bits.size() + 7) / 8, 0);
    for (size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) bytes[i / 8] |= uint8_t(0x80u >> (i % 8));
    return bytes;
}

StableKey key_from_message(const std::vector<uint8_t>& message_bits, int key_bits) {
    std::vector<uint8_t> packed = pack_bits(message_bits);
    Sha256::Digest d = Sha256::hash(packed.data(), packed.size());
    StableKey key;
    key.bits.resize(key_bits);
    for (int i = 0; i < key_bits; ++i)
        key.bits[i] = (d[i / 8] >> (7 - i % 8)) & 1;
    return key;
}

}  // namespace

void CodecParams::validate() const {
    if (rho < 1) throw std::invalid_argument("codec: rho must be >= 1");
    if (key_bits < 1 || key_bits > 256)
        throw std::invalid_argument("codec: key_bits must be in [1, 256]");
    if (margin_bits < 0) throw std::invalid_argument("codec: margin_bits must be >= 0");
}

std::vector<uint8_t> StableKey::bytes() const { return pack_bits(bits); }

uint64_t StableKey::low64() const {
    if (bits.size() < 64) throw std::invalid_argument("key shorter than 64 bits");
    uint64_t v = 0;
    for (int i = 0; i < 64; ++i) v |= uint64_t(bits[i] & 1) << i;
    return v;
}

Enrollment gen_helper(const GaborCode& code, CounterRng& rng, const CodecParams& params) {
    params.validate();
    const int n_blocks = params.message_bits();
    const size_t cw_len = size_t(params.rho) * n_blocks;
    if (code.bits.size() < cw_len)
        throw std::invalid_argument("gen_helper: code too short for rho * message_bits");

    std::vector<uint8_t> message(n_blocks);
    for (uint8_t& b : message) b = uint8_t(rng.next_u64() & 1);

    Enrollment e;
    e.helper.rho = params.rho;
    e.helper.n_blocks = n_blocks;
    e.helper.key_bits = params.key_bits;
    e.helper.offset.resize(cw_len);
    for (size_t i = 0; i < cw_len; ++i) {
        uint8_t cw = message[i % n_blocks];
        e.helper.offset[i] = cw ^ (code.bits[i] & 1);
    }
    e.key = key_from_message(message, params.key_bits);
    return e;
}

StableKey reconstruct(const GaborCode& code, const HelperData& helper) {
    if (helper.rho < 1 || helper.n_blocks < 1 ||
        helper.offset.size() != size_t(helper.rho) * helper.n_blocks)
        throw std::invalid_argument("reconstruct: malformed helper data");
    if (code.bits.size() < helper.offset.size())
        throw std::invalid_argument("reconstruct: code shorter than helper offset");

    std::vector<uint8_t> message(helper.n_blocks);
    for (int j = 0; j < helper.n_blocks; ++j) {
        int ones = 0;
        for (int t = 0; t < helper.rho; ++t) {
            size_t i = size_t(j) + size_t(t) * helper.n_blocks;
            ones += helper.offset[i] ^ (code.bits[i] & 1);
        }
        message[j] = uint8_t(2 * ones > helper.rho ? 1 : 0);
    }
    return key_from_message(message, helper.key_bits);
}

double block_failure_probability(int rho, double p) {
    if (rho < 1 || p < 0 || p > 1)
        throw std::invalid_argument("block_failure_probability: bad arguments");
    // Majority is wrong when errors >= ceil(rho/2) + (rho even ? 0 : 0)...
    // For odd rho the decoder fails iff errors > rho/2, i.e. >= (rho+1)/2;
    // for even rho ties decode to 0, so count errors > rho/2 as failure and
    // treat ties as undefined-but-failing for a conservative bound.
    int k_fail = rho / 2 + 1;
    double prob = 0;
    for (int k = k_fail; k <= rho; ++k) {
        double log_c = std::lgamma(rho + 1.0) - std::lgamma(k + 1.0) -
                       std::lgamma(rho - k + 1.0);
        double log_term = log_c + k * std::log(p) + (rho - k) * std::log1p(-p);
        prob += std::exp(log_term);
    }
    return std::min(prob, 1.0);
}

double key_failure_probability(int rho, int n_blocks, double p) {
    double q = block_failure_probability(rho, p);
    return 1.0 - std::pow(1.0 - q, double(n_blocks));
}

std::string helper_to_json(const HelperData& h) {
    std::vector<uint8_t> packed((h.offset.size() + 7) / 8, 0);
    for (size_t i = 0; i < h.offset.size(); ++i)
        if (h.offset[i]) packed[i / 8] |= uint8_t(0x80u >> (i % 8));
    nlohmann::json j;
    j["rho"] = h.rho;
    j["n_blocks"] = h.n_blocks;
    j["key_bits"] = h.key_bits;
    j["offset_bits"] = h.offset.size();
    j["offset_hex"] = hex_encode(packed.data(), packed.size());
    return j.dump(2);
}

HelperData helper_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    HelperData h;
    h.rho = j.at("rho").get<int>();
    h.n_blocks = j.at("n_blocks").get<int>();
    h.key_bits = j.at("key_bits").get<int>();
    size_t n_bits = j.at("offset_bits").get<size_t>();
    std::vector<uint8_t> packed = hex_decode(j.at("offset_hex").get<std::string>());
    if (packed.size() != (n_bits + 7) / 8)
        throw std::invalid_argument("helper_from_json: offset length mismatch");
    h.offset.resize(n_bits);
    for (size_t i = 0; i < n_bits; ++i)
        h.offset[i] = (packed[i / 8] >> (7 - i % 8)) & 1;
    return h;
}

}  // namespace pufsim::codec
