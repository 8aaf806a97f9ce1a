#ifndef PUFSIM_CODEC_HPP
#define PUFSIM_CODEC_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "pufsim/metrics.hpp"
#include "pufsim/rng.hpp"

namespace pufsim::codec {

using metrics::GaborCode;

struct CodecParams {
    int rho = 15;        // repetition factor
    int key_bits = 128;  // stable key length
    int margin_bits = 0; // extra hash-input message bits beyond key length

    int message_bits() const { return key_bits + margin_bits; }
    void validate() const;
};

// Public error-correction side information for one enrollment. Block j of
// the repetition code occupies the strided positions {j, j+n_blocks,
// j+2*n_blocks, ...} of the offset, which spreads each block across the
// image so spatially clustered bit flips land in different blocks.
struct HelperData {
    std::vector<uint8_t> offset;  // one entry per codeword bit, values 0/1
    int rho = 0;
    int n_blocks = 0;
    int key_bits = 0;
};

struct StableKey {
    std::vector<uint8_t> bits;

    bool operator==(const StableKey& o) const { return bits == o.bits; }
    bool operator!=(const StableKey& o) const { return bits != o.bits; }
    // Bits packed MSB-first.
    std::vector<uint8_t> bytes() const;
    // First 64 bits as a little-endian word (key must hold at least 64).
    uint64_t low64() const;
};

struct Enrollment {
    StableKey key;
    HelperData helper;
};

// Code-offset construction: random message bits m, rho-fold repetition
// codeword c, offset = c XOR code prefix; key = SHA-256(m) truncated to
// key_bits.
Enrollment gen_helper(const GaborCode& code, CounterRng& rng, const CodecParams& params);

// Majority-decodes offset XOR code' per block and rehashes; recovers the
// enrolled key whenever every block carries fewer than rho/2 bit errors.
StableKey reconstruct(const GaborCode& code, const HelperData& helper);

// Exact per-block failure probability P[Binomial(rho, p) >= ceil(rho/2)]
// for i.i.d. bit-error probability p, and the induced whole-key failure
// probability over n_blocks.
double block_failure_probability(int rho, double p);
double key_failure_probability(int rho, int n_blocks, double p);

std::string helper_to_json(const HelperData& h);
HelperData helper_from_json(const std::string& text);

}  // namespace pufsim::codec

#endif
