#ifndef PUFSIM_SHA256_HPP
#define PUFSIM_SHA256_HPP

#include <array>
#include <cstdint>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace pufsim {

// Minimal SHA-256 (FIPS 180-4). Used for key condensation, challenge
// derivation and master-seed fan-out; all of those contracts name a fixed,
// documented cryptographic hash, and this is it.
class Sha256 {
public:
    using Digest = std::array<uint8_t, 32>;

    Sha256();
    void update(const void* data, size_t len);
    void update(std::string_view s) { update(s.data(), s.size()); }
    Digest finish();

    static Digest hash(const void* data, size_t len);
    static Digest hash(std::string_view s) { return hash(s.data(), s.size()); }

private:
    void process_block(const uint8_t* block);

    std::array<uint32_t, 8> state_;
    uint64_t total_len_ = 0;
    std::array<uint8_t, 64> buffer_{};
    size_t buffer_len_ = 0;
};

std::string hex_encode(const uint8_t* data, size_t len);
std::vector<uint8_t> hex_decode(std::string_view hex);

// First 8 digest bytes, little-endian.
uint64_t digest_to_u64(const Sha256::Digest& d);

}  // namespace pufsim

#endif
