#ifndef PUFSIM_PROTOCOLS_HPP
#define PUFSIM_PROTOCOLS_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pufsim/codec.hpp"
#include "pufsim/metrics.hpp"
#include "pufsim/optics.hpp"

namespace pufsim::proto {

using codec::CodecParams;
using codec::HelperData;
using codec::StableKey;
using metrics::GaborCode;
using metrics::GaborParams;

enum class Role { prover, verifier, member, sender, receiver, adversary };
enum class Capability { none, transcript_tap, transcript_tap_plus_duplicate };

enum class PayloadType : uint8_t {
    challenge_list = 0,
    response_codes = 1,
    helper_list = 2,
    ciphertext = 3,
    tag = 4,
    commitment = 5,
};

const char* payload_type_name(PayloadType t);

struct Message {
    std::string from;
    std::string to;  // "*" = broadcast
    uint64_t seq = 0;
    PayloadType type = PayloadType::commitment;
    std::vector<uint8_t> payload;
};

// Ordered record of all messages in a protocol run; the attack surface an
// eavesdropper sees. Replayable: same seeds reproduce it byte for byte.
struct Transcript {
    std::vector<Message> messages;
    std::vector<std::pair<std::string, std::string>> outcomes;

    Message& append(const std::string& from, const std::string& to, PayloadType type,
                    std::vector<uint8_t> payload);
    void record(const std::string& key, const std::string& value);
    std::string to_text() const;
};

// A held PUF instance: voxel volume plus cached propagation state and the
// readout optics it is measured with. Duplicates of one plan are distinct
// devices sharing nothing but geometry.
class PufDevice {
public:
    static PufDevice make(fab::VoxelVolume volume, optics::OpticsConfig config);

    const optics::OpticsConfig& config() const { return config_; }
    const fab::VoxelVolume& volume() const { return *volume_; }
    const optics::Propagator& propagator() const { return *prop_; }

private:
    std::shared_ptr<const fab::VoxelVolume> volume_;
    std::shared_ptr<const optics::Propagator> prop_;
    optics::OpticsConfig config_;
};

struct Party {
    std::string id;
    Role role = Role::member;
    Capability capability = Capability::none;
    PufDevice puf;
};

Party make_party(std::string id, Role role, Capability capability, PufDevice puf);

struct QueryRecord {
    std::string party;
    uint64_t challenge_seed = 0;
};
using QueryLedger = std::vector<QueryRecord>;

// The single CRP evaluation primitive: seeded random-phase challenge ->
// propagation -> NA-limited imaging -> Gabor digitization.
GaborCode respond(const PufDevice& device, uint64_t challenge_seed,
                  const GaborParams& gabor, QueryLedger* ledger = nullptr,
                  const std::string& party_id = "");

// Challenge seeds for protocol use are the first 64 bits of
// sha256(domain || data), fixing the challenge space to a seedable set.
uint64_t derive_challenge_seed(std::string_view domain,
                               const std::vector<uint8_t>& data);

struct IdentifyResult {
    bool accepted = false;
    double mean_fhd = 1.0;
    Transcript transcript;
};

// Verifier sends k random challenges; prover answers from its duplicate;
// accept iff the mean FHD against the verifier's local responses is < tau.
IdentifyResult group_identify(const Party& verifier, const Party& prover, int k,
                              double tau, CounterRng& rng, const GaborParams& gabor);

struct MacTag {
    uint64_t nonce = 0;
    std::vector<GaborCode> codes;
};

MacTag mac_tag(const PufDevice& sender, const std::vector<uint8_t>& message, int k,
               CounterRng& rng, const GaborParams& gabor);
bool mac_verify(const PufDevice& receiver, const std::vector<uint8_t>& message,
                const MacTag& tag, double tau, const GaborParams& gabor,
                double* mean_fhd = nullptr);

struct MacResult {
    bool accepted = false;
    double mean_fhd = 1.0;
    Transcript transcript;
};

// Tags a message with k responses to challenges derived from
// hash(message || nonce || i); any modification rederives different
// challenges and breaks the tag.
MacResult message_authenticate(const Party& sender, const Party& receiver,
                               const std::vector<uint8_t>& message, int k, double tau,
                               CounterRng& rng, const GaborParams& gabor);

struct KeyExchangeResult {
    std::vector<StableKey> keys;  // [0] = initiator's enrolled key
    bool all_equal = false;
    Transcript transcript;
};

// Initiator broadcasts challenges plus helper data from its own responses
// over the (optionally MAC-wrapped) group channel; every member
// reconstructs on its local duplicate.
KeyExchangeResult group_key_exchange(const std::vector<Party>& members,
                                     int n_challenges, const CodecParams& codec_params,
                                     CounterRng& rng, const GaborParams& gabor,
                                     bool mac_wrap = true, int mac_k = 2,
                                     double mac_tau = 0.4);

// Replays the eavesdropped challenges and helper data on the adversary's
// structure; yields the group key iff that structure is a within-radius
// duplicate.
StableKey ke_duplicate_attack(const Transcript& transcript, const Party& adversary,
                              const GaborParams& gabor);

struct FeistelCiphertext {
    uint64_t left = 0;
    uint64_t right = 0;
    std::vector<HelperData> round_helpers;
};

// Feistel block cipher with the PUF response as the secret round function.
// Round i: challenge from hash(R_i || i); round key from the fuzzy
// extractor; helper data rides with the ciphertext. Decryption re-measures
// the same challenges and error-corrects with the stored helpers -- the PUF
// is never inverted.
FeistelCiphertext feistel_encrypt(uint64_t left, uint64_t right, int rounds,
                                  const PufDevice& device, const CodecParams& codec_params,
                                  CounterRng& rng, const GaborParams& gabor);
std::pair<uint64_t, uint64_t> feistel_decrypt(const FeistelCiphertext& ct,
                                              const PufDevice& device,
                                              const GaborParams& gabor);

struct OtRunResult {
    std::vector<uint8_t> received;
    int choice = 0;
    bool duplicate_retained = false;
    QueryLedger receiver_ledger;
    Transcript transcript;
};

// Demonstrative PUF-based 1-of-2 OT: the sender pre-measures two random
// challenges, transfers the structure, and sends both messages masked by
// the extracted keys; the honest receiver queries only its chosen
// challenge (enforced by contract, witnessed by the query ledger) and
// confirms with H(key_b). Messages must be key_bits/8 bytes long.
OtRunResult ot_run(const Party& sender, const Party& receiver,
                   const std::array<std::vector<uint8_t>, 2>& messages, int choice_bit,
                   bool retain_duplicate, const CodecParams& codec_params,
                   CounterRng& rng, const GaborParams& gabor);

struct OtAttackReport {
    bool conclusive = false;
    int recovered_choice = -1;
    bool messages_recovered = false;
    std::array<std::vector<uint8_t>, 2> recovered_messages;
};

// With a retained duplicate, the transferor derives both candidate keys,
// matches the receiver's confirmation tag to learn the choice bit, and --
// the dual violation -- unmasks both messages from the transcript alone.
OtAttackReport ot_duplicate_attack(const Transcript& transcript,
                                   const PufDevice& retained_duplicate,
                                   const GaborParams& gabor);

struct TagVerifyResult {
    bool genuine = false;
    double mean_fhd = 1.0;
    Transcript transcript;
};

// Anti-counterfeit check: the label proves duplicate-hood against a locally
// held class reference; no server or CRP list involved.
TagVerifyResult tag_verify(const Party& reference, const Party& label, int k,
                           double tau, CounterRng& rng, const GaborParams& gabor);

}  // namespace pufsim::proto

#endif
