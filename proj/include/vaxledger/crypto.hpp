#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vaxledger::crypto {

using Bytes = std::vector<std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

std::string to_hex(std::span<const std::uint8_t> bytes);
/// Throws Error(kBadRequest) on odd length or non-hex characters.
Bytes from_hex(std::string_view hex);
/// 64 lowercase hex characters.
bool is_hex_digest(std::string_view text);

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view text);
std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view text);

/// sha256 of each operand's UTF-8 bytes, XORed bytewise.
Digest xor3_digest(std::string_view a, std::string_view b, std::string_view c);

/// 32 random bytes as hex.
struct MasterKey {
  std::string value;
};

/// Double SHA-256 over uuid || decimal(r); the outer hash consumes the raw inner digest.
std::string generate_pseudo_uuid(std::string_view uuid, std::uint64_t r);

/// sha256(xor3_digest(identity, masterKey, decimal(r))) as hex. Used for centers and citizens.
std::string generate_static_key(std::string_view identity, const MasterKey& master_key,
                                std::uint64_t r);

enum class SecretCodeMode { kFaithful, kUnique };

/// Faithful: ceil(log2(H)) * 5 with H = sha256(pseudoUUID || pin) read big-endian.
/// Unique: 1000 + (sha256(pseudoUUID || pin || decimal(retry)) mod 9000).
int generate_secret_code(std::string_view pseudo_uuid, std::string_view pin_code,
                         SecretCodeMode mode, int retry = 0);

/// State code followed by 8 digits taken from sha256(masterKey || address || decimal(r)) mod 1e8.
std::string generate_center_id(std::string_view state_code, const MasterKey& master_key,
                               std::string_view address, std::uint64_t r);

std::string generate_vaccination_id(std::string_view pseudo_uuid, int dose_number,
                                    std::string_view center_id);

// AES-256 single-block challenge cipher. Plaintext block is the 10 ASCII digits
// of the challenge followed by 6 zero bytes.

constexpr std::uint64_t kChallengeMin = 1'000'000'000ULL;
constexpr std::uint64_t kChallengeMax = 9'999'999'999ULL;

std::array<std::uint8_t, 16> aes256_encrypt_block(std::span<const std::uint8_t, 32> key,
                                                  std::span<const std::uint8_t, 16> block);
std::array<std::uint8_t, 16> aes256_decrypt_block(std::span<const std::uint8_t, 32> key,
                                                  std::span<const std::uint8_t, 16> block);

/// Returns 32 hex chars. Throws Error(kBadRequest) for an out-of-range number or malformed key.
std::string encrypt_challenge(std::uint64_t number, std::string_view static_key_hex);
/// Throws Error(kMalformedCiphertext) or Error(kFormatFailure).
std::uint64_t decrypt_challenge(std::string_view ciphertext_hex, std::string_view static_key_hex);

// Ed25519.

struct SigningKeypair {
  std::array<std::uint8_t, 32> seed{};
  std::array<std::uint8_t, 32> public_key{};

  /// sha256 of the public key, hex.
  std::string address() const;
};

using Signature = std::array<std::uint8_t, 64>;

SigningKeypair keypair_from_seed(std::span<const std::uint8_t, 32> seed);
Signature sign(std::span<const std::uint8_t> message, const SigningKeypair& keys);
bool verify(std::span<const std::uint8_t> signature, std::span<const std::uint8_t> message,
            std::span<const std::uint8_t> public_key);

/// Ordered field-name -> text map. std::map orders by unsigned byte value.
using Record = std::map<std::string, std::string>;

/// "name=value\n" per field, ascending by name.
std::string canonical_record_bytes(const Record& record);

inline std::span<const std::uint8_t> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace vaxledger::crypto
