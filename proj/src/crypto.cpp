#include "vaxledger/crypto.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <memory>
#include <stdexcept>

#include "vaxledger/error.hpp"

namespace vaxledger::crypto {

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* ctx) const { EVP_CIPHER_CTX_free(ctx); }
};
struct PkeyDeleter {
  void operator()(EVP_PKEY* key) const { EVP_PKEY_free(key); }
};
struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

std::array<std::uint8_t, 16> aes_block(std::span<const std::uint8_t, 32> key,
                                       std::span<const std::uint8_t, 16> in, bool encrypt) {
  std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter> ctx(EVP_CIPHER_CTX_new());
  if (!ctx || EVP_CipherInit_ex(ctx.get(), EVP_aes_256_ecb(), nullptr, key.data(), nullptr,
                                encrypt ? 1 : 0) != 1) {
    throw std::runtime_error("AES init failed");
  }
  EVP_CIPHER_CTX_set_padding(ctx.get(), 0);
  std::array<std::uint8_t, 16> out{};
  int len = 0;
  if (EVP_CipherUpdate(ctx.get(), out.data(), &len, in.data(), 16) != 1 || len != 16) {
    throw std::runtime_error("AES block failed");
  }
  return out;
}

std::array<std::uint8_t, 32> decode_key(std::string_view static_key_hex) {
  if (!is_hex_digest(static_key_hex)) throw Error(Errc::kBadRequest, "static key must be 64 hex chars");
  const Bytes raw = from_hex(static_key_hex);
  std::array<std::uint8_t, 32> key{};
  std::memcpy(key.data(), raw.data(), 32);
  return key;
}

}  // namespace

std::string to_hex(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0x0f]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw Error(Errc::kBadRequest, "odd-length hex");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int hi = hex_value(hex[2 * i]), lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(Errc::kBadRequest, "non-hex character");
    out[i] = std::uint8_t(hi << 4 | lo);
  }
  return out;
}

bool is_hex_digest(std::string_view text) {
  if (text.size() != 64) return false;
  for (char c : text) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

Digest sha256(std::span<const std::uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  return out;
}

Digest sha256(std::string_view text) { return sha256(as_bytes(text)); }
std::string sha256_hex(std::span<const std::uint8_t> data) { return to_hex(sha256(data)); }
std::string sha256_hex(std::string_view text) { return to_hex(sha256(text)); }

Digest xor3_digest(std::string_view a, std::string_view b, std::string_view c) {
  const Digest da = sha256(a), db = sha256(b), dc = sha256(c);
  Digest out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] ^ db[i] ^ dc[i];
  return out;
}

std::string generate_pseudo_uuid(std::string_view uuid, std::uint64_t r) {
  std::string joined(uuid);
  joined += std::to_string(r);
  return sha256_hex(sha256(joined));
}

std::string generate_static_key(std::string_view identity, const MasterKey& master_key,
                                std::uint64_t r) {
  return sha256_hex(xor3_digest(identity, master_key.value, std::to_string(r)));
}

int generate_secret_code(std::string_view pseudo_uuid, std::string_view pin_code,
                         SecretCodeMode mode, int retry) {
  std::string joined(pseudo_uuid);
  joined += pin_code;
  if (mode == SecretCodeMode::kUnique) {
    joined += std::to_string(retry);
    const Digest h = sha256(joined);
    // Big-endian reduction mod 9000, one byte at a time.
    unsigned rem = 0;
    for (auto b : h) rem = (rem * 256 + b) % 9000;
    return 1000 + int(rem);
  }
  const Digest h = sha256(joined);
  // ceil(log2(H)): bit length of H, minus one when H is an exact power of two.
  std::size_t first = 0;
  while (first < h.size() && h[first] == 0) ++first;
  if (first == h.size()) return 0;
  int top_bit = 7;
  while (!(h[first] >> top_bit & 1)) --top_bit;
  const int bit_length = int(h.size() - first - 1) * 8 + top_bit + 1;
  bool power_of_two = (h[first] & (h[first] - 1)) == 0;
  for (std::size_t i = first + 1; power_of_two && i < h.size(); ++i) power_of_two = h[i] == 0;
  const int ceil_log2 = power_of_two ? bit_length - 1 : bit_length;
  return ceil_log2 * 5;
}

std::string generate_center_id(std::string_view state_code, const MasterKey& master_key,
                               std::string_view address, std::uint64_t r) {
  std::string joined = master_key.value;
  joined += address;
  joined += std::to_string(r);
  const Digest h = sha256(joined);
  std::uint64_t rem = 0;
  for (auto b : h) rem = (rem * 256 + b) % 100'000'000ULL;
  std::string digits = std::to_string(rem);
  return std::string(state_code) + std::string(8 - digits.size(), '0') + digits;
}

std::string generate_vaccination_id(std::string_view pseudo_uuid, int dose_number,
                                    std::string_view center_id) {
  std::string id(pseudo_uuid);
  id += std::to_string(dose_number);
  id += center_id;
  return id;
}

std::array<std::uint8_t, 16> aes256_encrypt_block(std::span<const std::uint8_t, 32> key,
                                                  std::span<const std::uint8_t, 16> block) {
  return aes_block(key, block, true);
}

std::array<std::uint8_t, 16> aes256_decrypt_block(std::span<const std::uint8_t, 32> key,
                                                  std::span<const std::uint8_t, 16> block) {
  return aes_block(key, block, false);
}

std::string encrypt_challenge(std::uint64_t number, std::string_view static_key_hex) {
  if (number < kChallengeMin || number > kChallengeMax) {
    throw Error(Errc::kBadRequest, "challenge must have exactly 10 digits");
  }
  const auto key = decode_key(static_key_hex);
  std::array<std::uint8_t, 16> block{};
  const std::string digits = std::to_string(number);
  std::memcpy(block.data(), digits.data(), 10);
  return to_hex(aes256_encrypt_block(key, block));
}

std::uint64_t decrypt_challenge(std::string_view ciphertext_hex, std::string_view static_key_hex) {
  if (ciphertext_hex.size() != 32) throw Error(Errc::kMalformedCiphertext, "expected 32 hex chars");
  Bytes ct;
  try {
    ct = from_hex(ciphertext_hex);
  } catch (const Error&) {
    throw Error(Errc::kMalformedCiphertext, "non-hex ciphertext");
  }
  const auto key = decode_key(static_key_hex);
  std::array<std::uint8_t, 16> in{};
  std::memcpy(in.data(), ct.data(), 16);
  const auto block = aes256_decrypt_block(key, in);
  std::uint64_t n = 0;
  for (int i = 0; i < 10; ++i) {
    if (block[i] < '0' || block[i] > '9') throw Error(Errc::kFormatFailure);
    n = n * 10 + (block[i] - '0');
  }
  for (int i = 10; i < 16; ++i) {
    if (block[i] != 0) throw Error(Errc::kFormatFailure);
  }
  if (n < kChallengeMin) throw Error(Errc::kFormatFailure);
  return n;
}

std::string SigningKeypair::address() const { return sha256_hex(public_key); }

SigningKeypair keypair_from_seed(std::span<const std::uint8_t, 32> seed) {
  std::unique_ptr<EVP_PKEY, PkeyDeleter> key(
      EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, seed.data(), seed.size()));
  if (!key) throw std::runtime_error("Ed25519 key construction failed");
  SigningKeypair out;
  std::memcpy(out.seed.data(), seed.data(), 32);
  std::size_t len = out.public_key.size();
  if (EVP_PKEY_get_raw_public_key(key.get(), out.public_key.data(), &len) != 1 || len != 32) {
    throw std::runtime_error("Ed25519 public key export failed");
  }
  return out;
}

Signature sign(std::span<const std::uint8_t> message, const SigningKeypair& keys) {
  std::unique_ptr<EVP_PKEY, PkeyDeleter> key(
      EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, keys.seed.data(), keys.seed.size()));
  std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx(EVP_MD_CTX_new());
  if (!key || !ctx || EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, key.get()) != 1) {
    throw std::runtime_error("Ed25519 sign init failed");
  }
  Signature sig{};
  std::size_t len = sig.size();
  if (EVP_DigestSign(ctx.get(), sig.data(), &len, message.data(), message.size()) != 1 || len != 64) {
    throw std::runtime_error("Ed25519 sign failed");
  }
  return sig;
}

bool verify(std::span<const std::uint8_t> signature, std::span<const std::uint8_t> message,
            std::span<const std::uint8_t> public_key) {
  if (signature.size() != 64 || public_key.size() != 32) return false;
  std::unique_ptr<EVP_PKEY, PkeyDeleter> key(
      EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, public_key.data(), public_key.size()));
  std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx(EVP_MD_CTX_new());
  if (!key || !ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, key.get()) != 1) {
    return false;
  }
  return EVP_DigestVerify(ctx.get(), signature.data(), signature.size(), message.data(),
                          message.size()) == 1;
}

std::string canonical_record_bytes(const Record& record) {
  std::string out;
  for (const auto& [name, value] : record) {
    out += name;
    out += '=';
    out += value;
    out += '\n';
  }
  return out;
}

}  // namespace vaxledger::crypto
