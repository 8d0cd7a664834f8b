#include "vaxledger/random.hpp"

#include <openssl/rand.h>

#include <stdexcept>

#include "vaxledger/crypto.hpp"

namespace vaxledger {

std::uint64_t Rng::next_u64() {
  std::lock_guard lock(mu_);
  if (seeded_) return (*seeded_)();
  std::uint64_t v = 0;
  if (RAND_bytes(reinterpret_cast<unsigned char*>(&v), sizeof v) != 1) {
    throw std::runtime_error("RAND_bytes failed");
  }
  return v;
}

std::uint64_t Rng::uniform(std::uint64_t bound) {
  if (bound == 0) return 0;
  // Rejection sampling keeps the result unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % bound;
}

std::vector<std::uint8_t> Rng::bytes(std::size_t n) {
  std::vector<std::uint8_t> out(n);
  for (std::size_t i = 0; i < n; i += 8) {
    const std::uint64_t v = next_u64();
    for (std::size_t j = 0; j < 8 && i + j < n; ++j) out[i + j] = std::uint8_t(v >> (8 * j));
  }
  return out;
}

std::string Rng::hex(std::size_t n_bytes) { return crypto::to_hex(bytes(n_bytes)); }

}  // namespace vaxledger
