#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace vaxledger {

/// Randomness source for every derivation that needs a fresh factor.
/// Default is the OS CSPRNG; a seed switches to a reproducible stream.
class Rng {
 public:
  Rng() = default;
  explicit Rng(std::uint64_t seed) : seeded_(std::mt19937_64(seed)) {}
  explicit Rng(std::optional<std::uint64_t> seed) {
    if (seed) seeded_.emplace(*seed);
  }

  bool deterministic() const { return seeded_.has_value(); }

  std::uint64_t next_u64();
  /// Uniform in [0, bound).
  std::uint64_t uniform(std::uint64_t bound);
  std::vector<std::uint8_t> bytes(std::size_t n);
  std::string hex(std::size_t n_bytes);

 private:
  std::mutex mu_;
  std::optional<std::mt19937_64> seeded_;
};

}  // namespace vaxledger
