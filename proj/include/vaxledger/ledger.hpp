#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "vaxledger/clock.hpp"
#include "vaxledger/crypto.hpp"

namespace vaxledger::ledger {

using crypto::Digest;

inline const std::string kZeroHash(64, '0');
inline constexpr const char* kRegistrationContract = "registration-v1";
inline constexpr const char* kVaccinationContract = "vaccination-v1";
inline constexpr const char* kDoseAsset = "vaccine-doses";

enum class TxType { kRegistration, kVaccination };
std::string to_string(TxType t);
TxType parse_tx_type(const std::string& text);

enum class AccountType { kAgency, kCenter };

struct Asset {
  std::string name;
  long long quantity = 0;
};

struct AccountData {
  std::string address;
  std::array<std::uint8_t, 32> public_key{};
  AccountType type = AccountType::kAgency;
  std::vector<Asset> assets;
};

/// Address -> account. Supplies public keys for signature checks.
class AccountBook {
 public:
  void add(AccountData account);
  const AccountData* find(const std::string& address) const;
  void set_asset(const std::string& address, const std::string& asset, long long quantity);
  const std::map<std::string, AccountData>& all() const { return accounts_; }

 private:
  std::map<std::string, AccountData> accounts_;
};

struct EntityData {
  std::string sender_address;
  long long amount = 1;
  long long fees = 0;
  std::string additional_data;
  std::string memo_primary_key;
  std::string memo_hash;
};

struct ContractData {
  std::string code_id;
  std::string version;
  std::string storage_ref;
};

/// Contract metadata fixed at genesis, one entry per transaction type. Never executed.
const std::vector<ContractData>& genesis_contracts();

struct LedgerTransaction {
  std::string tx_id;
  TxType tx_type = TxType::kRegistration;
  std::string signer_address;
  std::string timestamp;
  EntityData entity;
  std::string contract_ref;
  crypto::Signature signature{};

  /// Every field except the signature.
  crypto::Record signing_fields() const;
  /// signing_fields() plus the signature; the Merkle leaf preimage.
  crypto::Record fields() const;
};

/// Throws Error(kBadEntity) unless amount == 1 and fees == 0.
LedgerTransaction new_transaction(TxType type, const crypto::SigningKeypair& signer,
                                  const EntityData& entity, const std::string& tx_id,
                                  const std::string& timestamp);
bool verify_transaction(const LedgerTransaction& tx, std::span<const std::uint8_t> public_key);

Digest leaf_hash(const LedgerTransaction& tx);

// ── Merkle tree ─────────────────────────────────────────────────────────────

/// Root over already-hashed leaves. A lone node at any level is paired with itself.
/// A single leaf is its own root. Throws Error(kEmptyList).
Digest merkle_root(const std::vector<Digest>& leaves);
std::string merkle_root(const std::vector<LedgerTransaction>& txs);

struct ProofStep {
  Digest sibling{};
  bool sibling_on_left = false;
};
using MerkleProof = std::vector<ProofStep>;

/// Throws Error(kIndexOutOfRange).
MerkleProof merkle_proof(const std::vector<Digest>& leaves, std::size_t index);
MerkleProof merkle_proof(const std::vector<LedgerTransaction>& txs, std::size_t index);
bool verify_merkle_proof(const Digest& leaf, const MerkleProof& proof, const std::string& root_hex);

// ── Blocks ──────────────────────────────────────────────────────────────────

struct BlockHeader {
  std::uint64_t height = 0;
  std::string previous_hash = kZeroHash;
  std::string merkle_root = kZeroHash;
  std::string timestamp;
  std::uint64_t block_size = 0;
  std::string block_address;
  std::uint64_t nonce = 0;
  unsigned difficulty = 0;

  /// Header fields hashed by the proof of work (all but blockAddress).
  std::string canonical_bytes() const;
  std::string compute_address() const;
};

struct Block {
  BlockHeader header;
  std::vector<LedgerTransaction> transactions;
};

unsigned leading_zero_bits(const Digest& d);
unsigned leading_zero_bits_hex(const std::string& hex);
std::uint64_t serialized_size(const std::vector<LedgerTransaction>& txs);

Block make_genesis(const std::string& timestamp);

enum class ChainFailure {
  kNone,
  kHeightMismatch,
  kPreviousHashMismatch,
  kMerkleRootMismatch,
  kBlockSizeMismatch,
  kBlockAddressMismatch,
  kInsufficientDifficulty,
  kBadSignature,
  kUnknownSigner,
  kUnknownContract,
  kEmptyBlock,
};
std::string to_string(ChainFailure f);

struct ChainReport {
  bool ok = true;
  std::optional<std::uint64_t> first_bad_height;
  ChainFailure reason = ChainFailure::kNone;
  std::string detail;
};

/// Checks one block in isolation against its expected predecessor address.
ChainReport verify_block(const Block& block, std::uint64_t expected_height,
                         const std::string& expected_previous, const AccountBook& accounts);

/// Committed blocks with an index from txID to position. Blocks are only ever appended.
class Chain {
 public:
  explicit Chain(const std::string& genesis_timestamp = "1970-01-01T00:00:00Z");

  /// Builds a chain from exported blocks without validating them; use verify() afterwards.
  static Chain from_blocks(std::vector<Block> blocks);

  /// Throws Error(kInvalidBlock) if the block fails verification.
  void append(Block block, const AccountBook& accounts);

  ChainReport verify(const AccountBook& accounts) const;

  const std::vector<Block>& blocks() const { return blocks_; }
  const Block& tip() const { return blocks_.back(); }
  std::size_t size() const { return blocks_.size(); }

  std::optional<std::pair<std::uint64_t, LedgerTransaction>> find_transaction(
      const std::string& tx_id) const;

 private:
  struct Empty {};
  explicit Chain(Empty) {}
  void index_block(const Block& b);

  std::vector<Block> blocks_;
  std::map<std::string, std::pair<std::size_t, std::size_t>> tx_index_;
};

/// Proof of work over the tip. Nonce counts up from 0. Throws Error(kEmptyPending).
Block mine_block(const Chain& chain, std::vector<LedgerTransaction> pending, unsigned difficulty,
                 const std::string& timestamp);

// ── Export / import (JSON lines, one block per line, keys in canonical order) ─

std::string block_to_json_line(const Block& b);
/// Throws Error(kBadRequest) on malformed input.
Block block_from_json_line(const std::string& line);
std::string transaction_to_json(const LedgerTransaction& tx);

void export_chain(const Chain& chain, const std::string& path);
Chain import_chain(const std::string& path);

/// Thread-safe ledger: chain + account book + pending pool. Mines whenever the
/// pool reaches the batch size; flush() mines whatever is left.
class Ledger {
 public:
  Ledger(unsigned difficulty, std::size_t batch_size, const Clock& clock);

  void register_account(AccountData account);
  void set_asset(const std::string& address, const std::string& asset, long long quantity);

  void submit(LedgerTransaction tx);
  /// Mines a block from the pending pool if nonempty. Returns true if a block was mined.
  bool flush();

  std::size_t pending_count() const;
  /// Copies of committed state.
  Chain chain() const;
  AccountBook accounts() const;
  std::vector<std::uint64_t> nonces() const;

  std::optional<std::pair<std::uint64_t, LedgerTransaction>> get_transaction(
      const std::string& tx_id) const;
  std::vector<Block> blocks(std::uint64_t from, std::uint64_t to) const;
  std::size_t height() const;
  ChainReport verify() const;

 private:
  void mine_locked();

  mutable std::shared_mutex mu_;
  unsigned difficulty_;
  std::size_t batch_size_;
  const Clock& clock_;
  Chain chain_;
  AccountBook accounts_;
  std::vector<LedgerTransaction> pending_;
};

}  // namespace vaxledger::ledger
