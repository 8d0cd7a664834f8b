#include "vaxledger/ledger.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vaxledger/error.hpp"

namespace vaxledger::ledger {

using nlohmann::json;

std::string to_string(TxType t) {
  return t == TxType::kRegistration ? "Registration" : "Vaccination";
}

TxType parse_tx_type(const std::string& text) {
  if (text == "Registration") return TxType::kRegistration;
  if (text == "Vaccination") return TxType::kVaccination;
  throw Error(Errc::kBadRequest, "unknown transaction type '" + text + "'");
}

std::string to_string(ChainFailure f) {
  switch (f) {
    case ChainFailure::kNone: return "none";
    case ChainFailure::kHeightMismatch: return "height-mismatch";
    case ChainFailure::kPreviousHashMismatch: return "previous-hash-mismatch";
    case ChainFailure::kMerkleRootMismatch: return "merkle-root-mismatch";
    case ChainFailure::kBlockSizeMismatch: return "block-size-mismatch";
    case ChainFailure::kBlockAddressMismatch: return "block-address-mismatch";
    case ChainFailure::kInsufficientDifficulty: return "insufficient-difficulty";
    case ChainFailure::kBadSignature: return "bad-signature";
    case ChainFailure::kUnknownSigner: return "unknown-signer";
    case ChainFailure::kUnknownContract: return "unknown-contract";
    case ChainFailure::kEmptyBlock: return "empty-block";
  }
  return "unknown";
}

// ── Accounts ────────────────────────────────────────────────────────────────

void AccountBook::add(AccountData account) {
  auto address = account.address;
  accounts_[address] = std::move(account);
}

const AccountData* AccountBook::find(const std::string& address) const {
  auto it = accounts_.find(address);
  return it == accounts_.end() ? nullptr : &it->second;
}

void AccountBook::set_asset(const std::string& address, const std::string& asset,
                            long long quantity) {
  auto it = accounts_.find(address);
  if (it == accounts_.end()) throw Error(Errc::kNotFound, address);
  for (auto& a : it->second.assets) {
    if (a.name == asset) {
      a.quantity = quantity;
      return;
    }
  }
  it->second.assets.push_back({asset, quantity});
}

const std::vector<ContractData>& genesis_contracts() {
  static const std::vector<ContractData> kContracts = {
      {kRegistrationContract, "1", "contracts/registration"},
      {kVaccinationContract, "1", "contracts/vaccination"},
  };
  return kContracts;
}

// ── Transactions ────────────────────────────────────────────────────────────

crypto::Record LedgerTransaction::signing_fields() const {
  return {{"txID", tx_id},
          {"txType", to_string(tx_type)},
          {"signerAddress", signer_address},
          {"timestamp", timestamp},
          {"entity.senderAddress", entity.sender_address},
          {"entity.amount", std::to_string(entity.amount)},
          {"entity.fees", std::to_string(entity.fees)},
          {"entity.additionalData", entity.additional_data},
          {"entity.memoPrimaryKey", entity.memo_primary_key},
          {"entity.memoHash", entity.memo_hash},
          {"contractRef", contract_ref}};
}

crypto::Record LedgerTransaction::fields() const {
  auto f = signing_fields();
  f["signature"] = crypto::to_hex(signature);
  return f;
}

LedgerTransaction new_transaction(TxType type, const crypto::SigningKeypair& signer,
                                  const EntityData& entity, const std::string& tx_id,
                                  const std::string& timestamp) {
  if (entity.amount != 1 || entity.fees != 0) {
    throw Error(Errc::kBadEntity, "amount must be 1 and fees 0");
  }
  LedgerTransaction tx;
  tx.tx_id = tx_id;
  tx.tx_type = type;
  tx.signer_address = signer.address();
  tx.timestamp = timestamp;
  tx.entity = entity;
  tx.contract_ref = type == TxType::kRegistration ? kRegistrationContract : kVaccinationContract;
  tx.signature = crypto::sign(crypto::as_bytes(crypto::canonical_record_bytes(tx.signing_fields())),
                              signer);
  return tx;
}

bool verify_transaction(const LedgerTransaction& tx, std::span<const std::uint8_t> public_key) {
  return crypto::verify(tx.signature,
                        crypto::as_bytes(crypto::canonical_record_bytes(tx.signing_fields())),
                        public_key);
}

Digest leaf_hash(const LedgerTransaction& tx) {
  return crypto::sha256(crypto::canonical_record_bytes(tx.fields()));
}

// ── Merkle ──────────────────────────────────────────────────────────────────

namespace {

Digest hash_pair(const Digest& left, const Digest& right) {
  std::array<std::uint8_t, 64> buf{};
  std::memcpy(buf.data(), left.data(), 32);
  std::memcpy(buf.data() + 32, right.data(), 32);
  return crypto::sha256(buf);
}

std::vector<Digest> leaves_of(const std::vector<LedgerTransaction>& txs) {
  std::vector<Digest> leaves;
  leaves.reserve(txs.size());
  for (const auto& tx : txs) leaves.push_back(leaf_hash(tx));
  return leaves;
}

}  // namespace

Digest merkle_root(const std::vector<Digest>& leaves) {
  if (leaves.empty()) throw Error(Errc::kEmptyList);
  std::vector<Digest> level = leaves;
  while (level.size() > 1) {
    if (level.size() % 2) level.push_back(level.back());
    std::vector<Digest> next;
    next.reserve(level.size() / 2);
    for (std::size_t i = 0; i < level.size(); i += 2) next.push_back(hash_pair(level[i], level[i + 1]));
    level = std::move(next);
  }
  return level.front();
}

std::string merkle_root(const std::vector<LedgerTransaction>& txs) {
  return crypto::to_hex(merkle_root(leaves_of(txs)));
}

MerkleProof merkle_proof(const std::vector<Digest>& leaves, std::size_t index) {
  if (index >= leaves.size()) throw Error(Errc::kIndexOutOfRange);
  MerkleProof proof;
  std::vector<Digest> level = leaves;
  while (level.size() > 1) {
    if (level.size() % 2) level.push_back(level.back());
    const std::size_t sibling = index ^ 1;
    proof.push_back({level[sibling], sibling < index});
    std::vector<Digest> next;
    for (std::size_t i = 0; i < level.size(); i += 2) next.push_back(hash_pair(level[i], level[i + 1]));
    level = std::move(next);
    index /= 2;
  }
  return proof;
}

MerkleProof merkle_proof(const std::vector<LedgerTransaction>& txs, std::size_t index) {
  if (index >= txs.size()) throw Error(Errc::kIndexOutOfRange);
  return merkle_proof(leaves_of(txs), index);
}

bool verify_merkle_proof(const Digest& leaf, const MerkleProof& proof, const std::string& root_hex) {
  Digest acc = leaf;
  for (const auto& step : proof) {
    acc = step.sibling_on_left ? hash_pair(step.sibling, acc) : hash_pair(acc, step.sibling);
  }
  return crypto::to_hex(acc) == root_hex;
}

// ── Blocks ──────────────────────────────────────────────────────────────────

std::string BlockHeader::canonical_bytes() const {
  return crypto::canonical_record_bytes({{"height", std::to_string(height)},
                                         {"previousHash", previous_hash},
                                         {"merkleRoot", merkle_root},
                                         {"timestamp", timestamp},
                                         {"blockSize", std::to_string(block_size)},
                                         {"nonce", std::to_string(nonce)},
                                         {"difficulty", std::to_string(difficulty)}});
}

std::string BlockHeader::compute_address() const { return crypto::sha256_hex(canonical_bytes()); }

unsigned leading_zero_bits(const Digest& d) {
  unsigned bits = 0;
  for (auto b : d) {
    if (b == 0) {
      bits += 8;
      continue;
    }
    for (int i = 7; i >= 0 && !(b >> i & 1); --i) ++bits;
    break;
  }
  return bits;
}

unsigned leading_zero_bits_hex(const std::string& hex) {
  if (!crypto::is_hex_digest(hex)) return 0;
  const auto raw = crypto::from_hex(hex);
  Digest d{};
  std::memcpy(d.data(), raw.data(), 32);
  return leading_zero_bits(d);
}

std::uint64_t serialized_size(const std::vector<LedgerTransaction>& txs) {
  std::uint64_t n = 0;
  for (const auto& tx : txs) n += crypto::canonical_record_bytes(tx.fields()).size();
  return n;
}

Block make_genesis(const std::string& timestamp) {
  Block g;
  g.header.height = 0;
  g.header.previous_hash = kZeroHash;
  g.header.merkle_root = kZeroHash;
  g.header.timestamp = timestamp;
  g.header.block_size = 0;
  g.header.difficulty = 0;
  g.header.nonce = 0;
  g.header.block_address = g.header.compute_address();
  return g;
}

ChainReport verify_block(const Block& block, std::uint64_t expected_height,
                         const std::string& expected_previous, const AccountBook& accounts) {
  const auto& h = block.header;
  auto fail = [&](ChainFailure why, std::string detail) {
    return ChainReport{false, expected_height, why, std::move(detail)};
  };
  if (h.height != expected_height) return fail(ChainFailure::kHeightMismatch, "unexpected height");
  if (h.previous_hash != expected_previous) {
    return fail(ChainFailure::kPreviousHashMismatch, "previousHash does not link to predecessor");
  }
  const bool genesis = expected_height == 0;
  if (genesis) {
    if (!block.transactions.empty()) return fail(ChainFailure::kMerkleRootMismatch, "genesis carries transactions");
    if (h.merkle_root != kZeroHash) return fail(ChainFailure::kMerkleRootMismatch, "genesis root must be zero");
  } else {
    if (block.transactions.empty()) return fail(ChainFailure::kEmptyBlock, "block has no transactions");
    if (merkle_root(block.transactions) != h.merkle_root) {
      return fail(ChainFailure::kMerkleRootMismatch, "recomputed Merkle root differs");
    }
  }
  if (serialized_size(block.transactions) != h.block_size) {
    return fail(ChainFailure::kBlockSizeMismatch, "blockSize differs from transactions");
  }
  if (h.compute_address() != h.block_address) {
    return fail(ChainFailure::kBlockAddressMismatch, "header hash differs from blockAddress");
  }
  if (leading_zero_bits_hex(h.block_address) < h.difficulty) {
    return fail(ChainFailure::kInsufficientDifficulty, "blockAddress misses difficulty target");
  }
  for (const auto& tx : block.transactions) {
    const AccountData* signer = accounts.find(tx.signer_address);
    const AccountType expected_type =
        tx.tx_type == TxType::kRegistration ? AccountType::kAgency : AccountType::kCenter;
    if (!signer || signer->type != expected_type || tx.entity.sender_address != tx.signer_address) {
      return fail(ChainFailure::kUnknownSigner, "transaction " + tx.tx_id + " has an unregistered signer");
    }
    const char* contract =
        tx.tx_type == TxType::kRegistration ? kRegistrationContract : kVaccinationContract;
    if (tx.contract_ref != contract) {
      return fail(ChainFailure::kUnknownContract, "transaction " + tx.tx_id + " has a bad contractRef");
    }
    if (!verify_transaction(tx, signer->public_key)) {
      return fail(ChainFailure::kBadSignature, "transaction " + tx.tx_id + " signature invalid");
    }
  }
  return {};
}

Chain::Chain(const std::string& genesis_timestamp) {
  blocks_.push_back(make_genesis(genesis_timestamp));
}

Chain Chain::from_blocks(std::vector<Block> blocks) {
  Chain c{Empty{}};
  c.blocks_ = std::move(blocks);
  for (const auto& b : c.blocks_) c.index_block(b);
  return c;
}

void Chain::index_block(const Block& b) {
  const std::size_t pos = &b - blocks_.data();
  for (std::size_t i = 0; i < b.transactions.size(); ++i) {
    tx_index_.emplace(b.transactions[i].tx_id, std::pair{pos, i});
  }
}

void Chain::append(Block block, const AccountBook& accounts) {
  const auto report = verify_block(block, blocks_.size(), tip().header.block_address, accounts);
  if (!report.ok) throw Error(Errc::kInvalidBlock, to_string(report.reason) + ": " + report.detail);
  blocks_.push_back(std::move(block));
  index_block(blocks_.back());
}

ChainReport Chain::verify(const AccountBook& accounts) const {
  if (blocks_.empty()) return {false, 0, ChainFailure::kHeightMismatch, "chain has no genesis"};
  std::string previous = kZeroHash;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    auto report = verify_block(blocks_[i], i, previous, accounts);
    if (!report.ok) return report;
    previous = blocks_[i].header.block_address;
  }
  return {};
}

std::optional<std::pair<std::uint64_t, LedgerTransaction>> Chain::find_transaction(
    const std::string& tx_id) const {
  auto it = tx_index_.find(tx_id);
  if (it == tx_index_.end()) return std::nullopt;
  const auto [block, pos] = it->second;
  return std::pair{std::uint64_t(block), blocks_[block].transactions[pos]};
}

Block mine_block(const Chain& chain, std::vector<LedgerTransaction> pending, unsigned difficulty,
                 const std::string& timestamp) {
  if (pending.empty()) throw Error(Errc::kEmptyPending);
  Block b;
  b.header.height = chain.tip().header.height + 1;
  b.header.previous_hash = chain.tip().header.block_address;
  b.header.merkle_root = merkle_root(pending);
  b.header.timestamp = timestamp;
  b.header.block_size = serialized_size(pending);
  b.header.difficulty = difficulty;
  b.transactions = std::move(pending);
  for (std::uint64_t nonce = 0;; ++nonce) {
    b.header.nonce = nonce;
    const Digest d = crypto::sha256(b.header.canonical_bytes());
    if (leading_zero_bits(d) >= difficulty) {
      b.header.block_address = crypto::to_hex(d);
      return b;
    }
  }
}

// ── Export / import ─────────────────────────────────────────────────────────

namespace {

json tx_json(const LedgerTransaction& tx) {
  return json{{"txID", tx.tx_id},
              {"txType", to_string(tx.tx_type)},
              {"signerAddress", tx.signer_address},
              {"timestamp", tx.timestamp},
              {"entity",
               {{"senderAddress", tx.entity.sender_address},
                {"amount", tx.entity.amount},
                {"fees", tx.entity.fees},
                {"additionalData", tx.entity.additional_data},
                {"memoPrimaryKey", tx.entity.memo_primary_key},
                {"memoHash", tx.entity.memo_hash}}},
              {"contractRef", tx.contract_ref},
              {"signature", crypto::to_hex(tx.signature)}};
}

LedgerTransaction tx_from_json(const json& j) {
  LedgerTransaction tx;
  tx.tx_id = j.at("txID").get<std::string>();
  tx.tx_type = parse_tx_type(j.at("txType").get<std::string>());
  tx.signer_address = j.at("signerAddress").get<std::string>();
  tx.timestamp = j.at("timestamp").get<std::string>();
  const auto& e = j.at("entity");
  tx.entity.sender_address = e.at("senderAddress").get<std::string>();
  tx.entity.amount = e.at("amount").get<long long>();
  tx.entity.fees = e.at("fees").get<long long>();
  tx.entity.additional_data = e.at("additionalData").get<std::string>();
  tx.entity.memo_primary_key = e.at("memoPrimaryKey").get<std::string>();
  tx.entity.memo_hash = e.at("memoHash").get<std::string>();
  tx.contract_ref = j.at("contractRef").get<std::string>();
  const auto sig = crypto::from_hex(j.at("signature").get<std::string>());
  if (sig.size() != 64) throw Error(Errc::kBadRequest, "signature must be 64 bytes");
  std::memcpy(tx.signature.data(), sig.data(), 64);
  return tx;
}

}  // namespace

std::string transaction_to_json(const LedgerTransaction& tx) { return tx_json(tx).dump(); }

std::string block_to_json_line(const Block& b) {
  const auto& h = b.header;
  json txs = json::array();
  for (const auto& tx : b.transactions) txs.push_back(tx_json(tx));
  return json{{"header",
               {{"height", h.height},
                {"previousHash", h.previous_hash},
                {"merkleRoot", h.merkle_root},
                {"timestamp", h.timestamp},
                {"blockSize", h.block_size},
                {"blockAddress", h.block_address},
                {"nonce", h.nonce},
                {"difficulty", h.difficulty}}},
              {"transactions", std::move(txs)}}
      .dump();
}

Block block_from_json_line(const std::string& line) {
  try {
    const json j = json::parse(line);
    Block b;
    const auto& h = j.at("header");
    b.header.height = h.at("height").get<std::uint64_t>();
    b.header.previous_hash = h.at("previousHash").get<std::string>();
    b.header.merkle_root = h.at("merkleRoot").get<std::string>();
    b.header.timestamp = h.at("timestamp").get<std::string>();
    b.header.block_size = h.at("blockSize").get<std::uint64_t>();
    b.header.block_address = h.at("blockAddress").get<std::string>();
    b.header.nonce = h.at("nonce").get<std::uint64_t>();
    b.header.difficulty = h.at("difficulty").get<unsigned>();
    for (const auto& t : j.at("transactions")) b.transactions.push_back(tx_from_json(t));
    return b;
  } catch (const json::exception& e) {
    throw Error(Errc::kBadRequest, std::string("malformed block: ") + e.what());
  }
}

void export_chain(const Chain& chain, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::kFixtureError, "cannot write " + path);
  for (const auto& b : chain.blocks()) out << block_to_json_line(b) << '\n';
}

Chain import_chain(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kFixtureError, "cannot open " + path);
  std::vector<Block> blocks;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) blocks.push_back(block_from_json_line(line));
  }
  return Chain::from_blocks(std::move(blocks));
}

// ── Ledger ──────────────────────────────────────────────────────────────────

Ledger::Ledger(unsigned difficulty, std::size_t batch_size, const Clock& clock)
    : difficulty_(difficulty),
      batch_size_(batch_size == 0 ? 1 : batch_size),
      clock_(clock),
      chain_(format_rfc3339(clock.now())) {}

void Ledger::register_account(AccountData account) {
  std::unique_lock lock(mu_);
  accounts_.add(std::move(account));
}

void Ledger::set_asset(const std::string& address, const std::string& asset, long long quantity) {
  std::unique_lock lock(mu_);
  accounts_.set_asset(address, asset, quantity);
}

void Ledger::submit(LedgerTransaction tx) {
  std::unique_lock lock(mu_);
  pending_.push_back(std::move(tx));
  if (pending_.size() >= batch_size_) mine_locked();
}

bool Ledger::flush() {
  std::unique_lock lock(mu_);
  if (pending_.empty()) return false;
  mine_locked();
  return true;
}

void Ledger::mine_locked() {
  Block b = mine_block(chain_, std::move(pending_), difficulty_, format_rfc3339(clock_.now()));
  pending_.clear();
  chain_.append(std::move(b), accounts_);
}

std::size_t Ledger::pending_count() const {
  std::shared_lock lock(mu_);
  return pending_.size();
}

Chain Ledger::chain() const {
  std::shared_lock lock(mu_);
  return chain_;
}

AccountBook Ledger::accounts() const {
  std::shared_lock lock(mu_);
  return accounts_;
}

std::vector<std::uint64_t> Ledger::nonces() const {
  std::shared_lock lock(mu_);
  std::vector<std::uint64_t> out;
  for (std::size_t i = 1; i < chain_.blocks().size(); ++i) out.push_back(chain_.blocks()[i].header.nonce);
  return out;
}

std::optional<std::pair<std::uint64_t, LedgerTransaction>> Ledger::get_transaction(
    const std::string& tx_id) const {
  std::shared_lock lock(mu_);
  return chain_.find_transaction(tx_id);
}

std::vector<Block> Ledger::blocks(std::uint64_t from, std::uint64_t to) const {
  std::shared_lock lock(mu_);
  std::vector<Block> out;
  const auto& all = chain_.blocks();
  for (std::uint64_t h = from; h <= to && h < all.size(); ++h) out.push_back(all[h]);
  return out;
}

std::size_t Ledger::height() const {
  std::shared_lock lock(mu_);
  return chain_.size() - 1;
}

ChainReport Ledger::verify() const {
  std::shared_lock lock(mu_);
  return chain_.verify(accounts_);
}

}  // namespace vaxledger::ledger
