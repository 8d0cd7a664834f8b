#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vaxledger/audit.hpp"
#include "vaxledger/clock.hpp"
#include "vaxledger/ledger.hpp"
#include "vaxledger/registry.hpp"

namespace vaxledger::sim {

/// 2026-01-01T00:00:00Z; the simulated clock starts here.
inline constexpr UnixSeconds kScenarioEpoch = 1767225600;

// ── Fixture generation ──────────────────────────────────────────────────────

/// Four PIN regions per agency; agencies are spread over a fixed set of states.
std::vector<registry::PinRegion> generate_regions(std::size_t agencies);

/// n directory entries with unique 12-digit uuids and ages uniform in [min_age, max_age]
/// as of `reference`. PINs are drawn uniformly from `regions`.
std::vector<registry::IdentityDirectoryEntry> generate_population(
    std::size_t n, const std::vector<registry::PinRegion>& regions, std::uint64_t seed,
    CivilDate reference, int min_age = 12, int max_age = 90);

/// Writes directory.jsonl and regions.jsonl into `dir`.
void write_fixtures(const std::filesystem::path& dir,
                    const std::vector<registry::IdentityDirectoryEntry>& entries,
                    const std::vector<registry::PinRegion>& regions);

// ── Tampering ───────────────────────────────────────────────────────────────

enum class TamperKind { kNone, kDatabase, kLedger };

struct TamperSpec {
  TamperKind kind = TamperKind::kNone;
  std::size_t count = 0;
};
/// "none", "db:k" or "ledger:k". Throws Error(kBadRequest).
TamperSpec parse_tamper(const std::string& text);
std::string to_string(const TamperSpec& spec);

struct TamperEntry {
  std::string target;  // citizen | vaccination | block
  std::string subject;
  std::string field;
  std::string old_value;
  std::string new_value;
};

/// Mutates one field each of k distinct citizen/vaccination records.
/// Only registration-time or dose-detail fields are touched, so each entry yields exactly one
/// hash finding. Throws Error(kBadRequest) if k exceeds the number of records.
std::vector<TamperEntry> inject_db_tamper(registry::Store& store, std::size_t k, std::uint64_t seed);

/// Replaces one byte inside a JSON value of an exported block line with a different
/// byte of the same character class; the result is still well-formed JSON.
/// Returns the mutated line; `where` receives the byte offset.
std::string mutate_block_line(const std::string& line, std::mt19937_64& rng, std::size_t* where = nullptr);

struct LedgerTamperResult {
  ledger::Chain chain;
  std::vector<TamperEntry> manifest;
};
/// Mutates one byte in each of k distinct non-genesis blocks of an exported copy and
/// re-imports it. Throws Error(kBadRequest) if k exceeds the number of mined blocks.
LedgerTamperResult inject_ledger_tamper(const ledger::Chain& chain, std::size_t k, std::uint64_t seed);

// ── Scenario runner ─────────────────────────────────────────────────────────

struct ScenarioConfig {
  std::size_t citizens = 100;
  std::size_t centers = 4;
  std::size_t agencies = 2;
  int doses_per_citizen = 2;
  std::uint64_t seed = 1;
  TamperSpec tamper;
  unsigned difficulty = 8;
  std::size_t batch_size = 16;
  int max_doses = 2;
  /// When set, drive a live service at this base URL instead of an in-process engine.
  std::optional<std::string> http_url;
  /// When set, snapshots the store and exports the chain into this directory.
  std::optional<std::filesystem::path> artifacts_dir;
};

struct ScenarioResult {
  std::string report_json;
  audit::AuditReport audit;
  std::vector<TamperEntry> manifest;
  std::size_t registration_txs = 0;
  std::size_t vaccination_txs = 0;
  std::size_t blocks = 0;
  /// Every API response body recorded while driving a live service (http mode only).
  std::vector<std::string> api_responses;
  /// The generated directory, for privacy scans.
  std::vector<registry::IdentityDirectoryEntry> population;
};

/// Registers agencies, centers and citizens, vaccinates every citizen up to
/// doses_per_citizen, flushes the ledger, applies the tamper spec and audits.
/// Engine errors propagate as Error.
ScenarioResult run_scenario(const ScenarioConfig& config);

/// Report JSON with wall-time fields removed, for determinism comparisons.
std::string strip_wall_time(const std::string& report_json);

/// Fixture strings (uuid, name, phone, DOB) that occur in `text`.
std::vector<std::string> privacy_leaks(const std::string& text,
                                       const std::vector<registry::IdentityDirectoryEntry>& population);

}  // namespace vaxledger::sim
