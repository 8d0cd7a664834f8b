#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vaxledger/clock.hpp"
#include "vaxledger/ledger.hpp"
#include "vaxledger/registry.hpp"

namespace vaxledger::audit {

enum class FindingKind {
  kHashMismatch,
  kMissingTransaction,
  kOrphanTransaction,
  kDoseSequenceError,
  kStockMismatch,
  kChainInvalid,
};
std::string to_string(FindingKind k);

struct AuditFinding {
  FindingKind kind;
  std::string subject_key;
  std::string detail;
};

struct AuditReport {
  std::size_t checked_citizens = 0;
  std::size_t checked_vaccinations = 0;
  std::size_t checked_centers = 0;
  std::vector<AuditFinding> findings;
  bool chain_ok = true;
  std::string started_at;
  std::string finished_at;

  bool clean() const { return findings.empty() && chain_ok; }
};

/// Read-only view over a store and a committed chain. The chain and account
/// book are taken by value so the audit can run against a detached copy.
class Auditor {
 public:
  Auditor(const registry::Store& store, ledger::Chain chain, ledger::AccountBook accounts,
          int max_doses);

  std::optional<AuditFinding> verify_entity_hash(const registry::CitizenProfile& p) const;
  std::optional<AuditFinding> verify_entity_hash(const registry::VaccinationRecord& v) const;

  /// Throws Error(kNotFound).
  std::vector<AuditFinding> audit_citizen(const std::string& pseudo_uuid) const;
  std::vector<AuditFinding> audit_center_stock(const std::string& center_id) const;

  /// Empty agency_id audits everything.
  AuditReport full_audit(const Clock& clock, const std::string& agency_id = {}) const;

 private:
  std::vector<AuditFinding> audit_profile(const registry::CitizenProfile& p,
                                          std::size_t& vaccinations_checked) const;

  const registry::Store& store_;
  ledger::Chain chain_;
  ledger::AccountBook accounts_;
  int max_doses_;
};

std::string report_to_json(const AuditReport& report);
/// Throws Error(kBadRequest) on malformed input.
AuditReport report_from_json(const std::string& text);

}  // namespace vaxledger::audit
