#include "vaxledger/audit.hpp"

#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "vaxledger/error.hpp"

namespace vaxledger::audit {

using ledger::TxType;
using registry::CitizenProfile;
using registry::VaccinationRecord;

std::string to_string(FindingKind k) {
  switch (k) {
    case FindingKind::kHashMismatch: return "hash-mismatch";
    case FindingKind::kMissingTransaction: return "missing-transaction";
    case FindingKind::kOrphanTransaction: return "orphan-transaction";
    case FindingKind::kDoseSequenceError: return "dose-sequence-error";
    case FindingKind::kStockMismatch: return "stock-mismatch";
    case FindingKind::kChainInvalid: return "chain-invalid";
  }
  return "unknown";
}

Auditor::Auditor(const registry::Store& store, ledger::Chain chain, ledger::AccountBook accounts,
                 int max_doses)
    : store_(store), chain_(std::move(chain)), accounts_(std::move(accounts)), max_doses_(max_doses) {}

namespace {

template <typename Entity>
std::optional<AuditFinding> check_memo(const ledger::Chain& chain, const Entity& e,
                                       const std::string& key, const std::string& tx_id,
                                       TxType expected_type) {
  const auto found = chain.find_transaction(tx_id);
  if (!found || found->second.tx_type != expected_type) {
    return AuditFinding{FindingKind::kMissingTransaction, key, "no " + ledger::to_string(expected_type) +
                                                                   " transaction " + tx_id};
  }
  const auto& tx = found->second;
  if (tx.entity.memo_primary_key != key || tx.entity.memo_hash != registry::memo_hash(e)) {
    return AuditFinding{FindingKind::kHashMismatch, key,
                        "database item hash differs from memo in block " +
                            std::to_string(found->first)};
  }
  return std::nullopt;
}

}  // namespace

std::optional<AuditFinding> Auditor::verify_entity_hash(const CitizenProfile& p) const {
  return check_memo(chain_, p, p.pseudo_uuid, p.registration_tx_id, TxType::kRegistration);
}

std::optional<AuditFinding> Auditor::verify_entity_hash(const VaccinationRecord& v) const {
  return check_memo(chain_, v, v.vaccination_id, v.tx_id, TxType::kVaccination);
}

std::vector<AuditFinding> Auditor::audit_profile(const CitizenProfile& p,
                                                 std::size_t& vaccinations_checked) const {
  std::vector<AuditFinding> out;
  if (auto f = verify_entity_hash(p)) out.push_back(*f);

  const auto doses = store_.vaccinations_of(p.pseudo_uuid);
  vaccinations_checked += doses.size();
  bool contiguous = true;
  for (std::size_t i = 0; i < doses.size(); ++i) {
    if (doses[i].dose_number != int(i) + 1) contiguous = false;
  }
  const int k = int(doses.size());
  if (!contiguous || k > max_doses_ || k != p.doses_completed) {
    std::string seq;
    for (const auto& d : doses) seq += (seq.empty() ? "" : ",") + std::to_string(d.dose_number);
    out.push_back({FindingKind::kDoseSequenceError, p.pseudo_uuid,
                   "doses [" + seq + "], dosesCompleted " + std::to_string(p.doses_completed)});
  }
  for (const auto& v : doses) {
    if (auto f = verify_entity_hash(v)) {
      out.push_back(*f);
      continue;
    }
    const auto tx = chain_.find_transaction(v.tx_id);
    const auto* signer = accounts_.find(tx->second.signer_address);
    const auto center = store_.center(v.center_id);
    if (!signer || signer->type != ledger::AccountType::kCenter || !center ||
        center->ledger_address() != tx->second.signer_address) {
      out.push_back({FindingKind::kHashMismatch, v.vaccination_id,
                     "vaccination transaction not signed by center " + v.center_id});
    }
  }
  return out;
}

std::vector<AuditFinding> Auditor::audit_citizen(const std::string& pseudo_uuid) const {
  const auto p = store_.citizen(pseudo_uuid);
  if (!p) throw Error(Errc::kNotFound, pseudo_uuid);
  std::size_t ignored = 0;
  return audit_profile(*p, ignored);
}

std::vector<AuditFinding> Auditor::audit_center_stock(const std::string& center_id) const {
  const auto c = store_.center(center_id);
  if (!c) throw Error(Errc::kNotFound, center_id);
  const std::string address = c->ledger_address();
  long long on_chain = 0;
  for (const auto& b : chain_.blocks()) {
    for (const auto& tx : b.transactions) {
      if (tx.tx_type == TxType::kVaccination && tx.signer_address == address) ++on_chain;
    }
  }
  const long long administered = c->doses_supplied - c->doses_remaining;
  const long long records = static_cast<long long>(store_.vaccinations_at(center_id).size());
  if (on_chain == administered && administered == records && c->doses_remaining >= 0) return {};
  return {{FindingKind::kStockMismatch, center_id,
           "on-chain " + std::to_string(on_chain) + ", supplied-remaining " +
               std::to_string(administered) + ", records " + std::to_string(records)}};
}

AuditReport Auditor::full_audit(const Clock& clock, const std::string& agency_id) const {
  AuditReport report;
  report.started_at = format_rfc3339(clock.now());

  const auto chain_report = chain_.verify(accounts_);
  report.chain_ok = chain_report.ok;
  if (!chain_report.ok) {
    report.findings.push_back({FindingKind::kChainInvalid,
                               "block " + std::to_string(*chain_report.first_bad_height),
                               ledger::to_string(chain_report.reason) + ": " + chain_report.detail});
  }

  // Scope: agency audits use the agency index; its districts bound the search.
  std::vector<CitizenProfile> citizens;
  std::set<std::string> agency_addresses;
  std::set<std::string> center_ids;
  if (agency_id.empty()) {
    citizens = store_.citizens();
    for (const auto& c : store_.centers()) center_ids.insert(c.center_id);
    for (const auto& [address, account] : accounts_.all()) agency_addresses.insert(address);
  } else {
    const auto agency = store_.agency(agency_id);
    if (!agency) throw Error(Errc::kNotFound, agency_id);
    registry::CitizenFilter filter;
    filter.agency_id = agency_id;
    citizens = store_.query_citizens(filter);
    for (const auto& c : store_.centers()) {
      if (c.agency_id == agency_id) {
        center_ids.insert(c.center_id);
        agency_addresses.insert(c.ledger_address());
      }
    }
    agency_addresses.insert(agency->ledger_address());
  }

  std::set<std::string> citizen_keys;
  for (const auto& p : citizens) {
    citizen_keys.insert(p.pseudo_uuid);
    for (auto& f : audit_profile(p, report.checked_vaccinations)) report.findings.push_back(std::move(f));
  }
  report.checked_citizens = citizens.size();

  // Vaccination records whose profile is gone are still hash-checked.
  std::set<std::string> vaccination_keys;
  for (const auto& v : store_.vaccinations()) {
    vaccination_keys.insert(v.vaccination_id);
    if (citizen_keys.count(v.pseudo_uuid) || store_.citizen(v.pseudo_uuid)) continue;
    if (!agency_id.empty() && !center_ids.count(v.center_id)) continue;
    ++report.checked_vaccinations;
    if (auto f = verify_entity_hash(v)) report.findings.push_back(*f);
    report.findings.push_back({FindingKind::kDoseSequenceError, v.vaccination_id,
                               "vaccination record without citizen profile"});
  }

  for (const auto& id : center_ids) {
    for (auto& f : audit_center_stock(id)) report.findings.push_back(std::move(f));
  }
  report.checked_centers = center_ids.size();

  // Ledger entries with no database counterpart.
  const bool all_scope = agency_id.empty();
  for (const auto& b : chain_.blocks()) {
    for (const auto& tx : b.transactions) {
      if (!all_scope && !agency_addresses.count(tx.signer_address)) continue;
      const bool present = tx.tx_type == TxType::kRegistration
                               ? store_.citizen(tx.tx_id).has_value()
                               : vaccination_keys.count(tx.tx_id) > 0;
      if (!present) {
        report.findings.push_back({FindingKind::kOrphanTransaction, tx.tx_id,
                                   ledger::to_string(tx.tx_type) + " transaction in block " +
                                       std::to_string(b.header.height) + " has no database row"});
      }
    }
  }

  report.finished_at = format_rfc3339(clock.now());
  return report;
}

std::string report_to_json(const AuditReport& report) {
  nlohmann::json findings = nlohmann::json::array();
  for (const auto& f : report.findings) {
    findings.push_back({{"kind", to_string(f.kind)}, {"subjectKey", f.subject_key}, {"detail", f.detail}});
  }
  return nlohmann::json{{"checkedCitizens", report.checked_citizens},
                        {"checkedVaccinations", report.checked_vaccinations},
                        {"checkedCenters", report.checked_centers},
                        {"findings", findings},
                        {"chainOk", report.chain_ok},
                        {"startedAt", report.started_at},
                        {"finishedAt", report.finished_at}}
      .dump();
}

AuditReport report_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    AuditReport r;
    r.checked_citizens = j.at("checkedCitizens").get<std::size_t>();
    r.checked_vaccinations = j.at("checkedVaccinations").get<std::size_t>();
    r.checked_centers = j.at("checkedCenters").get<std::size_t>();
    r.chain_ok = j.at("chainOk").get<bool>();
    r.started_at = j.at("startedAt").get<std::string>();
    r.finished_at = j.at("finishedAt").get<std::string>();
    for (const auto& f : j.at("findings")) {
      const auto kind = f.at("kind").get<std::string>();
      FindingKind k = FindingKind::kChainInvalid;
      bool known = false;
      for (auto candidate : {FindingKind::kHashMismatch, FindingKind::kMissingTransaction,
                             FindingKind::kOrphanTransaction, FindingKind::kDoseSequenceError,
                             FindingKind::kStockMismatch, FindingKind::kChainInvalid}) {
        if (to_string(candidate) == kind) {
          k = candidate;
          known = true;
        }
      }
      if (!known) throw Error(Errc::kBadRequest, "unknown finding kind '" + kind + "'");
      r.findings.push_back({k, f.at("subjectKey").get<std::string>(), f.at("detail").get<std::string>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kBadRequest, std::string("malformed audit report: ") + e.what());
  }
}

}  // namespace vaxledger::audit
