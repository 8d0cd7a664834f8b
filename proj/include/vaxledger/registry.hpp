#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "vaxledger/clock.hpp"
#include "vaxledger/crypto.hpp"

namespace vaxledger::registry {

using crypto::Record;

// ── Mock government directory ───────────────────────────────────────────────

struct IdentityDirectoryEntry {
  std::string uuid;
  std::string name;
  CivilDate date_of_birth;
  std::string phone;
  std::string gender;
  std::string pin_code;
};

struct PinRegion {
  std::string pin_code;
  std::string district;
  std::string state;
  std::string state_code;
  std::string agency_id;
};

/// Stand-in for the government identity API: uuid directory plus PIN-region table.
class GovtDirectory {
 public:
  /// Throws Error(kDuplicateUuid) / Error(kUnmappedPin) / Error(kFixtureError).
  static GovtDirectory load(const std::filesystem::path& directory_file,
                            const std::filesystem::path& region_file);
  static GovtDirectory from_entries(std::vector<IdentityDirectoryEntry> entries,
                                    std::vector<PinRegion> regions);

  const IdentityDirectoryEntry* lookup(const std::string& uuid) const;
  const PinRegion* region(const std::string& pin) const;

  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, PinRegion>& regions() const { return regions_; }
  /// Adds regions at runtime (agency creation). Existing pins are left untouched.
  void add_region(const PinRegion& region);

 private:
  std::map<std::string, IdentityDirectoryEntry> entries_;
  std::map<std::string, PinRegion> regions_;
};

std::string directory_entry_json(const IdentityDirectoryEntry& e);
std::string region_json(const PinRegion& r);

// ── Persisted entities ──────────────────────────────────────────────────────

struct GovernmentAgency {
  std::string agency_id;
  std::vector<std::string> region;  // PIN codes
  crypto::MasterKey master_key;
  crypto::SigningKeypair signing_keys;

  std::string ledger_address() const { return signing_keys.address(); }
  Record to_fields() const;
  static GovernmentAgency from_fields(const Record& f);
};

struct VaccinationCenter {
  std::string center_id;
  std::string center_name;
  std::string address;
  std::string pin_code;
  std::string district;
  std::string state;
  std::string static_key;
  std::string agency_id;
  crypto::SigningKeypair signing_keys;
  long long doses_supplied = 0;
  long long doses_remaining = 0;

  std::string ledger_address() const { return signing_keys.address(); }
  Record to_fields() const;
  static VaccinationCenter from_fields(const Record& f);
};

struct CitizenProfile {
  std::string pseudo_uuid;
  std::string gender;
  int age = 0;
  std::string pin_code;
  std::string district;
  std::string state;
  std::string static_key;
  int secret_code = 0;
  int doses_completed = 0;
  std::string agency_id;
  std::string registration_tx_id;

  Record to_fields() const;
  static CitizenProfile from_fields(const Record& f);
  /// Fields covered by the registration memo hash: everything fixed at registration
  /// time. The dose counter and the transaction link are reconciled separately.
  Record hashed_fields() const;
};

struct VaccinationRecord {
  std::string vaccination_id;
  std::string pseudo_uuid;
  std::string center_id;
  int dose_number = 0;
  std::string vaccine_name;
  std::string vaccinator;
  std::string timestamp;
  std::string health_conditions;
  std::string center_endorsement;
  std::string tx_id;

  Record to_fields() const;
  static VaccinationRecord from_fields(const Record& f);
  Record hashed_fields() const;
};

/// sha256_hex(canonical_record_bytes(hashed_fields())).
std::string memo_hash(const CitizenProfile& p);
std::string memo_hash(const VaccinationRecord& v);

enum class EntityKind { kAgency, kCenter, kCitizen, kVaccination };
EntityKind parse_entity_kind(const std::string& text);

struct CitizenFilter {
  std::optional<std::string> district;
  std::optional<std::string> state;
  std::optional<std::pair<int, int>> age_range;  // inclusive
  std::optional<std::string> agency_id;
};

/// In-memory entity store. Mutations are serialized by an exclusive lock;
/// reads share the lock and always see a consistent view.
class Store {
 public:
  Store() = default;
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  // Inserts throw Error(kDuplicateKey); updates throw Error(kNotFound).
  void insert_agency(const GovernmentAgency& a);
  void insert_center(const VaccinationCenter& c);
  void insert_citizen(const CitizenProfile& p);
  void insert_vaccination(const VaccinationRecord& v);
  void update_citizen(const CitizenProfile& p);

  std::optional<GovernmentAgency> agency(const std::string& id) const;
  std::optional<VaccinationCenter> center(const std::string& id) const;
  std::optional<CitizenProfile> citizen(const std::string& pseudo_uuid) const;
  std::optional<VaccinationRecord> vaccination(const std::string& id) const;

  std::vector<GovernmentAgency> agencies() const;
  std::vector<VaccinationCenter> centers() const;
  std::vector<CitizenProfile> citizens() const;
  std::vector<VaccinationRecord> vaccinations() const;

  /// Throws Error(kNotFound) or Error(kAmbiguous).
  CitizenProfile lookup_citizen(int secret_code, const std::string& pin) const;
  bool secret_code_taken(int secret_code, const std::string& pin) const;

  /// Served from the district/state/age/agency indexes.
  std::vector<CitizenProfile> query_citizens(const CitizenFilter& filter) const;

  /// Highest recorded dose number, 0 when none.
  int count_doses(const std::string& pseudo_uuid) const;
  std::vector<VaccinationRecord> vaccinations_of(const std::string& pseudo_uuid) const;
  std::vector<VaccinationRecord> vaccinations_at(const std::string& center_id) const;

  /// Positive delta is a supply event and also raises dosesSupplied.
  /// Throws Error(kInsufficientStock) if the result would be negative.
  VaccinationCenter adjust_stock(const std::string& center_id, long long delta);

  /// Writes agencies.jsonl, centers.jsonl, citizens.jsonl, vaccinations.jsonl into `dir`.
  void snapshot(const std::filesystem::path& dir) const;
  void restore(const std::filesystem::path& dir);

  /// Overwrites one field of a stored entity, bypassing every invariant. Returns the old value.
  /// Throws Error(kNotFound) for an unknown key or field.
  std::string tamper(EntityKind kind, const std::string& key, const std::string& field,
                     const std::string& new_value);
  /// Deletes a stored entity outright. Returns false if absent.
  bool tamper_delete(EntityKind kind, const std::string& key);

 private:
  void index_citizen(const CitizenProfile& p);
  void unindex_citizen(const CitizenProfile& p);
  void index_vaccination(const VaccinationRecord& v);
  void unindex_vaccination(const VaccinationRecord& v);
  void clear_locked();

  mutable std::shared_mutex mu_;
  std::map<std::string, GovernmentAgency> agencies_;
  std::map<std::string, VaccinationCenter> centers_;
  std::map<std::string, CitizenProfile> citizens_;
  std::map<std::string, VaccinationRecord> vaccinations_;

  std::map<std::pair<std::string, int>, std::set<std::string>> by_pin_code_;
  std::map<std::string, std::set<std::string>> by_district_;
  std::map<std::string, std::set<std::string>> by_state_;
  std::map<std::string, std::set<std::string>> by_agency_;
  std::multimap<int, std::string> by_age_;
  std::map<std::string, std::set<std::string>> doses_by_citizen_;
  std::map<std::string, std::set<std::string>> doses_by_center_;
};

}  // namespace vaxledger::registry
