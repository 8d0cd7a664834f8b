#include "vaxledger/registry.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vaxledger/error.hpp"

namespace vaxledger::registry {

using nlohmann::json;

namespace {

const std::string& require(const Record& f, const std::string& name) {
  auto it = f.find(name);
  if (it == f.end()) throw Error(Errc::kFixtureError, "missing field '" + name + "'");
  return it->second;
}

long long to_integer(const std::string& text, const std::string& name) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::kFixtureError, "field '" + name + "' is not an integer");
  }
}

crypto::SigningKeypair keys_from_seed_hex(const std::string& hex) {
  const auto seed = crypto::from_hex(hex);
  if (seed.size() != 32) throw Error(Errc::kFixtureError, "signing seed must be 32 bytes");
  return crypto::keypair_from_seed(std::span<const std::uint8_t, 32>(seed.data(), 32));
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ',';
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(part);
  return out;
}

std::vector<json> read_json_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kFixtureError, "cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(Errc::kFixtureError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string json_string(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw Error(Errc::kFixtureError, std::string("field '") + key + "' must be a string");
  }
  return j[key].get<std::string>();
}

Record record_from_json(const json& j) {
  Record r;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) throw Error(Errc::kFixtureError, "snapshot field '" + k + "' must be a string");
    r[k] = v.get<std::string>();
  }
  return r;
}

template <typename Map>
void write_collection(const std::filesystem::path& path, const Map& items) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::kFixtureError, "cannot write " + path.string());
  for (const auto& [key, item] : items) {
    const Record fields = item.to_fields();
    out << json(fields).dump() << '\n';
  }
}

template <typename Set>
void erase_from(std::map<std::string, Set>& index, const std::string& key, const std::string& id) {
  auto it = index.find(key);
  if (it == index.end()) return;
  it->second.erase(id);
  if (it->second.empty()) index.erase(it);
}

}  // namespace

// ── GovtDirectory ───────────────────────────────────────────────────────────

GovtDirectory GovtDirectory::from_entries(std::vector<IdentityDirectoryEntry> entries,
                                          std::vector<PinRegion> regions) {
  GovtDirectory d;
  for (auto& r : regions) {
    if (r.agency_id.empty()) throw Error(Errc::kUnmappedPin, r.pin_code);
    d.regions_[r.pin_code] = std::move(r);
  }
  for (auto& e : entries) {
    if (!d.regions_.count(e.pin_code)) throw Error(Errc::kUnmappedPin, e.pin_code);
    auto uuid = e.uuid;
    if (!d.entries_.emplace(uuid, std::move(e)).second) throw Error(Errc::kDuplicateUuid, uuid);
  }
  return d;
}

GovtDirectory GovtDirectory::load(const std::filesystem::path& directory_file,
                                  const std::filesystem::path& region_file) {
  std::vector<PinRegion> regions;
  for (const auto& j : read_json_lines(region_file)) {
    regions.push_back({json_string(j, "pin"), json_string(j, "district"), json_string(j, "state"),
                       json_string(j, "stateCode"), json_string(j, "agencyID")});
  }
  std::vector<IdentityDirectoryEntry> entries;
  for (const auto& j : read_json_lines(directory_file)) {
    CivilDate dob;
    try {
      dob = parse_date(json_string(j, "dob"));
    } catch (const Error& e) {
      throw Error(Errc::kFixtureError, e.what());
    }
    entries.push_back({json_string(j, "uuid"), json_string(j, "name"), dob, json_string(j, "phone"),
                       json_string(j, "gender"), json_string(j, "pin")});
  }
  return from_entries(std::move(entries), std::move(regions));
}

const IdentityDirectoryEntry* GovtDirectory::lookup(const std::string& uuid) const {
  auto it = entries_.find(uuid);
  return it == entries_.end() ? nullptr : &it->second;
}

const PinRegion* GovtDirectory::region(const std::string& pin) const {
  auto it = regions_.find(pin);
  return it == regions_.end() ? nullptr : &it->second;
}

void GovtDirectory::add_region(const PinRegion& region) { regions_.emplace(region.pin_code, region); }

std::string directory_entry_json(const IdentityDirectoryEntry& e) {
  return json{{"uuid", e.uuid},   {"name", e.name},     {"dob", format_date(e.date_of_birth)},
              {"phone", e.phone}, {"gender", e.gender}, {"pin", e.pin_code}}
      .dump();
}

std::string region_json(const PinRegion& r) {
  return json{{"pin", r.pin_code},
              {"district", r.district},
              {"state", r.state},
              {"stateCode", r.state_code},
              {"agencyID", r.agency_id}}
      .dump();
}

// ── Entity field maps ───────────────────────────────────────────────────────

Record GovernmentAgency::to_fields() const {
  return {{"agencyID", agency_id},
          {"region", join(region)},
          {"masterKey", master_key.value},
          {"signingSeed", crypto::to_hex(signing_keys.seed)},
          {"publicKey", crypto::to_hex(signing_keys.public_key)},
          {"ledgerAddress", ledger_address()}};
}

GovernmentAgency GovernmentAgency::from_fields(const Record& f) {
  GovernmentAgency a;
  a.agency_id = require(f, "agencyID");
  a.region = split(require(f, "region"));
  a.master_key.value = require(f, "masterKey");
  a.signing_keys = keys_from_seed_hex(require(f, "signingSeed"));
  return a;
}

Record VaccinationCenter::to_fields() const {
  return {{"centerID", center_id},
          {"centerName", center_name},
          {"address", address},
          {"pinCode", pin_code},
          {"district", district},
          {"state", state},
          {"staticKey", static_key},
          {"agencyID", agency_id},
          {"signingSeed", crypto::to_hex(signing_keys.seed)},
          {"ledgerAddress", ledger_address()},
          {"dosesSupplied", std::to_string(doses_supplied)},
          {"dosesRemaining", std::to_string(doses_remaining)}};
}

VaccinationCenter VaccinationCenter::from_fields(const Record& f) {
  VaccinationCenter c;
  c.center_id = require(f, "centerID");
  c.center_name = require(f, "centerName");
  c.address = require(f, "address");
  c.pin_code = require(f, "pinCode");
  c.district = require(f, "district");
  c.state = require(f, "state");
  c.static_key = require(f, "staticKey");
  c.agency_id = require(f, "agencyID");
  c.signing_keys = keys_from_seed_hex(require(f, "signingSeed"));
  c.doses_supplied = to_integer(require(f, "dosesSupplied"), "dosesSupplied");
  c.doses_remaining = to_integer(require(f, "dosesRemaining"), "dosesRemaining");
  return c;
}

Record CitizenProfile::hashed_fields() const {
  return {{"pseudoUUID", pseudo_uuid},
          {"gender", gender},
          {"age", std::to_string(age)},
          {"pinCode", pin_code},
          {"district", district},
          {"state", state},
          {"staticKey", static_key},
          {"secretCode", std::to_string(secret_code)},
          {"agencyID", agency_id}};
}

Record CitizenProfile::to_fields() const {
  Record f = hashed_fields();
  f["dosesCompleted"] = std::to_string(doses_completed);
  f["registrationTxID"] = registration_tx_id;
  return f;
}

CitizenProfile CitizenProfile::from_fields(const Record& f) {
  CitizenProfile p;
  p.pseudo_uuid = require(f, "pseudoUUID");
  p.gender = require(f, "gender");
  p.age = int(to_integer(require(f, "age"), "age"));
  p.pin_code = require(f, "pinCode");
  p.district = require(f, "district");
  p.state = require(f, "state");
  p.static_key = require(f, "staticKey");
  p.secret_code = int(to_integer(require(f, "secretCode"), "secretCode"));
  p.doses_completed = int(to_integer(require(f, "dosesCompleted"), "dosesCompleted"));
  p.agency_id = require(f, "agencyID");
  p.registration_tx_id = require(f, "registrationTxID");
  return p;
}

Record VaccinationRecord::hashed_fields() const {
  return {{"vaccinationID", vaccination_id},
          {"pseudoUUID", pseudo_uuid},
          {"centerID", center_id},
          {"doseNumber", std::to_string(dose_number)},
          {"vaccineName", vaccine_name},
          {"vaccinator", vaccinator},
          {"timestamp", timestamp},
          {"healthConditions", health_conditions},
          {"centerEndorsement", center_endorsement}};
}

Record VaccinationRecord::to_fields() const {
  Record f = hashed_fields();
  f["txID"] = tx_id;
  return f;
}

VaccinationRecord VaccinationRecord::from_fields(const Record& f) {
  VaccinationRecord v;
  v.vaccination_id = require(f, "vaccinationID");
  v.pseudo_uuid = require(f, "pseudoUUID");
  v.center_id = require(f, "centerID");
  v.dose_number = int(to_integer(require(f, "doseNumber"), "doseNumber"));
  v.vaccine_name = require(f, "vaccineName");
  v.vaccinator = require(f, "vaccinator");
  v.timestamp = require(f, "timestamp");
  v.health_conditions = require(f, "healthConditions");
  v.center_endorsement = require(f, "centerEndorsement");
  v.tx_id = require(f, "txID");
  return v;
}

std::string memo_hash(const CitizenProfile& p) {
  return crypto::sha256_hex(crypto::canonical_record_bytes(p.hashed_fields()));
}

std::string memo_hash(const VaccinationRecord& v) {
  return crypto::sha256_hex(crypto::canonical_record_bytes(v.hashed_fields()));
}

EntityKind parse_entity_kind(const std::string& text) {
  if (text == "agency") return EntityKind::kAgency;
  if (text == "center") return EntityKind::kCenter;
  if (text == "citizen") return EntityKind::kCitizen;
  if (text == "vaccination") return EntityKind::kVaccination;
  throw Error(Errc::kBadRequest, "unknown entity kind '" + text + "'");
}

// ── Store ───────────────────────────────────────────────────────────────────

void Store::index_citizen(const CitizenProfile& p) {
  by_pin_code_[{p.pin_code, p.secret_code}].insert(p.pseudo_uuid);
  by_district_[p.district].insert(p.pseudo_uuid);
  by_state_[p.state].insert(p.pseudo_uuid);
  by_agency_[p.agency_id].insert(p.pseudo_uuid);
  by_age_.emplace(p.age, p.pseudo_uuid);
}

void Store::unindex_citizen(const CitizenProfile& p) {
  auto it = by_pin_code_.find({p.pin_code, p.secret_code});
  if (it != by_pin_code_.end()) {
    it->second.erase(p.pseudo_uuid);
    if (it->second.empty()) by_pin_code_.erase(it);
  }
  erase_from(by_district_, p.district, p.pseudo_uuid);
  erase_from(by_state_, p.state, p.pseudo_uuid);
  erase_from(by_agency_, p.agency_id, p.pseudo_uuid);
  auto [lo, hi] = by_age_.equal_range(p.age);
  for (auto a = lo; a != hi; ++a) {
    if (a->second == p.pseudo_uuid) {
      by_age_.erase(a);
      break;
    }
  }
}

void Store::index_vaccination(const VaccinationRecord& v) {
  doses_by_citizen_[v.pseudo_uuid].insert(v.vaccination_id);
  doses_by_center_[v.center_id].insert(v.vaccination_id);
}

void Store::unindex_vaccination(const VaccinationRecord& v) {
  erase_from(doses_by_citizen_, v.pseudo_uuid, v.vaccination_id);
  erase_from(doses_by_center_, v.center_id, v.vaccination_id);
}

void Store::insert_agency(const GovernmentAgency& a) {
  std::unique_lock lock(mu_);
  if (!agencies_.emplace(a.agency_id, a).second) throw Error(Errc::kDuplicateKey, a.agency_id);
}

void Store::insert_center(const VaccinationCenter& c) {
  std::unique_lock lock(mu_);
  if (!centers_.emplace(c.center_id, c).second) throw Error(Errc::kDuplicateKey, c.center_id);
}

void Store::insert_citizen(const CitizenProfile& p) {
  std::unique_lock lock(mu_);
  if (!citizens_.emplace(p.pseudo_uuid, p).second) throw Error(Errc::kDuplicateKey, p.pseudo_uuid);
  index_citizen(p);
}

void Store::insert_vaccination(const VaccinationRecord& v) {
  std::unique_lock lock(mu_);
  if (!vaccinations_.emplace(v.vaccination_id, v).second) {
    throw Error(Errc::kDuplicateKey, v.vaccination_id);
  }
  index_vaccination(v);
}

void Store::update_citizen(const CitizenProfile& p) {
  std::unique_lock lock(mu_);
  auto it = citizens_.find(p.pseudo_uuid);
  if (it == citizens_.end()) throw Error(Errc::kNotFound, p.pseudo_uuid);
  unindex_citizen(it->second);
  it->second = p;
  index_citizen(p);
}

template <typename T>
static std::optional<T> find_in(const std::map<std::string, T>& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

template <typename T>
static std::vector<T> values_of(const std::map<std::string, T>& m) {
  std::vector<T> out;
  out.reserve(m.size());
  for (const auto& [k, v] : m) out.push_back(v);
  return out;
}

std::optional<GovernmentAgency> Store::agency(const std::string& id) const {
  std::shared_lock lock(mu_);
  return find_in(agencies_, id);
}
std::optional<VaccinationCenter> Store::center(const std::string& id) const {
  std::shared_lock lock(mu_);
  return find_in(centers_, id);
}
std::optional<CitizenProfile> Store::citizen(const std::string& pseudo_uuid) const {
  std::shared_lock lock(mu_);
  return find_in(citizens_, pseudo_uuid);
}
std::optional<VaccinationRecord> Store::vaccination(const std::string& id) const {
  std::shared_lock lock(mu_);
  return find_in(vaccinations_, id);
}

std::vector<GovernmentAgency> Store::agencies() const {
  std::shared_lock lock(mu_);
  return values_of(agencies_);
}
std::vector<VaccinationCenter> Store::centers() const {
  std::shared_lock lock(mu_);
  return values_of(centers_);
}
std::vector<CitizenProfile> Store::citizens() const {
  std::shared_lock lock(mu_);
  return values_of(citizens_);
}
std::vector<VaccinationRecord> Store::vaccinations() const {
  std::shared_lock lock(mu_);
  return values_of(vaccinations_);
}

CitizenProfile Store::lookup_citizen(int secret_code, const std::string& pin) const {
  std::shared_lock lock(mu_);
  auto it = by_pin_code_.find({pin, secret_code});
  if (it == by_pin_code_.end() || it->second.empty()) throw Error(Errc::kNotFound, "no citizen for code+pin");
  if (it->second.size() > 1) throw Error(Errc::kAmbiguous, "several citizens share code+pin");
  return citizens_.at(*it->second.begin());
}

bool Store::secret_code_taken(int secret_code, const std::string& pin) const {
  std::shared_lock lock(mu_);
  return by_pin_code_.count({pin, secret_code}) > 0;
}

std::vector<CitizenProfile> Store::query_citizens(const CitizenFilter& filter) const {
  std::shared_lock lock(mu_);
  // Intersect the candidate sets of every constrained index.
  std::optional<std::set<std::string>> candidates;
  auto narrow = [&](const std::set<std::string>& ids) {
    if (!candidates) {
      candidates = ids;
      return;
    }
    std::set<std::string> both;
    std::set_intersection(candidates->begin(), candidates->end(), ids.begin(), ids.end(),
                          std::inserter(both, both.end()));
    candidates = std::move(both);
  };
  static const std::set<std::string> kNone;
  auto lookup = [&](const std::map<std::string, std::set<std::string>>& index,
                    const std::string& key) -> const std::set<std::string>& {
    auto it = index.find(key);
    return it == index.end() ? kNone : it->second;
  };
  if (filter.district) narrow(lookup(by_district_, *filter.district));
  if (filter.state) narrow(lookup(by_state_, *filter.state));
  if (filter.agency_id) narrow(lookup(by_agency_, *filter.agency_id));
  if (filter.age_range) {
    std::set<std::string> ids;
    for (auto it = by_age_.lower_bound(filter.age_range->first);
         it != by_age_.end() && it->first <= filter.age_range->second; ++it) {
      ids.insert(it->second);
    }
    narrow(ids);
  }
  std::vector<CitizenProfile> out;
  if (!candidates) {
    out = values_of(citizens_);
  } else {
    for (const auto& id : *candidates) out.push_back(citizens_.at(id));
  }
  return out;
}

int Store::count_doses(const std::string& pseudo_uuid) const {
  std::shared_lock lock(mu_);
  int max_dose = 0;
  auto it = doses_by_citizen_.find(pseudo_uuid);
  if (it == doses_by_citizen_.end()) return 0;
  for (const auto& id : it->second) max_dose = std::max(max_dose, vaccinations_.at(id).dose_number);
  return max_dose;
}

std::vector<VaccinationRecord> Store::vaccinations_of(const std::string& pseudo_uuid) const {
  std::shared_lock lock(mu_);
  std::vector<VaccinationRecord> out;
  if (auto it = doses_by_citizen_.find(pseudo_uuid); it != doses_by_citizen_.end()) {
    for (const auto& id : it->second) out.push_back(vaccinations_.at(id));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.dose_number, a.vaccination_id) < std::tie(b.dose_number, b.vaccination_id);
  });
  return out;
}

std::vector<VaccinationRecord> Store::vaccinations_at(const std::string& center_id) const {
  std::shared_lock lock(mu_);
  std::vector<VaccinationRecord> out;
  if (auto it = doses_by_center_.find(center_id); it != doses_by_center_.end()) {
    for (const auto& id : it->second) out.push_back(vaccinations_.at(id));
  }
  return out;
}

VaccinationCenter Store::adjust_stock(const std::string& center_id, long long delta) {
  std::unique_lock lock(mu_);
  auto it = centers_.find(center_id);
  if (it == centers_.end()) throw Error(Errc::kNotFound, center_id);
  auto& c = it->second;
  if (c.doses_remaining + delta < 0) throw Error(Errc::kInsufficientStock, center_id);
  c.doses_remaining += delta;
  if (delta > 0) c.doses_supplied += delta;
  return c;
}

void Store::snapshot(const std::filesystem::path& dir) const {
  std::shared_lock lock(mu_);
  std::filesystem::create_directories(dir);
  write_collection(dir / "agencies.jsonl", agencies_);
  write_collection(dir / "centers.jsonl", centers_);
  write_collection(dir / "citizens.jsonl", citizens_);
  write_collection(dir / "vaccinations.jsonl", vaccinations_);
}

void Store::clear_locked() {
  agencies_.clear();
  centers_.clear();
  citizens_.clear();
  vaccinations_.clear();
  by_pin_code_.clear();
  by_district_.clear();
  by_state_.clear();
  by_agency_.clear();
  by_age_.clear();
  doses_by_citizen_.clear();
  doses_by_center_.clear();
}

void Store::restore(const std::filesystem::path& dir) {
  // Parse everything before touching the live state.
  std::vector<GovernmentAgency> agencies;
  std::vector<VaccinationCenter> centers;
  std::vector<CitizenProfile> citizens;
  std::vector<VaccinationRecord> vaccinations;
  for (const auto& j : read_json_lines(dir / "agencies.jsonl")) {
    agencies.push_back(GovernmentAgency::from_fields(record_from_json(j)));
  }
  for (const auto& j : read_json_lines(dir / "centers.jsonl")) {
    centers.push_back(VaccinationCenter::from_fields(record_from_json(j)));
  }
  for (const auto& j : read_json_lines(dir / "citizens.jsonl")) {
    citizens.push_back(CitizenProfile::from_fields(record_from_json(j)));
  }
  for (const auto& j : read_json_lines(dir / "vaccinations.jsonl")) {
    vaccinations.push_back(VaccinationRecord::from_fields(record_from_json(j)));
  }
  std::unique_lock lock(mu_);
  clear_locked();
  for (auto& a : agencies) agencies_.emplace(a.agency_id, std::move(a));
  for (auto& c : centers) centers_.emplace(c.center_id, std::move(c));
  for (auto& p : citizens) {
    index_citizen(p);
    citizens_.emplace(p.pseudo_uuid, std::move(p));
  }
  for (auto& v : vaccinations) {
    index_vaccination(v);
    vaccinations_.emplace(v.vaccination_id, std::move(v));
  }
}

namespace {

template <typename T>
std::string replace_field(T& item, const std::string& field, const std::string& new_value) {
  Record f = item.to_fields();
  auto it = f.find(field);
  if (it == f.end()) throw Error(Errc::kNotFound, "no field '" + field + "'");
  std::string old = it->second;
  it->second = new_value;
  item = T::from_fields(f);
  return old;
}

}  // namespace

std::string Store::tamper(EntityKind kind, const std::string& key, const std::string& field,
                          const std::string& new_value) {
  std::unique_lock lock(mu_);
  switch (kind) {
    case EntityKind::kAgency: {
      auto it = agencies_.find(key);
      if (it == agencies_.end()) throw Error(Errc::kNotFound, key);
      if (field == "agencyID") throw Error(Errc::kBadRequest, "primary key is not tamperable");
      return replace_field(it->second, field, new_value);
    }
    case EntityKind::kCenter: {
      auto it = centers_.find(key);
      if (it == centers_.end()) throw Error(Errc::kNotFound, key);
      if (field == "centerID") throw Error(Errc::kBadRequest, "primary key is not tamperable");
      return replace_field(it->second, field, new_value);
    }
    case EntityKind::kCitizen: {
      auto it = citizens_.find(key);
      if (it == citizens_.end()) throw Error(Errc::kNotFound, key);
      CitizenProfile p = it->second;
      const std::string old = replace_field(p, field, new_value);
      unindex_citizen(it->second);
      citizens_.erase(it);
      index_citizen(p);
      citizens_.emplace(p.pseudo_uuid, std::move(p));
      return old;
    }
    case EntityKind::kVaccination: {
      auto it = vaccinations_.find(key);
      if (it == vaccinations_.end()) throw Error(Errc::kNotFound, key);
      VaccinationRecord v = it->second;
      const std::string old = replace_field(v, field, new_value);
      unindex_vaccination(it->second);
      vaccinations_.erase(it);
      index_vaccination(v);
      vaccinations_.emplace(v.vaccination_id, std::move(v));
      return old;
    }
  }
  throw Error(Errc::kBadRequest, "unknown entity kind");
}

bool Store::tamper_delete(EntityKind kind, const std::string& key) {
  std::unique_lock lock(mu_);
  switch (kind) {
    case EntityKind::kAgency: return agencies_.erase(key) > 0;
    case EntityKind::kCenter: return centers_.erase(key) > 0;
    case EntityKind::kCitizen: {
      auto it = citizens_.find(key);
      if (it == citizens_.end()) return false;
      unindex_citizen(it->second);
      citizens_.erase(it);
      return true;
    }
    case EntityKind::kVaccination: {
      auto it = vaccinations_.find(key);
      if (it == vaccinations_.end()) return false;
      unindex_vaccination(it->second);
      vaccinations_.erase(it);
      return true;
    }
  }
  return false;
}

}  // namespace vaxledger::registry
