#include "vaxledger/protocol.hpp"

#include <cstring>

#include "vaxledger/error.hpp"

namespace vaxledger::protocol {

using registry::CitizenProfile;
using registry::GovernmentAgency;
using registry::VaccinationCenter;
using registry::VaccinationRecord;

namespace {

constexpr char kSuffixAlphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789";
constexpr std::size_t kSuffixLength = 5;

crypto::Record details_fields(const VaccinationDraft& d, const VaccinationDetails& det) {
  return {{"pseudoUUID", d.pseudo_uuid},
          {"centerID", d.center_id},
          {"doseNumber", std::to_string(d.dose_number)},
          {"vaccineName", det.vaccine_name},
          {"vaccinator", det.vaccinator},
          {"healthConditions", det.health_conditions},
          {"timestamp", det.timestamp}};
}

}  // namespace

std::string to_string(PagePurpose p) {
  return p == PagePurpose::kIdentity ? "identity" : "confirmation";
}

PagePurpose parse_page_purpose(const std::string& text) {
  if (text == "identity") return PagePurpose::kIdentity;
  if (text == "confirmation") return PagePurpose::kConfirmation;
  throw Error(Errc::kBadRequest, "purpose must be identity or confirmation");
}

crypto::Record Certificate::signed_fields() const {
  return {{"vaccinationID", vaccination_id},
          {"pseudoUUID", pseudo_uuid},
          {"centerID", center_id},
          {"vaccineName", vaccine_name},
          {"doseNumber", std::to_string(dose_number)},
          {"timestamp", timestamp},
          {"agencyID", agency_id}};
}

bool verify_certificate(const Certificate& cert, std::span<const std::uint8_t> agency_public_key) {
  return crypto::verify(cert.signature,
                        crypto::as_bytes(crypto::canonical_record_bytes(cert.signed_fields())),
                        agency_public_key);
}

Engine::Engine(registry::GovtDirectory directory, EngineConfig config, const Clock& clock, Rng& rng)
    : directory_(std::move(directory)),
      config_(config),
      clock_(clock),
      rng_(rng),
      ledger_(config.difficulty, config.batch_size, clock) {
  if (config_.page_ttl_seconds <= 0 || config_.otp_ttl_seconds <= 0) {
    throw Error(Errc::kBadRequest, "TTLs must be positive");
  }
  if (config_.max_doses < 1) throw Error(Errc::kBadRequest, "maxDoses must be at least 1");
}

crypto::SigningKeypair Engine::fresh_keypair() {
  const auto seed = rng_.bytes(32);
  return crypto::keypair_from_seed(std::span<const std::uint8_t, 32>(seed.data(), 32));
}

GovernmentAgency Engine::create_agency_locked(const std::string& agency_id,
                                              const std::vector<std::string>& pins) {
  if (agency_id.empty()) throw Error(Errc::kBadRequest, "agencyID required");
  if (store_.agency(agency_id)) throw Error(Errc::kDuplicateKey, agency_id);
  GovernmentAgency a;
  a.agency_id = agency_id;
  a.region = pins;
  a.master_key.value = rng_.hex(32);
  a.signing_keys = fresh_keypair();
  store_.insert_agency(a);
  ledger_.register_account(
      {a.ledger_address(), a.signing_keys.public_key, ledger::AccountType::kAgency, {}});
  return a;
}

void Engine::bootstrap_agencies() {
  std::lock_guard lock(mu_);
  std::map<std::string, std::vector<std::string>> pins_by_agency;
  for (const auto& [pin, region] : directory_.regions()) pins_by_agency[region.agency_id].push_back(pin);
  for (const auto& [agency_id, pins] : pins_by_agency) {
    if (!store_.agency(agency_id)) create_agency_locked(agency_id, pins);
  }
}

GovernmentAgency Engine::create_agency(const std::string& agency_id,
                                       const std::vector<registry::PinRegion>& regions) {
  std::lock_guard lock(mu_);
  std::vector<std::string> pins;
  for (auto r : regions) {
    if (r.pin_code.empty() || r.state_code.size() != 2) {
      throw Error(Errc::kBadRequest, "region needs a pin and a 2-letter state code");
    }
    if (const auto* existing = directory_.region(r.pin_code); existing && existing->agency_id != agency_id) {
      throw Error(Errc::kDuplicateKey, "pin " + r.pin_code + " already belongs to " + existing->agency_id);
    }
    pins.push_back(r.pin_code);
  }
  auto agency = create_agency_locked(agency_id, pins);
  for (auto r : regions) {
    r.agency_id = agency_id;
    directory_.add_region(r);
  }
  return agency;
}

VaccinationCenter Engine::register_center(const std::string& name, const std::string& address,
                                          const std::string& pin_code) {
  std::lock_guard lock(mu_);
  const auto* region = directory_.region(pin_code);
  if (!region) throw Error(Errc::kUnmappedPin, pin_code);
  const auto agency = store_.agency(region->agency_id);
  if (!agency) throw Error(Errc::kNotFound, "agency " + region->agency_id + " not created");

  VaccinationCenter c;
  do {
    c.center_id = crypto::generate_center_id(region->state_code, agency->master_key, address,
                                             rng_.next_u64());
  } while (store_.center(c.center_id));
  c.center_name = name;
  c.address = address;
  c.pin_code = pin_code;
  c.district = region->district;
  c.state = region->state;
  c.static_key = crypto::generate_static_key(c.center_id, agency->master_key, rng_.next_u64());
  c.agency_id = agency->agency_id;
  c.signing_keys = fresh_keypair();
  store_.insert_center(c);
  ledger_.register_account({c.ledger_address(),
                            c.signing_keys.public_key,
                            ledger::AccountType::kCenter,
                            {{ledger::kDoseAsset, 0}}});
  return c;
}

VaccinationCenter Engine::supply_stock(const std::string& center_id, long long doses) {
  std::lock_guard lock(mu_);
  if (doses <= 0) throw Error(Errc::kBadRequest, "supplied doses must be positive");
  auto c = store_.adjust_stock(center_id, doses);
  ledger_.set_asset(c.ledger_address(), ledger::kDoseAsset, c.doses_remaining);
  return c;
}

OtpSession Engine::start_citizen_registration(const std::string& uuid, const std::string& phone) {
  std::lock_guard lock(mu_);
  purge_expired_locked();
  if (!directory_.lookup(uuid)) throw Error(Errc::kUnknownUuid);
  if (registered_uuid_hashes_.count(crypto::sha256_hex(uuid))) throw Error(Errc::kAlreadyRegistered);
  if (phone.empty()) throw Error(Errc::kBadRequest, "phone required");

  OtpSession s;
  s.session_id = rng_.hex(16);
  const std::string digits = std::to_string(rng_.uniform(1'000'000));
  s.otp = std::string(6 - digits.size(), '0') + digits;
  s.uuid = uuid;
  s.phone = phone;
  s.expires_at = clock_.now() + config_.otp_ttl_seconds;
  s.attempts_left = config_.otp_attempts;
  sessions_[s.session_id] = s;
  outbox_.push_back({phone, "Your vaccination portal OTP is " + s.otp, now_text()});
  return s;
}

RegistrationDraft Engine::verify_otp(const std::string& session_id, const std::string& otp) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(Errc::kUnknownSession);
  auto& s = it->second;
  if (clock_.now() >= s.expires_at) {
    sessions_.erase(it);
    throw Error(Errc::kExpired, "OTP session expired");
  }
  if (otp != s.otp) {
    if (--s.attempts_left <= 0) {
      sessions_.erase(it);
      throw Error(Errc::kAttemptsExhausted);
    }
    throw Error(Errc::kWrongOtp, std::to_string(s.attempts_left) + " attempts left");
  }
  RegistrationDraft d{rng_.hex(16), s.uuid, clock_.now()};
  sessions_.erase(it);
  registration_drafts_[d.token] = d;
  return d;
}

CitizenProfile Engine::complete_citizen_registration(const std::string& token,
                                                     const std::string& pin_code,
                                                     const std::string& gender) {
  std::lock_guard lock(mu_);
  auto it = registration_drafts_.find(token);
  if (it == registration_drafts_.end()) throw Error(Errc::kInvalidToken);
  const auto* region = directory_.region(pin_code);
  if (!region) throw Error(Errc::kUnmappedPin, pin_code);
  if (gender.empty()) throw Error(Errc::kBadRequest, "gender required");
  const std::string uuid = it->second.uuid;
  const std::string uuid_hash = crypto::sha256_hex(uuid);
  if (registered_uuid_hashes_.count(uuid_hash)) {
    registration_drafts_.erase(it);
    throw Error(Errc::kAlreadyRegistered);
  }
  const auto* entry = directory_.lookup(uuid);
  if (!entry) throw Error(Errc::kUnknownUuid);
  const auto agency = store_.agency(region->agency_id);
  if (!agency) throw Error(Errc::kNotFound, "agency " + region->agency_id + " not created");

  CitizenProfile p;
  do {
    p.pseudo_uuid = crypto::generate_pseudo_uuid(uuid, rng_.next_u64());
  } while (store_.citizen(p.pseudo_uuid));
  p.gender = gender;
  p.age = whole_years_between(entry->date_of_birth, civil_date_of(clock_.now()));
  p.pin_code = pin_code;
  p.district = region->district;
  p.state = region->state;
  p.static_key = crypto::generate_static_key(p.pseudo_uuid, agency->master_key, rng_.next_u64());
  if (config_.secret_code_mode == crypto::SecretCodeMode::kUnique) {
    int retry = 0;
    do {
      p.secret_code = crypto::generate_secret_code(p.pseudo_uuid, pin_code,
                                                   crypto::SecretCodeMode::kUnique, retry++);
    } while (store_.secret_code_taken(p.secret_code, pin_code));
  } else {
    p.secret_code = crypto::generate_secret_code(p.pseudo_uuid, pin_code,
                                                 crypto::SecretCodeMode::kFaithful);
  }
  p.doses_completed = 0;
  p.agency_id = agency->agency_id;
  p.registration_tx_id = p.pseudo_uuid;

  ledger::EntityData entity;
  entity.sender_address = agency->ledger_address();
  entity.additional_data = "pseudoUUID: " + p.pseudo_uuid + ", PINCode: " + pin_code;
  entity.memo_primary_key = p.pseudo_uuid;
  entity.memo_hash = registry::memo_hash(p);
  auto tx = ledger::new_transaction(ledger::TxType::kRegistration, agency->signing_keys, entity,
                                    p.pseudo_uuid, now_text());

  store_.insert_citizen(p);
  ledger_.submit(std::move(tx));
  registered_uuid_hashes_.insert(uuid_hash);
  registration_drafts_.erase(it);
  return p;
}

void Engine::purge_expired_locked() {
  const auto now = clock_.now();
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    it = now >= it->second.expires_at ? sessions_.erase(it) : std::next(it);
  }
  // Dead pages linger one extra TTL so late solvers get page-expired / page-used.
  for (auto it = pages_.begin(); it != pages_.end();) {
    it = now >= it->second.expires_at + config_.page_ttl_seconds ? pages_.erase(it) : std::next(it);
  }
}

std::string Engine::fresh_suffix_locked() {
  std::string suffix;
  do {
    suffix.clear();
    for (std::size_t i = 0; i < kSuffixLength; ++i) {
      suffix.push_back(kSuffixAlphabet[rng_.uniform(sizeof(kSuffixAlphabet) - 1)]);
    }
  } while (pages_.count(suffix));
  return suffix;
}

std::string Engine::create_verification_page(int secret_code, const std::string& pin_code,
                                             const std::optional<std::string>& center_id,
                                             PagePurpose purpose,
                                             const std::optional<VaccinationDetails>& extra_data) {
  std::lock_guard lock(mu_);
  purge_expired_locked();
  const CitizenProfile citizen = store_.lookup_citizen(secret_code, pin_code);
  if (purpose == PagePurpose::kIdentity) {
    if (!center_id || !store_.center(*center_id)) throw Error(Errc::kCenterNotRegistered);
  } else if (!extra_data) {
    throw Error(Errc::kBadRequest, "confirmation pages carry vaccination details");
  }

  return open_page_locked(citizen, center_id, purpose, extra_data);
}

std::string Engine::open_page_locked(const CitizenProfile& citizen, const std::optional<std::string>& center_id,
                                     PagePurpose purpose, const std::optional<VaccinationDetails>& extra_data) {
  VerificationPage page;
  page.expected_number = crypto::kChallengeMin +
                         rng_.uniform(crypto::kChallengeMax - crypto::kChallengeMin + 1);
  page.challenge_ciphertext = crypto::encrypt_challenge(page.expected_number, citizen.static_key);
  page.pseudo_uuid = citizen.pseudo_uuid;
  page.center_id = center_id;
  page.purpose = purpose;
  page.extra_data = extra_data;
  page.expires_at = clock_.now() + config_.page_ttl_seconds;
  page.suffix = fresh_suffix_locked();
  pages_[page.suffix] = page;
  return page.suffix;
}

std::optional<VerificationPage> Engine::page(const std::string& suffix) const {
  std::lock_guard lock(mu_);
  auto it = pages_.find(suffix);
  if (it == pages_.end()) return std::nullopt;
  return it->second;
}

SolveOutcome Engine::solve_verification_page(const std::string& suffix,
                                             const std::string& static_key, int secret_code) {
  std::lock_guard lock(mu_);
  auto it = pages_.find(suffix);
  if (it == pages_.end()) throw Error(Errc::kNotFound, "no page " + suffix);
  VerificationPage& page = it->second;
  if (page.used) throw Error(Errc::kPageUsed);
  if (clock_.now() >= page.expires_at) {
    page.used = true;
    throw Error(Errc::kPageExpired);
  }
  page.used = true;

  std::uint64_t attempt = 0;
  try {
    attempt = crypto::decrypt_challenge(page.challenge_ciphertext, static_key);
  } catch (const Error&) {
    throw Error(Errc::kVerificationFailed);
  }
  const auto citizen = store_.citizen(page.pseudo_uuid);
  if (attempt != page.expected_number || !citizen || citizen->secret_code != secret_code) {
    throw Error(Errc::kVerificationFailed);
  }

  if (page.purpose == PagePurpose::kConfirmation) {
    return ConfirmationAccepted{finalize_vaccination_locked(page)};
  }

  if (citizen->age < config_.min_age) throw Error(Errc::kCitizenIneligible, "below minimum age");
  const int doses = store_.count_doses(citizen->pseudo_uuid);
  if (doses >= config_.max_doses) throw Error(Errc::kCitizenCompletelyVaccinated);
  const auto center = store_.center(*page.center_id);
  if (!center) throw Error(Errc::kCenterNotRegistered);
  if (center->doses_remaining <= 0) throw Error(Errc::kInsufficientStock, center->center_id);

  VaccinationDraft d;
  d.draft_id = rng_.hex(16);
  d.pseudo_uuid = citizen->pseudo_uuid;
  d.center_id = center->center_id;
  d.dose_number = doses + 1;
  d.created_at = clock_.now();
  drafts_[d.draft_id] = d;
  return IdentityVerified{d};
}

std::string Engine::record_vaccination_details(const std::string& draft_id,
                                               const std::string& vaccine_name,
                                               const std::string& vaccinator,
                                               const std::string& health_conditions,
                                               const std::string& center_static_key) {
  std::lock_guard lock(mu_);
  purge_expired_locked();
  auto it = drafts_.find(draft_id);
  if (it == drafts_.end()) throw Error(Errc::kUnknownDraft);
  VaccinationDraft& d = it->second;
  const auto center = store_.center(d.center_id);
  if (!center) throw Error(Errc::kCenterNotRegistered);
  if (center_static_key != center->static_key) throw Error(Errc::kCenterKeyMismatch);
  if (vaccine_name.empty() || vaccinator.empty()) {
    throw Error(Errc::kBadRequest, "vaccineName and vaccinator required");
  }
  const auto citizen = store_.citizen(d.pseudo_uuid);
  if (!citizen) throw Error(Errc::kNotFound, "citizen profile missing");

  VaccinationDetails det;
  det.draft_id = draft_id;
  det.vaccine_name = vaccine_name;
  det.vaccinator = vaccinator;
  det.health_conditions = health_conditions;
  det.timestamp = now_text();
  det.center_endorsement =
      crypto::sha256_hex(crypto::canonical_record_bytes(details_fields(d, det)) + center_static_key);
  d.details = det;
  return open_page_locked(*citizen, d.center_id, PagePurpose::kConfirmation, det);
}

VaccinationRecord Engine::finalize_vaccination_locked(const VerificationPage& page) {
  if (!page.extra_data) throw Error(Errc::kBadRequest, "confirmation page without details");
  auto it = drafts_.find(page.extra_data->draft_id);
  if (it == drafts_.end()) throw Error(Errc::kUnknownDraft);
  const VaccinationDraft d = it->second;
  const VaccinationDetails& det = *page.extra_data;

  const int doses = store_.count_doses(d.pseudo_uuid);
  if (doses >= config_.max_doses) {
    drafts_.erase(it);
    throw Error(Errc::kCitizenCompletelyVaccinated);
  }
  if (d.dose_number != doses + 1) {
    drafts_.erase(it);
    throw Error(Errc::kUnknownDraft, "draft is stale; another dose was recorded");
  }
  auto center = store_.center(d.center_id);
  if (!center) throw Error(Errc::kCenterNotRegistered);
  auto citizen = store_.citizen(d.pseudo_uuid);
  if (!citizen) throw Error(Errc::kNotFound, "citizen profile missing");

  VaccinationRecord v;
  v.vaccination_id = crypto::generate_vaccination_id(d.pseudo_uuid, d.dose_number, d.center_id);
  v.pseudo_uuid = d.pseudo_uuid;
  v.center_id = d.center_id;
  v.dose_number = d.dose_number;
  v.vaccine_name = det.vaccine_name;
  v.vaccinator = det.vaccinator;
  v.timestamp = det.timestamp;
  v.health_conditions = det.health_conditions;
  v.center_endorsement = det.center_endorsement;
  v.tx_id = v.vaccination_id;

  ledger::EntityData entity;
  entity.sender_address = center->ledger_address();
  entity.additional_data = "citizenPseudoUUID: " + v.pseudo_uuid + ", centerID: " + v.center_id;
  entity.memo_primary_key = v.vaccination_id;
  entity.memo_hash = registry::memo_hash(v);
  auto tx = ledger::new_transaction(ledger::TxType::kVaccination, center->signing_keys, entity,
                                    v.vaccination_id, now_text());

  const auto updated_center = store_.adjust_stock(d.center_id, -1);
  store_.insert_vaccination(v);
  citizen->doses_completed = d.dose_number;
  store_.update_citizen(*citizen);
  ledger_.set_asset(updated_center.ledger_address(), ledger::kDoseAsset,
                    updated_center.doses_remaining);
  ledger_.submit(std::move(tx));
  drafts_.erase(it);
  return v;
}

VaccinationRecord Engine::confirm_vaccination(const std::string& suffix,
                                              const std::string& static_key, int secret_code) {
  {
    std::lock_guard lock(mu_);
    auto it = pages_.find(suffix);
    if (it != pages_.end() && it->second.purpose != PagePurpose::kConfirmation) {
      throw Error(Errc::kBadRequest, "page " + suffix + " is not a confirmation page");
    }
  }
  auto outcome = solve_verification_page(suffix, static_key, secret_code);
  return std::get<ConfirmationAccepted>(outcome).record;
}

Certificate Engine::issue_certificate(const std::string& vaccination_id) const {
  std::lock_guard lock(mu_);
  const auto v = store_.vaccination(vaccination_id);
  if (!v) throw Error(Errc::kNotFound, vaccination_id);
  std::string agency_id;
  if (const auto citizen = store_.citizen(v->pseudo_uuid)) {
    agency_id = citizen->agency_id;
  } else if (const auto center = store_.center(v->center_id)) {
    agency_id = center->agency_id;
  }
  const auto agency = store_.agency(agency_id);
  if (!agency) throw Error(Errc::kNotFound, "issuing agency");

  Certificate cert;
  cert.vaccination_id = v->vaccination_id;
  cert.pseudo_uuid = v->pseudo_uuid;
  cert.center_id = v->center_id;
  cert.vaccine_name = v->vaccine_name;
  cert.dose_number = v->dose_number;
  cert.timestamp = v->timestamp;
  cert.agency_id = agency->agency_id;
  cert.signature = crypto::sign(
      crypto::as_bytes(crypto::canonical_record_bytes(cert.signed_fields())), agency->signing_keys);
  return cert;
}

std::vector<VaccinationRecord> Engine::get_history(int secret_code, const std::string& pin_code) const {
  const auto citizen = store_.lookup_citizen(secret_code, pin_code);
  return store_.vaccinations_of(citizen.pseudo_uuid);
}

std::vector<OutboxMessage> Engine::outbox() const {
  std::lock_guard lock(mu_);
  return outbox_;
}

std::optional<VaccinationDraft> Engine::draft(const std::string& draft_id) const {
  std::lock_guard lock(mu_);
  auto it = drafts_.find(draft_id);
  if (it == drafts_.end()) return std::nullopt;
  return it->second;
}

}  // namespace vaxledger::protocol
