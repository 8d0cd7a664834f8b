#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "vaxledger/clock.hpp"
#include "vaxledger/crypto.hpp"
#include "vaxledger/ledger.hpp"
#include "vaxledger/random.hpp"
#include "vaxledger/registry.hpp"

namespace vaxledger::protocol {

struct EngineConfig {
  int max_doses = 2;
  int min_age = 18;
  crypto::SecretCodeMode secret_code_mode = crypto::SecretCodeMode::kUnique;
  std::int64_t page_ttl_seconds = 300;
  std::int64_t otp_ttl_seconds = 300;
  int otp_attempts = 3;
  unsigned difficulty = 8;
  std::size_t batch_size = 16;
};

struct OutboxMessage {
  std::string phone;
  std::string message;
  std::string timestamp;
};

struct OtpSession {
  std::string session_id;
  std::string uuid;
  std::string phone;
  std::string otp;
  UnixSeconds expires_at = 0;
  int attempts_left = 0;
};

struct RegistrationDraft {
  std::string token;
  std::string uuid;
  UnixSeconds created_at = 0;
};

enum class PagePurpose { kIdentity, kConfirmation };
std::string to_string(PagePurpose p);
PagePurpose parse_page_purpose(const std::string& text);

/// Dose details entered by the health official, shown to the citizen before confirming.
struct VaccinationDetails {
  std::string draft_id;
  std::string vaccine_name;
  std::string vaccinator;
  std::string health_conditions;
  std::string timestamp;
  std::string center_endorsement;
};

struct VerificationPage {
  std::string suffix;
  std::string challenge_ciphertext;
  std::uint64_t expected_number = 0;
  std::string pseudo_uuid;
  std::optional<std::string> center_id;
  PagePurpose purpose = PagePurpose::kIdentity;
  std::optional<VaccinationDetails> extra_data;
  UnixSeconds expires_at = 0;
  bool used = false;
};

struct VaccinationDraft {
  std::string draft_id;
  std::string pseudo_uuid;
  std::string center_id;
  int dose_number = 0;
  UnixSeconds created_at = 0;
  std::optional<VaccinationDetails> details;
};

struct Certificate {
  std::string vaccination_id;
  std::string pseudo_uuid;
  std::string center_id;
  std::string vaccine_name;
  int dose_number = 0;
  std::string timestamp;
  std::string agency_id;
  crypto::Signature signature{};

  crypto::Record signed_fields() const;
};
bool verify_certificate(const Certificate& cert, std::span<const std::uint8_t> agency_public_key);

struct IdentityVerified {
  VaccinationDraft draft;
};
struct ConfirmationAccepted {
  registry::VaccinationRecord record;
};
using SolveOutcome = std::variant<IdentityVerified, ConfirmationAccepted>;

/// Runs registration, identity verification and vaccination confirmation.
/// All operations are serialized through one writer lock.
class Engine {
 public:
  Engine(registry::GovtDirectory directory, EngineConfig config, const Clock& clock, Rng& rng);

  const EngineConfig& config() const { return config_; }
  registry::Store& store() { return store_; }
  const registry::Store& store() const { return store_; }
  ledger::Ledger& ledger() { return ledger_; }
  const ledger::Ledger& ledger() const { return ledger_; }
  const registry::GovtDirectory& directory() const { return directory_; }

  /// Creates one agency per distinct agencyID in the region table (skipping existing ones).
  void bootstrap_agencies();
  /// Throws Error(kDuplicateKey) if the agency exists.
  registry::GovernmentAgency create_agency(const std::string& agency_id,
                                           const std::vector<registry::PinRegion>& regions);

  /// Throws Error(kUnmappedPin).
  registry::VaccinationCenter register_center(const std::string& name, const std::string& address,
                                              const std::string& pin_code);
  registry::VaccinationCenter supply_stock(const std::string& center_id, long long doses);

  OtpSession start_citizen_registration(const std::string& uuid, const std::string& phone);
  RegistrationDraft verify_otp(const std::string& session_id, const std::string& otp);
  registry::CitizenProfile complete_citizen_registration(const std::string& token,
                                                         const std::string& pin_code,
                                                         const std::string& gender);

  /// Returns the 5-character page suffix.
  std::string create_verification_page(int secret_code, const std::string& pin_code,
                                       const std::optional<std::string>& center_id,
                                       PagePurpose purpose,
                                       const std::optional<VaccinationDetails>& extra_data = {});
  std::optional<VerificationPage> page(const std::string& suffix) const;
  SolveOutcome solve_verification_page(const std::string& suffix, const std::string& static_key,
                                       int secret_code);

  /// Returns the confirmation page suffix.
  std::string record_vaccination_details(const std::string& draft_id, const std::string& vaccine_name,
                                         const std::string& vaccinator,
                                         const std::string& health_conditions,
                                         const std::string& center_static_key);
  registry::VaccinationRecord confirm_vaccination(const std::string& suffix,
                                                  const std::string& static_key, int secret_code);

  Certificate issue_certificate(const std::string& vaccination_id) const;
  std::vector<registry::VaccinationRecord> get_history(int secret_code, const std::string& pin_code) const;

  std::vector<OutboxMessage> outbox() const;
  std::optional<VaccinationDraft> draft(const std::string& draft_id) const;

 private:
  registry::GovernmentAgency create_agency_locked(const std::string& agency_id,
                                                  const std::vector<std::string>& pins);
  crypto::SigningKeypair fresh_keypair();
  std::string fresh_suffix_locked();
  std::string open_page_locked(const registry::CitizenProfile& citizen,
                               const std::optional<std::string>& center_id, PagePurpose purpose,
                               const std::optional<VaccinationDetails>& extra_data);
  void purge_expired_locked();
  registry::VaccinationRecord finalize_vaccination_locked(const VerificationPage& page);
  std::string now_text() const { return format_rfc3339(clock_.now()); }

  mutable std::mutex mu_;
  registry::GovtDirectory directory_;
  EngineConfig config_;
  const Clock& clock_;
  Rng& rng_;
  registry::Store store_;
  ledger::Ledger ledger_;

  std::map<std::string, OtpSession> sessions_;
  std::map<std::string, RegistrationDraft> registration_drafts_;
  std::set<std::string> registered_uuid_hashes_;
  std::map<std::string, VerificationPage> pages_;
  std::map<std::string, VaccinationDraft> drafts_;
  std::vector<OutboxMessage> outbox_;
};

}  // namespace vaxledger::protocol
