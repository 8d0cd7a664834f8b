#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vaxledger {

enum class Errc {
  kNotFound,
  kDuplicateKey,
  kDuplicateUuid,
  kUnmappedPin,
  kUnknownUuid,
  kAlreadyRegistered,
  kUnknownSession,
  kWrongOtp,
  kExpired,
  kAttemptsExhausted,
  kInvalidToken,
  kAmbiguous,
  kCenterNotRegistered,
  kVerificationFailed,
  kPageExpired,
  kPageUsed,
  kCitizenCompletelyVaccinated,
  kCitizenIneligible,
  kInsufficientStock,
  kUnknownDraft,
  kCenterKeyMismatch,
  kMalformedCiphertext,
  kFormatFailure,
  kBadEntity,
  kEmptyList,
  kIndexOutOfRange,
  kEmptyPending,
  kInvalidBlock,
  kBadRequest,
  kFixtureError,
};

/// Stable kebab-case name used in API error bodies and reports.
constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::kNotFound: return "not-found";
    case Errc::kDuplicateKey: return "duplicate-key";
    case Errc::kDuplicateUuid: return "duplicate-uuid";
    case Errc::kUnmappedPin: return "unmapped-pin";
    case Errc::kUnknownUuid: return "unknown-uuid";
    case Errc::kAlreadyRegistered: return "already-registered";
    case Errc::kUnknownSession: return "unknown-session";
    case Errc::kWrongOtp: return "wrong-otp";
    case Errc::kExpired: return "expired";
    case Errc::kAttemptsExhausted: return "attempts-exhausted";
    case Errc::kInvalidToken: return "invalid-token";
    case Errc::kAmbiguous: return "ambiguous";
    case Errc::kCenterNotRegistered: return "center-not-registered";
    case Errc::kVerificationFailed: return "verification-failed";
    case Errc::kPageExpired: return "page-expired";
    case Errc::kPageUsed: return "page-used";
    case Errc::kCitizenCompletelyVaccinated: return "citizen-completely-vaccinated";
    case Errc::kCitizenIneligible: return "citizen-ineligible";
    case Errc::kInsufficientStock: return "insufficient-stock";
    case Errc::kUnknownDraft: return "unknown-draft";
    case Errc::kCenterKeyMismatch: return "center-key-mismatch";
    case Errc::kMalformedCiphertext: return "malformed-ciphertext";
    case Errc::kFormatFailure: return "format-failure";
    case Errc::kBadEntity: return "bad-entity";
    case Errc::kEmptyList: return "empty-list";
    case Errc::kIndexOutOfRange: return "index-out-of-range";
    case Errc::kEmptyPending: return "empty-pending";
    case Errc::kInvalidBlock: return "invalid-block";
    case Errc::kBadRequest: return "bad-request";
    case Errc::kFixtureError: return "fixture-error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail = {})
      : std::runtime_error(detail.empty() ? std::string(to_string(code))
                                          : std::string(to_string(code)) + ": " + detail),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace vaxledger
