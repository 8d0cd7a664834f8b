#include <doctest.h>

#include <map>

#include "support.hpp"

using namespace vaxledger;
using namespace vaxledger::protocol;
using vaxledger::testing::error_of;
using vaxledger::testing::World;

TEST_SUITE("protocol") {

TEST_CASE("citizen registration derives pseudonymous identifiers") {
  World w;
  const auto& e = w.people[0];
  const auto p = w.enroll(e);
  CHECK(crypto::is_hex_digest(p.pseudo_uuid));
  CHECK(crypto::is_hex_digest(p.static_key));
  CHECK(p.secret_code >= 1000);
  CHECK(p.secret_code <= 9999);
  CHECK(p.doses_completed == 0);
  CHECK(p.pin_code == e.pin_code);
  CHECK(p.age == whole_years_between(e.date_of_birth, civil_date_of(w.clock.now())));
  CHECK(p.agency_id == w.engine.directory().region(e.pin_code)->agency_id);
  CHECK(w.engine.store().citizen(p.pseudo_uuid));

  w.engine.ledger().flush();
  const auto tx = w.engine.ledger().get_transaction(p.pseudo_uuid);
  REQUIRE(tx);
  CHECK(tx->second.tx_type == ledger::TxType::kRegistration);
  CHECK(tx->second.entity.memo_hash == registry::memo_hash(p));
  CHECK(tx->second.entity.additional_data == "pseudoUUID: " + p.pseudo_uuid + ", PINCode: " + e.pin_code);
  CHECK(tx->second.signer_address == w.engine.store().agency(p.agency_id)->ledger_address());
}

TEST_CASE("registration errors") {
  World w;
  const auto& e = w.people[1];
  CHECK(error_of([&] { w.engine.start_citizen_registration("000000000000", e.phone); }) == "unknown-uuid");
  CHECK(error_of([&] { w.engine.verify_otp("nope", "123456"); }) == "unknown-session");
  CHECK(error_of([&] { w.engine.complete_citizen_registration("nope", e.pin_code, "Male"); }) == "invalid-token");

  const auto s = w.engine.start_citizen_registration(e.uuid, e.phone);
  CHECK(s.attempts_left == 3);
  const std::string otp = w.otp_for(e.phone);
  const std::string wrong = otp == "000000" ? "000001" : "000000";
  CHECK(error_of([&] { w.engine.verify_otp(s.session_id, wrong); }) == "wrong-otp");
  CHECK(error_of([&] { w.engine.verify_otp(s.session_id, wrong); }) == "wrong-otp");
  CHECK(error_of([&] { w.engine.verify_otp(s.session_id, wrong); }) == "attempts-exhausted");
  CHECK(error_of([&] { w.engine.verify_otp(s.session_id, otp); }) == "unknown-session");

  const auto late = w.engine.start_citizen_registration(e.uuid, e.phone);
  w.clock.advance(300);
  CHECK(error_of([&] { w.engine.verify_otp(late.session_id, w.otp_for(e.phone)); }) == "expired");

  const auto ok = w.engine.start_citizen_registration(e.uuid, e.phone);
  const auto draft = w.engine.verify_otp(ok.session_id, w.otp_for(e.phone));
  CHECK(error_of([&] { w.engine.complete_citizen_registration(draft.token, "999999", "Male"); }) == "unmapped-pin");
  w.engine.complete_citizen_registration(draft.token, e.pin_code, e.gender);
  CHECK(error_of([&] { w.engine.start_citizen_registration(e.uuid, e.phone); }) == "already-registered");
  CHECK(error_of([&] { w.engine.complete_citizen_registration(draft.token, e.pin_code, e.gender); }) ==
        "invalid-token");
}

TEST_CASE("two sessions for one uuid register once") {
  World w;
  const auto& e = w.people[2];
  const auto a = w.engine.start_citizen_registration(e.uuid, e.phone);
  const auto da = w.engine.verify_otp(a.session_id, w.otp_for(e.phone));
  const auto b = w.engine.start_citizen_registration(e.uuid, e.phone);
  const auto db = w.engine.verify_otp(b.session_id, w.otp_for(e.phone));
  w.engine.complete_citizen_registration(da.token, e.pin_code, e.gender);
  CHECK(error_of([&] { w.engine.complete_citizen_registration(db.token, e.pin_code, e.gender); }) ==
        "already-registered");
  CHECK(w.engine.store().citizens().size() == 1);
}

TEST_CASE("center registration") {
  World w;
  const auto c = w.open_center(10, 5);
  CHECK(c.center_id.size() == 10);
  CHECK(c.center_id.substr(0, 2) == w.regions[5].state_code);
  CHECK(c.district == w.regions[5].district);
  CHECK(c.doses_supplied == 10);
  CHECK(crypto::is_hex_digest(c.static_key));
  CHECK(error_of([&] { w.engine.register_center("X", "Y", "999999"); }) == "unmapped-pin");
  CHECK(error_of([&] { w.engine.supply_stock(c.center_id, 0); }) == "bad-request");
  CHECK(error_of([&] { w.engine.supply_stock("GJ00000000", 5); }) == "not-found");
  const auto book = w.engine.ledger().accounts();
  const auto acct = book.find(c.ledger_address());
  REQUIRE(acct);
  CHECK(acct->assets.at(0).quantity == 10);
}

TEST_CASE("full vaccination produces the expected record") {
  World w;
  const auto p = w.enroll(w.people[0]);
  const auto c = w.open_center();
  const auto v = w.vaccinate(p, c);
  CHECK(v.vaccination_id == p.pseudo_uuid + "1" + c.center_id);
  CHECK(v.dose_number == 1);
  CHECK(v.center_id == c.center_id);
  CHECK(w.engine.store().citizen(p.pseudo_uuid)->doses_completed == 1);
  CHECK(w.engine.store().center(c.center_id)->doses_remaining == 49);
  const auto v2 = w.vaccinate(p, c);
  CHECK(v2.vaccination_id == p.pseudo_uuid + "2" + c.center_id);
  const auto history = w.engine.get_history(p.secret_code, p.pin_code);
  REQUIRE(history.size() == 2);
  CHECK(history[0].dose_number == 1);

  w.engine.ledger().flush();
  const auto tx = w.engine.ledger().get_transaction(v.vaccination_id);
  REQUIRE(tx);
  CHECK(tx->second.tx_type == ledger::TxType::kVaccination);
  CHECK(tx->second.signer_address == c.ledger_address());
  CHECK(tx->second.entity.memo_hash == registry::memo_hash(v));
  CHECK(tx->second.entity.additional_data == "citizenPseudoUUID: " + p.pseudo_uuid + ", centerID: " + c.center_id);
  CHECK(w.engine.ledger().accounts().find(c.ledger_address())->assets.at(0).quantity == 48);
}

TEST_CASE("verification pages are single use and expire") {
  World w;
  const auto p = w.enroll(w.people[0]);
  const auto c = w.open_center();
  CHECK(error_of([&] {
          w.engine.create_verification_page(p.secret_code, p.pin_code, std::string("GJ00000000"), PagePurpose::kIdentity);
        }) == "center-not-registered");
  CHECK(error_of([&] {
          w.engine.create_verification_page(p.secret_code, p.pin_code, std::nullopt, PagePurpose::kIdentity);
        }) == "center-not-registered");
  CHECK(error_of([&] {
          w.engine.create_verification_page(p.secret_code == 9999 ? 1000 : p.secret_code + 1, "999999", c.center_id,
                                            PagePurpose::kIdentity);
        }) == "not-found");

  const auto page = w.engine.create_verification_page(p.secret_code, p.pin_code, c.center_id, PagePurpose::kIdentity);
  CHECK(page.size() == 5);
  CHECK(page.find_first_not_of("abcdefghijklmnopqrstuvwxyz0123456789") == std::string::npos);
  CHECK(w.engine.page(page)->challenge_ciphertext.size() == 32);
  const std::string wrong_key(64, 'f');
  CHECK(error_of([&] { w.engine.solve_verification_page(page, wrong_key, p.secret_code); }) == "verification-failed");
  CHECK(error_of([&] { w.engine.solve_verification_page(page, p.static_key, p.secret_code); }) == "page-used");

  const auto again = w.engine.create_verification_page(p.secret_code, p.pin_code, c.center_id, PagePurpose::kIdentity);
  CHECK(error_of([&] { w.engine.solve_verification_page(again, p.static_key, p.secret_code + 1); }) ==
        "verification-failed");

  const auto late = w.engine.create_verification_page(p.secret_code, p.pin_code, c.center_id, PagePurpose::kIdentity);
  w.clock.advance(299);
  const auto still = w.engine.create_verification_page(p.secret_code, p.pin_code, c.center_id, PagePurpose::kIdentity);
  w.clock.advance(1);
  CHECK(error_of([&] { w.engine.solve_verification_page(late, p.static_key, p.secret_code); }) == "page-expired");
  CHECK(error_of([&] { w.engine.solve_verification_page(late, p.static_key, p.secret_code); }) == "page-used");
  CHECK(std::holds_alternative<IdentityVerified>(w.engine.solve_verification_page(still, p.static_key, p.secret_code)));
  CHECK(error_of([&] { w.engine.solve_verification_page("zzzzz", p.static_key, p.secret_code); }) == "not-found");
  // Long-dead pages are purged.
  w.clock.advance(10'000);
  w.engine.create_verification_page(p.secret_code, p.pin_code, c.center_id, PagePurpose::kIdentity);
  CHECK_FALSE(w.engine.page(late));
}

TEST_CASE("dose cap, eligibility and stock") {
  World w;
  const auto p = w.enroll(w.people[0]);
  const auto c = w.open_center();
  w.vaccinate(p, c);
  w.vaccinate(p, c);
  CHECK(error_of([&] { w.vaccinate(p, c); }) == "citizen-completely-vaccinated");

  const auto q = w.enroll(w.people[1]);
  const auto scarce = w.open_center(1);
  w.vaccinate(q, scarce);
  CHECK(error_of([&] { w.vaccinate(q, scarce); }) == "insufficient-stock");

  World minors(5, World::small_config(), 3, 12, 17);
  const auto kid = minors.enroll(minors.people[0]);
  const auto kc = minors.open_center();
  CHECK(kid.age < 18);
  CHECK(error_of([&] { minors.vaccinate(kid, kc); }) == "citizen-ineligible");
}

TEST_CASE("dose details need the center key and drafts go stale") {
  World w;
  const auto p = w.enroll(w.people[0]);
  const auto c = w.open_center();
  const auto other = w.open_center();
  const auto page = w.engine.create_verification_page(p.secret_code, p.pin_code, c.center_id, PagePurpose::kIdentity);
  const auto draft = std::get<IdentityVerified>(w.engine.solve_verification_page(page, p.static_key, p.secret_code)).draft;
  CHECK(draft.dose_number == 1);
  CHECK(error_of([&] { w.engine.record_vaccination_details(draft.draft_id, "A", "B", "", other.static_key); }) ==
        "center-key-mismatch");
  CHECK(error_of([&] { w.engine.record_vaccination_details("ffff", "A", "B", "", c.static_key); }) == "unknown-draft");
  CHECK(error_of([&] { w.engine.record_vaccination_details(draft.draft_id, "", "B", "", c.static_key); }) ==
        "bad-request");

  const auto page2 = w.engine.create_verification_page(p.secret_code, p.pin_code, c.center_id, PagePurpose::kIdentity);
  const auto draft2 = std::get<IdentityVerified>(w.engine.solve_verification_page(page2, p.static_key, p.secret_code)).draft;

  const auto confirm = w.engine.record_vaccination_details(draft.draft_id, "AlphaVaccine", "Dr. Jane Roe", "fine", c.static_key);
  const auto shown = w.engine.page(confirm);
  REQUIRE(shown->extra_data);
  CHECK(shown->extra_data->vaccinator == "Dr. Jane Roe");
  CHECK(shown->purpose == PagePurpose::kConfirmation);
  CHECK(error_of([&] { w.engine.confirm_vaccination(page2, p.static_key, p.secret_code); }) == "bad-request");
  w.engine.confirm_vaccination(confirm, p.static_key, p.secret_code);

  const auto confirm2 = w.engine.record_vaccination_details(draft2.draft_id, "AlphaVaccine", "Dr. Jane Roe", "", c.static_key);
  CHECK(error_of([&] { w.engine.confirm_vaccination(confirm2, p.static_key, p.secret_code); }) == "unknown-draft");
  CHECK(w.engine.store().count_doses(p.pseudo_uuid) == 1);
}

TEST_CASE("confirmation requires the citizen's credentials") {
  World w;
  const auto p = w.enroll(w.people[0]);
  const auto c = w.open_center();
  const auto page = w.engine.create_verification_page(p.secret_code, p.pin_code, c.center_id, PagePurpose::kIdentity);
  const auto draft = std::get<IdentityVerified>(w.engine.solve_verification_page(page, p.static_key, p.secret_code)).draft;
  const auto confirm = w.engine.record_vaccination_details(draft.draft_id, "AlphaVaccine", "Dr. Jane Roe", "", c.static_key);
  CHECK(error_of([&] { w.engine.confirm_vaccination(confirm, c.static_key, p.secret_code); }) == "verification-failed");
  CHECK(w.engine.store().count_doses(p.pseudo_uuid) == 0);
  CHECK(w.engine.store().center(c.center_id)->doses_remaining == 50);
  // The official re-issues the details; the draft survived the failed attempt.
  const auto retry = w.engine.record_vaccination_details(draft.draft_id, "AlphaVaccine", "Dr. Jane Roe", "", c.static_key);
  CHECK(w.engine.confirm_vaccination(retry, p.static_key, p.secret_code).dose_number == 1);
}

TEST_CASE("certificates are signed by the agency") {
  World w;
  const auto p = w.enroll(w.people[0]);
  const auto c = w.open_center();
  const auto v = w.vaccinate(p, c);
  auto cert = w.engine.issue_certificate(v.vaccination_id);
  const auto agency = w.engine.store().agency(p.agency_id);
  CHECK(cert.agency_id == p.agency_id);
  CHECK(verify_certificate(cert, agency->signing_keys.public_key));
  cert.dose_number = 2;
  CHECK_FALSE(verify_certificate(cert, agency->signing_keys.public_key));
  CHECK(error_of([&] { w.engine.issue_certificate("nope"); }) == "not-found");
}

TEST_CASE("faithful mode codes collide and lookups report ambiguity") {
  auto config = World::small_config();
  config.secret_code_mode = crypto::SecretCodeMode::kFaithful;
  World w(40, config);
  std::map<std::pair<std::string, int>, int> seen;
  std::optional<registry::CitizenProfile> twin;
  for (const auto& e : w.people) {
    const auto p = w.enroll(e);
    CHECK(p.secret_code % 5 == 0);
    if (++seen[{p.pin_code, p.secret_code}] == 2) twin = p;
  }
  REQUIRE(twin);
  const auto c = w.open_center();
  CHECK(error_of([&] {
          w.engine.create_verification_page(twin->secret_code, twin->pin_code, c.center_id, PagePurpose::kIdentity);
        }) == "ambiguous");
}

TEST_CASE("agencies can be created at runtime") {
  World w;
  const auto a = w.engine.create_agency("AG-KL-9", {{"682001", "Kochi", "Kerala", "KL", ""}});
  CHECK(a.region == std::vector<std::string>{"682001"});
  CHECK(w.engine.directory().region("682001")->agency_id == "AG-KL-9");
  const auto c = w.engine.register_center("Kochi Center", "Marine Drive", "682001");
  CHECK(c.center_id.substr(0, 2) == "KL");
  CHECK(error_of([&] { w.engine.create_agency("AG-KL-9", {}); }) == "duplicate-key");
  CHECK(error_of([&] { w.engine.create_agency("AG-X", {{w.regions[0].pin_code, "d", "s", "GJ", ""}}); }) ==
        "duplicate-key");
  CHECK(error_of([&] { w.engine.create_agency("AG-Y", {{"1", "d", "s", "G", ""}}); }) == "bad-request");
}

}
