#include <doctest.h>

#include <httplib.h>

#include <nlohmann/json.hpp>

#include "support.hpp"
#include "vaxledger/service.hpp"

using namespace vaxledger;
using nlohmann::json;
using vaxledger::testing::error_of;

namespace {

struct Live {
  ManualClock clock{sim::kScenarioEpoch};
  std::vector<registry::PinRegion> regions = sim::generate_regions(1);
  std::vector<registry::IdentityDirectoryEntry> people =
      sim::generate_population(6, regions, 21, civil_date_of(sim::kScenarioEpoch), 18, 90);
  std::unique_ptr<service::Service> svc;
  std::unique_ptr<httplib::Client> client;
  std::vector<std::string> bodies;

  explicit Live(bool deterministic = true, std::size_t batch = 16) {
    service::ServiceConfig config;
    config.port = 0;
    config.engine.difficulty = 4;
    config.engine.batch_size = batch;
    if (deterministic) config.deterministic_seed = 5;
    svc = std::make_unique<service::Service>(registry::GovtDirectory::from_entries(people, regions), config, &clock);
    client = std::make_unique<httplib::Client>("127.0.0.1", svc->start());
  }

  std::pair<int, json> post(const std::string& path, const json& body) {
    return finish(client->Post(path, body.dump(), "application/json"));
  }
  std::pair<int, json> post_raw(const std::string& path, const std::string& body) {
    return finish(client->Post(path, body, "application/json"));
  }
  std::pair<int, json> get(const std::string& path) { return finish(client->Get(path)); }

  std::pair<int, json> finish(const httplib::Result& res) {
    REQUIRE(res);
    bodies.push_back(res->body);
    return {res->status, json::parse(res->body)};
  }

  json enroll(const registry::IdentityDirectoryEntry& e) {
    auto [s1, start] = post("/citizens/register/start", {{"uuid", e.uuid}, {"phone", e.phone}});
    REQUIRE(s1 == 201);
    auto [s2, box] = get("/test/outbox");
    REQUIRE(s2 == 200);
    const std::string msg = box["messages"].back()["message"];
    auto [s3, token] = post("/citizens/register/verify", {{"sessionID", start["sessionID"]}, {"otp", msg.substr(msg.size() - 6)}});
    REQUIRE(s3 == 200);
    auto [s4, profile] = post("/citizens/register/complete", {{"token", token["token"]}, {"pin", e.pin_code}, {"gender", e.gender}});
    REQUIRE(s4 == 201);
    return profile;
  }

  json center() {
    auto [status, c] = post("/centers/register", {{"name", "Civil Hospital"}, {"address", "Ring Road"}, {"pin", regions[0].pin_code}});
    REQUIRE(status == 201);
    auto [s2, stocked] = post("/admin/centers/" + c["centerID"].get<std::string>() + "/stock", {{"doses", 10}});
    REQUIRE(s2 == 200);
    return c;
  }

  std::string identity_page(const json& p, const json& c) {
    auto [status, page] = post("/verify/pages", {{"secretCode", p["secretCode"]}, {"pin", p["pinCode"]}, {"centerID", c["centerID"]}, {"purpose", "identity"}});
    REQUIRE(status == 201);
    return page["suffix"];
  }

  json vaccinate(const json& p, const json& c) {
    const auto suffix = identity_page(p, c);
    auto [s1, solved] = post("/verify/pages/" + suffix + "/solve", {{"staticKey", p["staticKey"]}, {"secretCode", p["secretCode"]}});
    REQUIRE(s1 == 200);
    REQUIRE(solved["outcome"] == "identity-verified");
    auto [s2, details] = post("/vaccinations/drafts/" + solved["draft"]["draftID"].get<std::string>() + "/details",
                              {{"vaccineName", "AlphaVaccine"}, {"vaccinator", "Dr. John Doe"}, {"healthConditions", "Normal"}, {"centerStaticKey", c["staticKey"]}});
    REQUIRE(s2 == 201);
    auto [s3, confirmed] = post("/verify/pages/" + details["confirmationSuffix"].get<std::string>() + "/solve",
                                {{"staticKey", p["staticKey"]}, {"secretCode", p["secretCode"]}});
    REQUIRE(s3 == 200);
    REQUIRE(confirmed["outcome"] == "confirmation-accepted");
    return confirmed["vaccination"];
  }
};

std::set<std::string> keys_of(const json& j) {
  std::set<std::string> out;
  for (const auto& [k, v] : j.items()) out.insert(k);
  return out;
}

}  // namespace

TEST_SUITE("service") {

TEST_CASE("health and status mapping") {
  Live live;
  auto [status, body] = live.get("/health");
  CHECK(status == 200);
  CHECK(body == json{{"status", "ok"}});
  CHECK(service::status_for(Errc::kPageUsed) == 409);
  CHECK(service::status_for(Errc::kCenterKeyMismatch) == 401);
  CHECK(service::status_for(Errc::kUnknownDraft) == 404);
  CHECK(service::status_for(Errc::kBadRequest) == 400);
}

TEST_CASE("config validation and fixture errors at boot") {
  service::ServiceConfig config;
  config.directory_file = "/nonexistent/directory.jsonl";
  config.region_file = "/nonexistent/regions.jsonl";
  CHECK(error_of([&] { service::Service s(config); }) == "fixture-error");
  config.engine.difficulty = 25;
  CHECK(error_of([&] { service::validate(config); }) == "bad-request");
  config.engine.difficulty = 8;
  config.engine.page_ttl_seconds = 0;
  CHECK(error_of([&] { service::validate(config); }) == "bad-request");
}

TEST_CASE("schema and lookup errors") {
  Live live;
  auto [s1, b1] = live.post("/citizens/register/start", {{"uuid", "000000000000"}, {"phone", "+910000000000"}});
  CHECK(s1 == 404);
  CHECK(b1["error"] == "unknown-uuid");
  auto [s2, b2] = live.post_raw("/citizens/register/start", "{not json");
  CHECK(s2 == 400);
  CHECK(b2["error"] == "bad-request");
  auto [s3, b3] = live.post("/citizens/register/start", {{"uuid", 12}});
  CHECK(s3 == 400);
  auto [s4, b4] = live.post("/centers/register", {{"name", "x"}, {"address", "y"}, {"pin", "999999"}});
  CHECK(s4 == 404);
  CHECK(b4["error"] == "unmapped-pin");
  auto [s5, b5] = live.post("/verify/pages", {{"secretCode", 1234}, {"pin", "380001"}, {"purpose", "confirmation"}});
  CHECK(s5 == 400);
  auto [s6, b6] = live.get("/ledger/tx/unknown");
  CHECK(s6 == 404);
  auto [s7, b7] = live.get("/citizens/history?secretCode=abc&pin=380001");
  CHECK(s7 == 400);
}

TEST_CASE("happy path over http") {
  Live live;
  const auto profile = live.enroll(live.people[0]);
  CHECK(keys_of(profile) == std::set<std::string>{"pseudoUUID", "gender", "age", "dosesCompleted", "secretCode",
                                                  "staticKey", "pinCode", "district", "state", "agencyID"});
  const auto c = live.center();
  const auto v = live.vaccinate(profile, c);
  CHECK(keys_of(v) == std::set<std::string>{"vaccinationID", "pseudoUUID", "centerID", "vaccineName", "vaccinator",
                                            "doseNumber", "healthConditions", "timestamp"});
  CHECK(v["vaccinationID"] == profile["pseudoUUID"].get<std::string>() + "1" + c["centerID"].get<std::string>());

  const std::string code = std::to_string(profile["secretCode"].get<int>());
  auto [sh, history] = live.get("/citizens/history?secretCode=" + code + "&pin=" + profile["pinCode"].get<std::string>());
  CHECK(sh == 200);
  CHECK(history["records"].size() == 1);

  auto [sc, cert] = live.get("/certificates/" + v["vaccinationID"].get<std::string>());
  CHECK(sc == 200);
  CHECK(cert["agencyID"] == profile["agencyID"]);

  auto [sa, audit] = live.post("/audit/run", json::object());
  CHECK(sa == 200);
  CHECK(audit["chainOk"] == true);
  CHECK(audit["findings"].empty());

  auto [sb, blocks] = live.get("/ledger/blocks?from=1");
  CHECK(sb == 200);
  CHECK(blocks["blocks"].size() == 1);
  CHECK(blocks["blocks"][0]["transactions"].size() == 2);
  auto [st, tx] = live.get("/ledger/tx/" + v["vaccinationID"].get<std::string>());
  CHECK(st == 200);
  CHECK(tx["height"] == 1);

  // Pending dose details are visible on the page before the citizen confirms.
  const auto suffix = live.identity_page(profile, c);
  auto [sp, page] = live.get("/verify/pages/" + suffix);
  CHECK(sp == 200);
  CHECK(page["purpose"] == "identity");
  CHECK(page["extraData"].is_null());
}

TEST_CASE("verification failures and replays") {
  Live live;
  const auto profile = live.enroll(live.people[1]);
  const auto c = live.center();
  const auto suffix = live.identity_page(profile, c);
  auto [s1, b1] = live.post("/verify/pages/" + suffix + "/solve", {{"staticKey", c["staticKey"]}, {"secretCode", profile["secretCode"]}});
  CHECK(s1 == 401);
  CHECK(b1["error"] == "verification-failed");
  auto [s2, b2] = live.post("/verify/pages/" + suffix + "/solve", {{"staticKey", profile["staticKey"]}, {"secretCode", profile["secretCode"]}});
  CHECK(s2 == 409);
  CHECK(b2["error"] == "page-used");

  const auto late = live.identity_page(profile, c);
  live.clock.advance(301);
  auto [s3, b3] = live.post("/verify/pages/" + late + "/solve", {{"staticKey", profile["staticKey"]}, {"secretCode", profile["secretCode"]}});
  CHECK(s3 == 409);
  CHECK(b3["error"] == "page-expired");

  live.vaccinate(profile, c);
  live.vaccinate(profile, c);
  const auto third = live.identity_page(profile, c);
  auto [s4, b4] = live.post("/verify/pages/" + third + "/solve", {{"staticKey", profile["staticKey"]}, {"secretCode", profile["secretCode"]}});
  CHECK(s4 == 409);
  CHECK(b4["error"] == "citizen-completely-vaccinated");

  auto [s5, b5] = live.post("/citizens/register/start", {{"uuid", live.people[1].uuid}, {"phone", live.people[1].phone}});
  CHECK(s5 == 409);
  CHECK(b5["error"] == "already-registered");

  const auto other = live.enroll(live.people[2]);
  const auto page = live.identity_page(other, c);
  auto [s6, solved] = live.post("/verify/pages/" + page + "/solve", {{"staticKey", other["staticKey"]}, {"secretCode", other["secretCode"]}});
  REQUIRE(s6 == 200);
  auto [s7, b7] = live.post("/vaccinations/drafts/" + solved["draft"]["draftID"].get<std::string>() + "/details",
                            {{"vaccineName", "AlphaVaccine"}, {"vaccinator", "Dr. John Doe"}, {"centerStaticKey", other["staticKey"]}});
  CHECK(s7 == 401);
  CHECK(b7["error"] == "center-key-mismatch");
}

TEST_CASE("responses never carry raw identity or master keys") {
  Live live;
  std::vector<json> profiles;
  const auto c = live.center();
  for (std::size_t i = 0; i < 3; ++i) profiles.push_back(live.enroll(live.people[i]));
  for (const auto& p : profiles) live.vaccinate(p, c);
  live.post("/audit/run", json::object());
  live.get("/ledger/blocks");
  std::vector<std::string> secrets;
  for (const auto& a : live.svc->engine().store().agencies()) secrets.push_back(a.master_key.value);
  for (const auto& body : live.bodies) {
    // The outbox is test plumbing that carries phone numbers by design.
    if (body.find("\"messages\"") != std::string::npos) continue;
    CHECK(sim::privacy_leaks(body, live.people).empty());
    for (const auto& s : secrets) CHECK(body.find(s) == std::string::npos);
  }
}

TEST_CASE("outbox hidden without deterministic seed") {
  Live live(false);
  auto [status, body] = live.get("/test/outbox");
  CHECK(status == 404);
}

TEST_CASE("shutdown mines pending transactions") {
  Live live(true, 16);
  for (std::size_t i = 0; i < 3; ++i) live.enroll(live.people[i]);
  CHECK(live.svc->engine().ledger().pending_count() == 3);
  live.svc->stop();
  CHECK(live.svc->engine().ledger().pending_count() == 0);
  const auto chain = live.svc->engine().ledger().chain();
  CHECK(chain.size() == 2);
  CHECK(chain.tip().transactions.size() == 3);
}

TEST_CASE("agencies via admin route") {
  Live live;
  auto [status, body] = live.post("/admin/agencies", {{"agencyID", "AG-KL-1"},
                                                      {"regions", {{{"pin", "682001"}, {"district", "Kochi"}, {"state", "Kerala"}, {"stateCode", "KL"}}}}});
  CHECK(status == 201);
  CHECK(body["region"] == json::array({"682001"}));
  CHECK_FALSE(body.contains("masterKey"));
  auto [again, dup] = live.post("/admin/agencies", {{"agencyID", "AG-KL-1"}});
  CHECK(again == 409);
}

}
