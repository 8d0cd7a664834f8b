#include "vaxledger/service.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

#include "vaxledger/audit.hpp"
#include "vaxledger/ledger.hpp"

namespace vaxledger::service {

using nlohmann::json;

void validate(const ServiceConfig& config) {
  const auto& e = config.engine;
  if (e.page_ttl_seconds <= 0 || e.otp_ttl_seconds <= 0) throw Error(Errc::kBadRequest, "TTLs must be positive");
  if (e.difficulty > 24) throw Error(Errc::kBadRequest, "difficulty must be at most 24");
  if (e.max_doses < 1) throw Error(Errc::kBadRequest, "maxDoses must be at least 1");
  if (e.batch_size < 1) throw Error(Errc::kBadRequest, "batchSize must be at least 1");
}

int status_for(Errc code) {
  switch (code) {
    case Errc::kNotFound:
    case Errc::kUnknownUuid:
    case Errc::kUnknownSession:
    case Errc::kUnknownDraft:
    case Errc::kInvalidToken:
    case Errc::kUnmappedPin:
    case Errc::kCenterNotRegistered:
      return 404;
    case Errc::kVerificationFailed:
    case Errc::kCenterKeyMismatch:
    case Errc::kWrongOtp:
      return 401;
    case Errc::kCitizenCompletelyVaccinated:
    case Errc::kCitizenIneligible:
    case Errc::kInsufficientStock:
    case Errc::kPageUsed:
    case Errc::kPageExpired:
    case Errc::kExpired:
    case Errc::kAttemptsExhausted:
    case Errc::kAlreadyRegistered:
    case Errc::kDuplicateKey:
    case Errc::kDuplicateUuid:
    case Errc::kAmbiguous:
      return 409;
    default:
      return 400;
  }
}

namespace {

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json j = json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::kBadRequest, "body must be a JSON object");
  return j;
}

std::string str_field(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw Error(Errc::kBadRequest, std::string("'") + key + "' must be a string");
  }
  return j[key].get<std::string>();
}

long long int_from_text(const std::string& text, const char* key) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(Errc::kBadRequest, std::string("'") + key + "' must be an integer");
}

long long int_field(const json& j, const char* key) {
  if (j.contains(key) && j[key].is_number_integer()) return j[key].get<long long>();
  if (j.contains(key) && j[key].is_string()) return int_from_text(j[key].get<std::string>(), key);
  throw Error(Errc::kBadRequest, std::string("'") + key + "' must be an integer");
}

int secret_code_field(const json& j) {
  const long long v = int_field(j, "secretCode");
  if (v < 0 || v > 1'000'000) throw Error(Errc::kBadRequest, "'secretCode' out of range");
  return int(v);
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json vaccination_json(const registry::VaccinationRecord& v) {
  return {{"vaccinationID", v.vaccination_id}, {"pseudoUUID", v.pseudo_uuid},
          {"centerID", v.center_id},           {"vaccineName", v.vaccine_name},
          {"vaccinator", v.vaccinator},        {"doseNumber", v.dose_number},
          {"healthConditions", v.health_conditions}, {"timestamp", v.timestamp}};
}

json details_json(const protocol::VaccinationDetails& d) {
  return {{"draftID", d.draft_id},
          {"vaccineName", d.vaccine_name},
          {"vaccinator", d.vaccinator},
          {"healthConditions", d.health_conditions},
          {"timestamp", d.timestamp}};
}

json center_json(const registry::VaccinationCenter& c) {
  return {{"centerID", c.center_id},          {"centerName", c.center_name},
          {"address", c.address},             {"pinCode", c.pin_code},
          {"district", c.district},           {"state", c.state},
          {"agencyID", c.agency_id},          {"ledgerAddress", c.ledger_address()},
          {"dosesSupplied", c.doses_supplied}, {"dosesRemaining", c.doses_remaining}};
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

/// Maps engine errors to status codes and JSON error bodies.
Handler guarded(Handler inner) {
  return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
    try {
      inner(req, res);
    } catch (const Error& e) {
      const std::string what = e.what();
      const std::string name(to_string(e.code()));
      json body{{"error", name}};
      if (what.size() > name.size() + 2) body["detail"] = what.substr(name.size() + 2);
      reply(res, status_for(e.code()), body);
    } catch (const json::exception& e) {
      reply(res, 400, {{"error", "bad-request"}, {"detail", e.what()}});
    }
  };
}

}  // namespace

Service::Service(ServiceConfig config, const Clock* clock)
    : Service(registry::GovtDirectory::load(config.directory_file, config.region_file), config, clock) {}

Service::Service(registry::GovtDirectory directory, ServiceConfig config, const Clock* clock)
    : config_(std::move(config)),
      clock_(clock ? *clock : system_clock_),
      rng_(config_.deterministic_seed),
      server_(std::make_unique<httplib::Server>()) {
  validate(config_);
  engine_ = std::make_unique<protocol::Engine>(std::move(directory), config_.engine, clock_, rng_);
  engine_->bootstrap_agencies();
  install_routes();
}

Service::~Service() { stop(); }

int Service::start() {
  if (config_.port == 0) {
    port_ = server_->bind_to_any_port(config_.host);
  } else {
    port_ = server_->bind_to_port(config_.host, config_.port) ? config_.port : -1;
  }
  if (port_ <= 0) throw std::runtime_error("bind-failure: " + config_.host + ":" + std::to_string(config_.port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void Service::run() {
  if (!server_->listen(config_.host, config_.port)) {
    throw std::runtime_error("bind-failure: " + config_.host + ":" + std::to_string(config_.port));
  }
}

void Service::stop() {
  if (stopped_) return;
  stopped_ = true;
  server_->stop();
  if (thread_.joinable()) thread_.join();
  engine_->ledger().flush();
}

void Service::install_routes() {
  auto& s = *server_;
  auto& engine = *engine_;
  const bool deterministic = config_.deterministic_seed.has_value();

  s.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"status", "ok"}});
  });

  s.Post("/admin/agencies", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    std::vector<registry::PinRegion> regions;
    if (body.contains("regions")) {
      if (!body["regions"].is_array()) throw Error(Errc::kBadRequest, "'regions' must be an array");
      for (const auto& r : body["regions"]) {
        regions.push_back({str_field(r, "pin"), str_field(r, "district"), str_field(r, "state"),
                           str_field(r, "stateCode"), ""});
      }
    }
    const auto a = engine.create_agency(str_field(body, "agencyID"), regions);
    reply(res, 201, {{"agencyID", a.agency_id},
                     {"region", a.region},
                     {"ledgerAddress", a.ledger_address()},
                     {"publicKey", crypto::to_hex(a.signing_keys.public_key)}});
  }));

  s.Post(R"(/admin/centers/([^/]+)/stock)",
         guarded([&engine](const httplib::Request& req, httplib::Response& res) {
           const json body = parse_body(req);
           const auto c = engine.supply_stock(req.matches[1], int_field(body, "doses"));
           reply(res, 200, center_json(c));
         }));

  s.Post("/centers/register", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    const auto c = engine.register_center(str_field(body, "name"), str_field(body, "address"),
                                          str_field(body, "pin"));
    json out = center_json(c);
    // Shown once to the registering center, like a citizen's static key.
    out["staticKey"] = c.static_key;
    reply(res, 201, out);
  }));

  s.Post("/citizens/register/start",
         guarded([&engine](const httplib::Request& req, httplib::Response& res) {
           const json body = parse_body(req);
           const auto session =
               engine.start_citizen_registration(str_field(body, "uuid"), str_field(body, "phone"));
           reply(res, 201, {{"sessionID", session.session_id},
                            {"expiresAt", format_rfc3339(session.expires_at)},
                            {"attemptsLeft", session.attempts_left}});
         }));

  s.Post("/citizens/register/verify",
         guarded([&engine](const httplib::Request& req, httplib::Response& res) {
           const json body = parse_body(req);
           const auto draft = engine.verify_otp(str_field(body, "sessionID"), str_field(body, "otp"));
           reply(res, 200, {{"token", draft.token}});
         }));

  s.Post("/citizens/register/complete",
         guarded([&engine](const httplib::Request& req, httplib::Response& res) {
           const json body = parse_body(req);
           const auto p = engine.complete_citizen_registration(
               str_field(body, "token"), str_field(body, "pin"), str_field(body, "gender"));
           reply(res, 201, {{"pseudoUUID", p.pseudo_uuid},
                            {"gender", p.gender},
                            {"age", p.age},
                            {"dosesCompleted", p.doses_completed},
                            {"secretCode", p.secret_code},
                            {"staticKey", p.static_key},
                            {"pinCode", p.pin_code},
                            {"district", p.district},
                            {"state", p.state},
                            {"agencyID", p.agency_id}});
         }));

  s.Post("/verify/pages", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    const auto purpose =
        protocol::parse_page_purpose(body.contains("purpose") ? str_field(body, "purpose") : "identity");
    if (purpose != protocol::PagePurpose::kIdentity) {
      throw Error(Errc::kBadRequest, "confirmation pages are opened by the dose-details route");
    }
    std::optional<std::string> center;
    if (body.contains("centerID") && !body["centerID"].is_null()) center = str_field(body, "centerID");
    const auto suffix =
        engine.create_verification_page(secret_code_field(body), str_field(body, "pin"), center, purpose);
    const auto page = engine.page(suffix);
    reply(res, 201, {{"suffix", suffix},
                     {"purpose", protocol::to_string(page->purpose)},
                     {"expiresAt", format_rfc3339(page->expires_at)},
                     {"challenge", page->challenge_ciphertext}});
  }));

  s.Get(R"(/verify/pages/([a-z0-9]{5}))",
        guarded([&engine](const httplib::Request& req, httplib::Response& res) {
          const auto page = engine.page(req.matches[1]);
          if (!page) throw Error(Errc::kNotFound, "no such page");
          json out{{"suffix", page->suffix},
                   {"purpose", protocol::to_string(page->purpose)},
                   {"expiresAt", format_rfc3339(page->expires_at)},
                   {"challenge", page->challenge_ciphertext},
                   {"used", page->used}};
          out["extraData"] = page->extra_data ? details_json(*page->extra_data) : json(nullptr);
          reply(res, 200, out);
        }));

  s.Post(R"(/verify/pages/([a-z0-9]{5})/solve)",
         guarded([&engine](const httplib::Request& req, httplib::Response& res) {
           const json body = parse_body(req);
           const auto outcome = engine.solve_verification_page(
               req.matches[1], str_field(body, "staticKey"), secret_code_field(body));
           if (const auto* ok = std::get_if<protocol::IdentityVerified>(&outcome)) {
             reply(res, 200, {{"outcome", "identity-verified"},
                              {"draft",
                               {{"draftID", ok->draft.draft_id},
                                {"pseudoUUID", ok->draft.pseudo_uuid},
                                {"centerID", ok->draft.center_id},
                                {"doseNumber", ok->draft.dose_number}}}});
           } else {
             const auto& record = std::get<protocol::ConfirmationAccepted>(outcome).record;
             reply(res, 200, {{"outcome", "confirmation-accepted"},
                              {"vaccination", vaccination_json(record)}});
           }
         }));

  s.Post(R"(/vaccinations/drafts/([0-9a-f]+)/details)",
         guarded([&engine](const httplib::Request& req, httplib::Response& res) {
           const json body = parse_body(req);
           const std::string draft_id = req.matches[1];
           const auto suffix = engine.record_vaccination_details(
               draft_id, str_field(body, "vaccineName"), str_field(body, "vaccinator"),
               body.contains("healthConditions") ? str_field(body, "healthConditions") : "",
               str_field(body, "centerStaticKey"));
           const auto page = engine.page(suffix);
           reply(res, 201, {{"confirmationSuffix", suffix},
                            {"expiresAt", format_rfc3339(page->expires_at)},
                            {"details", details_json(*page->extra_data)}});
         }));

  s.Get("/citizens/history", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("secretCode") || !req.has_param("pin")) {
      throw Error(Errc::kBadRequest, "secretCode and pin query parameters required");
    }
    const int code = int(int_from_text(req.get_param_value("secretCode"), "secretCode"));
    json records = json::array();
    for (const auto& v : engine.get_history(code, req.get_param_value("pin"))) {
      records.push_back(vaccination_json(v));
    }
    reply(res, 200, {{"records", records}});
  }));

  s.Get(R"(/certificates/([^/]+))", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    const auto cert = engine.issue_certificate(req.matches[1]);
    const auto agency = engine.store().agency(cert.agency_id);
    reply(res, 200, {{"vaccinationID", cert.vaccination_id},
                     {"pseudoUUID", cert.pseudo_uuid},
                     {"centerID", cert.center_id},
                     {"vaccineName", cert.vaccine_name},
                     {"doseNumber", cert.dose_number},
                     {"timestamp", cert.timestamp},
                     {"agencyID", cert.agency_id},
                     {"signature", crypto::to_hex(cert.signature)},
                     {"agencyPublicKey", crypto::to_hex(agency->signing_keys.public_key)}});
  }));

  s.Get("/ledger/blocks", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    const std::uint64_t height = engine.ledger().height();
    const auto from = req.has_param("from") ? int_from_text(req.get_param_value("from"), "from") : 0;
    const auto to = req.has_param("to") ? int_from_text(req.get_param_value("to"), "to") : (long long)height;
    if (from < 0 || to < from) throw Error(Errc::kBadRequest, "invalid block range");
    json blocks = json::array();
    for (const auto& b : engine.ledger().blocks(std::uint64_t(from), std::uint64_t(to))) {
      blocks.push_back(json::parse(ledger::block_to_json_line(b)));
    }
    reply(res, 200, {{"height", height}, {"blocks", blocks}});
  }));

  s.Get(R"(/ledger/tx/([^/]+))", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    const auto found = engine.ledger().get_transaction(req.matches[1]);
    if (!found) throw Error(Errc::kNotFound, "transaction not committed");
    reply(res, 200, {{"height", found->first},
                     {"transaction", json::parse(ledger::transaction_to_json(found->second))}});
  }));

  s.Post("/audit/run", guarded([this, &engine](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    const std::string agency_id = body.contains("agencyID") ? str_field(body, "agencyID") : "";
    engine.ledger().flush();
    const audit::Auditor auditor(engine.store(), engine.ledger().chain(), engine.ledger().accounts(),
                                 engine.config().max_doses);
    const auto report = auditor.full_audit(clock_, agency_id);
    reply(res, 200, json::parse(audit::report_to_json(report)));
  }));

  s.Get("/test/outbox", guarded([&engine, deterministic](const httplib::Request& req, httplib::Response& res) {
    if (!deterministic) throw Error(Errc::kNotFound, "outbox is only exposed in deterministic mode");
    const std::string phone = req.has_param("phone") ? req.get_param_value("phone") : "";
    json messages = json::array();
    for (const auto& m : engine.outbox()) {
      if (!phone.empty() && m.phone != phone) continue;
      messages.push_back({{"phone", m.phone}, {"message", m.message}, {"timestamp", m.timestamp}});
    }
    reply(res, 200, {{"messages", messages}});
  }));
}

}  // namespace vaxledger::service
