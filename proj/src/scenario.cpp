#include "vaxledger/scenario.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "vaxledger/error.hpp"
#include "vaxledger/protocol.hpp"
#include "vaxledger/random.hpp"

namespace vaxledger::sim {

using nlohmann::json;
using registry::IdentityDirectoryEntry;
using registry::PinRegion;

namespace chr = std::chrono;

namespace {

struct StateInfo {
  const char* code;
  const char* name;
  std::array<const char*, 4> districts;
  int base_pin;
};

constexpr std::array<StateInfo, 8> kStates{{
    {"GJ", "Gujarat", {"Ahmedabad", "Surat", "Vadodara", "Rajkot"}, 380001},
    {"MH", "Maharashtra", {"Mumbai", "Pune", "Nagpur", "Nashik"}, 400001},
    {"KA", "Karnataka", {"Bengaluru", "Mysuru", "Mangaluru", "Hubballi"}, 560001},
    {"TN", "Tamil Nadu", {"Chennai", "Coimbatore", "Madurai", "Salem"}, 600001},
    {"DL", "Delhi", {"New Delhi", "North Delhi", "South Delhi", "East Delhi"}, 110001},
    {"WB", "West Bengal", {"Kolkata", "Howrah", "Durgapur", "Siliguri"}, 700001},
    {"RJ", "Rajasthan", {"Jaipur", "Jodhpur", "Udaipur", "Kota"}, 302001},
    {"UP", "Uttar Pradesh", {"Lucknow", "Kanpur", "Varanasi", "Agra"}, 226001},
}};

// Citizen name pools share no word with the vaccinator names below.
constexpr std::array<const char*, 16> kFirstNames{
    "Aarav", "Vivaan", "Aditya", "Ishaan", "Kabir", "Rohan", "Arjun", "Dev",
    "Ananya", "Diya", "Isha", "Meera", "Priya", "Saanvi", "Tara", "Zoya"};
constexpr std::array<const char*, 12> kLastNames{"Patel", "Shah", "Mehta", "Iyer", "Reddy", "Gupta",
                                                 "Singh", "Das",   "Nair", "Bose", "Khan",  "Joshi"};
constexpr std::array<const char*, 3> kVaccinators{"Dr. John Doe", "Dr. Jane Roe", "Nurse Q. Public"};
constexpr const char* kVaccine = "AlphaVaccine";
constexpr const char* kHealthNote = "Normal, no COVID symptoms reported";

CivilDate minus_years_clamped(const CivilDate& d, int years) {
  chr::year_month_day ymd{chr::year{d.year - years}, chr::month{d.month}, chr::day{d.day}};
  if (!ymd.ok()) ymd = chr::year_month_day_last{ymd.year(), chr::month_day_last{ymd.month()}};
  return {int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day())};
}

std::string digits(std::mt19937_64& rng, std::size_t n, bool nonzero_first) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    const int lo = (i == 0 && nonzero_first) ? 1 : 0;
    out.push_back(char('0' + lo + rng() % (10 - lo)));
  }
  return out;
}

}  // namespace

std::vector<PinRegion> generate_regions(std::size_t agencies) {
  std::vector<PinRegion> out;
  for (std::size_t i = 0; i < agencies; ++i) {
    const auto& st = kStates[i % kStates.size()];
    const std::size_t round = i / kStates.size();
    const std::string agency_id = std::string("AG-") + st.code + "-" + std::to_string(i + 1);
    for (std::size_t j = 0; j < 4; ++j) {
      std::string district = st.districts[j];
      if (round > 0) district += " " + std::to_string(round + 1);
      out.push_back({std::to_string(st.base_pin + int(round * 10 + j)), district, st.name, st.code,
                     agency_id});
    }
  }
  return out;
}

std::vector<IdentityDirectoryEntry> generate_population(std::size_t n,
                                                        const std::vector<PinRegion>& regions,
                                                        std::uint64_t seed, CivilDate reference,
                                                        int min_age, int max_age) {
  if (regions.empty()) throw Error(Errc::kBadRequest, "population needs at least one region");
  if (min_age > max_age || min_age < 0) throw Error(Errc::kBadRequest, "invalid age range");
  std::mt19937_64 rng(seed);
  std::unordered_set<std::string> uuids;
  std::vector<IdentityDirectoryEntry> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    IdentityDirectoryEntry e;
    do {
      e.uuid = digits(rng, 12, true);
    } while (!uuids.insert(e.uuid).second);
    e.name = std::string(kFirstNames[rng() % kFirstNames.size()]) + " " + kLastNames[rng() % kLastNames.size()];
    const int age = min_age + int(rng() % std::uint64_t(max_age - min_age + 1));
    // Birthday falls 0..364 days before the anniversary, so whole-year age stays `age`.
    const CivilDate anniversary = minus_years_clamped(reference, age);
    const auto birth = chr::sys_days{chr::year{anniversary.year} / chr::month{anniversary.month} /
                                     chr::day{anniversary.day}} -
                       chr::days{rng() % 365};
    const chr::year_month_day ymd{birth};
    e.date_of_birth = {int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day())};
    e.phone = "+91" + std::to_string(6 + rng() % 4) + digits(rng, 9, false);
    const auto g = rng() % 100;
    e.gender = g < 49 ? "Male" : g < 98 ? "Female" : "Other";
    e.pin_code = regions[rng() % regions.size()].pin_code;
    out.push_back(std::move(e));
  }
  return out;
}

void write_fixtures(const std::filesystem::path& dir, const std::vector<IdentityDirectoryEntry>& entries,
                    const std::vector<PinRegion>& regions) {
  std::filesystem::create_directories(dir);
  std::ofstream d(dir / "directory.jsonl", std::ios::trunc);
  for (const auto& e : entries) d << registry::directory_entry_json(e) << '\n';
  std::ofstream r(dir / "regions.jsonl", std::ios::trunc);
  for (const auto& region : regions) r << registry::region_json(region) << '\n';
  if (!d || !r) throw Error(Errc::kFixtureError, "cannot write fixtures to " + dir.string());
}

// ── Tampering ───────────────────────────────────────────────────────────────

TamperSpec parse_tamper(const std::string& text) {
  if (text == "none") return {};
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw Error(Errc::kBadRequest, "tamper must be none, db:k or ledger:k");
  const std::string kind = text.substr(0, colon);
  const std::string count = text.substr(colon + 1);
  if (count.empty() || count.find_first_not_of("0123456789") != std::string::npos) {
    throw Error(Errc::kBadRequest, "tamper count must be a non-negative integer");
  }
  TamperSpec spec;
  spec.count = std::stoull(count);
  if (kind == "db") {
    spec.kind = TamperKind::kDatabase;
  } else if (kind == "ledger") {
    spec.kind = TamperKind::kLedger;
  } else {
    throw Error(Errc::kBadRequest, "tamper must be none, db:k or ledger:k");
  }
  return spec;
}

std::string to_string(const TamperSpec& spec) {
  switch (spec.kind) {
    case TamperKind::kNone: return "none";
    case TamperKind::kDatabase: return "db:" + std::to_string(spec.count);
    case TamperKind::kLedger: return "ledger:" + std::to_string(spec.count);
  }
  return "none";
}

namespace {

std::string altered_value(const std::string& field, const std::string& old) {
  if (field == "age") return std::to_string(std::stoi(old) + 1);
  if (field == "gender") return old == "Male" ? "Female" : "Male";
  if (field == "staticKey") {
    std::string v = old;
    v.back() = v.back() == '0' ? '1' : '0';
    return v;
  }
  if (field == "timestamp") return format_rfc3339(parse_rfc3339(old) + 1);
  return old + " (edited)";
}

}  // namespace

std::vector<TamperEntry> inject_db_tamper(registry::Store& store, std::size_t k, std::uint64_t seed) {
  static const std::vector<std::string> kCitizenFields{"age", "gender", "district", "state", "staticKey"};
  static const std::vector<std::string> kVaccinationFields{"vaccineName", "vaccinator",
                                                           "healthConditions", "timestamp"};
  std::vector<std::pair<std::string, std::string>> targets;
  for (const auto& p : store.citizens()) targets.emplace_back("citizen", p.pseudo_uuid);
  for (const auto& v : store.vaccinations()) targets.emplace_back("vaccination", v.vaccination_id);
  if (k > targets.size()) {
    throw Error(Errc::kBadRequest, "cannot tamper " + std::to_string(k) + " of " +
                                       std::to_string(targets.size()) + " records");
  }
  std::mt19937_64 rng(seed);
  std::shuffle(targets.begin(), targets.end(), rng);
  std::vector<TamperEntry> manifest;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& [target, key] = targets[i];
    const bool citizen = target == "citizen";
    const auto& fields = citizen ? kCitizenFields : kVaccinationFields;
    const std::string field = fields[rng() % fields.size()];
    const auto kind = citizen ? registry::EntityKind::kCitizen : registry::EntityKind::kVaccination;
    const std::string old = citizen ? store.citizen(key)->to_fields().at(field)
                                    : store.vaccination(key)->to_fields().at(field);
    const std::string fresh = altered_value(field, old);
    store.tamper(kind, key, field, fresh);
    manifest.push_back({target, key, field, old, fresh});
  }
  return manifest;
}

std::string mutate_block_line(const std::string& line, std::mt19937_64& rng, std::size_t* where) {
  // Candidate offsets: bytes inside string values (not keys, not escapes) and number digits.
  std::vector<std::size_t> candidates;
  std::vector<bool> number_lead(line.size(), false);
  for (std::size_t i = 0; i < line.size();) {
    const char c = line[i];
    if (c == '"') {
      std::size_t j = i + 1;
      std::vector<std::size_t> inner;
      while (j < line.size() && line[j] != '"') {
        if (line[j] == '\\') {
          j += 2;
          continue;
        }
        inner.push_back(j++);
      }
      std::size_t after = j + 1;
      while (after < line.size() && line[after] == ' ') ++after;
      if (after >= line.size() || line[after] != ':') candidates.insert(candidates.end(), inner.begin(), inner.end());
      i = j + 1;
    } else if (c >= '0' && c <= '9') {
      const std::size_t start = i;
      while (i < line.size() && line[i] >= '0' && line[i] <= '9') {
        candidates.push_back(i);
        number_lead[i] = i == start && i + 1 < line.size() && line[i + 1] >= '0' && line[i + 1] <= '9';
        ++i;
      }
    } else {
      ++i;
    }
  }
  if (candidates.empty()) throw Error(Errc::kBadRequest, "nothing to mutate");
  const std::size_t pos = candidates[rng() % candidates.size()];
  const char old = line[pos];
  std::string pool;
  if (old >= '0' && old <= '9') {
    pool = number_lead[pos] ? "123456789" : "0123456789";
  } else if (old >= 'a' && old <= 'f') {
    pool = "0123456789abcdef";
  } else if (old >= 'a' && old <= 'z') {
    pool = "abcdefghijklmnopqrstuvwxyz";
  } else if (old >= 'A' && old <= 'Z') {
    pool = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
  } else {
    pool = "xyz";
  }
  pool.erase(std::remove(pool.begin(), pool.end(), old), pool.end());
  std::string out = line;
  out[pos] = pool[rng() % pool.size()];
  if (where) *where = pos;
  return out;
}

LedgerTamperResult inject_ledger_tamper(const ledger::Chain& chain, std::size_t k, std::uint64_t seed) {
  const std::size_t mined = chain.size() - 1;
  if (k > mined) {
    throw Error(Errc::kBadRequest, "cannot tamper " + std::to_string(k) + " of " + std::to_string(mined) +
                                       " mined blocks");
  }
  std::vector<std::size_t> heights(mined);
  std::iota(heights.begin(), heights.end(), 1);
  std::mt19937_64 rng(seed);
  std::shuffle(heights.begin(), heights.end(), rng);

  std::vector<ledger::Block> blocks = chain.blocks();
  std::vector<TamperEntry> manifest;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t h = heights[i];
    const std::string line = ledger::block_to_json_line(blocks[h]);
    // A mutation that no longer parses (e.g. an unknown txType) is redrawn; the export must stay importable.
    for (;;) {
      std::size_t where = 0;
      const std::string mutated = mutate_block_line(line, rng, &where);
      try {
        blocks[h] = ledger::block_from_json_line(mutated);
      } catch (const Error&) {
        continue;
      }
      manifest.push_back({"block", std::to_string(h), "byte " + std::to_string(where),
                          std::string(1, line[where]), std::string(1, mutated[where])});
      break;
    }
  }
  return {ledger::Chain::from_blocks(std::move(blocks)), std::move(manifest)};
}

// ── Drivers ─────────────────────────────────────────────────────────────────

namespace {

struct CenterCreds {
  std::string center_id;
  std::string static_key;
};

struct CitizenCreds {
  std::string pseudo_uuid;
  int secret_code = 0;
  std::string static_key;
  std::string pin;
};

/// One protocol step per call, either in-process or over HTTP.
class Driver {
 public:
  virtual ~Driver() = default;
  virtual CenterCreds register_center(const std::string& name, const std::string& address,
                                      const std::string& pin) = 0;
  virtual void supply(const std::string& center_id, long long doses) = 0;
  virtual std::string start_registration(const std::string& uuid, const std::string& phone) = 0;
  virtual std::string latest_otp(const std::string& phone) = 0;
  virtual std::string verify_otp(const std::string& session, const std::string& otp) = 0;
  virtual CitizenCreds complete(const std::string& token, const std::string& pin,
                                const std::string& gender) = 0;
  virtual std::string open_identity_page(int code, const std::string& pin, const std::string& center) = 0;
  virtual std::string solve_identity(const std::string& suffix, const std::string& key, int code) = 0;
  virtual std::string record_details(const std::string& draft, const std::string& vaccinator,
                                     const std::string& center_key) = 0;
  virtual std::string confirm(const std::string& suffix, const std::string& key, int code) = 0;
  virtual std::vector<ledger::Block> blocks() = 0;
  virtual audit::AuditReport audit() = 0;
  virtual void tick(std::int64_t) {}
};

std::string otp_from_message(const std::string& message) { return message.substr(message.size() - 6); }

class InProcessDriver final : public Driver {
 public:
  InProcessDriver(protocol::Engine& engine, ManualClock& clock) : engine_(engine), clock_(clock) {}

  CenterCreds register_center(const std::string& name, const std::string& address,
                              const std::string& pin) override {
    const auto c = engine_.register_center(name, address, pin);
    return {c.center_id, c.static_key};
  }
  void supply(const std::string& center_id, long long doses) override { engine_.supply_stock(center_id, doses); }
  std::string start_registration(const std::string& uuid, const std::string& phone) override {
    return engine_.start_citizen_registration(uuid, phone).session_id;
  }
  std::string latest_otp(const std::string& phone) override {
    const auto box = engine_.outbox();
    for (auto it = box.rbegin(); it != box.rend(); ++it) {
      if (it->phone == phone) return otp_from_message(it->message);
    }
    throw Error(Errc::kNotFound, "no OTP delivered");
  }
  std::string verify_otp(const std::string& session, const std::string& otp) override {
    return engine_.verify_otp(session, otp).token;
  }
  CitizenCreds complete(const std::string& token, const std::string& pin, const std::string& gender) override {
    const auto p = engine_.complete_citizen_registration(token, pin, gender);
    return {p.pseudo_uuid, p.secret_code, p.static_key, p.pin_code};
  }
  std::string open_identity_page(int code, const std::string& pin, const std::string& center) override {
    return engine_.create_verification_page(code, pin, center, protocol::PagePurpose::kIdentity);
  }
  std::string solve_identity(const std::string& suffix, const std::string& key, int code) override {
    const auto outcome = engine_.solve_verification_page(suffix, key, code);
    return std::get<protocol::IdentityVerified>(outcome).draft.draft_id;
  }
  std::string record_details(const std::string& draft, const std::string& vaccinator,
                             const std::string& center_key) override {
    return engine_.record_vaccination_details(draft, kVaccine, vaccinator, kHealthNote, center_key);
  }
  std::string confirm(const std::string& suffix, const std::string& key, int code) override {
    return engine_.confirm_vaccination(suffix, key, code).vaccination_id;
  }
  std::vector<ledger::Block> blocks() override {
    engine_.ledger().flush();
    return engine_.ledger().chain().blocks();
  }
  audit::AuditReport audit() override {
    engine_.ledger().flush();
    const audit::Auditor auditor(engine_.store(), engine_.ledger().chain(), engine_.ledger().accounts(),
                                 engine_.config().max_doses);
    return auditor.full_audit(clock_);
  }
  void tick(std::int64_t seconds) override { clock_.advance(seconds); }

 private:
  protocol::Engine& engine_;
  ManualClock& clock_;
};

class HttpDriver final : public Driver {
 public:
  explicit HttpDriver(const std::string& url) : client_(url) {
    client_.set_keep_alive(true);
    client_.set_read_timeout(60, 0);
  }

  std::vector<std::string> responses;

  CenterCreds register_center(const std::string& name, const std::string& address,
                              const std::string& pin) override {
    const auto j = post("/centers/register", {{"name", name}, {"address", address}, {"pin", pin}});
    return {j.at("centerID"), j.at("staticKey")};
  }
  void supply(const std::string& center_id, long long doses) override {
    post("/admin/centers/" + center_id + "/stock", {{"doses", doses}});
  }
  std::string start_registration(const std::string& uuid, const std::string& phone) override {
    return post("/citizens/register/start", {{"uuid", uuid}, {"phone", phone}}).at("sessionID");
  }
  std::string latest_otp(const std::string& phone) override {
    // The outbox carries phone numbers; it is test plumbing and not recorded.
    const auto j = get("/test/outbox?phone=" + httplib::detail::encode_query_param(phone), false);
    const auto& messages = j.at("messages");
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
      if ((*it).at("phone") == phone) return otp_from_message((*it).at("message").get<std::string>());
    }
    throw Error(Errc::kNotFound, "no OTP delivered");
  }
  std::string verify_otp(const std::string& session, const std::string& otp) override {
    return post("/citizens/register/verify", {{"sessionID", session}, {"otp", otp}}).at("token");
  }
  CitizenCreds complete(const std::string& token, const std::string& pin, const std::string& gender) override {
    const auto j = post("/citizens/register/complete", {{"token", token}, {"pin", pin}, {"gender", gender}});
    return {j.at("pseudoUUID"), j.at("secretCode"), j.at("staticKey"), j.at("pinCode")};
  }
  std::string open_identity_page(int code, const std::string& pin, const std::string& center) override {
    return post("/verify/pages", {{"secretCode", code}, {"pin", pin}, {"centerID", center}, {"purpose", "identity"}})
        .at("suffix");
  }
  std::string solve_identity(const std::string& suffix, const std::string& key, int code) override {
    return post("/verify/pages/" + suffix + "/solve", {{"staticKey", key}, {"secretCode", code}})
        .at("draft")
        .at("draftID");
  }
  std::string record_details(const std::string& draft, const std::string& vaccinator,
                             const std::string& center_key) override {
    return post("/vaccinations/drafts/" + draft + "/details",
                {{"vaccineName", kVaccine}, {"vaccinator", vaccinator}, {"healthConditions", kHealthNote},
                 {"centerStaticKey", center_key}})
        .at("confirmationSuffix");
  }
  std::string confirm(const std::string& suffix, const std::string& key, int code) override {
    return post("/verify/pages/" + suffix + "/solve", {{"staticKey", key}, {"secretCode", code}})
        .at("vaccination")
        .at("vaccinationID");
  }
  std::vector<ledger::Block> blocks() override {
    const auto j = get("/ledger/blocks", true);
    std::vector<ledger::Block> out;
    for (const auto& b : j.at("blocks")) out.push_back(ledger::block_from_json_line(b.dump()));
    return out;
  }
  audit::AuditReport audit() override {
    return audit::report_from_json(post("/audit/run", json::object()).dump());
  }

 private:
  json check(const httplib::Result& res, const std::string& path, bool record) {
    if (!res) throw Error(Errc::kBadRequest, "HTTP request to " + path + " failed: " + httplib::to_string(res.error()));
    if (record) responses.push_back(res->body);
    const json body = json::parse(res->body, nullptr, false);
    if (res->status >= 300) {
      throw Error(Errc::kBadRequest, path + " returned " + std::to_string(res->status) + " " + res->body);
    }
    if (body.is_discarded()) throw Error(Errc::kBadRequest, path + " returned non-JSON");
    return body;
  }
  json post(const std::string& path, const json& body) {
    return check(client_.Post(path, body.dump(), "application/json"), path, true);
  }
  json get(const std::string& path, bool record) { return check(client_.Get(path), path, record); }

  httplib::Client client_;
};

double mean(const std::vector<std::uint64_t>& v) {
  if (v.empty()) return 0.0;
  return double(std::accumulate(v.begin(), v.end(), std::uint64_t{0})) / double(v.size());
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& config) {
  if (config.citizens < 1 || config.centers < 1 || config.agencies < 1) {
    throw Error(Errc::kBadRequest, "citizens, centers and agencies must be at least 1");
  }
  if (config.doses_per_citizen < 0 || config.doses_per_citizen > config.max_doses) {
    throw Error(Errc::kBadRequest, "doses per citizen must lie in [0, maxDoses]");
  }
  if (config.http_url && config.tamper.kind != TamperKind::kNone) {
    throw Error(Errc::kBadRequest, "tampering needs direct store access; not available with --http");
  }
  const auto wall_start = chr::steady_clock::now();

  ScenarioResult result;
  const auto regions = generate_regions(config.agencies);
  // Only vaccination-eligible ages, so every citizen can receive every planned dose.
  result.population = generate_population(config.citizens, regions, config.seed,
                                          civil_date_of(kScenarioEpoch), 18, 90);

  ManualClock clock(kScenarioEpoch);
  Rng rng(config.seed);
  std::unique_ptr<protocol::Engine> engine;
  std::unique_ptr<Driver> driver;
  HttpDriver* http = nullptr;
  if (config.http_url) {
    auto d = std::make_unique<HttpDriver>(*config.http_url);
    http = d.get();
    driver = std::move(d);
  } else {
    protocol::EngineConfig ec;
    ec.max_doses = config.max_doses;
    ec.difficulty = config.difficulty;
    ec.batch_size = config.batch_size;
    engine = std::make_unique<protocol::Engine>(
        registry::GovtDirectory::from_entries(result.population, regions), ec, clock, rng);
    engine->bootstrap_agencies();
    driver = std::make_unique<InProcessDriver>(*engine, clock);
  }

  // Centers round-robin over agencies; each citizen is assigned one center for all doses.
  std::mt19937_64 plan_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<CenterCreds> centers;
  for (std::size_t j = 0; j < config.centers; ++j) {
    const std::size_t agency = j % config.agencies;
    const auto& region = regions[(agency * 4 + (j / config.agencies) % 4) % regions.size()];
    centers.push_back(driver->register_center("Center " + std::to_string(j + 1),
                                              std::to_string(j + 1) + " Health Road, " + region.district,
                                              region.pin_code));
  }
  std::vector<std::size_t> assignment(config.citizens);
  std::vector<long long> planned(config.centers, 0);
  for (auto& a : assignment) {
    a = plan_rng() % config.centers;
    planned[a] += config.doses_per_citizen;
  }
  for (std::size_t j = 0; j < config.centers; ++j) driver->supply(centers[j].center_id, planned[j] + 5);

  std::vector<CitizenCreds> citizens;
  citizens.reserve(config.citizens);
  for (const auto& person : result.population) {
    driver->tick(7);
    const auto session = driver->start_registration(person.uuid, person.phone);
    driver->tick(20);
    const auto token = driver->verify_otp(session, driver->latest_otp(person.phone));
    driver->tick(15);
    citizens.push_back(driver->complete(token, person.pin_code, person.gender));
  }

  for (int dose = 1; dose <= config.doses_per_citizen; ++dose) {
    driver->tick(28 * 24 * 3600);
    for (std::size_t i = 0; i < citizens.size(); ++i) {
      const auto& c = citizens[i];
      const auto& center = centers[assignment[i]];
      driver->tick(30);
      const auto page = driver->open_identity_page(c.secret_code, c.pin, center.center_id);
      driver->tick(40);
      const auto draft = driver->solve_identity(page, c.static_key, c.secret_code);
      driver->tick(600);
      const auto confirm_page = driver->record_details(draft, kVaccinators[i % kVaccinators.size()],
                                                       center.static_key);
      driver->tick(45);
      driver->confirm(confirm_page, c.static_key, c.secret_code);
    }
  }

  driver->tick(60);
  // Auditing flushes the pending pool, so the untampered audit runs before the chain is read.
  if (config.tamper.kind == TamperKind::kNone) result.audit = driver->audit();
  const auto blocks = driver->blocks();
  for (const auto& b : blocks) {
    for (const auto& tx : b.transactions) {
      (tx.tx_type == ledger::TxType::kRegistration ? result.registration_txs : result.vaccination_txs)++;
    }
  }
  result.blocks = blocks.size();
  std::vector<std::uint64_t> nonces;
  for (std::size_t h = 1; h < blocks.size(); ++h) nonces.push_back(blocks[h].header.nonce);

  json stock = json::array();
  if (engine) {
    const auto chain = engine->ledger().chain();
    for (const auto& c : engine->store().centers()) {
      long long on_chain = 0;
      for (const auto& b : chain.blocks()) {
        for (const auto& tx : b.transactions) on_chain += tx.signer_address == c.ledger_address();
      }
      stock.push_back({{"centerID", c.center_id},
                       {"dosesSupplied", c.doses_supplied},
                       {"dosesRemaining", c.doses_remaining},
                       {"onChainVaccinations", on_chain}});
    }
  }

  // Tamper, then audit.
  json manifest = json::array();
  switch (config.tamper.kind) {
    case TamperKind::kNone:
      break;
    case TamperKind::kDatabase:
      result.manifest = inject_db_tamper(engine->store(), config.tamper.count, config.seed);
      result.audit = driver->audit();
      break;
    case TamperKind::kLedger: {
      auto tampered = inject_ledger_tamper(engine->ledger().chain(), config.tamper.count, config.seed);
      result.manifest = std::move(tampered.manifest);
      const audit::Auditor auditor(engine->store(), std::move(tampered.chain), engine->ledger().accounts(),
                                   engine->config().max_doses);
      result.audit = auditor.full_audit(clock);
      break;
    }
  }
  for (const auto& m : result.manifest) {
    manifest.push_back({{"target", m.target}, {"subject", m.subject}, {"field", m.field},
                        {"oldValue", m.old_value}, {"newValue", m.new_value}});
  }

  if (config.artifacts_dir && engine) {
    std::filesystem::create_directories(*config.artifacts_dir);
    engine->store().snapshot(*config.artifacts_dir / "snapshot");
    ledger::export_chain(engine->ledger().chain(), (*config.artifacts_dir / "chain.jsonl").string());
  }
  if (http) result.api_responses = std::move(http->responses);

  const auto wall_ms = chr::duration_cast<chr::milliseconds>(chr::steady_clock::now() - wall_start).count();
  json report{
      {"config",
       {{"citizens", config.citizens},
        {"centers", config.centers},
        {"agencies", config.agencies},
        {"doses", config.doses_per_citizen},
        {"seed", config.seed},
        {"tamper", to_string(config.tamper)},
        {"difficulty", config.difficulty},
        {"batchSize", config.batch_size},
        {"mode", config.http_url ? "http" : "in-process"}}},
      {"counts",
       {{"registrationTransactions", result.registration_txs},
        {"vaccinationTransactions", result.vaccination_txs},
        {"blocks", result.blocks}}},
      {"mining",
       {{"blocksMined", nonces.size()},
        {"meanNonce", mean(nonces)},
        {"maxNonce", nonces.empty() ? 0 : *std::max_element(nonces.begin(), nonces.end())}}},
      {"stock", stock},
      {"tamperManifest", manifest},
      {"audit", json::parse(audit::report_to_json(result.audit))},
      {"wallTimeMs", wall_ms}};
  result.report_json = report.dump(2);
  return result;
}

std::string strip_wall_time(const std::string& report_json) {
  json j = json::parse(report_json);
  j.erase("wallTimeMs");
  return j.dump(2);
}

std::vector<std::string> privacy_leaks(const std::string& text,
                                       const std::vector<IdentityDirectoryEntry>& population) {
  std::unordered_set<std::string> uuids, phones, dobs, names;
  for (const auto& e : population) {
    uuids.insert(e.uuid);
    phones.insert(e.phone);
    dobs.insert(format_date(e.date_of_birth));
    names.insert(e.name);
  }
  std::set<std::string> found;
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  auto is_alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); };
  const std::size_t n = text.size();
  for (std::size_t i = 0; i < n; ++i) {
    // Digit runs: every 12-character window against uuids.
    if (is_digit(text[i]) && (i == 0 || !is_digit(text[i - 1]))) {
      std::size_t j = i;
      while (j < n && is_digit(text[j])) ++j;
      for (std::size_t w = i; w + 12 <= j; ++w) {
        if (auto s = text.substr(w, 12); uuids.count(s)) found.insert(s);
      }
    }
    if (text[i] == '+' && i + 13 <= n) {
      if (auto s = text.substr(i, 13); phones.count(s)) found.insert(s);
    }
    if (i + 10 <= n && is_digit(text[i]) && text[i + 4] == '-' && text[i + 7] == '-') {
      if (auto s = text.substr(i, 10); dobs.count(s)) found.insert(s);
    }
    if (text[i] >= 'A' && text[i] <= 'Z' && (i == 0 || !is_alpha(text[i - 1]))) {
      std::size_t j = i;
      while (j < n && is_alpha(text[j])) ++j;
      if (j < n && text[j] == ' ') {
        std::size_t k = j + 1;
        while (k < n && is_alpha(text[k])) ++k;
        if (auto s = text.substr(i, k - i); names.count(s)) found.insert(s);
      }
    }
  }
  return {found.begin(), found.end()};
}

}  // namespace vaxledger::sim
