#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vaxledger/error.hpp"
#include "vaxledger/protocol.hpp"
#include "vaxledger/scenario.hpp"

namespace vaxledger::testing {

/// Engine on a manual clock over a generated population.
struct World {
  explicit World(std::size_t citizens = 20, protocol::EngineConfig config = small_config(),
                 std::uint64_t seed = 11, int min_age = 18, int max_age = 90)
      : clock(sim::kScenarioEpoch),
        rng(seed),
        regions(sim::generate_regions(2)),
        people(sim::generate_population(citizens, regions, seed, civil_date_of(sim::kScenarioEpoch),
                                        min_age, max_age)),
        engine(registry::GovtDirectory::from_entries(people, regions), config, clock, rng) {
    engine.bootstrap_agencies();
  }

  static protocol::EngineConfig small_config() {
    protocol::EngineConfig c;
    c.difficulty = 4;
    c.batch_size = 4;
    return c;
  }

  std::string otp_for(const std::string& phone) const {
    const auto box = engine.outbox();
    for (auto it = box.rbegin(); it != box.rend(); ++it) {
      if (it->phone == phone) return it->message.substr(it->message.size() - 6);
    }
    throw Error(Errc::kNotFound, "no otp");
  }

  registry::CitizenProfile enroll(const registry::IdentityDirectoryEntry& e) {
    const auto s = engine.start_citizen_registration(e.uuid, e.phone);
    const auto d = engine.verify_otp(s.session_id, otp_for(e.phone));
    return engine.complete_citizen_registration(d.token, e.pin_code, e.gender);
  }

  registry::VaccinationCenter open_center(long long doses = 50, std::size_t region = 0) {
    auto c = engine.register_center("Center " + std::to_string(++centers), "Plot " + std::to_string(centers),
                                     regions[region].pin_code);
    return engine.supply_stock(c.center_id, doses);
  }

  registry::VaccinationRecord vaccinate(const registry::CitizenProfile& p, const registry::VaccinationCenter& c) {
    const auto page = engine.create_verification_page(p.secret_code, p.pin_code, c.center_id,
                                                      protocol::PagePurpose::kIdentity);
    const auto outcome = engine.solve_verification_page(page, p.static_key, p.secret_code);
    const auto& draft = std::get<protocol::IdentityVerified>(outcome).draft;
    const auto confirm = engine.record_vaccination_details(draft.draft_id, "AlphaVaccine", "Dr. John Doe",
                                                           "none", c.static_key);
    return engine.confirm_vaccination(confirm, p.static_key, p.secret_code);
  }

  ManualClock clock;
  Rng rng;
  std::vector<registry::PinRegion> regions;
  std::vector<registry::IdentityDirectoryEntry> people;
  protocol::Engine engine;
  int centers = 0;
};

/// Error name thrown by f, or "none".
template <typename F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return std::string(to_string(e.code()));
  }
  return "none";
}

}  // namespace vaxledger::testing
