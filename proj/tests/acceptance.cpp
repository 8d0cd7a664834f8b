// One line per acceptance criterion; exit status is nonzero if any criterion fails.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "support.hpp"
#include "vaxledger/service.hpp"

using namespace vaxledger;
using nlohmann::json;
using Clk = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clk::time_point t0) {
  return std::chrono::duration<double>(Clk::now() - t0).count();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <std::size_t N>
std::span<const std::uint8_t, N> fixed(const crypto::Bytes& b) {
  return std::span<const std::uint8_t, N>(b.data(), N);
}

Outcome crypto_conformance() {
  const auto t0 = Clk::now();
  using namespace crypto;
  int bad = 0;
  bad += sha256_hex(std::string_view("")) != "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855";
  bad += sha256_hex(std::string_view("abc")) != "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad";
  // FIPS-197 C.3 and SP 800-38A F.1.5 (ECB-AES256 block 1).
  const auto k1 = from_hex("000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f");
  const auto p1 = from_hex("00112233445566778899aabbccddeeff");
  bad += to_hex(aes256_encrypt_block(fixed<32>(k1), fixed<16>(p1))) != "8ea2b7ca516745bfeafc49904b496089";
  const auto k2 = from_hex("603deb1015ca71be2b73aef0857d77811f352c073b6108d72d9810a30914dff4");
  const auto p2 = from_hex("6bc1bee22e409f96e93d7e117393172a");
  const auto c2 = aes256_encrypt_block(fixed<32>(k2), fixed<16>(p2));
  bad += to_hex(c2) != "f3eed1bdb5d2a03c064b5a7e3db181f8";
  bad += to_hex(aes256_decrypt_block(fixed<32>(k2), c2)) != "6bc1bee22e409f96e93d7e117393172a";
  const auto seed = from_hex("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60");
  const auto keys = keypair_from_seed(fixed<32>(seed));
  bad += to_hex(keys.public_key) != "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a";
  const auto sig = sign({}, keys);
  bad += to_hex(sig) !=
         "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065224901555fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b";
  bad += !verify(sig, {}, keys.public_key);
  const double s = seconds_since(t0);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%d mismatches, %.3f s", bad, s);
  return {bad == 0 && s < 1.0, buf};
}

Outcome derivation_fidelity() {
  const auto t0 = Clk::now();
  const auto regions = sim::generate_regions(3);
  std::mt19937_64 rng(2024);
  int n1280 = 0, n1275 = 0, off = 0;
  const int n = 10'000;
  for (int i = 0; i < n; ++i) {
    const auto pseudo = crypto::generate_pseudo_uuid(std::to_string(100000000000ULL + rng() % 900000000000ULL), rng());
    const int code = crypto::generate_secret_code(pseudo, regions[rng() % regions.size()].pin_code,
                                                  crypto::SecretCodeMode::kFaithful);
    off += code % 5 != 0 || code < 0 || code > 1280;
    n1280 += code == 1280;
    n1275 += code == 1275;
  }
  const double f1280 = double(n1280) / n, f1275 = double(n1275) / n, s = seconds_since(t0);
  char buf[128];
  std::snprintf(buf, sizeof buf, "f(1280)=%.4f f(1275)=%.4f, %d out of shape, %.2f s", f1280, f1275, off, s);
  return {off == 0 && f1280 >= 0.45 && f1280 <= 0.55 && f1275 >= 0.20 && f1275 <= 0.30 && s < 5.0, buf};
}

Outcome identifier_shapes() {
  testing::World w(3);
  const auto p = w.enroll(w.people[0]);
  const auto c = w.open_center();
  const auto v = w.vaccinate(p, c);
  const std::regex center_shape("[A-Z]{2}[0-9]{8}");
  // Fig 6 prints a 63-character pseudo-UUID; the concatenation is reproduced as printed.
  const std::string fig_pseudo = "9454caaeaa4801803314a7cf90f828afea63b2b2a51c8e3ccc104a282bf72db";
  const std::string fig_vid = "9454caaeaa4801803314a7cf90f828afea63b2b2a51c8e3ccc104a282bf72db1GJ34567816";
  const bool fig6 = crypto::generate_vaccination_id(fig_pseudo, 1, "GJ34567816") == fig_vid;
  const bool fig4 = crypto::is_hex_digest("a7f48ac74e55b418d9da681275f3e80d4c2d17f8d049de9006d880c4c4ce9e0b");
  const bool pseudo = crypto::is_hex_digest(p.pseudo_uuid);
  const bool key = crypto::is_hex_digest(p.static_key);
  const bool center = std::regex_match(c.center_id, center_shape) && std::regex_match("GJ34567816", center_shape);
  const bool vid = v.vaccination_id == p.pseudo_uuid + "1" + c.center_id;
  std::string detail = "pseudo=" + std::to_string(pseudo) + " staticKey=" + std::to_string(key) +
                       " centerID=" + std::to_string(center) + " vaccinationID=" + std::to_string(vid) +
                       " fig6=" + std::to_string(fig6) + " fig4Key=" + std::to_string(fig4);
  return {pseudo && key && center && vid && fig6 && fig4, detail};
}

Outcome challenge_protocol() {
  std::mt19937_64 rng(404);
  int wrong_solves = 0;
  for (int i = 0; i < 100; ++i) {
    const auto key = crypto::to_hex(crypto::sha256(std::string_view(std::to_string(rng()))));
    const auto n = crypto::kChallengeMin + rng() % (crypto::kChallengeMax - crypto::kChallengeMin + 1);
    wrong_solves += crypto::decrypt_challenge(crypto::encrypt_challenge(n, key), key) != n;
  }

  testing::World w(2);
  const auto p = w.enroll(w.people[0]);
  const auto c = w.open_center(5);
  int accepted = 0, rejected = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto page = w.engine.create_verification_page(p.secret_code, p.pin_code, c.center_id,
                                                        protocol::PagePurpose::kIdentity);
    auto wrong = crypto::to_hex(crypto::sha256(std::string_view("wrong" + std::to_string(rng()))));
    const auto err = testing::error_of([&] { w.engine.solve_verification_page(page, wrong, p.secret_code); });
    (err == "none" ? accepted : rejected) += 1;
  }

  const auto page = w.engine.create_verification_page(p.secret_code, p.pin_code, c.center_id,
                                                      protocol::PagePurpose::kIdentity);
  w.engine.solve_verification_page(page, p.static_key, p.secret_code);
  const bool reuse = testing::error_of([&] { w.engine.solve_verification_page(page, p.static_key, p.secret_code); }) ==
                     "page-used";
  const auto late = w.engine.create_verification_page(p.secret_code, p.pin_code, c.center_id,
                                                      protocol::PagePurpose::kIdentity);
  w.clock.advance(w.engine.config().page_ttl_seconds);
  const bool expired = testing::error_of([&] { w.engine.solve_verification_page(late, p.static_key, p.secret_code); }) ==
                       "page-expired";
  std::string detail = "correct-key failures " + std::to_string(wrong_solves) + "/100, wrong-key accepted " +
                       std::to_string(accepted) + "/1000, reuse " + (reuse ? "rejected" : "ACCEPTED") +
                       ", post-TTL " + (expired ? "rejected" : "ACCEPTED");
  return {wrong_solves == 0 && accepted == 0 && rejected == 1000 && reuse && expired, detail};
}

Outcome dose_cap() {
  int good = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    testing::World w(4, testing::World::small_config(), 1000 + trial);
    std::vector<registry::CitizenProfile> citizens;
    for (const auto& e : w.people) citizens.push_back(w.enroll(e));
    std::vector<registry::VaccinationCenter> centers{w.open_center(20, 0), w.open_center(20, 4)};
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < citizens.size(); ++i) order.insert(order.end(), 3, i);
    std::mt19937_64 rng(trial);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> attempts(citizens.size(), 0);
    bool ok = true;
    for (auto i : order) {
      const int attempt = ++attempts[i];
      const auto err = testing::error_of([&] { w.vaccinate(citizens[i], centers[rng() % 2]); });
      ok = ok && (attempt <= 2 ? err == "none" : err == "citizen-completely-vaccinated");
    }
    good += ok;
  }
  return {good == 100, std::to_string(good) + "/100 orderings"};
}

crypto::SigningKeypair keypair(std::uint8_t tag) {
  std::array<std::uint8_t, 32> seed{};
  seed.fill(tag);
  return crypto::keypair_from_seed(seed);
}

ledger::LedgerTransaction make_tx(const crypto::SigningKeypair& k, int i) {
  ledger::EntityData e;
  e.sender_address = k.address();
  e.memo_primary_key = "k" + std::to_string(i);
  e.memo_hash = crypto::sha256_hex(e.memo_primary_key);
  return ledger::new_transaction(ledger::TxType::kRegistration, k, e, "tx" + std::to_string(i), "2026-01-01T00:00:00Z");
}

crypto::Digest pair_hash(const crypto::Digest& l, const crypto::Digest& r) {
  crypto::Bytes b(l.begin(), l.end());
  b.insert(b.end(), r.begin(), r.end());
  return crypto::sha256(b);
}

// Independent recursive root: node(level, i) pairs children 2i and 2i+1, reusing 2i when 2i+1 is absent.
crypto::Digest oracle_node(const std::vector<crypto::Digest>& leaves, std::size_t level, std::size_t i) {
  if (level == 0) return leaves[i];
  std::size_t below = leaves.size();
  for (std::size_t l = 1; l < level; ++l) below = (below + 1) / 2;
  return pair_hash(oracle_node(leaves, level - 1, 2 * i), oracle_node(leaves, level - 1, 2 * i + 1 < below ? 2 * i + 1 : 2 * i));
}

Outcome merkle_correctness() {
  const auto k = keypair(3);
  int root_mismatch = 0;
  for (int n = 1; n <= 16; ++n) {
    std::vector<ledger::LedgerTransaction> txs;
    std::vector<crypto::Digest> leaves;
    for (int i = 0; i < n; ++i) {
      txs.push_back(make_tx(k, i));
      leaves.push_back(ledger::leaf_hash(txs.back()));
    }
    std::size_t level = 0;
    for (std::size_t w = leaves.size(); w > 1; w = (w + 1) / 2) ++level;
    root_mismatch += ledger::merkle_root(txs) != crypto::to_hex(oracle_node(leaves, level, 0));
  }
  std::vector<ledger::LedgerTransaction> block;
  for (int i = 0; i < 11; ++i) block.push_back(make_tx(k, 100 + i));
  const auto root = ledger::merkle_root(block);
  int proofs_ok = 0, perturbed_caught = 0;
  for (std::size_t i = 0; i < block.size(); ++i) {
    const auto proof = ledger::merkle_proof(block, i);
    proofs_ok += ledger::verify_merkle_proof(ledger::leaf_hash(block[i]), proof, root);
    auto changed = block[i];
    changed.entity.additional_data = "x";
    auto leaf = ledger::leaf_hash(block[i]);
    leaf[i % 32] ^= 0x01;
    perturbed_caught += !ledger::verify_merkle_proof(ledger::leaf_hash(changed), proof, root) &&
                        !ledger::verify_merkle_proof(leaf, proof, root);
  }
  std::string detail = "oracle mismatches " + std::to_string(root_mismatch) + "/16, proofs " +
                       std::to_string(proofs_ok) + "/11, perturbations caught " + std::to_string(perturbed_caught) + "/11";
  return {root_mismatch == 0 && proofs_ok == 11 && perturbed_caught == 11, detail};
}

Outcome tamper_ripple() {
  const auto agency = keypair(4);
  ledger::AccountBook accounts;
  accounts.add({agency.address(), agency.public_key, ledger::AccountType::kAgency, {}});
  ledger::Chain chain("2026-01-01T00:00:00Z");
  int next = 0;
  while (chain.size() < 10) {
    std::vector<ledger::LedgerTransaction> txs;
    for (int i = 0; i < 3; ++i) txs.push_back(make_tx(agency, next++));
    chain.append(ledger::mine_block(chain, txs, 8, "2026-01-01T00:05:00Z"), accounts);
  }
  std::mt19937_64 rng(777);
  int caught_verify = 0, caught_parse = 0, silent = 0, late = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t h = rng() % chain.size();
    auto blocks = chain.blocks();
    const auto mutated = sim::mutate_block_line(ledger::block_to_json_line(blocks[h]), rng);
    try {
      blocks[h] = ledger::block_from_json_line(mutated);
    } catch (const Error&) {
      ++caught_parse;
      continue;
    }
    const auto report = ledger::Chain::from_blocks(blocks).verify(accounts);
    if (report.ok) {
      ++silent;
    } else if (*report.first_bad_height > h) {
      ++late;
    } else {
      ++caught_verify;
    }
  }
  std::string detail = "10 blocks, 100 mutations: " + std::to_string(caught_verify) + " failed verification, " +
                       std::to_string(caught_parse) + " rejected at import, " + std::to_string(silent) +
                       " silent, " + std::to_string(late) + " reported past the mutated height";
  return {silent == 0 && late == 0 && caught_verify + caught_parse == 100, detail};
}

struct BigRuns {
  sim::ScenarioResult honest, db, chain, honest_again;
  double honest_seconds = 0;
  std::filesystem::path artifacts;
};

sim::ScenarioConfig big_config() {
  sim::ScenarioConfig c;
  c.citizens = 1000;
  c.centers = 10;
  c.agencies = 3;
  c.doses_per_citizen = 2;
  c.seed = 20260101;
  c.difficulty = 8;
  return c;
}

Outcome audit_soundness(BigRuns& runs) {
  auto c = big_config();
  c.artifacts_dir = runs.artifacts;
  auto t0 = Clk::now();
  runs.honest = sim::run_scenario(c);
  runs.honest_seconds = seconds_since(t0);
  c.artifacts_dir.reset();
  c.tamper = sim::parse_tamper("db:10");
  runs.db = sim::run_scenario(c);
  c.tamper = sim::parse_tamper("ledger:1");
  runs.chain = sim::run_scenario(c);

  const bool counts = runs.honest.registration_txs == 1000 && runs.honest.vaccination_txs == 2000;
  const bool honest_clean = runs.honest.audit.clean();
  std::multiset<std::string> manifest, findings;
  for (const auto& m : runs.db.manifest) manifest.insert(m.subject);
  for (const auto& f : runs.db.audit.findings) findings.insert(f.subject_key);
  const bool db_exact = manifest.size() == 10 && findings == manifest && runs.db.audit.chain_ok;
  const bool ledger_bad = !runs.chain.audit.chain_ok;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%zu Registration + %zu Vaccination txs, honest findings %zu, db:10 findings %zu (manifest match %s), "
                "ledger:1 chainOk=%s, honest run %.2f s",
                runs.honest.registration_txs, runs.honest.vaccination_txs, runs.honest.audit.findings.size(),
                runs.db.audit.findings.size(), db_exact ? "yes" : "no", runs.chain.audit.chain_ok ? "true" : "false",
                runs.honest_seconds);
  return {counts && honest_clean && db_exact && ledger_bad && runs.honest_seconds < 30.0, buf};
}

Outcome stock_reconciliation(const BigRuns& runs) {
  int centers = 0, bad = 0;
  for (const auto* r : {&runs.honest, &runs.db, &runs.chain}) {
    const json report = json::parse(r->report_json);
    for (const auto& s : report.at("stock")) {
      ++centers;
      bad += s["dosesSupplied"].get<long long>() !=
             s["dosesRemaining"].get<long long>() + s["onChainVaccinations"].get<long long>();
    }
  }
  return {centers == 30 && bad == 0, std::to_string(centers - bad) + "/" + std::to_string(centers) + " center rows balance"};
}

Outcome privacy_schema(const BigRuns& runs) {
  std::size_t leaks = 0, files = 0;
  std::string first;
  auto scan = [&](const std::string& text) {
    ++files;
    const auto found = sim::privacy_leaks(text, runs.honest.population);
    if (!found.empty() && first.empty()) first = found.front();
    leaks += found.size();
  };
  for (const auto& entry : std::filesystem::recursive_directory_iterator(runs.artifacts)) {
    if (entry.is_regular_file()) scan(slurp(entry.path()));
  }
  scan(runs.honest.report_json);

  // Same population behind a live service; every recorded response body is scanned.
  const auto c = big_config();
  const auto regions = sim::generate_regions(c.agencies);
  service::ServiceConfig sc;
  sc.port = 0;
  sc.engine.difficulty = c.difficulty;
  sc.deterministic_seed = c.seed;
  std::size_t responses = 0;
  {
    service::Service svc(registry::GovtDirectory::from_entries(runs.honest.population, regions), sc);
    auto hc = c;
    hc.http_url = "http://127.0.0.1:" + std::to_string(svc.start());
    const auto r = sim::run_scenario(hc);
    responses = r.api_responses.size();
    for (const auto& body : r.api_responses) scan(body);
    const auto dir = runs.artifacts / "http";
    svc.stop();
    svc.engine().store().snapshot(dir / "snapshot");
    ledger::export_chain(svc.engine().ledger().chain(), (dir / "chain.jsonl").string());
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
      if (entry.is_regular_file()) scan(slurp(entry.path()));
    }
    if (r.registration_txs != 1000 || r.vaccination_txs != 2000) leaks += 1'000'000;
  }
  std::string detail = std::to_string(files) + " documents scanned (" + std::to_string(responses) +
                       " API responses), " + std::to_string(leaks) + " fixture strings found";
  if (!first.empty()) detail += ", e.g. " + first;
  return {leaks == 0 && responses > 0, detail};
}

Outcome determinism(BigRuns& runs) {
  runs.honest_again = sim::run_scenario(big_config());
  const bool same = sim::strip_wall_time(runs.honest.report_json) == sim::strip_wall_time(runs.honest_again.report_json);
  auto c = big_config();
  c.citizens = 200;
  c.tamper = sim::parse_tamper("db:7");
  const bool same_tampered = sim::strip_wall_time(sim::run_scenario(c).report_json) ==
                             sim::strip_wall_time(sim::run_scenario(c).report_json);
  return {same && same_tampered, std::string("honest reports ") + (same ? "identical" : "DIFFER") +
                                     ", db:7 reports " + (same_tampered ? "identical" : "DIFFER")};
}

}  // namespace

int main() {
  BigRuns runs;
  runs.artifacts = std::filesystem::temp_directory_path() / "vaxledger_acceptance";
  std::filesystem::remove_all(runs.artifacts);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"Crypto conformance", crypto_conformance},
      {"Derivation fidelity", derivation_fidelity},
      {"Identifier shapes", identifier_shapes},
      {"Challenge protocol", challenge_protocol},
      {"Dose cap", dose_cap},
      {"Merkle correctness", merkle_correctness},
      {"Tamper ripple", tamper_ripple},
      {"Audit soundness/completeness", [&] { return audit_soundness(runs); }},
      {"Stock reconciliation", [&] { return stock_reconciliation(runs); }},
      {"Privacy schema", [&] { return privacy_schema(runs); }},
      {"Determinism", [&] { return determinism(runs); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %2zu. %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
