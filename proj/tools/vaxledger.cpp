#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

#include "vaxledger/error.hpp"
#include "vaxledger/scenario.hpp"
#include "vaxledger/service.hpp"

using namespace vaxledger;

namespace {

int simulate(const sim::ScenarioConfig& config, const std::string& tamper, const std::string& report_path) {
  sim::ScenarioConfig c = config;
  c.tamper = sim::parse_tamper(tamper);
  const auto result = sim::run_scenario(c);
  if (report_path.empty() || report_path == "-") {
    std::cout << result.report_json << '\n';
  } else {
    std::ofstream out(report_path, std::ios::trunc);
    out << result.report_json << '\n';
    if (!out) throw std::runtime_error("cannot write report to " + report_path);
    std::cerr << "report: " << report_path << '\n';
  }
  std::cerr << "registrations " << result.registration_txs << ", vaccinations " << result.vaccination_txs
            << ", blocks " << result.blocks << ", findings " << result.audit.findings.size()
            << ", chainOk " << (result.audit.chain_ok ? "true" : "false") << '\n';
  return result.audit.clean() ? 0 : 2;
}

int serve(service::ServiceConfig config) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  service::Service svc(std::move(config));
  const int port = svc.start();
  std::cerr << "listening on port " << port << '\n';
  int received = 0;
  sigwait(&signals, &received);
  std::cerr << "shutting down\n";
  svc.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudonymous vaccination registry with a proof-of-work audit ledger"};
  app.require_subcommand(1);

  sim::ScenarioConfig sc;
  std::string tamper = "none";
  std::string report;
  std::string http;
  std::string artifacts;
  auto* sim_cmd = app.add_subcommand("simulate", "Run an end-to-end scenario and audit it");
  sim_cmd->add_option("--citizens", sc.citizens, "Citizens to register")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--centers", sc.centers, "Vaccination centers")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--agencies", sc.agencies, "Government agencies")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--doses", sc.doses_per_citizen, "Doses per citizen")->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--seed", sc.seed, "Scenario seed");
  sim_cmd->add_option("--tamper", tamper, "none | db:k | ledger:k");
  sim_cmd->add_option("--report", report, "Report path (stdout when omitted)");
  sim_cmd->add_option("--difficulty", sc.difficulty, "Proof-of-work difficulty bits")->check(CLI::Range(0, 24));
  sim_cmd->add_option("--batch", sc.batch_size, "Transactions per block")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--max-doses", sc.max_doses, "Dose cap")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--http", http, "Drive a live service at this URL");
  sim_cmd->add_option("--artifacts", artifacts, "Write store snapshot and chain export here");

  std::size_t pop_n = 100;
  std::size_t pop_agencies = 2;
  std::uint64_t pop_seed = 1;
  int min_age = 12;
  int max_age = 90;
  std::string pop_out = "fixtures";
  std::string reference = "2026-01-01";
  auto* gen_cmd = app.add_subcommand("gen-population", "Write directory and region fixtures");
  gen_cmd->add_option("-n,--citizens", pop_n, "Directory entries")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--agencies", pop_agencies, "Agencies (4 PIN regions each)")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", pop_seed, "Generator seed");
  gen_cmd->add_option("--min-age", min_age, "Youngest age");
  gen_cmd->add_option("--max-age", max_age, "Oldest age");
  gen_cmd->add_option("--reference-date", reference, "Date the ages refer to (YYYY-MM-DD)");
  gen_cmd->add_option("--out", pop_out, "Output directory");

  service::ServiceConfig svc;
  std::string mode = "unique";
  std::uint64_t det_seed = 0;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the JSON HTTP API");
  serve_cmd->add_option("--host", svc.host, "Listen address");
  serve_cmd->add_option("--port", svc.port, "Listen port (0 picks one)");
  serve_cmd->add_option("--directory", svc.directory_file, "Identity directory fixture")->required();
  serve_cmd->add_option("--regions", svc.region_file, "PIN region fixture")->required();
  serve_cmd->add_option("--difficulty", svc.engine.difficulty, "Proof-of-work difficulty bits");
  serve_cmd->add_option("--batch", svc.engine.batch_size, "Transactions per block");
  serve_cmd->add_option("--max-doses", svc.engine.max_doses, "Dose cap");
  serve_cmd->add_option("--min-age", svc.engine.min_age, "Minimum vaccination age");
  serve_cmd->add_option("--secret-code-mode", mode, "faithful | unique")
      ->check(CLI::IsMember({"faithful", "unique"}));
  serve_cmd->add_option("--page-ttl", svc.engine.page_ttl_seconds, "Verification page TTL (s)");
  serve_cmd->add_option("--otp-ttl", svc.engine.otp_ttl_seconds, "OTP TTL (s)");
  auto* det = serve_cmd->add_option("--deterministic-seed", det_seed, "Seeded RNG; exposes /test/outbox");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim_cmd) {
      if (!http.empty()) sc.http_url = http;
      if (!artifacts.empty()) sc.artifacts_dir = artifacts;
      return simulate(sc, tamper, report);
    }
    if (*gen_cmd) {
      const auto regions = sim::generate_regions(pop_agencies);
      const auto people = sim::generate_population(pop_n, regions, pop_seed, parse_date(reference), min_age, max_age);
      sim::write_fixtures(pop_out, people, regions);
      std::cerr << "wrote " << people.size() << " entries and " << regions.size() << " regions to " << pop_out << '\n';
      return 0;
    }
    if (*serve_cmd) {
      svc.engine.secret_code_mode =
          mode == "faithful" ? crypto::SecretCodeMode::kFaithful : crypto::SecretCodeMode::kUnique;
      if (*det) svc.deterministic_seed = det_seed;
      return serve(std::move(svc));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
