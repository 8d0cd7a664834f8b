#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "vaxledger/clock.hpp"
#include "vaxledger/error.hpp"
#include "vaxledger/protocol.hpp"
#include "vaxledger/random.hpp"

namespace httplib {
class Server;
}

namespace vaxledger::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds any free port
  protocol::EngineConfig engine;
  std::filesystem::path directory_file;
  std::filesystem::path region_file;
  std::optional<std::uint64_t> deterministic_seed;
};

/// Throws Error(kBadRequest) when a setting is out of range.
void validate(const ServiceConfig& config);

/// HTTP status for an engine error.
int status_for(Errc code);

/// JSON-over-HTTP facade over the engine, ledger and auditor.
class Service {
 public:
  /// Loads fixtures from config paths; throws Error(kFixtureError).
  explicit Service(ServiceConfig config, const Clock* clock = nullptr);
  Service(registry::GovtDirectory directory, ServiceConfig config, const Clock* clock = nullptr);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves on a background thread. Returns the bound port.
  /// Throws std::runtime_error (bind-failure).
  int start();
  /// Blocks serving on the calling thread until stop().
  void run();
  /// Stops listening and mines any pending ledger transactions.
  void stop();

  protocol::Engine& engine() { return *engine_; }
  int port() const { return port_; }

 private:
  void install_routes();

  ServiceConfig config_;
  SystemClock system_clock_;
  const Clock& clock_;
  Rng rng_;
  std::unique_ptr<protocol::Engine> engine_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  bool stopped_ = false;
};

}  // namespace vaxledger::service
