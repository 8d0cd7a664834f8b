#pragma once

#include <atomic>
#include <cstdint>
#include <string>

namespace vaxledger {

/// Seconds since the Unix epoch, UTC.
using UnixSeconds = std::int64_t;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual UnixSeconds now() const = 0;
};

class SystemClock final : public Clock {
 public:
  UnixSeconds now() const override;
};

/// Test/simulation clock; only moves when told to.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(UnixSeconds start = 0) : now_(start) {}
  UnixSeconds now() const override { return now_.load(); }
  void set(UnixSeconds t) { now_.store(t); }
  void advance(std::int64_t seconds) { now_.fetch_add(seconds); }

 private:
  std::atomic<UnixSeconds> now_;
};

struct CivilDate {
  int year = 1970;
  unsigned month = 1;
  unsigned day = 1;
  auto operator<=>(const CivilDate&) const = default;
};

/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_rfc3339(UnixSeconds t);
UnixSeconds parse_rfc3339(const std::string& text);

CivilDate civil_date_of(UnixSeconds t);
/// Strict "YYYY-MM-DD"; throws Error(kBadRequest) when malformed or not a real date.
CivilDate parse_date(const std::string& text);
std::string format_date(const CivilDate& d);
UnixSeconds to_unix(const CivilDate& d);

/// Whole years elapsed from `birth` to `today`.
int whole_years_between(const CivilDate& birth, const CivilDate& today);

}  // namespace vaxledger
