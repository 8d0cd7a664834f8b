#include "vaxledger/clock.hpp"

#include <chrono>
#include <cstdio>

#include "vaxledger/error.hpp"

namespace vaxledger {

namespace chr = std::chrono;

UnixSeconds SystemClock::now() const {
  return chr::duration_cast<chr::seconds>(chr::system_clock::now().time_since_epoch()).count();
}

CivilDate civil_date_of(UnixSeconds t) {
  const chr::year_month_day ymd{chr::floor<chr::days>(chr::sys_seconds{chr::seconds{t}})};
  return {int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day())};
}

UnixSeconds to_unix(const CivilDate& d) {
  const chr::sys_days days{chr::year{d.year} / chr::month{d.month} / chr::day{d.day}};
  return chr::duration_cast<chr::seconds>(days.time_since_epoch()).count();
}

std::string format_date(const CivilDate& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", d.year, d.month, d.day);
  return buf;
}

std::string format_rfc3339(UnixSeconds t) {
  const auto day_start = to_unix(civil_date_of(t));
  const auto secs = t - day_start;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%sT%02lld:%02lld:%02lldZ", format_date(civil_date_of(t)).c_str(),
                static_cast<long long>(secs / 3600), static_cast<long long>(secs / 60 % 60),
                static_cast<long long>(secs % 60));
  return buf;
}

namespace {

bool all_digits(const std::string& s, std::size_t from, std::size_t n) {
  for (std::size_t i = from; i < from + n; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  return true;
}

int field(const std::string& s, std::size_t from, std::size_t n) {
  return std::stoi(s.substr(from, n));
}

}  // namespace

CivilDate parse_date(const std::string& text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !all_digits(text, 0, 4) ||
      !all_digits(text, 5, 2) || !all_digits(text, 8, 2)) {
    throw Error(Errc::kBadRequest, "malformed date '" + text + "'");
  }
  CivilDate d{field(text, 0, 4), unsigned(field(text, 5, 2)), unsigned(field(text, 8, 2))};
  if (!(chr::year{d.year} / chr::month{d.month} / chr::day{d.day}).ok()) {
    throw Error(Errc::kBadRequest, "invalid date '" + text + "'");
  }
  return d;
}

UnixSeconds parse_rfc3339(const std::string& text) {
  if (text.size() != 20 || text[10] != 'T' || text[13] != ':' || text[16] != ':' ||
      text[19] != 'Z' || !all_digits(text, 11, 2) || !all_digits(text, 14, 2) ||
      !all_digits(text, 17, 2)) {
    throw Error(Errc::kBadRequest, "malformed timestamp '" + text + "'");
  }
  const int h = field(text, 11, 2), m = field(text, 14, 2), s = field(text, 17, 2);
  if (h > 23 || m > 59 || s > 59) throw Error(Errc::kBadRequest, "malformed timestamp '" + text + "'");
  return to_unix(parse_date(text.substr(0, 10))) + h * 3600 + m * 60 + s;
}

int whole_years_between(const CivilDate& birth, const CivilDate& today) {
  int years = today.year - birth.year;
  if (std::pair(today.month, today.day) < std::pair(birth.month, birth.day)) --years;
  return years;
}

}  // namespace vaxledger
