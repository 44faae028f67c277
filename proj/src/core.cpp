#include "cura/core.hpp"

#include <array>
#include <charconv>

namespace cura {

Direction parse_direction(std::string_view s) {
  if (s == "up" || s == "UP" || s == "1" || s == "+1") return Direction::Up;
  if (s == "down" || s == "DOWN" || s == "-1") return Direction::Down;
  throw std::invalid_argument("unknown vote direction '" + std::string(s) + "'");
}

namespace {

int read_int(std::string_view s, std::size_t pos, std::size_t len) {
  if (pos + len > s.size()) throw std::invalid_argument("timestamp too short");
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
  if (ec != std::errc{} || ptr != s.data() + pos + len) throw std::invalid_argument("bad timestamp digits");
  return v;
}

void expect(std::string_view s, std::size_t pos, std::string_view allowed) {
  if (pos >= s.size() || allowed.find(s[pos]) == std::string_view::npos)
    throw std::invalid_argument("bad timestamp separator");
}

}  // namespace

Timestamp parse_iso8601(std::string_view s) {
  using namespace std::chrono;
  try {
    const int y = read_int(s, 0, 4);
    expect(s, 4, "-");
    const int mo = read_int(s, 5, 2);
    expect(s, 7, "-");
    const int d = read_int(s, 8, 2);
    int hh = 0, mm = 0, ss = 0;
    if (s.size() > 10) {
      expect(s, 10, "T ");
      hh = read_int(s, 11, 2);
      expect(s, 13, ":");
      mm = read_int(s, 14, 2);
      expect(s, 16, ":");
      ss = read_int(s, 17, 2);
      std::size_t rest = 19;
      if (rest < s.size() && s[rest] == '.') {
        ++rest;
        while (rest < s.size() && s[rest] >= '0' && s[rest] <= '9') ++rest;
      }
      if (rest < s.size() && (s[rest] == 'Z' || s[rest] == 'z')) ++rest;
      else if (s.substr(rest) == "+00:00") rest += 6;
      if (rest != s.size()) throw std::invalid_argument("trailing characters or non-UTC offset");
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60) throw std::invalid_argument("out-of-range field");
    return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss};
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("invalid ISO-8601 timestamp '" + std::string(s) + "': " + e.what());
  }
}

std::string format_iso8601(Timestamp t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf.data();
}

std::string format_human_date(Timestamp t) {
  using namespace std::chrono;
  static constexpr std::array<const char*, 7> kDays{"Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"};
  static constexpr std::array<const char*, 12> kMonths{"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                       "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const weekday wd{day_point};
  return std::string(kDays[wd.c_encoding()]) + " " + kMonths[static_cast<unsigned>(ymd.month()) - 1] + " " +
         std::to_string(static_cast<unsigned>(ymd.day())) + ", " + std::to_string(static_cast<int>(ymd.year()));
}

}  // namespace cura
