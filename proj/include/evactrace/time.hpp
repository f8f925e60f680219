#pragma once

// Time handling: UTC instants with second precision, ISO-8601 parsing and
// formatting, and a minimal time-zone layer (fixed offsets plus the standard
// US daylight-saving rule for the common US zone names).

#include <cstdint>
#include <cstdio>
#include <charconv>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace evactrace {

// Seconds since the Unix epoch, UTC.
using Instant = std::int64_t;

constexpr std::int64_t kSecondsPerDay = 86400;

struct CivilDate {
  int year;
  int month;  // 1..12
  int day;    // 1..31
};

struct CivilDateTime {
  CivilDate date;
  int hour;
  int minute;
  int second;
};

// Days since 1970-01-01 for a proleptic Gregorian date.
// Standard civil-calendar arithmetic (era/day-of-era form).
inline std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return CivilDate{static_cast<int>(y + (m <= 2)), static_cast<int>(m),
                   static_cast<int>(d)};
}

inline Instant instant_from_civil(const CivilDateTime& c) {
  return days_from_civil(c.date.year, c.date.month, c.date.day) *
             kSecondsPerDay +
         c.hour * 3600 + c.minute * 60 + c.second;
}

inline CivilDateTime civil_from_instant(Instant t) {
  std::int64_t days = t / kSecondsPerDay;
  std::int64_t sod = t % kSecondsPerDay;
  if (sod < 0) {
    sod += kSecondsPerDay;
    --days;
  }
  CivilDateTime c;
  c.date = civil_from_days(days);
  c.hour = static_cast<int>(sod / 3600);
  c.minute = static_cast<int>((sod % 3600) / 60);
  c.second = static_cast<int>(sod % 60);
  return c;
}

// 0 = Sunday .. 6 = Saturday, for days since epoch (1970-01-01 was a Thursday).
inline int weekday_from_days(std::int64_t z) {
  return static_cast<int>(z >= -4 ? (z + 4) % 7 : (z + 5) % 7 + 6);
}

// Parses "YYYY-MM-DDTHH:MM:SS" with optional fractional seconds (truncated),
// optional trailing "Z" or "+HH:MM"/"-HH:MM" offset, or a bare "YYYY-MM-DD".
// Timestamps without a zone designator are taken as UTC.
inline std::optional<Instant> parse_iso8601(std::string_view s) {
  auto read_int = [&](size_t pos, size_t len, int& out) -> bool {
    if (pos + len > s.size()) return false;
    auto [p, ec] =
        std::from_chars(s.data() + pos, s.data() + pos + len, out);
    return ec == std::errc{} && p == s.data() + pos + len;
  };
  CivilDateTime c{};
  if (!read_int(0, 4, c.date.year) || s.size() < 10 || s[4] != '-' ||
      s[7] != '-' || !read_int(5, 2, c.date.month) ||
      !read_int(8, 2, c.date.day))
    return std::nullopt;
  if (c.date.month < 1 || c.date.month > 12 || c.date.day < 1 ||
      c.date.day > 31)
    return std::nullopt;
  size_t pos = 10;
  if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
    ++pos;
    if (!read_int(pos, 2, c.hour) || pos + 5 > s.size() || s[pos + 2] != ':' ||
        !read_int(pos + 3, 2, c.minute))
      return std::nullopt;
    pos += 5;
    if (pos < s.size() && s[pos] == ':') {
      if (!read_int(pos + 1, 2, c.second)) return std::nullopt;
      pos += 3;
    }
    if (pos < s.size() && s[pos] == '.') {
      ++pos;
      while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    }
    if (c.hour > 23 || c.minute > 59 || c.second > 60) return std::nullopt;
  }
  std::int64_t offset = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z') {
      ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
      int sign = s[pos] == '+' ? 1 : -1;
      int oh = 0, om = 0;
      if (!read_int(pos + 1, 2, oh)) return std::nullopt;
      pos += 3;
      if (pos < s.size() && s[pos] == ':') ++pos;
      if (pos + 2 <= s.size()) {
        if (!read_int(pos, 2, om)) return std::nullopt;
        pos += 2;
      }
      offset = sign * (oh * 3600 + om * 60);
    }
  }
  if (pos != s.size()) return std::nullopt;
  return instant_from_civil(c) - offset;
}

inline std::string format_iso8601(Instant t) {
  CivilDateTime c = civil_from_instant(t);
  char buf[24];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ",
                c.date.year, c.date.month, c.date.day, c.hour, c.minute,
                c.second);
  return buf;
}

// Parses either an ISO-8601 timestamp or integer epoch seconds.
inline std::optional<Instant> parse_instant(std::string_view s) {
  if (!s.empty() && (s[0] == '-' || (s[0] >= '0' && s[0] <= '9'))) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc{} && p == s.data() + s.size()) return v;
  }
  return parse_iso8601(s);
}

// Second Sunday of March through first Sunday of November, 02:00 local
// standard time. Applies to all current US zones that observe DST.
inline bool us_dst_active(Instant t, std::int64_t std_offset) {
  CivilDateTime local = civil_from_instant(t + std_offset);
  int y = local.date.year;
  auto nth_sunday = [&](int month, int n) -> std::int64_t {
    std::int64_t first = days_from_civil(y, month, 1);
    int wd = weekday_from_days(first);  // 0 = Sunday
    std::int64_t first_sunday = first + (wd == 0 ? 0 : 7 - wd);
    return first_sunday + 7 * (n - 1);
  };
  Instant dst_start =
      nth_sunday(3, 2) * kSecondsPerDay + 2 * 3600 - std_offset;
  // the end is announced as 02:00 local daylight time, i.e. 01:00 standard
  Instant dst_end =
      nth_sunday(11, 1) * kSecondsPerDay + 1 * 3600 - std_offset;
  return t >= dst_start && t < dst_end;
}

// Minimal zone support: "UTC", fixed offsets ("UTC-08:00", "-08:00",
// "+0530"), and named US zones with the standard US DST rule.
class TimeZone {
 public:
  TimeZone() = default;

  static TimeZone utc() { return TimeZone(); }

  static TimeZone parse(std::string_view name) {
    TimeZone tz;
    tz.name_ = std::string(name);
    if (name.empty() || name == "UTC" || name == "Z") return tz;
    struct NamedZone {
      std::string_view name;
      int std_hours;
      bool dst;
    };
    static constexpr NamedZone kZones[] = {
        {"America/Los_Angeles", -8, true}, {"US/Pacific", -8, true},
        {"America/Denver", -7, true},      {"America/Phoenix", -7, false},
        {"America/Chicago", -6, true},     {"America/New_York", -5, true},
        {"America/Anchorage", -9, true},
    };
    for (const auto& z : kZones) {
      if (name == z.name) {
        tz.std_offset_ = z.std_hours * 3600;
        tz.us_dst_ = z.dst;
        return tz;
      }
    }
    std::string_view rest = name;
    if (rest.substr(0, 3) == "UTC" || rest.substr(0, 3) == "GMT")
      rest.remove_prefix(3);
    if (!rest.empty() && (rest[0] == '+' || rest[0] == '-')) {
      int sign = rest[0] == '+' ? 1 : -1;
      rest.remove_prefix(1);
      int h = 0, m = 0;
      auto [p, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), h);
      if (ec != std::errc{}) throw std::invalid_argument("bad time zone: " + tz.name_);
      if (p - rest.data() >= 3) {  // compact "+0530" form
        m = h % 100;
        h = h / 100;
      }
      std::string_view tail(p, rest.data() + rest.size() - p);
      if (!tail.empty()) {
        if (tail[0] == ':') tail.remove_prefix(1);
        auto [p2, ec2] =
            std::from_chars(tail.data(), tail.data() + tail.size(), m);
        if (ec2 != std::errc{} || p2 != tail.data() + tail.size())
          throw std::invalid_argument("bad time zone: " + tz.name_);
      }
      tz.std_offset_ = sign * (h * 3600 + m * 60);
      return tz;
    }
    throw std::invalid_argument("unsupported time zone: " + tz.name_);
  }

  std::int64_t offset_at(Instant t) const {
    if (us_dst_ && us_dst_active(t, std_offset_)) return std_offset_ + 3600;
    return std_offset_;
  }

  CivilDateTime to_local(Instant t) const {
    return civil_from_instant(t + offset_at(t));
  }

  // Local seconds-of-day at instant t.
  int local_seconds_of_day(Instant t) const {
    std::int64_t s = (t + offset_at(t)) % kSecondsPerDay;
    if (s < 0) s += kSecondsPerDay;
    return static_cast<int>(s);
  }

  // Local calendar day as days-since-epoch of the local date.
  std::int64_t local_day(Instant t) const {
    std::int64_t s = t + offset_at(t);
    return s >= 0 ? s / kSecondsPerDay : (s - kSecondsPerDay + 1) / kSecondsPerDay;
  }

  const std::string& name() const { return name_; }

 private:
  std::string name_ = "UTC";
  std::int64_t std_offset_ = 0;
  bool us_dst_ = false;
};

// Local wall-clock time of day, seconds since local midnight.
struct ClockTime {
  int seconds_of_day = 0;

  static std::optional<ClockTime> parse(std::string_view s) {
    int h = 0, m = 0, sec = 0;
    auto read2 = [&](size_t pos, int& out) {
      auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + 2, out);
      return ec == std::errc{} && p == s.data() + pos + 2;
    };
    if (s.size() < 5 || s[2] != ':' || !read2(0, h) || !read2(3, m))
      return std::nullopt;
    if (s.size() == 8 && s[5] == ':') {
      if (!read2(6, sec)) return std::nullopt;
    } else if (s.size() != 5) {
      return std::nullopt;
    }
    if (h > 23 || m > 59 || sec > 59) return std::nullopt;
    return ClockTime{h * 3600 + m * 60 + sec};
  }
};

}  // namespace evactrace
