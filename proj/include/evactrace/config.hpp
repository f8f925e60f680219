#pragma once

// Run configuration, loaded from a key = value text file. The config file is
// the single source of thresholds; CLI flags may override individual keys.

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "evactrace/time.hpp"

namespace evactrace {

enum class DepartureAnchor { kLastInside, kFirstOutside };

struct Config {
  Instant ignition = 0;
  TimeZone tz = TimeZone::utc();
  std::string tz_name = "UTC";
  double accuracy_max_m = 250.0;
  int min_daily_signals = 20;
  double cell_size_m = 20.0;
  ClockTime night_start{22 * 3600};
  ClockTime night_end{6 * 3600};
  double home_buffer_d_km = 8.0467;   // D: away-from-home threshold
  double shadow_buffer_km = 8.0467;   // width of the near-zone band
  int outside_absence_days = 2;       // N: outside-zone absence threshold
  Instant study_start = 0;
  Instant study_end = 0;
  DepartureAnchor departure_anchor = DepartureAnchor::kLastInside;

  static Config from_map(const std::map<std::string, std::string>& kv);
  static Config load(const std::string& path);
  std::map<std::string, std::string> to_map() const;
};

namespace detail {
inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}
}  // namespace detail

inline std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: expected key = value, got: " + t);
    kv[detail::trim(t.substr(0, eq))] = detail::trim(t.substr(eq + 1));
  }
  return kv;
}

inline Config Config::from_map(const std::map<std::string, std::string>& kv) {
  Config c;
  auto get = [&](const char* key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };
  auto get_instant = [&](const char* key, Instant& out, bool required) {
    if (auto v = get(key)) {
      auto t = parse_instant(*v);
      if (!t) throw std::runtime_error(std::string("config: bad timestamp for ") + key);
      out = *t;
    } else if (required) {
      throw std::runtime_error(std::string("config: missing required key ") + key);
    }
  };
  auto get_double = [&](const char* key, double& out) {
    if (auto v = get(key)) out = std::stod(*v);
  };
  auto get_int = [&](const char* key, int& out) {
    if (auto v = get(key)) out = std::stoi(*v);
  };
  auto get_clock = [&](const char* key, ClockTime& out) {
    if (auto v = get(key)) {
      auto t = ClockTime::parse(*v);
      if (!t) throw std::runtime_error(std::string("config: bad clock time for ") + key);
      out = *t;
    }
  };
  get_instant("ignition", c.ignition, true);
  get_instant("study_start", c.study_start, true);
  get_instant("study_end", c.study_end, true);
  if (auto v = get("tz")) {
    c.tz_name = *v;
    c.tz = TimeZone::parse(*v);
  }
  get_double("accuracy_max_m", c.accuracy_max_m);
  get_int("min_daily_signals", c.min_daily_signals);
  get_double("cell_size_m", c.cell_size_m);
  get_clock("night_start", c.night_start);
  get_clock("night_end", c.night_end);
  get_double("home_buffer_d_km", c.home_buffer_d_km);
  get_double("shadow_buffer_km", c.shadow_buffer_km);
  get_int("outside_absence_days", c.outside_absence_days);
  if (auto v = get("departure_anchor")) {
    if (*v == "last_inside")
      c.departure_anchor = DepartureAnchor::kLastInside;
    else if (*v == "first_outside")
      c.departure_anchor = DepartureAnchor::kFirstOutside;
    else
      throw std::runtime_error("config: departure_anchor must be last_inside or first_outside");
  }
  if (c.study_start >= c.study_end)
    throw std::runtime_error("config: study_start must precede study_end");
  if (c.ignition < c.study_start || c.ignition > c.study_end)
    throw std::runtime_error("config: ignition outside study window");
  return c;
}

inline Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  return from_map(parse_key_values(in));
}

inline std::map<std::string, std::string> Config::to_map() const {
  auto fmt_clock = [](ClockTime t) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d:%02d", t.seconds_of_day / 3600,
                  (t.seconds_of_day % 3600) / 60);
    return std::string(buf);
  };
  auto fmt_double = [](double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  };
  return {
      {"ignition", format_iso8601(ignition)},
      {"tz", tz_name},
      {"accuracy_max_m", fmt_double(accuracy_max_m)},
      {"min_daily_signals", std::to_string(min_daily_signals)},
      {"cell_size_m", fmt_double(cell_size_m)},
      {"night_start", fmt_clock(night_start)},
      {"night_end", fmt_clock(night_end)},
      {"home_buffer_d_km", fmt_double(home_buffer_d_km)},
      {"shadow_buffer_km", fmt_double(shadow_buffer_km)},
      {"outside_absence_days", std::to_string(outside_absence_days)},
      {"study_start", format_iso8601(study_start)},
      {"study_end", format_iso8601(study_end)},
      {"departure_anchor",
       departure_anchor == DepartureAnchor::kLastInside ? "last_inside"
                                                        : "first_outside"},
  };
}

}  // namespace evactrace
