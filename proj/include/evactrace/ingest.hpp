#pragma once

// Ingest: parse, validate, clean, deduplicate raw ping records; split
// pre/post-fire; select daily-frequent users ("residents").
//
// Device ids are interned to dense integer ids up front; everything
// downstream works on the integer ids and maps back for output.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "evactrace/config.hpp"
#include "evactrace/geo.hpp"
#include "evactrace/time.hpp"

namespace evactrace {

using DeviceId = std::uint32_t;

struct PingRecord {
  DeviceId device = 0;
  Instant timestamp = 0;
  double lat = 0;
  double lon = 0;
  float accuracy_m = -1;  // < 0 means absent

  bool has_accuracy() const { return accuracy_m >= 0; }
  GeoPoint point() const { return {lat, lon}; }
};

// Bidirectional device-id intern table.
class DeviceTable {
 public:
  DeviceId intern(std::string_view name) {
    auto it = index_.find(name);
    if (it != index_.end()) return it->second;
    DeviceId id = static_cast<DeviceId>(names_.size());
    names_.emplace_back(name);
    index_.emplace(names_.back(), id);
    return id;
  }
  const std::string& name(DeviceId id) const { return names_[id]; }
  size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  struct Hash {
    using is_transparent = void;
    size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };
  std::unordered_map<std::string, DeviceId, Hash, std::equal_to<>> index_;
};

struct DeviceTrace {
  DeviceId device = 0;
  std::vector<PingRecord> pings;  // nondecreasing timestamps
};

struct CleaningReport {
  std::uint64_t input_count = 0;
  std::uint64_t dropped_inaccurate = 0;
  std::uint64_t dropped_duplicate = 0;
  std::uint64_t dropped_out_of_bounds = 0;
  std::uint64_t retained_count = 0;

  bool reconciles() const {
    return input_count == retained_count + dropped_inaccurate +
                              dropped_duplicate + dropped_out_of_bounds;
  }
  CleaningReport& operator+=(const CleaningReport& o) {
    input_count += o.input_count;
    dropped_inaccurate += o.dropped_inaccurate;
    dropped_duplicate += o.dropped_duplicate;
    dropped_out_of_bounds += o.dropped_out_of_bounds;
    retained_count += o.retained_count;
    return *this;
  }
};

struct ColumnMapping {
  std::string device_id = "device_id";
  std::string timestamp = "timestamp";
  std::string lat = "lat";
  std::string lon = "lon";
  std::string accuracy = "accuracy_m";  // optional column
  char delimiter = ',';
};

struct ParseError {
  std::uint64_t line;
  std::string message;
};

struct ParseResult {
  std::vector<PingRecord> records;
  std::vector<ParseError> errors;
};

namespace detail {

inline void split_fields(std::string_view line, char delim,
                         std::vector<std::string_view>& out) {
  out.clear();
  size_t start = 0;
  while (true) {
    size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline bool parse_double(std::string_view s, double& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

}  // namespace detail

// Parses delimiter-separated ping records. Malformed rows are logged with
// their line number and skipped; only an unreadable source or a missing
// mandatory header column is fatal.
inline ParseResult parse_pings(std::istream& in, const ColumnMapping& schema,
                               DeviceTable& devices) {
  ParseResult result;
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("parse_pings: cannot read header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string_view> fields;
  detail::split_fields(line, schema.delimiter, fields);
  int col_device = -1, col_ts = -1, col_lat = -1, col_lon = -1, col_acc = -1;
  for (int i = 0; i < static_cast<int>(fields.size()); ++i) {
    if (fields[i] == schema.device_id) col_device = i;
    else if (fields[i] == schema.timestamp) col_ts = i;
    else if (fields[i] == schema.lat) col_lat = i;
    else if (fields[i] == schema.lon) col_lon = i;
    else if (fields[i] == schema.accuracy) col_acc = i;
  }
  auto require = [&](int col, const std::string& name) {
    if (col < 0)
      throw std::runtime_error("parse_pings: missing mandatory column '" +
                               name + "' in header");
  };
  require(col_device, schema.device_id);
  require(col_ts, schema.timestamp);
  require(col_lat, schema.lat);
  require(col_lon, schema.lon);
  const int n_needed =
      1 + std::max({col_device, col_ts, col_lat, col_lon, col_acc});

  std::uint64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    detail::split_fields(line, schema.delimiter, fields);
    auto fail = [&](const char* msg) {
      result.errors.push_back({line_no, msg});
    };
    if (static_cast<int>(fields.size()) < n_needed) {
      fail("too few columns");
      continue;
    }
    PingRecord rec;
    if (fields[col_device].empty()) {
      fail("empty device_id");
      continue;
    }
    auto ts = parse_instant(fields[col_ts]);
    if (!ts) {
      fail("unparseable timestamp");
      continue;
    }
    rec.timestamp = *ts;
    if (!detail::parse_double(fields[col_lat], rec.lat) || rec.lat < -90.0 ||
        rec.lat > 90.0) {
      fail("lat out of range");
      continue;
    }
    if (!detail::parse_double(fields[col_lon], rec.lon) || rec.lon < -180.0 ||
        rec.lon > 180.0) {
      fail("lon out of range");
      continue;
    }
    if (col_acc >= 0 && !fields[col_acc].empty()) {
      double acc;
      if (!detail::parse_double(fields[col_acc], acc) || acc < 0) {
        fail("bad accuracy");
        continue;
      }
      rec.accuracy_m = static_cast<float>(acc);
    }
    rec.device = devices.intern(fields[col_device]);
    result.records.push_back(rec);
  }
  return result;
}

struct CleanResult {
  std::vector<PingRecord> records;
  CleaningReport report;
};

// Drops records outside the study window, records with accuracy worse than
// accuracy_max_m (records with no accuracy field pass), and exact duplicates
// on (device, timestamp, lat, lon). First occurrence of a duplicate wins.
inline CleanResult clean_pings(const std::vector<PingRecord>& pings,
                               double accuracy_max_m, Instant study_start,
                               Instant study_end) {
  CleanResult out;
  out.report.input_count = pings.size();
  struct KeyHash {
    size_t operator()(const std::tuple<DeviceId, Instant, double, double>& k)
        const {
      size_t h = std::hash<DeviceId>{}(std::get<0>(k));
      auto mix = [&h](size_t v) {
        h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      };
      mix(std::hash<Instant>{}(std::get<1>(k)));
      mix(std::hash<double>{}(std::get<2>(k)));
      mix(std::hash<double>{}(std::get<3>(k)));
      return h;
    }
  };
  std::unordered_set<std::tuple<DeviceId, Instant, double, double>, KeyHash>
      seen;
  seen.reserve(pings.size() * 2);
  out.records.reserve(pings.size());
  for (const auto& rec : pings) {
    if (rec.timestamp < study_start || rec.timestamp > study_end) {
      ++out.report.dropped_out_of_bounds;
      continue;
    }
    if (rec.has_accuracy() && rec.accuracy_m > accuracy_max_m) {
      ++out.report.dropped_inaccurate;
      continue;
    }
    if (!seen.insert({rec.device, rec.timestamp, rec.lat, rec.lon}).second) {
      ++out.report.dropped_duplicate;
      continue;
    }
    out.records.push_back(rec);
  }
  out.report.retained_count = out.records.size();
  return out;
}

// Pings strictly before ignition go to pre_fire; the ignition instant itself
// belongs to post_fire.
inline std::pair<std::vector<PingRecord>, std::vector<PingRecord>>
split_pre_post_fire(const std::vector<PingRecord>& pings, Instant ignition) {
  std::pair<std::vector<PingRecord>, std::vector<PingRecord>> out;
  for (const auto& rec : pings)
    (rec.timestamp < ignition ? out.first : out.second).push_back(rec);
  return out;
}

// Groups records into per-device traces with time-sorted pings. Sort is
// stable so equal timestamps keep input order.
inline std::vector<DeviceTrace> group_by_device(
    const std::vector<PingRecord>& pings) {
  std::unordered_map<DeviceId, std::uint32_t> index;
  std::vector<DeviceTrace> traces;
  for (const auto& rec : pings) {
    auto [it, inserted] =
        index.try_emplace(rec.device, static_cast<std::uint32_t>(traces.size()));
    if (inserted) traces.push_back({rec.device, {}});
    traces[it->second].pings.push_back(rec);
  }
  for (auto& t : traces)
    std::stable_sort(t.pings.begin(), t.pings.end(),
                     [](const PingRecord& a, const PingRecord& b) {
                       return a.timestamp < b.timestamp;
                     });
  std::sort(traces.begin(), traces.end(),
            [](const DeviceTrace& a, const DeviceTrace& b) {
              return a.device < b.device;
            });
  return traces;
}

// A resident is a device with at least min_daily_signals pings on every one
// of the given local calendar days. Days are local-date indices
// (days since epoch of the local date) under tz.
inline std::set<DeviceId> filter_frequent_users(
    const std::vector<PingRecord>& pre_fire,
    const std::vector<std::int64_t>& pre_fire_days, int min_daily_signals,
    const TimeZone& tz) {
  if (pre_fire_days.empty())
    throw std::invalid_argument("filter_frequent_users: no pre-fire days");
  if (min_daily_signals < 1)
    throw std::invalid_argument("filter_frequent_users: threshold must be >= 1");
  std::unordered_map<DeviceId, std::unordered_map<std::int64_t, int>> counts;
  for (const auto& rec : pre_fire)
    ++counts[rec.device][tz.local_day(rec.timestamp)];
  std::set<DeviceId> residents;
  for (const auto& [device, per_day] : counts) {
    bool ok = true;
    for (std::int64_t day : pre_fire_days) {
      auto it = per_day.find(day);
      if (it == per_day.end() || it->second < min_daily_signals) {
        ok = false;
        break;
      }
    }
    if (ok) residents.insert(device);
  }
  return residents;
}

// Complete local calendar days in [study_start, ignition): day d qualifies
// when both its local midnight boundaries fall inside the interval.
inline std::vector<std::int64_t> complete_pre_fire_days(const Config& cfg) {
  std::vector<std::int64_t> days;
  std::int64_t first = cfg.tz.local_day(cfg.study_start);
  std::int64_t last = cfg.tz.local_day(cfg.ignition);
  for (std::int64_t d = first; d <= last; ++d) {
    // Local midnight of day d expressed as a UTC instant; DST shifts are at
    // 02:00 local, so the midnight offset probe is exact.
    Instant approx = d * kSecondsPerDay;
    Instant day_start = approx - cfg.tz.offset_at(approx);
    Instant next = (d + 1) * kSecondsPerDay;
    Instant day_end = next - cfg.tz.offset_at(next);
    if (day_start >= cfg.study_start && day_end <= cfg.ignition)
      days.push_back(d);
  }
  return days;
}

}  // namespace evactrace
