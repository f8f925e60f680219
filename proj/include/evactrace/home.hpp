#pragma once

// Home-location inference: each resident's proxy home is the centroid of the
// grid cell holding the most of their nighttime pings over the pre-fire
// period.

#include <cstdint>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

#include "evactrace/geo.hpp"
#include "evactrace/ingest.hpp"
#include "evactrace/time.hpp"

namespace evactrace {

// Local-clock nighttime window; wraps midnight when start > end.
// Start-inclusive, end-exclusive.
struct NightWindow {
  ClockTime start{22 * 3600};
  ClockTime end{6 * 3600};
  TimeZone tz;

  bool covers(Instant t) const {
    int s = tz.local_seconds_of_day(t);
    if (start.seconds_of_day > end.seconds_of_day)
      return s >= start.seconds_of_day || s < end.seconds_of_day;
    return s >= start.seconds_of_day && s < end.seconds_of_day;
  }

  // Identifies which night a nighttime instant belongs to: the local date on
  // which that night began.
  std::int64_t night_id(Instant t) const {
    std::int64_t day = tz.local_day(t);
    int s = tz.local_seconds_of_day(t);
    if (start.seconds_of_day > end.seconds_of_day && s < end.seconds_of_day)
      return day - 1;  // early-morning tail of the previous night
    return day;
  }
};

struct HomeLocation {
  DeviceId device = 0;
  GeoPoint point;       // centroid of the winning cell
  CellIndex cell;
  std::uint32_t night_ping_count = 0;  // pings in the winning cell
};

inline DeviceTrace nighttime_filter(const DeviceTrace& trace,
                                    const NightWindow& w) {
  DeviceTrace out{trace.device, {}};
  for (const auto& rec : trace.pings)
    if (w.covers(rec.timestamp)) out.pings.push_back(rec);
  return out;
}

namespace detail {

struct CellStat {
  std::uint32_t count = 0;
  Instant last_visit = 0;
};

struct CellKeyHash {
  size_t operator()(const std::pair<std::int64_t, std::int64_t>& k) const {
    return std::hash<std::int64_t>{}(k.first * 2654435761LL) ^
           std::hash<std::int64_t>{}(k.second);
  }
};

// Argmax cell over projected pings without grid bounds; cell keys may be
// negative. Ties go to the cell visited most recently, then to the lowest
// (row, col).
template <typename Pings>
inline std::optional<std::pair<std::pair<std::int64_t, std::int64_t>, CellStat>>
argmax_cell(const Pings& pings, const GeoPoint& origin, double cell_size_m) {
  std::unordered_map<std::pair<std::int64_t, std::int64_t>, CellStat,
                     CellKeyHash>
      stats;
  for (const auto& rec : pings) {
    PlanarPoint q = project(rec.point(), origin);
    std::pair<std::int64_t, std::int64_t> key = {
        static_cast<std::int64_t>(std::floor(q.east / cell_size_m)),
        static_cast<std::int64_t>(std::floor(q.north / cell_size_m))};
    auto& st = stats[key];
    ++st.count;
    if (rec.timestamp > st.last_visit) st.last_visit = rec.timestamp;
  }
  if (stats.empty()) return std::nullopt;
  auto better = [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    if (a.second.last_visit != b.second.last_visit)
      return a.second.last_visit > b.second.last_visit;
    if (a.first.second != b.first.second) return a.first.second < b.first.second;
    return a.first.first < b.first.first;
  };
  auto best = stats.begin();
  for (auto it = std::next(stats.begin()); it != stats.end(); ++it)
    if (better(*it, *best)) best = it;
  return *best;
}

}  // namespace detail

struct HomeInferenceStats {
  std::uint64_t out_of_grid_pings = 0;
};

// Returns the centroid of the most-visited cell among the given nighttime
// pings, or nothing when there are none (or none fall inside the grid).
inline std::optional<HomeLocation> infer_home(const DeviceTrace& night_pings,
                                              const GridSpec& g,
                                              HomeInferenceStats* stats = nullptr) {
  std::vector<PingRecord> in_grid;
  in_grid.reserve(night_pings.pings.size());
  for (const auto& rec : night_pings.pings) {
    if (g.in_bounds(rec.point()))
      in_grid.push_back(rec);
    else if (stats)
      ++stats->out_of_grid_pings;
  }
  auto best = detail::argmax_cell(in_grid, g.origin, g.cell_size_m);
  if (!best) return std::nullopt;
  HomeLocation home;
  home.device = night_pings.device;
  home.cell = {static_cast<std::int32_t>(best->first.first),
               static_cast<std::int32_t>(best->first.second)};
  home.point = g.cell_centroid(home.cell);
  home.night_ping_count = best->second.count;
  return home;
}

struct HomeInferenceResult {
  std::map<DeviceId, HomeLocation> homes;
  std::vector<DeviceId> excluded_no_night_pings;
  HomeInferenceStats stats;
};

inline HomeInferenceResult infer_all_homes(const std::set<DeviceId>& residents,
                                           const std::vector<DeviceTrace>& pre_fire,
                                           const NightWindow& w,
                                           const GridSpec& g) {
  HomeInferenceResult result;
  for (const auto& trace : pre_fire) {
    if (!residents.count(trace.device)) continue;
    DeviceTrace night = nighttime_filter(trace, w);
    if (auto home = infer_home(night, g, &result.stats))
      result.homes.emplace(trace.device, *home);
    else
      result.excluded_no_night_pings.push_back(trace.device);
  }
  return result;
}

}  // namespace evactrace
