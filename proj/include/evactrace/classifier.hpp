#pragma once

// Evacuation-behavior inference: detect home-absence episodes per resident,
// then walk the decision tree to assign one of seven labels and extract
// departure timing.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evactrace/home.hpp"
#include "evactrace/scenario.hpp"

namespace evactrace {

enum class ResidentLabel {
  kSelfEvacuee,
  kShadowEvacuee,
  kEvacueeUnderWarning,
  kOrderedEvacuee,
  kNonEvacueeInZone,
  kNonEvacueeOutsideZone,
  kUncategorized,
};

inline const char* to_string(ResidentLabel l) {
  switch (l) {
    case ResidentLabel::kSelfEvacuee: return "SELF_EVACUEE";
    case ResidentLabel::kShadowEvacuee: return "SHADOW_EVACUEE";
    case ResidentLabel::kEvacueeUnderWarning: return "EVACUEE_UNDER_WARNING";
    case ResidentLabel::kOrderedEvacuee: return "ORDERED_EVACUEE";
    case ResidentLabel::kNonEvacueeInZone: return "NON_EVACUEE_IN_ZONE";
    case ResidentLabel::kNonEvacueeOutsideZone: return "NON_EVACUEE_OUTSIDE_ZONE";
    case ResidentLabel::kUncategorized: return "UNCATEGORIZED";
  }
  return "?";
}

inline std::optional<ResidentLabel> label_from_string(std::string_view s) {
  for (auto l : {ResidentLabel::kSelfEvacuee, ResidentLabel::kShadowEvacuee,
                 ResidentLabel::kEvacueeUnderWarning,
                 ResidentLabel::kOrderedEvacuee,
                 ResidentLabel::kNonEvacueeInZone,
                 ResidentLabel::kNonEvacueeOutsideZone,
                 ResidentLabel::kUncategorized})
    if (s == to_string(l)) return l;
  return std::nullopt;
}

inline bool is_evacuee(ResidentLabel l) {
  return l == ResidentLabel::kSelfEvacuee ||
         l == ResidentLabel::kShadowEvacuee ||
         l == ResidentLabel::kEvacueeUnderWarning ||
         l == ResidentLabel::kOrderedEvacuee;
}

// One maximal run of beyond-D pings, bracketed by within-D pings where they
// exist.
struct AbsenceEpisode {
  Instant t_l = 0;                  // left home
  std::optional<Instant> t_r;       // returned home; absent for open episodes
  std::vector<GeoPoint> night_stops;  // one per night of the absence
  double duration_days = 0;

  bool open() const { return !t_r.has_value(); }
};

struct ClassifierParams {
  double d_km = 8.0467;
  double cell_size_m = 20.0;
  NightWindow night;
  DepartureAnchor anchor = DepartureAnchor::kLastInside;

  static ClassifierParams from_config(const Config& cfg) {
    ClassifierParams p;
    p.d_km = cfg.home_buffer_d_km;
    p.cell_size_m = cfg.cell_size_m;
    p.night = {cfg.night_start, cfg.night_end, cfg.tz};
    p.anchor = cfg.departure_anchor;
    return p;
  }
};

// Scans the post-fire trace for maximal beyond-D runs. The departure time
// t_l anchors to the last within-D ping before the run (or the first
// beyond-D ping, per the configured anchor, and always when the trace opens
// away from home). Each night of an episode contributes one stop: the
// most-visited-cell centroid of that night's beyond-D pings.
inline std::vector<AbsenceEpisode> detect_absences(const DeviceTrace& trace,
                                                   const HomeLocation& home,
                                                   const ClassifierParams& p) {
  std::vector<AbsenceEpisode> episodes;
  std::optional<Instant> last_inside;
  std::vector<PingRecord> away;  // beyond-D pings of the current episode
  std::optional<Instant> episode_start;

  auto flush = [&](std::optional<Instant> t_r) {
    AbsenceEpisode e;
    e.t_l = *episode_start;
    e.t_r = t_r;
    Instant end = t_r ? *t_r : away.back().timestamp;
    e.duration_days = static_cast<double>(end - e.t_l) / kSecondsPerDay;
    std::map<std::int64_t, std::vector<PingRecord>> nights;
    for (const auto& rec : away)
      if (p.night.covers(rec.timestamp))
        nights[p.night.night_id(rec.timestamp)].push_back(rec);
    for (const auto& [night, pings] : nights) {
      auto best = detail::argmax_cell(pings, home.point, p.cell_size_m);
      e.night_stops.push_back(
          unproject({(best->first.first + 0.5) * p.cell_size_m,
                     (best->first.second + 0.5) * p.cell_size_m},
                    home.point));
    }
    episodes.push_back(std::move(e));
    away.clear();
    episode_start.reset();
  };

  for (const auto& rec : trace.pings) {
    const bool inside = haversine_km(home.point, rec.point()) <= p.d_km;
    if (inside) {
      if (episode_start) flush(rec.timestamp);
      last_inside = rec.timestamp;
    } else {
      if (!episode_start) {
        episode_start = (p.anchor == DepartureAnchor::kLastInside && last_inside)
                            ? *last_inside
                            : rec.timestamp;
      }
      away.push_back(rec);
    }
  }
  if (episode_start) flush(std::nullopt);
  return episodes;
}

struct ClassificationResult {
  DeviceId device = 0;
  ResidentLabel label = ResidentLabel::kUncategorized;
  HomePlacement placement;
  std::optional<Instant> t_l;
  std::optional<Instant> t_e;  // departure time, evacuee labels only
  std::optional<Instant> t_r;
  std::string reason_code;
};

namespace detail {

inline bool any_stop_in_zone(const AbsenceEpisode& e, const Scenario& s) {
  for (const auto& stop : e.night_stops)
    if (s.any_zone_contains(stop)) return true;
  return false;
}

// First episode meeting the duration threshold, or the verdict when none
// does: an open tail episode too short to judge is insufficient evidence,
// anything else means the resident stayed.
inline const AbsenceEpisode* first_qualifying(
    const std::vector<AbsenceEpisode>& episodes, double min_days,
    bool& insufficient) {
  for (const auto& e : episodes)
    if (e.duration_days >= min_days) return &e;
  insufficient = !episodes.empty() && episodes.back().open();
  return nullptr;
}

}  // namespace detail

inline ClassificationResult classify_outside_zone(
    const std::vector<AbsenceEpisode>& episodes, const HomeLocation& home,
    const HomePlacement& placement, const Scenario& s) {
  if (placement.location_class != LocationClass::kNearZone)
    throw std::logic_error("classify_outside_zone: placement not NEAR_ZONE");
  ClassificationResult r;
  r.device = home.device;
  r.placement = placement;

  bool insufficient = false;
  const AbsenceEpisode* e = detail::first_qualifying(
      episodes, static_cast<double>(s.outside_absence_days), insufficient);
  if (!e) {
    r.label = insufficient ? ResidentLabel::kUncategorized
                           : ResidentLabel::kNonEvacueeOutsideZone;
    r.reason_code = insufficient ? "out:open_absence_too_short" : "out:never_left_n_days";
    return r;
  }
  r.t_l = e->t_l;
  r.t_r = e->t_r;
  if (detail::any_stop_in_zone(*e, s)) {
    r.label = ResidentLabel::kNonEvacueeOutsideZone;
    r.reason_code = "out:stops_in_zone";
    return r;
  }
  if (e->t_r && *e->t_r < nearest_zone_lift(home, s)) {
    r.label = ResidentLabel::kUncategorized;
    r.reason_code = "out:returned_before_lift";
    return r;
  }
  if (e->t_l < s.first_county_alert()) {
    if (e->t_l < s.ignition) {
      r.label = ResidentLabel::kUncategorized;
      r.reason_code = "out:departed_before_ignition";
      return r;
    }
    r.label = ResidentLabel::kSelfEvacuee;
    r.reason_code = "out:left_before_first_county_alert";
  } else {
    r.label = ResidentLabel::kShadowEvacuee;
    r.reason_code = "out:left_after_first_county_alert";
  }
  r.t_e = e->t_l;
  return r;
}

inline ClassificationResult classify_in_zone(
    const std::vector<AbsenceEpisode>& episodes, const HomeLocation& home,
    const HomePlacement& placement, const Scenario& s) {
  if (placement.location_class != LocationClass::kInZone)
    throw std::logic_error("classify_in_zone: placement not IN_ZONE");
  const EvacZone* zone = nullptr;
  for (const auto& z : s.zones)
    if (z.zone_id == placement.zone_id) zone = &z;
  if (!zone) throw std::logic_error("classify_in_zone: unknown zone id");

  ClassificationResult r;
  r.device = home.device;
  r.placement = placement;

  bool insufficient = false;
  const AbsenceEpisode* e = detail::first_qualifying(episodes, 1.0, insufficient);
  if (!e) {
    r.label = insufficient ? ResidentLabel::kUncategorized
                           : ResidentLabel::kNonEvacueeInZone;
    r.reason_code = insufficient ? "in:open_absence_too_short" : "in:never_left_one_day";
    return r;
  }
  r.t_l = e->t_l;
  r.t_r = e->t_r;
  if (detail::any_stop_in_zone(*e, s)) {
    r.label = ResidentLabel::kNonEvacueeInZone;
    r.reason_code = "in:stops_in_zone";
    return r;
  }
  if (e->t_r && *e->t_r < zone->lifted) {
    r.label = ResidentLabel::kUncategorized;
    r.reason_code = "in:returned_before_lift";
    return r;
  }
  const Instant t_l = e->t_l;
  if (t_l < zone->first_alert()) {
    if (t_l < s.ignition) {
      r.label = ResidentLabel::kUncategorized;
      r.reason_code = "in:departed_before_ignition";
      return r;
    }
    r.label = ResidentLabel::kSelfEvacuee;
    r.reason_code = "in:left_before_zone_alert";
    r.t_e = t_l;
    return r;
  }
  if (t_l >= zone->lifted) {
    r.label = ResidentLabel::kUncategorized;
    r.reason_code = "in:departed_after_lift";
    return r;
  }
  if (zone->warning_issued && t_l >= *zone->warning_issued &&
      t_l < (zone->order_issued ? *zone->order_issued : zone->lifted)) {
    r.label = ResidentLabel::kEvacueeUnderWarning;
    r.reason_code = "in:left_during_warning";
    r.t_e = t_l;
    return r;
  }
  if (zone->order_issued && t_l >= *zone->order_issued && t_l < zone->lifted) {
    r.label = ResidentLabel::kOrderedEvacuee;
    r.reason_code = "in:left_during_order";
    r.t_e = t_l;
    return r;
  }
  throw std::logic_error("classify_in_zone: unreachable branch");
}

struct ClassifyAllResult {
  std::vector<ClassificationResult> results;  // sorted by device id
  std::uint64_t out_of_scope_count = 0;
};

inline ClassifyAllResult classify_all(
    const std::map<DeviceId, HomeLocation>& homes,
    const std::map<DeviceId, HomePlacement>& placements,
    const std::vector<DeviceTrace>& post_fire, const Scenario& s,
    const ClassifierParams& params) {
  std::map<DeviceId, const DeviceTrace*> trace_index;
  for (const auto& t : post_fire) trace_index[t.device] = &t;

  ClassifyAllResult out;
  for (const auto& [device, home] : homes) {
    const HomePlacement& placement = placements.at(device);
    if (placement.location_class == LocationClass::kOutOfScope) {
      ++out.out_of_scope_count;
      continue;
    }
    auto it = trace_index.find(device);
    if (it == trace_index.end() || it->second->pings.empty()) {
      ClassificationResult r;
      r.device = device;
      r.placement = placement;
      r.label = ResidentLabel::kUncategorized;
      r.reason_code = placement.location_class == LocationClass::kInZone
                          ? "in:no_post_fire_signals"
                          : "out:no_post_fire_signals";
      out.results.push_back(std::move(r));
      continue;
    }
    auto episodes = detect_absences(*it->second, home, params);
    out.results.push_back(placement.location_class == LocationClass::kInZone
                              ? classify_in_zone(episodes, home, placement, s)
                              : classify_outside_zone(episodes, home, placement, s));
  }
  return out;
}

}  // namespace evactrace
