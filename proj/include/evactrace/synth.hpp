#pragma once

// Synthetic scenarios and ping streams with known ground truth (homes,
// behaviors, departure times) — the verification oracle for the pipeline.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "evactrace/classifier.hpp"
#include "evactrace/config.hpp"
#include "evactrace/scenario.hpp"

namespace evactrace {

enum class ScenarioTemplate { kBasic, kOrderFirst, kOverlapping };

inline std::optional<ScenarioTemplate> template_from_string(std::string_view s) {
  if (s == "BASIC" || s == "basic") return ScenarioTemplate::kBasic;
  if (s == "ORDER_FIRST" || s == "order_first") return ScenarioTemplate::kOrderFirst;
  if (s == "OVERLAPPING" || s == "overlapping") return ScenarioTemplate::kOverlapping;
  return std::nullopt;
}

struct AgentSpec {
  std::string agent_id;
  GeoPoint true_home;
  ResidentLabel behavior = ResidentLabel::kNonEvacueeInZone;
  std::optional<Instant> departure;
  std::optional<GeoPoint> destination;
  std::optional<Instant> return_time;
  double ping_rate_per_hour = 4.0;
  double position_noise_m = 0.0;
  std::uint64_t seed = 0;

  void validate(double d_km) const {
    if (is_evacuee(behavior)) {
      if (!departure || !destination)
        throw std::invalid_argument(agent_id +
                                    ": evacuee script needs departure and destination");
      if (haversine_km(true_home, *destination) <= d_km)
        throw std::invalid_argument(agent_id +
                                    ": destination within home buffer of home");
    }
  }
};

struct TruthRecord {
  std::string agent_id;
  GeoPoint true_home;
  ResidentLabel label = ResidentLabel::kNonEvacueeInZone;
  std::optional<Instant> t_e;
};

struct SyntheticDataset {
  std::vector<PingRecord> pings;
  std::vector<TruthRecord> truth;
  DeviceTable devices;
  Config config;
  Scenario scenario;
};

namespace synth_detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Anchor point of the synthetic study area (northern Sonoma County).
inline GeoPoint base_origin() { return {38.60, -122.90}; }

inline Ring rectangle_ring(const GeoPoint& origin, double east0_km,
                           double north0_km, double east1_km,
                           double north1_km) {
  auto pt = [&](double e, double n) {
    return unproject({e * 1000.0, n * 1000.0}, origin);
  };
  Ring r;
  r.vertices = {pt(east0_km, north0_km), pt(east1_km, north0_km),
                pt(east1_km, north1_km), pt(east0_km, north1_km),
                pt(east0_km, north0_km)};
  return r;
}

inline GeoPoint offset_km(const GeoPoint& origin, double east_km,
                          double north_km) {
  return unproject({east_km * 1000.0, north_km * 1000.0}, origin);
}

}  // namespace synth_detail

inline Config default_synth_config() {
  Config cfg;
  // Evening ignition with nine full calendar days of pre-fire data.
  cfg.ignition = *parse_iso8601("2019-10-23T21:00:00Z");
  cfg.study_start = *parse_iso8601("2019-10-14T00:00:00Z");
  cfg.study_end = *parse_iso8601("2019-11-06T00:00:00Z");
  cfg.tz_name = "UTC";
  cfg.tz = TimeZone::utc();
  return cfg;
}

// Deterministic scenario from a named template. BASIC is a single
// rectangular zone with warning at ignition+3d, order at +5d, lift at +9d.
inline Scenario generate_scenario(ScenarioTemplate tmpl, std::uint64_t seed,
                                  const Config& cfg = default_synth_config()) {
  using namespace synth_detail;
  (void)seed;  // geometry is fixed per template; seed reserved for variants
  const GeoPoint o = base_origin();
  const Instant ign = cfg.ignition;
  const auto day = [](double d) {
    return static_cast<Instant>(d * kSecondsPerDay);
  };

  Scenario s;
  s.ignition = ign;
  s.tz = cfg.tz;
  s.shadow_buffer_km = cfg.shadow_buffer_km;
  s.home_buffer_d_km = cfg.home_buffer_d_km;
  s.outside_absence_days = cfg.outside_absence_days;

  auto make_zone = [&](std::string id, Ring ring, std::optional<double> warn_d,
                       std::optional<double> order_d, double lift_d) {
    EvacZone z;
    z.zone_id = std::move(id);
    z.geometry.rings.push_back(std::move(ring));
    if (warn_d) z.warning_issued = ign + day(*warn_d);
    if (order_d) z.order_issued = ign + day(*order_d);
    z.lifted = ign + day(lift_d);
    return z;
  };

  switch (tmpl) {
    case ScenarioTemplate::kBasic:
      s.zones.push_back(
          make_zone("Z1", rectangle_ring(o, 0, 0, 10, 10), 3, 5, 9));
      break;
    case ScenarioTemplate::kOrderFirst:
      // Z1 receives a mandatory order with no prior warning, before any
      // warning elsewhere.
      s.zones.push_back(make_zone("Z1", rectangle_ring(o, 0, 0, 10, 10),
                                  std::nullopt, 2, 9));
      s.zones.push_back(
          make_zone("Z2", rectangle_ring(o, 0, 14, 10, 24), 3, 5, 9));
      break;
    case ScenarioTemplate::kOverlapping:
      s.zones.push_back(
          make_zone("Z1", rectangle_ring(o, 0, 0, 10, 10), 3, 5, 9));
      s.zones.push_back(
          make_zone("Z2", rectangle_ring(o, 6, 0, 16, 10), 4, 6, 10));
      break;
  }

  // 3 x 2 tract grid covering the zones and their shadow band.
  int idx = 0;
  for (int row = 0; row < 2; ++row)
    for (int col = 0; col < 3; ++col) {
      Tract t;
      t.tract_id = "T" + std::to_string(++idx);
      t.geometry.rings.push_back(rectangle_ring(
          o, -12.0 + col * 16.0, -12.0 + row * 17.0, 4.0 + col * 16.0,
          5.0 + row * 17.0));
      t.population = 2000 + 700 * idx;
      s.tracts.push_back(std::move(t));
    }
  for (const auto& z : s.zones) z.geometry.validate();
  for (const auto& t : s.tracts) t.geometry.validate();
  return s;
}

namespace synth_detail {

// Emits Poisson-arrival pings dwelling at `where` (with small daytime
// wander) over [from, to), guaranteeing at least one ping in every full
// night window and at least min_daily pings on every full local day.
inline void emit_presence(std::vector<PingRecord>& out, DeviceId device,
                          const GeoPoint& where, Instant from, Instant to,
                          const AgentSpec& spec, const Config& cfg,
                          std::mt19937_64& rng) {
  if (from >= to) return;
  const NightWindow night{cfg.night_start, cfg.night_end, cfg.tz};
  std::poisson_distribution<int> per_hour(spec.ping_rate_per_hour);
  std::normal_distribution<double> noise(0.0, spec.position_noise_m);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto emit_at = [&](Instant t) {
    GeoPoint p = where;
    if (!night.covers(t)) {
      // daytime wander, bounded well inside the home buffer
      double ang = unit(rng) * 2 * kPi;
      double r = unit(rng) * 2000.0;
      p = unproject({r * std::cos(ang), r * std::sin(ang)}, where);
    }
    if (spec.position_noise_m > 0)
      p = unproject({noise(rng), noise(rng)}, p);
    out.push_back({device, t, p.lat, p.lon, -1});
  };

  std::map<std::int64_t, int> day_counts;
  std::map<std::int64_t, int> night_counts;
  const Instant first_hour = from - (from % 3600);
  for (Instant h = first_hour; h < to; h += 3600) {
    int n = per_hour(rng);
    for (int i = 0; i < n; ++i) {
      Instant t = h + static_cast<Instant>(unit(rng) * 3600.0);
      if (t < from || t >= to) continue;
      emit_at(t);
      ++day_counts[cfg.tz.local_day(t)];
      if (night.covers(t)) ++night_counts[night.night_id(t)];
    }
  }

  // Top up nights with no ping. A "full" night is one wholly inside the span.
  const int ns = cfg.night_start.seconds_of_day;
  for (std::int64_t d = cfg.tz.local_day(from) - 1;
       d <= cfg.tz.local_day(to) + 1; ++d) {
    Instant night_begin = d * kSecondsPerDay + ns - cfg.tz.offset_at(d * kSecondsPerDay);
    Instant night_end = night_begin +
                        ((24 * 3600 - ns) + cfg.night_end.seconds_of_day);
    if (night_begin < from || night_end > to) continue;
    if (night_counts[d] == 0) {
      emit_at(night_begin + static_cast<Instant>(unit(rng) * (night_end - night_begin)));
      ++night_counts[d];
    }
  }

  // Top up sparse full days so scripted agents always qualify as residents.
  for (std::int64_t d = cfg.tz.local_day(from); d <= cfg.tz.local_day(to); ++d) {
    Instant day_begin = d * kSecondsPerDay - cfg.tz.offset_at(d * kSecondsPerDay);
    Instant day_end = day_begin + kSecondsPerDay;
    if (day_begin < from || day_end > to) continue;
    while (day_counts[d] < cfg.min_daily_signals + 2) {
      emit_at(day_begin + 12 * 3600 +
              static_cast<Instant>(unit(rng) * 4 * 3600.0));
      ++day_counts[d];
    }
  }
}

}  // namespace synth_detail

// Realizes one agent's scripted behavior as a ping trace. Departures are
// instantaneous jumps: the agent pings at home at the departure instant and
// at the destination one minute later, so the scripted departure time is
// recoverable exactly.
inline std::vector<PingRecord> generate_agent_trace(const AgentSpec& spec,
                                                    DeviceId device,
                                                    const Config& cfg) {
  spec.validate(cfg.home_buffer_d_km);
  std::mt19937_64 rng(synth_detail::splitmix64(spec.seed));
  std::vector<PingRecord> out;

  const Instant dep = spec.departure.value_or(cfg.study_end);
  const Instant ret = spec.return_time.value_or(cfg.study_end);
  std::normal_distribution<double> noise(0.0, spec.position_noise_m);

  auto emit_exact = [&](Instant t, const GeoPoint& where) {
    GeoPoint p = where;
    if (spec.position_noise_m > 0)
      p = unproject({noise(rng), noise(rng)}, p);
    out.push_back({device, t, p.lat, p.lon, -1});
  };

  if (!spec.departure) {
    synth_detail::emit_presence(out, device, spec.true_home, cfg.study_start,
                                cfg.study_end, spec, cfg, rng);
  } else {
    synth_detail::emit_presence(out, device, spec.true_home, cfg.study_start,
                                dep, spec, cfg, rng);
    emit_exact(dep, spec.true_home);
    emit_exact(dep + 60, *spec.destination);
    synth_detail::emit_presence(out, device, *spec.destination, dep + 120,
                                std::min(ret, cfg.study_end), spec, cfg, rng);
    if (spec.return_time && *spec.return_time < cfg.study_end) {
      emit_exact(ret, spec.true_home);
      synth_detail::emit_presence(out, device, spec.true_home, ret + 60,
                                  cfg.study_end, spec, cfg, rng);
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const PingRecord& a, const PingRecord& b) {
                     return a.timestamp < b.timestamp;
                   });

  // Script fidelity check before emission: a stay-at-home script must never
  // stray beyond the home buffer.
  if (!spec.departure) {
    for (const auto& rec : out)
      if (haversine_km(spec.true_home, rec.point()) > cfg.home_buffer_d_km)
        throw std::logic_error(spec.agent_id + ": stay-at-home script left buffer");
  }
  return out;
}

// Largest-remainder apportionment of n agents over the mix. Published group
// shares are often rounded percentages summing to slightly off 1, so a
// small imbalance is tolerated and the target total follows the mix sum.
inline std::vector<std::pair<ResidentLabel, int>> apportion_mix(
    int n, const std::vector<std::pair<ResidentLabel, double>>& mix) {
  double total = 0;
  for (const auto& [label, p] : mix) {
    if (p < 0) throw std::invalid_argument("negative mix proportion");
    total += p;
  }
  if (std::abs(total - 1.0) > 0.05)
    throw std::invalid_argument("mix proportions must sum to 1");
  const int target = static_cast<int>(std::lround(n * total));
  std::vector<std::pair<ResidentLabel, int>> counts;
  std::vector<std::pair<double, size_t>> remainders;
  int assigned = 0;
  for (size_t i = 0; i < mix.size(); ++i) {
    double exact = n * mix[i].second;
    int base = static_cast<int>(std::floor(exact + 1e-9));
    counts.emplace_back(mix[i].first, base);
    remainders.emplace_back(exact - base, i);
    assigned += base;
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; i < target - assigned; ++i)
    ++counts[remainders[i % remainders.size()].second].second;
  return counts;
}

struct SynthParams {
  int n_agents = 100;
  std::vector<std::pair<ResidentLabel, double>> mix = {
      {ResidentLabel::kSelfEvacuee, 0.20},
      {ResidentLabel::kShadowEvacuee, 0.15},
      {ResidentLabel::kEvacueeUnderWarning, 0.10},
      {ResidentLabel::kOrderedEvacuee, 0.20},
      {ResidentLabel::kNonEvacueeInZone, 0.15},
      {ResidentLabel::kNonEvacueeOutsideZone, 0.10},
      {ResidentLabel::kUncategorized, 0.10},
  };
  double ping_rate_per_hour = 4.0;
  double position_noise_m = 30.0;
  std::uint64_t seed = 1;
  ScenarioTemplate tmpl = ScenarioTemplate::kBasic;
};

// Scripts one agent of the requested behavior against the BASIC-shaped
// timeline of the scenario's first zone.
inline AgentSpec script_agent(ResidentLabel behavior, int index,
                              const Scenario& s, const SynthParams& params,
                              std::mt19937_64& rng) {
  using namespace synth_detail;
  const GeoPoint o = base_origin();
  const Instant ign = s.ignition;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto day = [](double d) { return static_cast<Instant>(d * kSecondsPerDay); };

  // Warning-group agents need a zone that actually issued a warning; the
  // first zone would not do for an order-first timeline.
  const EvacZone* zone = &s.zones.front();
  if (behavior == ResidentLabel::kEvacueeUnderWarning) {
    for (const auto& z : s.zones)
      if (z.warning_issued) {
        zone = &z;
        break;
      }
    if (!zone->warning_issued)
      throw std::invalid_argument("no zone with a warning for warning-group script");
  }
  const Instant lift = zone->lifted;
  Instant max_lift = 0;
  double max_east_km = 0;
  for (const auto& z : s.zones) {
    max_lift = std::max(max_lift, z.lifted);
    GeoPoint sw, ne;
    z.geometry.bounds(sw, ne);
    max_east_km = std::max(max_east_km, project(ne, o).east / 1000.0);
  }

  AgentSpec a;
  char buf[32];
  std::snprintf(buf, sizeof buf, "agent_%05d", index);
  a.agent_id = buf;
  a.behavior = behavior;
  a.ping_rate_per_hour = params.ping_rate_per_hour;
  a.position_noise_m = params.position_noise_m;
  a.seed = splitmix64(params.seed ^ (0x51700000ULL + index));

  const bool in_zone = behavior != ResidentLabel::kShadowEvacuee &&
                       behavior != ResidentLabel::kNonEvacueeOutsideZone;
  if (in_zone) {
    // uniform in the scripted zone's box, 1 km in from the boundary
    GeoPoint sw, ne;
    zone->geometry.bounds(sw, ne);
    PlanarPoint psw = project(sw, o), pne = project(ne, o);
    double e0 = psw.east / 1000.0 + 1.0, e1 = pne.east / 1000.0 - 1.0;
    double n0 = psw.north / 1000.0 + 1.0, n1 = pne.north / 1000.0 - 1.0;
    a.true_home = offset_km(o, e0 + unit(rng) * (e1 - e0),
                            n0 + unit(rng) * (n1 - n0));
  } else {
    // east of every zone, inside the shadow band but clear of its edges
    a.true_home = offset_km(o, max_east_km + 1.0 + unit(rng) * 5.5,
                            1.0 + unit(rng) * 8.0);
  }

  // Destination well beyond the buffer and outside every zone.
  const GeoPoint destination =
      offset_km(o, 40.0 + unit(rng) * 5.0, -20.0 - unit(rng) * 5.0);

  switch (behavior) {
    case ResidentLabel::kSelfEvacuee: {
      const Instant alert = zone->first_alert();
      a.departure = ign + day(0.25) +
                    static_cast<Instant>(unit(rng) * (alert - ign - day(0.5)));
      a.destination = destination;
      a.return_time = max_lift + day(0.5 + unit(rng));
      break;
    }
    case ResidentLabel::kShadowEvacuee:
      a.departure = s.first_county_alert() + day(0.1 + unit(rng) * 2.0);
      a.destination = destination;
      a.return_time = max_lift + day(0.5 + unit(rng));
      break;
    case ResidentLabel::kEvacueeUnderWarning: {
      const Instant w = *zone->warning_issued;
      const Instant o_t = zone->order_issued.value_or(lift);
      a.departure = w + day(0.05) +
                    static_cast<Instant>(unit(rng) * (o_t - w - day(0.1)));
      a.destination = destination;
      a.return_time = max_lift + day(0.5 + unit(rng));
      break;
    }
    case ResidentLabel::kOrderedEvacuee: {
      const Instant o_t = *zone->order_issued;
      a.departure = o_t + day(0.05) +
                    static_cast<Instant>(unit(rng) * (lift - o_t - day(0.1)));
      a.destination = destination;
      if (index % 2 == 0) a.return_time = max_lift + day(0.5 + unit(rng));
      break;
    }
    case ResidentLabel::kUncategorized:
      // leaves under the order but returns before the lift
      a.departure = *zone->order_issued + day(0.2);
      a.destination = destination;
      a.return_time = lift - day(1.0 + unit(rng) * 0.5);
      break;
    case ResidentLabel::kNonEvacueeInZone:
    case ResidentLabel::kNonEvacueeOutsideZone:
      break;  // stays home
  }
  return a;
}

inline SyntheticDataset generate_dataset(const SynthParams& params,
                                         Config cfg = default_synth_config()) {
  SyntheticDataset ds;
  ds.config = cfg;
  ds.scenario = generate_scenario(params.tmpl, params.seed, cfg);
  std::mt19937_64 script_rng(synth_detail::splitmix64(params.seed));

  auto counts = apportion_mix(params.n_agents, params.mix);
  int index = 0;
  for (const auto& [label, n] : counts) {
    for (int i = 0; i < n; ++i) {
      AgentSpec spec = script_agent(label, index++, ds.scenario, params, script_rng);
      DeviceId device = ds.devices.intern(spec.agent_id);
      auto trace = generate_agent_trace(spec, device, cfg);
      ds.pings.insert(ds.pings.end(), trace.begin(), trace.end());
      TruthRecord truth;
      truth.agent_id = spec.agent_id;
      truth.true_home = spec.true_home;
      truth.label = label;
      if (is_evacuee(label)) truth.t_e = spec.departure;
      ds.truth.push_back(std::move(truth));
    }
  }
  return ds;
}

}  // namespace evactrace
