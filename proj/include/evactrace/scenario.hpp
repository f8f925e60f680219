#pragma once

// Event context: fire ignition, evacuation zones with warning/order/lift
// timelines, census tracts with population, and home placement relative to
// the zones.

#include <algorithm>
#include <istream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evactrace/config.hpp"
#include "evactrace/geo.hpp"
#include "evactrace/home.hpp"

namespace evactrace {

struct EvacZone {
  std::string zone_id;
  ZoneGeometry geometry;
  std::optional<Instant> warning_issued;
  std::optional<Instant> order_issued;
  Instant lifted = 0;

  Instant first_alert() const {
    Instant t = std::numeric_limits<Instant>::max();
    if (warning_issued) t = std::min(t, *warning_issued);
    if (order_issued) t = std::min(t, *order_issued);
    return t;
  }
};

struct Tract {
  std::string tract_id;
  ZoneGeometry geometry;
  std::int64_t population = 0;
};

struct Scenario {
  Instant ignition = 0;
  TimeZone tz;
  std::vector<EvacZone> zones;
  std::vector<Tract> tracts;
  double shadow_buffer_km = 8.0467;
  double home_buffer_d_km = 8.0467;
  int outside_absence_days = 2;

  // Earliest warning or order across all zones.
  Instant first_county_alert() const {
    if (zones.empty())
      throw std::logic_error("first_county_alert: scenario has no zones");
    Instant t = std::numeric_limits<Instant>::max();
    for (const auto& z : zones) t = std::min(t, z.first_alert());
    return t;
  }

  bool any_zone_contains(const GeoPoint& p) const {
    for (const auto& z : zones)
      if (z.geometry.contains(p)) return true;
    return false;
  }
};

enum class LocationClass { kInZone, kNearZone, kOutOfScope };

inline const char* to_string(LocationClass c) {
  switch (c) {
    case LocationClass::kInZone: return "IN_ZONE";
    case LocationClass::kNearZone: return "NEAR_ZONE";
    case LocationClass::kOutOfScope: return "OUT_OF_SCOPE";
  }
  return "?";
}

struct HomePlacement {
  DeviceId device = 0;
  LocationClass location_class = LocationClass::kOutOfScope;
  std::string zone_id;          // containing zone, or nearest zone when near
  double distance_km = 0;       // boundary distance for NEAR_ZONE
  std::optional<std::string> tract_id;
};

namespace geojson {

inline ZoneGeometry parse_geometry(const nlohmann::json& geom,
                                   const std::string& feature_id) {
  ZoneGeometry zg;
  auto add_polygon = [&](const nlohmann::json& rings) {
    for (const auto& ring : rings) {
      Ring r;
      for (const auto& coord : ring) {
        if (!coord.is_array() || coord.size() < 2)
          throw std::runtime_error("feature " + feature_id + ": bad coordinate");
        r.vertices.push_back(
            {coord[1].get<double>(), coord[0].get<double>()});
      }
      zg.rings.push_back(std::move(r));
    }
  };
  const std::string type = geom.at("type").get<std::string>();
  if (type == "Polygon") {
    add_polygon(geom.at("coordinates"));
  } else if (type == "MultiPolygon") {
    for (const auto& poly : geom.at("coordinates")) add_polygon(poly);
  } else {
    throw std::runtime_error("feature " + feature_id +
                             ": unsupported geometry type " + type);
  }
  try {
    zg.validate();
  } catch (const std::exception& e) {
    throw std::runtime_error("feature " + feature_id + ": " + e.what());
  }
  return zg;
}

inline std::optional<Instant> parse_time_property(const nlohmann::json& props,
                                                  const std::string& key,
                                                  const std::string& feature_id) {
  if (!props.contains(key) || props[key].is_null()) return std::nullopt;
  if (props[key].is_number_integer()) return props[key].get<std::int64_t>();
  auto t = parse_instant(props[key].get<std::string>());
  if (!t)
    throw std::runtime_error("feature " + feature_id + ": bad timestamp in " +
                             key);
  return t;
}

}  // namespace geojson

// Loads zones and tracts from GeoJSON FeatureCollections and validates all
// invariants; violations are collected and reported together.
inline Scenario load_scenario(std::istream& zones_in, std::istream& tracts_in,
                              const Config& cfg) {
  Scenario s;
  s.ignition = cfg.ignition;
  s.tz = cfg.tz;
  s.shadow_buffer_km = cfg.shadow_buffer_km;
  s.home_buffer_d_km = cfg.home_buffer_d_km;
  s.outside_absence_days = cfg.outside_absence_days;

  std::vector<std::string> violations;
  nlohmann::json zones_doc, tracts_doc;
  try {
    zones_in >> zones_doc;
    tracts_in >> tracts_doc;
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("invalid GeoJSON: ") + e.what());
  }

  for (const auto& f : zones_doc.at("features")) {
    const auto& props = f.at("properties");
    std::string id = props.value("zone_id", "");
    try {
      if (id.empty()) throw std::runtime_error("zone missing zone_id");
      EvacZone z;
      z.zone_id = id;
      z.geometry = geojson::parse_geometry(f.at("geometry"), id);
      z.warning_issued = geojson::parse_time_property(props, "warning_issued", id);
      z.order_issued = geojson::parse_time_property(props, "order_issued", id);
      auto lifted = geojson::parse_time_property(props, "lifted", id);
      if (!lifted) throw std::runtime_error("zone " + id + ": missing lifted");
      z.lifted = *lifted;
      if (!z.warning_issued && !z.order_issued)
        throw std::runtime_error("zone " + id + ": needs a warning or an order");
      if (z.warning_issued && z.order_issued &&
          *z.warning_issued > *z.order_issued)
        throw std::runtime_error("zone " + id + ": warning after order");
      if (z.first_alert() >= z.lifted)
        throw std::runtime_error("zone " + id + ": alert not before lift");
      if (s.ignition > z.first_alert())
        throw std::runtime_error("zone " + id + ": alert precedes ignition");
      s.zones.push_back(std::move(z));
    } catch (const std::exception& e) {
      violations.push_back(e.what());
    }
  }

  for (const auto& f : tracts_doc.at("features")) {
    const auto& props = f.at("properties");
    std::string id = props.value("tract_id", "");
    try {
      if (id.empty()) throw std::runtime_error("tract missing tract_id");
      Tract t;
      t.tract_id = id;
      t.geometry = geojson::parse_geometry(f.at("geometry"), id);
      if (!props.contains("population"))
        throw std::runtime_error("tract " + id + ": missing population");
      t.population = props["population"].get<std::int64_t>();
      if (t.population < 0)
        throw std::runtime_error("tract " + id + ": negative population");
      s.tracts.push_back(std::move(t));
    } catch (const std::exception& e) {
      violations.push_back(e.what());
    }
  }

  if (!violations.empty()) {
    std::string msg = "scenario load failed:";
    for (const auto& v : violations) msg += "\n  " + v;
    throw std::runtime_error(msg);
  }
  return s;
}

// IN_ZONE when any zone contains the home (first containing zone by
// declaration order on overlap); otherwise NEAR_ZONE when within the shadow
// buffer of the closest boundary; otherwise OUT_OF_SCOPE.
inline HomePlacement place_home(const HomeLocation& h, const Scenario& s) {
  HomePlacement p;
  p.device = h.device;
  for (const auto& z : s.zones) {
    if (z.geometry.contains(h.point)) {
      p.location_class = LocationClass::kInZone;
      p.zone_id = z.zone_id;
      break;
    }
  }
  if (p.location_class != LocationClass::kInZone) {
    double best = std::numeric_limits<double>::infinity();
    const EvacZone* nearest = nullptr;
    for (const auto& z : s.zones) {
      double d = z.geometry.distance_to_boundary_km(h.point);
      if (d < best) {
        best = d;
        nearest = &z;
      }
    }
    if (nearest && best <= s.shadow_buffer_km) {
      p.location_class = LocationClass::kNearZone;
      p.zone_id = nearest->zone_id;
      p.distance_km = best;
    }
  }
  for (const auto& t : s.tracts) {
    if (t.geometry.contains(h.point)) {
      p.tract_id = t.tract_id;
      break;
    }
  }
  return p;
}

// Lift time of the zone closest to a near-zone home; equidistant ties
// resolve to the earlier lift.
inline Instant nearest_zone_lift(const HomeLocation& h, const Scenario& s) {
  double best = std::numeric_limits<double>::infinity();
  std::optional<Instant> lift;
  for (const auto& z : s.zones) {
    if (z.geometry.contains(h.point))
      throw std::logic_error("nearest_zone_lift: home is inside a zone");
    double d = z.geometry.distance_to_boundary_km(h.point);
    // sub-micrometer differences are ties; ties go to the earlier lift
    constexpr double kTieTolKm = 1e-9;
    if (d + kTieTolKm < best) {
      best = d;
      lift = z.lifted;
    } else if (d <= best + kTieTolKm && lift && z.lifted < *lift) {
      best = std::min(best, d);
      lift = z.lifted;
    }
  }
  if (!lift) throw std::logic_error("nearest_zone_lift: no zones");
  return *lift;
}

}  // namespace evactrace
