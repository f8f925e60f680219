#include <catch_amalgamated.hpp>

#include <sstream>

#include "evactrace/scenario.hpp"

using namespace evactrace;

namespace {

std::string ring_json(double lat0, double lon0, double lat1, double lon1) {
  std::ostringstream os;
  os << "[[" << lon0 << "," << lat0 << "],[" << lon1 << "," << lat0 << "],["
     << lon1 << "," << lat1 << "],[" << lon0 << "," << lat1 << "],[" << lon0
     << "," << lat0 << "]]";
  return os.str();
}

std::string zone_feature(const std::string& id, const std::string& ring,
                         const std::string& warning, const std::string& order,
                         const std::string& lifted) {
  std::string props = "\"zone_id\":\"" + id + "\"";
  if (!warning.empty()) props += ",\"warning_issued\":\"" + warning + "\"";
  if (!order.empty()) props += ",\"order_issued\":\"" + order + "\"";
  if (!lifted.empty()) props += ",\"lifted\":\"" + lifted + "\"";
  return "{\"type\":\"Feature\",\"properties\":{" + props +
         "},\"geometry\":{\"type\":\"Polygon\",\"coordinates\":[" + ring +
         "]}}";
}

std::string tract_feature(const std::string& id, const std::string& ring,
                          long population) {
  return "{\"type\":\"Feature\",\"properties\":{\"tract_id\":\"" + id +
         "\",\"population\":" + std::to_string(population) +
         "},\"geometry\":{\"type\":\"Polygon\",\"coordinates\":[" + ring +
         "]}}";
}

std::string collection(const std::vector<std::string>& features) {
  std::string out = "{\"type\":\"FeatureCollection\",\"features\":[";
  for (size_t i = 0; i < features.size(); ++i) {
    if (i) out += ",";
    out += features[i];
  }
  return out + "]}";
}

Config base_config() {
  Config c;
  c.ignition = *parse_iso8601("2019-10-23T21:00:00Z");
  c.study_start = *parse_iso8601("2019-10-14T00:00:00Z");
  c.study_end = *parse_iso8601("2019-11-06T00:00:00Z");
  return c;
}

Scenario load(const std::string& zones, const std::string& tracts,
              const Config& cfg) {
  std::istringstream zin(zones), tin(tracts);
  return load_scenario(zin, tin, cfg);
}

HomeLocation home_at(double lat, double lon) {
  HomeLocation h;
  h.device = 0;
  h.point = {lat, lon};
  return h;
}

const std::string kZoneA = ring_json(0.0, 0.0, 0.1, 0.1);
const std::string kZoneB = ring_json(0.0, 0.2, 0.1, 0.3);
const std::string kTract1 = ring_json(-0.5, -0.5, 0.05, 0.5);
const std::string kTract2 = ring_json(0.05, -0.5, 0.5, 0.5);

}  // namespace

TEST_CASE("load a valid scenario") {
  auto s = load(
      collection({zone_feature("ZA", kZoneA, "2019-10-26T00:00:00Z",
                               "2019-10-28T00:00:00Z", "2019-11-01T00:00:00Z"),
                  zone_feature("ZB", kZoneB, "", "2019-10-25T12:00:00Z",
                               "2019-10-30T00:00:00Z")}),
      collection({tract_feature("T1", kTract1, 4000),
                  tract_feature("T2", kTract2, 2500)}),
      base_config());
  REQUIRE(s.zones.size() == 2);
  REQUIRE(s.tracts.size() == 2);
  CHECK(s.zones[0].warning_issued == parse_iso8601("2019-10-26T00:00:00Z"));
  CHECK_FALSE(s.zones[1].warning_issued.has_value());
  CHECK(s.zones[1].first_alert() == *parse_iso8601("2019-10-25T12:00:00Z"));
  CHECK(s.first_county_alert() == *parse_iso8601("2019-10-25T12:00:00Z"));
  CHECK(s.tracts[1].population == 2500);
}

TEST_CASE("multipolygon zones are flattened") {
  std::string feature =
      "{\"type\":\"Feature\",\"properties\":{\"zone_id\":\"ZM\","
      "\"order_issued\":\"2019-10-25T00:00:00Z\",\"lifted\":"
      "\"2019-10-30T00:00:00Z\"},\"geometry\":{\"type\":\"MultiPolygon\","
      "\"coordinates\":[[" +
      ring_json(0, 0, 0.1, 0.1) + "],[" + ring_json(0.3, 0.3, 0.4, 0.4) +
      "]]}}";
  auto s = load(collection({feature}),
                collection({tract_feature("T1", kTract1, 10)}), base_config());
  REQUIRE(s.zones.size() == 1);
  CHECK(s.zones[0].geometry.rings.size() == 2);
  CHECK(s.zones[0].geometry.contains({0.05, 0.05}));
  CHECK(s.zones[0].geometry.contains({0.35, 0.35}));
  CHECK_FALSE(s.zones[0].geometry.contains({0.2, 0.2}));
}

TEST_CASE("all violations are reported together") {
  std::string zones = collection(
      {zone_feature("Z1", kZoneA, "2019-10-26T00:00:00Z", "", ""),  // no lift
       zone_feature("Z2", kZoneB, "", "", "2019-10-30T00:00:00Z")});  // no alert
  std::string tracts = collection({tract_feature("T1", kTract1, -5)});
  try {
    load(zones, tracts, base_config());
    FAIL("expected scenario load to throw");
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("Z1") != std::string::npos);
    CHECK(msg.find("Z2") != std::string::npos);
    CHECK(msg.find("T1") != std::string::npos);
  }
}

TEST_CASE("timeline ordering is enforced") {
  Config cfg = base_config();
  // warning after order
  CHECK_THROWS(load(
      collection({zone_feature("Z", kZoneA, "2019-10-29T00:00:00Z",
                               "2019-10-28T00:00:00Z", "2019-11-01T00:00:00Z")}),
      collection({}), cfg));
  // lift not after alert
  CHECK_THROWS(load(
      collection({zone_feature("Z", kZoneA, "2019-10-26T00:00:00Z", "",
                               "2019-10-26T00:00:00Z")}),
      collection({}), cfg));
  // alert before ignition
  CHECK_THROWS(load(
      collection({zone_feature("Z", kZoneA, "2019-10-20T00:00:00Z", "",
                               "2019-11-01T00:00:00Z")}),
      collection({}), cfg));
  // order-only zone is fine
  CHECK_NOTHROW(load(
      collection({zone_feature("Z", kZoneA, "", "2019-10-25T00:00:00Z",
                               "2019-11-01T00:00:00Z")}),
      collection({}), cfg));
}

TEST_CASE("invalid geometry is rejected at load") {
  std::string open_ring = "[[0,0],[0.1,0],[0.1,0.1],[0,0.1]]";
  CHECK_THROWS(load(
      collection({zone_feature("Z", open_ring, "2019-10-26T00:00:00Z", "",
                               "2019-11-01T00:00:00Z")}),
      collection({}), base_config()));
  std::istringstream garbage("this is not json"), empty("{}");
  CHECK_THROWS(load_scenario(garbage, empty, base_config()));
}

namespace {

Scenario placement_scenario() {
  return load(
      collection({zone_feature("ZA", kZoneA, "2019-10-26T00:00:00Z",
                               "2019-10-28T00:00:00Z", "2019-11-01T00:00:00Z"),
                  // ZB overlaps ZA's east half and lifts earlier
                  zone_feature("ZB", ring_json(0.0, 0.05, 0.1, 0.3), "",
                               "2019-10-25T12:00:00Z", "2019-10-30T00:00:00Z")}),
      collection({tract_feature("T1", kTract1, 4000),
                  tract_feature("T2", kTract2, 2500)}),
      base_config());
}

}  // namespace

TEST_CASE("home placement classes") {
  Scenario s = placement_scenario();

  auto inside = place_home(home_at(0.05, 0.02), s);
  CHECK(inside.location_class == LocationClass::kInZone);
  CHECK(inside.zone_id == "ZA");
  CHECK(inside.tract_id == "T1");

  // overlap region belongs to the first declared zone
  auto overlap = place_home(home_at(0.05, 0.07), s);
  CHECK(overlap.location_class == LocationClass::kInZone);
  CHECK(overlap.zone_id == "ZA");

  // ~2.2 km west of ZA's west edge: inside the shadow band
  auto near = place_home(home_at(0.05, -0.02), s);
  CHECK(near.location_class == LocationClass::kNearZone);
  CHECK(near.zone_id == "ZA");
  CHECK(near.distance_km == Catch::Approx(0.02 * 111.19492664).margin(0.05));
  CHECK(near.tract_id == "T1");

  // ~22 km west: beyond the 8 km band
  auto far = place_home(home_at(0.05, -0.2), s);
  CHECK(far.location_class == LocationClass::kOutOfScope);
  CHECK(far.zone_id.empty());

  auto north = place_home(home_at(0.09, 0.02), s);
  CHECK(north.tract_id == "T2");
}

TEST_CASE("boundary home counts as in-zone") {
  Scenario s = placement_scenario();
  auto p = place_home(home_at(0.05, 0.0), s);
  CHECK(p.location_class == LocationClass::kInZone);
}

TEST_CASE("nearest zone lift") {
  Scenario s = placement_scenario();
  // closer to ZA's west edge than to anything of ZB
  CHECK(nearest_zone_lift(home_at(0.05, -0.02), s) ==
        *parse_iso8601("2019-11-01T00:00:00Z"));
  // just east of ZB
  CHECK(nearest_zone_lift(home_at(0.05, 0.32), s) ==
        *parse_iso8601("2019-10-30T00:00:00Z"));
  CHECK_THROWS_AS(nearest_zone_lift(home_at(0.05, 0.02), s), std::logic_error);
}

TEST_CASE("equidistant tie resolves to the earlier lift") {
  // two disjoint squares symmetric about lon 0.175
  auto s = load(
      collection({zone_feature("ZA", ring_json(0.0, 0.0, 0.1, 0.1),
                               "2019-10-26T00:00:00Z", "",
                               "2019-11-01T00:00:00Z"),
                  zone_feature("ZB", ring_json(0.0, 0.25, 0.1, 0.35), "",
                               "2019-10-25T12:00:00Z", "2019-10-30T00:00:00Z")}),
      collection({}), base_config());
  CHECK(nearest_zone_lift(home_at(0.05, 0.175), s) ==
        *parse_iso8601("2019-10-30T00:00:00Z"));
}
