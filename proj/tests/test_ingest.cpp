#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <sstream>

#include "evactrace/ingest.hpp"

using namespace evactrace;

namespace {

const Instant kStudyStart = *parse_iso8601("2019-10-14T00:00:00Z");
const Instant kStudyEnd = *parse_iso8601("2019-11-06T00:00:00Z");

ParseResult parse(const std::string& csv, DeviceTable& devices) {
  std::istringstream in(csv);
  return parse_pings(in, ColumnMapping{}, devices);
}

PingRecord ping(DeviceId d, Instant t, double lat = 38.5, double lon = -122.8,
                float acc = -1) {
  return {d, t, lat, lon, acc};
}

}  // namespace

TEST_CASE("parse well-formed rows") {
  DeviceTable devices;
  auto r = parse(
      "device_id,timestamp,lat,lon,accuracy_m\n"
      "d1,2019-10-20T03:00:00Z,38.5,-122.8,30\n",
      devices);
  REQUIRE(r.records.size() == 1);
  CHECK(r.errors.empty());
  CHECK(devices.name(r.records[0].device) == "d1");
  CHECK(r.records[0].timestamp == *parse_iso8601("2019-10-20T03:00:00Z"));
  CHECK(r.records[0].lat == 38.5);
  CHECK(r.records[0].accuracy_m == 30.0f);
}

TEST_CASE("lat out of range is logged and skipped") {
  DeviceTable devices;
  auto r = parse(
      "device_id,timestamp,lat,lon,accuracy_m\n"
      "d1,2019-10-20T03:00:00Z,91.0,-122.8,30\n",
      devices);
  CHECK(r.records.empty());
  REQUIRE(r.errors.size() == 1);
  CHECK(r.errors[0].line == 2);
  CHECK(r.errors[0].message == "lat out of range");
}

TEST_CASE("malformed row does not abort the stream") {
  DeviceTable devices;
  auto r = parse(
      "device_id,timestamp,lat,lon,accuracy_m\n"
      "d1,2019-10-20T03:00:00Z,38.5,-122.8,30\n"
      "d2,not-a-time,38.5,-122.8,\n"
      "d3,2019-10-21T03:00:00Z,38.6,-122.7,12\n",
      devices);
  CHECK(r.records.size() == 2);
  REQUIRE(r.errors.size() == 1);
  CHECK(r.errors[0].line == 3);
}

TEST_CASE("missing accuracy is allowed, missing mandatory column is fatal") {
  DeviceTable devices;
  auto r = parse(
      "device_id,timestamp,lat,lon\n"
      "d1,2019-10-20T03:00:00Z,38.5,-122.8\n",
      devices);
  REQUIRE(r.records.size() == 1);
  CHECK_FALSE(r.records[0].has_accuracy());

  std::istringstream bad("device_id,timestamp,lat\n");
  CHECK_THROWS(parse_pings(bad, ColumnMapping{}, devices));
}

TEST_CASE("extra columns and custom schema") {
  DeviceTable devices;
  std::istringstream in(
      "ts;who;geohash;latitude;longitude\n"
      "1571540400;d9;9q8y;38.5;-122.8\n");
  ColumnMapping m;
  m.device_id = "who";
  m.timestamp = "ts";
  m.lat = "latitude";
  m.lon = "longitude";
  m.delimiter = ';';
  auto r = parse_pings(in, m, devices);
  REQUIRE(r.records.size() == 1);
  CHECK(devices.name(r.records[0].device) == "d9");
}

TEST_CASE("cleaning drops inaccurate and duplicate records") {
  Instant t = *parse_iso8601("2019-10-20T03:00:00Z");
  std::vector<PingRecord> pings = {ping(0, t, 38.5, -122.8, 30),
                                   ping(0, t + 10, 38.5, -122.8, 300)};
  auto out = clean_pings(pings, 250, kStudyStart, kStudyEnd);
  CHECK(out.records.size() == 1);
  CHECK(out.report.dropped_inaccurate == 1);
  CHECK(out.report.reconciles());

  std::vector<PingRecord> dup = {ping(0, t), ping(0, t)};
  auto out2 = clean_pings(dup, 250, kStudyStart, kStudyEnd);
  CHECK(out2.records.size() == 1);
  CHECK(out2.report.dropped_duplicate == 1);
}

TEST_CASE("record without accuracy passes the filter") {
  Instant t = *parse_iso8601("2019-10-20T03:00:00Z");
  auto out = clean_pings({ping(0, t)}, 250, kStudyStart, kStudyEnd);
  CHECK(out.records.size() == 1);
  CHECK(out.report.dropped_inaccurate == 0);
}

TEST_CASE("empty input cleans to empty report") {
  auto out = clean_pings({}, 250, kStudyStart, kStudyEnd);
  CHECK(out.records.empty());
  CHECK(out.report.input_count == 0);
  CHECK(out.report.reconciles());
}

TEST_CASE("near-duplicates at different coordinates are kept") {
  Instant t = *parse_iso8601("2019-10-20T03:00:00Z");
  auto out = clean_pings({ping(0, t, 38.5, -122.8), ping(0, t, 38.5001, -122.8)},
                         250, kStudyStart, kStudyEnd);
  CHECK(out.records.size() == 2);
}

TEST_CASE("cleaning is idempotent and order independent") {
  std::mt19937 rng(11);
  std::uniform_int_distribution<Instant> ts(kStudyStart - 86400,
                                            kStudyEnd + 86400);
  std::uniform_real_distribution<double> acc(0, 500);
  std::uniform_int_distribution<int> dev(0, 4), dup(0, 3);
  std::vector<PingRecord> pings;
  for (int i = 0; i < 400; ++i) {
    PingRecord p = ping(dev(rng), ts(rng), 38.5, -122.8,
                        i % 5 == 0 ? -1 : static_cast<float>(acc(rng)));
    pings.push_back(p);
    if (dup(rng) == 0) pings.push_back(p);
  }
  auto once = clean_pings(pings, 250, kStudyStart, kStudyEnd);
  auto twice = clean_pings(once.records, 250, kStudyStart, kStudyEnd);
  CHECK(twice.records.size() == once.records.size());
  CHECK(twice.report.dropped_duplicate == 0);
  CHECK(twice.report.dropped_inaccurate == 0);
  CHECK(once.report.reconciles());
  CHECK(twice.report.reconciles());

  auto shuffled = pings;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  auto other = clean_pings(shuffled, 250, kStudyStart, kStudyEnd);
  auto key = [](const PingRecord& p) {
    return std::tuple(p.device, p.timestamp, p.lat, p.lon);
  };
  auto as_set = [&](const std::vector<PingRecord>& v) {
    std::set<std::tuple<DeviceId, Instant, double, double>> s;
    for (const auto& p : v) s.insert(key(p));
    return s;
  };
  CHECK(as_set(once.records) == as_set(other.records));
}

TEST_CASE("pre/post split partitions at the ignition instant") {
  Instant ign = *parse_iso8601("2019-10-23T21:00:00Z");
  std::vector<PingRecord> pings;
  for (int i = -5; i < 5; ++i) pings.push_back(ping(0, ign + i * 3600));
  auto [pre, post] = split_pre_post_fire(pings, ign);
  CHECK(pre.size() + post.size() == pings.size());
  CHECK(pre.size() == 5);

  auto [pre1, post1] = split_pre_post_fire({ping(0, ign - 1)}, ign);
  CHECK(pre1.size() == 1);
  auto [pre2, post2] = split_pre_post_fire({ping(0, ign)}, ign);
  CHECK(post2.size() == 1);  // exact ignition is post-fire
}

TEST_CASE("frequent-user filter requires the threshold on every day") {
  TimeZone tz = TimeZone::utc();
  Instant day0 = *parse_iso8601("2019-10-16T00:00:00Z");
  std::vector<std::int64_t> days;
  for (int d = 0; d < 8; ++d) days.push_back((day0 / kSecondsPerDay) + d);

  std::vector<PingRecord> pings;
  auto add_signals = [&](DeviceId dev, int day, int count) {
    for (int i = 0; i < count; ++i)
      pings.push_back(ping(dev, day0 + day * kSecondsPerDay + i * 60));
  };
  // five devices; only d0 and d1 meet >= 20 on every day
  for (int d = 0; d < 8; ++d) {
    add_signals(0, d, 25);
    add_signals(1, d, 20);
    add_signals(2, d, d == 3 ? 19 : 25);  // single-day failure
    add_signals(3, d, 5);
    if (d != 7) add_signals(4, d, 30);  // missing one day entirely
  }
  auto residents = filter_frequent_users(pings, days, 20, tz);
  CHECK(residents == std::set<DeviceId>{0, 1});
}

TEST_CASE("raising the threshold never grows the resident set") {
  TimeZone tz = TimeZone::utc();
  Instant day0 = *parse_iso8601("2019-10-16T00:00:00Z");
  std::vector<std::int64_t> days = {day0 / kSecondsPerDay,
                                    day0 / kSecondsPerDay + 1};
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> count(0, 50);
  std::vector<PingRecord> pings;
  for (DeviceId dev = 0; dev < 30; ++dev)
    for (int d = 0; d < 2; ++d) {
      int n = count(rng);
      for (int i = 0; i < n; ++i)
        pings.push_back(ping(dev, day0 + d * kSecondsPerDay + i * 60));
    }
  std::set<DeviceId> prev;
  bool first = true;
  for (int threshold : {1, 10, 20, 40}) {
    auto cur = filter_frequent_users(pings, days, threshold, tz);
    if (!first)
      CHECK(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
    prev = cur;
    first = false;
  }
}

TEST_CASE("frequent-user days respect the local time zone") {
  TimeZone tz = TimeZone::parse("UTC-08:00");
  // 23:00 local on the 16th is 07:00 UTC on the 17th
  Instant t = *parse_iso8601("2019-10-17T07:00:00Z");
  std::int64_t day16 = *parse_iso8601("2019-10-16") / kSecondsPerDay;
  std::vector<PingRecord> pings(20, ping(7, t));
  for (size_t i = 0; i < pings.size(); ++i) pings[i].timestamp += i;
  CHECK(filter_frequent_users(pings, {day16}, 20, tz) ==
        std::set<DeviceId>{7});
  CHECK(filter_frequent_users(pings, {day16}, 20, TimeZone::utc()).empty());
}

TEST_CASE("group_by_device sorts pings in time") {
  std::vector<PingRecord> pings = {ping(1, 30), ping(0, 20), ping(1, 10)};
  auto traces = group_by_device(pings);
  REQUIRE(traces.size() == 2);
  CHECK(traces[0].device == 0);
  CHECK(traces[1].pings[0].timestamp == 10);
  CHECK(traces[1].pings[1].timestamp == 30);
}
