#include <catch_amalgamated.hpp>

#include "evactrace/time.hpp"

using namespace evactrace;

TEST_CASE("iso8601 round trip") {
  auto t = parse_iso8601("2019-10-20T03:00:00Z");
  REQUIRE(t.has_value());
  CHECK(format_iso8601(*t) == "2019-10-20T03:00:00Z");
  CHECK(*t == 1571540400);
}

TEST_CASE("iso8601 variants") {
  CHECK(parse_iso8601("2019-10-20") == parse_iso8601("2019-10-20T00:00:00Z"));
  CHECK(parse_iso8601("2019-10-20T03:00:00") ==
        parse_iso8601("2019-10-20T03:00:00Z"));
  CHECK(parse_iso8601("2019-10-20T03:00:00-07:00") ==
        parse_iso8601("2019-10-20T10:00:00Z"));
  CHECK(parse_iso8601("2019-10-20T03:00:00.512Z") ==
        parse_iso8601("2019-10-20T03:00:00Z"));
  CHECK_FALSE(parse_iso8601("2019-13-20T03:00:00Z").has_value());
  CHECK_FALSE(parse_iso8601("not a time").has_value());
}

TEST_CASE("epoch seconds accepted") {
  CHECK(parse_instant("1571540400") == 1571540400);
  CHECK(parse_instant("2019-10-20T03:00:00Z") == 1571540400);
}

TEST_CASE("civil calendar round trips across epochs") {
  for (Instant t : {Instant{0}, Instant{-1}, Instant{951868800},
                    Instant{1572566400}, Instant{4102444800}}) {
    CHECK(instant_from_civil(civil_from_instant(t)) == t);
  }
}

TEST_CASE("fixed-offset zones") {
  TimeZone tz = TimeZone::parse("UTC-08:00");
  Instant t = *parse_iso8601("2019-10-20T03:30:00Z");
  CHECK(tz.local_seconds_of_day(t) == 19 * 3600 + 1800);
  CHECK(tz.local_day(t) == *parse_iso8601("2019-10-19") / kSecondsPerDay);
  CHECK(TimeZone::parse("+0530").offset_at(t) == 5 * 3600 + 30 * 60);
  CHECK_THROWS(TimeZone::parse("Mars/Olympus"));
}

TEST_CASE("us dst boundaries for pacific time") {
  TimeZone tz = TimeZone::parse("America/Los_Angeles");
  // Kincade window straddles the November 2019 fall-back (Nov 3, 02:00).
  CHECK(tz.offset_at(*parse_iso8601("2019-10-27T12:00:00Z")) == -7 * 3600);
  CHECK(tz.offset_at(*parse_iso8601("2019-11-04T12:00:00Z")) == -8 * 3600);
  // transition instant: 09:00 UTC on Nov 3 is 02:00 PDT -> 01:00 PST
  CHECK(tz.offset_at(*parse_iso8601("2019-11-03T08:59:59Z")) == -7 * 3600);
  CHECK(tz.offset_at(*parse_iso8601("2019-11-03T09:00:00Z")) == -8 * 3600);
  // spring forward 2019: March 10, 02:00 PST -> 10:00 UTC
  CHECK(tz.offset_at(*parse_iso8601("2019-03-10T09:59:59Z")) == -8 * 3600);
  CHECK(tz.offset_at(*parse_iso8601("2019-03-10T10:00:00Z")) == -7 * 3600);
}

TEST_CASE("clock time parsing") {
  CHECK(ClockTime::parse("22:00")->seconds_of_day == 22 * 3600);
  CHECK(ClockTime::parse("06:30:15")->seconds_of_day ==
        6 * 3600 + 30 * 60 + 15);
  CHECK_FALSE(ClockTime::parse("25:00").has_value());
  CHECK_FALSE(ClockTime::parse("2200").has_value());
}
