#include <catch_amalgamated.hpp>

#include <random>

#include "evactrace/geo.hpp"

using namespace evactrace;

namespace {

// Independent point-in-polygon oracle: winding number with exact angle
// accumulation. Used only to cross-check the even-odd ray caster.
bool winding_contains(const Ring& ring, const GeoPoint& p) {
  double winding = 0;
  const auto& v = ring.vertices;
  for (size_t i = 0; i + 1 < v.size(); ++i) {
    double ax = v[i].lon - p.lon, ay = v[i].lat - p.lat;
    double bx = v[i + 1].lon - p.lon, by = v[i + 1].lat - p.lat;
    winding += std::atan2(ax * by - ay * bx, ax * bx + ay * by);
  }
  return std::abs(winding) > kPi;  // ~2*pi inside, ~0 outside
}

Ring square(double lat0, double lon0, double lat1, double lon1) {
  return Ring{{{lat0, lon0}, {lat0, lon1}, {lat1, lon1}, {lat1, lon0},
               {lat0, lon0}}};
}

}  // namespace

TEST_CASE("projection basics") {
  GeoPoint origin{38.5, -122.8};
  auto at_origin = project(origin, origin);
  CHECK(at_origin.east == Catch::Approx(0.0).margin(1e-12));
  CHECK(at_origin.north == Catch::Approx(0.0).margin(1e-12));

  // R * dlat for one millidegree north
  GeoPoint north{38.501, -122.8};
  CHECK(project(north, origin).north == Catch::Approx(111.1949).margin(0.05));
}

TEST_CASE("projection round trip under 1e-9 degrees") {
  GeoPoint origin{38.5, -122.8};
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> dlat(-1.5, 1.5), dlon(-1.8, 1.8);
  for (int i = 0; i < 1000; ++i) {
    GeoPoint p{38.5 + dlat(rng), -122.8 + dlon(rng)};
    GeoPoint back = unproject(project(p, origin), origin);
    CHECK(std::abs(back.lat - p.lat) < 1e-9);
    CHECK(std::abs(back.lon - p.lon) < 1e-9);
  }
}

TEST_CASE("grid indexing and centroids") {
  GridSpec g{{38.5, -122.8}, 20.0, 100, 100};
  CHECK(g.cell_index(unproject({10, 10}, g.origin)) == CellIndex{0, 0});
  CHECK(g.cell_index(unproject({25, 5}, g.origin)) == CellIndex{1, 0});
  // left-closed cells: a point on the shared edge belongs to the next cell
  CHECK(g.cell_index(unproject({20, 0}, g.origin)) == CellIndex{1, 0});
  CHECK_THROWS_AS(g.cell_index(unproject({-5, 0}, g.origin)),
                  std::out_of_range);

  GeoPoint c00 = g.cell_centroid({0, 0});
  auto planar = project(c00, g.origin);
  CHECK(planar.east == Catch::Approx(10.0).margin(1e-6));
  CHECK(planar.north == Catch::Approx(10.0).margin(1e-6));
  auto c32 = project(g.cell_centroid({3, 2}), g.origin);
  CHECK(c32.east == Catch::Approx(70.0).margin(1e-6));
  CHECK(c32.north == Catch::Approx(50.0).margin(1e-6));
}

TEST_CASE("cell_index of cell_centroid is the identity") {
  GridSpec g{{38.5, -122.8}, 20.0, 200, 150};
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> col(0, 199), row(0, 149);
  for (int i = 0; i < 500; ++i) {
    CellIndex c{col(rng), row(rng)};
    CHECK(g.cell_index(g.cell_centroid(c)) == c);
  }
}

TEST_CASE("haversine fixed values and metric properties") {
  GeoPoint a{38.0, -122.0}, b{38.0, -121.0};
  CHECK(haversine_km(a, a) == 0.0);
  CHECK(haversine_km(a, b) == Catch::Approx(87.6224).margin(0.2));
  CHECK(haversine_km(a, b) == haversine_km(b, a));

  std::mt19937 rng(99);
  std::uniform_real_distribution<double> lat(-80, 80), lon(-179, 179);
  for (int i = 0; i < 300; ++i) {
    GeoPoint p{lat(rng), lon(rng)}, q{lat(rng), lon(rng)}, r{lat(rng), lon(rng)};
    CHECK(haversine_km(p, q) >= 0);
    CHECK(haversine_km(p, q) + haversine_km(q, r) >=
          haversine_km(p, r) - 1e-9);
  }
}

TEST_CASE("containment basics") {
  ZoneGeometry z;
  z.rings.push_back(square(0, 0, 1, 1));
  z.validate();
  CHECK(z.contains({0.5, 0.5}));
  CHECK_FALSE(z.contains({1.5, 0.5}));
  // boundary counts as inside
  CHECK(z.contains({0.0, 0.5}));
  CHECK(z.contains({0.0, 0.0}));
}

TEST_CASE("point in a hole is outside") {
  ZoneGeometry z;
  z.rings.push_back(square(0, 0, 1, 1));
  z.rings.push_back(square(0.4, 0.4, 0.6, 0.6));  // hole via even-odd
  CHECK_FALSE(z.contains({0.5, 0.5}));
  CHECK(z.contains({0.2, 0.2}));
}

TEST_CASE("degenerate ring rejected at load") {
  ZoneGeometry z;
  z.rings.push_back(Ring{{{0, 0}, {1, 1}, {0, 0}}});
  CHECK_THROWS(z.validate());
}

TEST_CASE("ray caster agrees with winding-number oracle") {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    // random star-shaped polygon around a center
    int n = 5 + trial % 7;
    Ring ring;
    std::vector<double> angles;
    for (int i = 0; i < n; ++i) angles.push_back(unit(rng) * 2 * kPi);
    std::sort(angles.begin(), angles.end());
    for (double a : angles) {
      double r = 0.2 + unit(rng) * 0.8;
      ring.vertices.push_back({0.5 + r * std::sin(a), 0.5 + r * std::cos(a)});
    }
    ring.vertices.push_back(ring.vertices.front());
    ZoneGeometry z;
    z.rings.push_back(ring);
    for (int i = 0; i < 600; ++i) {
      GeoPoint p{unit(rng) * 2 - 0.5, unit(rng) * 2 - 0.5};
      CHECK(z.contains(p) == winding_contains(ring, p));
      ++checked;
    }
  }
  CHECK(checked >= 10000);
}

TEST_CASE("distance to boundary") {
  // ~1 km square near the equator, point 1 km east of its east edge
  double d = 1.0 / 111.19492664;  // one km in degrees of latitude
  ZoneGeometry z;
  z.rings.push_back(square(0, 0, d, d));
  GeoPoint p{d / 2, 2 * d};
  CHECK(z.distance_to_boundary_km(p) == Catch::Approx(1.0).margin(0.01));

  // nearest feature is a vertex, not an edge line
  GeoPoint diag{-d, 2 * d};
  double expect = haversine_km({0, d}, diag);
  CHECK(z.distance_to_boundary_km(diag) == Catch::Approx(expect).margin(0.02));

  // monotone approach toward the edge
  double prev = 1e9;
  for (double lon = 3 * d; lon > 1.1 * d; lon -= 0.1 * d) {
    double cur = z.distance_to_boundary_km({d / 2, lon});
    CHECK(cur < prev);
    prev = cur;
  }
  CHECK_THROWS_AS(z.distance_to_boundary_km({d / 2, d / 2}), std::logic_error);
}

TEST_CASE("five miles in km") {
  CHECK(5.0 * kKmPerMile == Catch::Approx(8.04672).epsilon(1e-9));
}
