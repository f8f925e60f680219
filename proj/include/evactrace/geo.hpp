#pragma once

// Geometric primitives shared by the spatial logic: a local equirectangular
// projection, metric grid indexing, great-circle distance, and polygon
// containment / boundary-distance queries.
//
// The projection is local equirectangular rather than UTM: study areas are
// county-scale, where the error is well under 0.1%, and it keeps the library
// dependency-free.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace evactrace {

constexpr double kEarthRadiusM = 6'371'000.0;
constexpr double kEarthRadiusKm = 6'371.0;
constexpr double kKmPerMile = 1.609344;
constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

struct GeoPoint {
  double lat = 0;
  double lon = 0;

  bool valid() const {
    return lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0;
  }
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

// Planar point in the local projection, meters east/north of the origin.
struct PlanarPoint {
  double east = 0;
  double north = 0;
};

inline PlanarPoint project(const GeoPoint& p, const GeoPoint& origin) {
  const double cos_lat0 = std::cos(deg2rad(origin.lat));
  return {kEarthRadiusM * deg2rad(p.lon - origin.lon) * cos_lat0,
          kEarthRadiusM * deg2rad(p.lat - origin.lat)};
}

inline GeoPoint unproject(const PlanarPoint& q, const GeoPoint& origin) {
  const double cos_lat0 = std::cos(deg2rad(origin.lat));
  return {origin.lat + rad2deg(q.north / kEarthRadiusM),
          origin.lon + rad2deg(q.east / (kEarthRadiusM * cos_lat0))};
}

struct CellIndex {
  std::int32_t col = 0;
  std::int32_t row = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

struct GridSpec {
  GeoPoint origin;  // southwest corner of the study bounding box
  double cell_size_m = 20.0;
  std::int32_t n_cols = 0;
  std::int32_t n_rows = 0;

  // Cells are left-closed: a point on the shared edge belongs to the
  // higher-index cell.
  CellIndex cell_index(const GeoPoint& p) const {
    PlanarPoint q = project(p, origin);
    auto col = static_cast<std::int64_t>(std::floor(q.east / cell_size_m));
    auto row = static_cast<std::int64_t>(std::floor(q.north / cell_size_m));
    if (col < 0 || row < 0 || col >= n_cols || row >= n_rows)
      throw std::out_of_range("point outside grid");
    return {static_cast<std::int32_t>(col), static_cast<std::int32_t>(row)};
  }

  bool in_bounds(const GeoPoint& p) const {
    PlanarPoint q = project(p, origin);
    double col = std::floor(q.east / cell_size_m);
    double row = std::floor(q.north / cell_size_m);
    return col >= 0 && row >= 0 && col < n_cols && row < n_rows;
  }

  GeoPoint cell_centroid(const CellIndex& c) const {
    return unproject({(c.col + 0.5) * cell_size_m, (c.row + 0.5) * cell_size_m},
                     origin);
  }
};

inline double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = deg2rad(a.lat), phi2 = deg2rad(b.lat);
  const double dphi = phi2 - phi1;
  const double dlam = deg2rad(b.lon - a.lon);
  const double s = std::sin(dphi / 2), t = std::sin(dlam / 2);
  const double h = s * s + std::cos(phi1) * std::cos(phi2) * t * t;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

// One closed ring of a polygon; first vertex equals the last. Outer rings
// are counterclockwise, holes clockwise.
struct Ring {
  std::vector<GeoPoint> vertices;

  // Signed area in degree^2; positive for counterclockwise.
  double signed_area() const {
    double a = 0;
    for (size_t i = 0; i + 1 < vertices.size(); ++i)
      a += vertices[i].lon * vertices[i + 1].lat -
           vertices[i + 1].lon * vertices[i].lat;
    return a / 2;
  }
};

namespace detail {

// Distance from point p to segment [a, b] in a shared local projection, km.
inline double point_segment_km(const PlanarPoint& p, const PlanarPoint& a,
                               const PlanarPoint& b) {
  const double vx = b.east - a.east, vy = b.north - a.north;
  const double wx = p.east - a.east, wy = p.north - a.north;
  const double vv = vx * vx + vy * vy;
  double t = vv > 0 ? (wx * vx + wy * vy) / vv : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = wx - t * vx, dy = wy - t * vy;
  return std::sqrt(dx * dx + dy * dy) / 1000.0;
}

// Is q on segment [a, b]?  Exact-arithmetic-free; adequate at input precision.
inline bool on_segment(const GeoPoint& q, const GeoPoint& a,
                       const GeoPoint& b) {
  const double cross = (b.lon - a.lon) * (q.lat - a.lat) -
                       (b.lat - a.lat) * (q.lon - a.lon);
  if (std::abs(cross) > 1e-12) return false;
  return q.lon >= std::min(a.lon, b.lon) - 1e-12 &&
         q.lon <= std::max(a.lon, b.lon) + 1e-12 &&
         q.lat >= std::min(a.lat, b.lat) - 1e-12 &&
         q.lat <= std::max(a.lat, b.lat) + 1e-12;
}

}  // namespace detail

// Polygonal zone geometry. All rings of all member polygons are stored flat;
// containment is even-odd over every ring, so holes subtract naturally.
struct ZoneGeometry {
  std::vector<Ring> rings;

  void validate() const {
    for (const auto& r : rings) {
      if (r.vertices.size() < 4)
        throw std::invalid_argument("degenerate ring (< 4 vertices)");
      if (!(r.vertices.front() == r.vertices.back()))
        throw std::invalid_argument("ring not closed");
      for (const auto& v : r.vertices)
        if (!v.valid()) throw std::invalid_argument("ring vertex out of range");
    }
  }

  // Even-odd ray casting; boundary points count as inside.
  bool contains(const GeoPoint& p) const {
    bool inside = false;
    for (const auto& ring : rings) {
      const auto& v = ring.vertices;
      for (size_t i = 0; i + 1 < v.size(); ++i) {
        if (detail::on_segment(p, v[i], v[i + 1])) return true;
        const bool cross_lat =
            (v[i].lat > p.lat) != (v[i + 1].lat > p.lat);
        if (cross_lat) {
          const double x = v[i].lon + (p.lat - v[i].lat) *
                                          (v[i + 1].lon - v[i].lon) /
                                          (v[i + 1].lat - v[i].lat);
          if (x > p.lon) inside = !inside;
        }
      }
    }
    return inside;
  }

  // Minimum distance from an exterior point to any boundary segment, km.
  double distance_to_boundary_km(const GeoPoint& p) const {
    if (contains(p))
      throw std::logic_error("distance_to_boundary_km: point inside geometry");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& ring : rings) {
      const auto& v = ring.vertices;
      for (size_t i = 0; i + 1 < v.size(); ++i) {
        PlanarPoint a = project(v[i], p);
        PlanarPoint b = project(v[i + 1], p);
        best = std::min(best, detail::point_segment_km({0, 0}, a, b));
      }
    }
    return best;
  }

  // Axis-aligned bounding box over all rings.
  void bounds(GeoPoint& sw, GeoPoint& ne) const {
    sw = {90, 180};
    ne = {-90, -180};
    for (const auto& r : rings)
      for (const auto& v : r.vertices) {
        sw.lat = std::min(sw.lat, v.lat);
        sw.lon = std::min(sw.lon, v.lon);
        ne.lat = std::max(ne.lat, v.lat);
        ne.lon = std::max(ne.lon, v.lon);
      }
  }
};

}  // namespace evactrace
