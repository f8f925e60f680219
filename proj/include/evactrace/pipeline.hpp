#pragma once

// Pipeline orchestration shared by the CLI subcommands: stage runners,
// file formats for every stage boundary, and the run manifest.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "evactrace/classifier.hpp"
#include "evactrace/config.hpp"
#include "evactrace/home.hpp"
#include "evactrace/ingest.hpp"
#include "evactrace/io.hpp"
#include "evactrace/metrics.hpp"
#include "evactrace/scenario.hpp"
#include "evactrace/synth.hpp"

namespace evactrace {

inline constexpr const char* kVersion = "0.1.0";

inline int worker_count(int requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("EVACTRACE_WORKERS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

// Runs fn(i) for i in [0, n) across the given number of threads.
template <typename Fn>
inline void parallel_for(size_t n, int workers, Fn&& fn) {
  if (n == 0) return;
  workers = std::min<size_t>(workers, n);
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> threads;
  std::exception_ptr error;
  std::mutex error_mu;
  for (int w = 0; w < workers; ++w)
    threads.emplace_back([&] {
      try {
        for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        next.store(n);
      }
    });
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

// Grid anchored at the data bounding box's southwest corner, padded by one
// cell on every side.
inline GridSpec grid_from_pings(const std::vector<PingRecord>& pings,
                                double cell_size_m) {
  if (pings.empty()) throw std::invalid_argument("grid_from_pings: no pings");
  GeoPoint sw{90, 180}, ne{-90, -180};
  for (const auto& rec : pings) {
    sw.lat = std::min(sw.lat, rec.lat);
    sw.lon = std::min(sw.lon, rec.lon);
    ne.lat = std::max(ne.lat, rec.lat);
    ne.lon = std::max(ne.lon, rec.lon);
  }
  GridSpec g;
  g.cell_size_m = cell_size_m;
  // pad one and a half cells so rounding never lands data on the border row
  g.origin = unproject({-1.5 * cell_size_m, -1.5 * cell_size_m}, sw);
  PlanarPoint extent = project(ne, g.origin);
  g.n_cols = static_cast<std::int32_t>(extent.east / cell_size_m) + 2;
  g.n_rows = static_cast<std::int32_t>(extent.north / cell_size_m) + 2;
  return g;
}

// ---- file formats ----

inline void write_pings_csv(std::ostream& out,
                            const std::vector<PingRecord>& pings,
                            const DeviceTable& devices) {
  out << "device_id,timestamp,lat,lon,accuracy_m\n";
  char buf[128];
  for (const auto& rec : pings) {
    out << devices.name(rec.device) << ',' << format_iso8601(rec.timestamp);
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,", rec.lat, rec.lon);
    out << buf;
    if (rec.has_accuracy()) out << rec.accuracy_m;
    out << '\n';
  }
}

inline void write_homes_csv(std::ostream& out,
                            const std::map<DeviceId, HomeLocation>& homes,
                            const DeviceTable& devices) {
  out << "device_id,lat,lon,cell_col,cell_row,night_ping_count\n";
  char buf[96];
  for (const auto& [device, h] : homes) {
    std::snprintf(buf, sizeof buf, ",%.10f,%.10f,%d,%d,%u\n", h.point.lat,
                  h.point.lon, h.cell.col, h.cell.row, h.night_ping_count);
    out << devices.name(device) << buf;
  }
}

inline std::map<DeviceId, HomeLocation> read_homes_csv(std::istream& in,
                                                       DeviceTable& devices) {
  std::map<DeviceId, HomeLocation> homes;
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("homes csv: missing header");
  std::vector<std::string_view> f;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    detail::split_fields(line, ',', f);
    if (f.size() != 6) throw std::runtime_error("homes csv: bad row: " + line);
    HomeLocation h;
    h.device = devices.intern(f[0]);
    if (!detail::parse_double(f[1], h.point.lat) ||
        !detail::parse_double(f[2], h.point.lon))
      throw std::runtime_error("homes csv: bad coordinates: " + line);
    h.cell.col = std::stoi(std::string(f[3]));
    h.cell.row = std::stoi(std::string(f[4]));
    h.night_ping_count = static_cast<std::uint32_t>(std::stoul(std::string(f[5])));
    homes.emplace(h.device, h);
  }
  return homes;
}

inline void write_classifications_csv(
    std::ostream& out, const std::vector<ClassificationResult>& results,
    const std::map<DeviceId, HomeLocation>& homes, const DeviceTable& devices) {
  out << "device_id,label,reason_code,home_lat,home_lon,tract_id,zone_id,"
         "t_l,t_e,t_r\n";
  auto opt_time = [](const std::optional<Instant>& t) {
    return t ? format_iso8601(*t) : std::string();
  };
  char buf[64];
  for (const auto& r : results) {
    const HomeLocation& h = homes.at(r.device);
    std::snprintf(buf, sizeof buf, "%.10f,%.10f", h.point.lat, h.point.lon);
    out << devices.name(r.device) << ',' << to_string(r.label) << ','
        << r.reason_code << ',' << buf << ','
        << (r.placement.tract_id ? *r.placement.tract_id : "") << ','
        << r.placement.zone_id << ',' << opt_time(r.t_l) << ','
        << opt_time(r.t_e) << ',' << opt_time(r.t_r) << '\n';
  }
}

inline std::vector<ClassificationResult> read_classifications_csv(
    std::istream& in, DeviceTable& devices) {
  std::vector<ClassificationResult> results;
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("classifications csv: missing header");
  std::vector<std::string_view> f;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    detail::split_fields(line, ',', f);
    if (f.size() != 10)
      throw std::runtime_error("classifications csv: bad row: " + line);
    ClassificationResult r;
    r.device = devices.intern(f[0]);
    auto label = label_from_string(f[1]);
    if (!label)
      throw std::runtime_error("classifications csv: unknown label: " + line);
    r.label = *label;
    r.reason_code = std::string(f[2]);
    // reason codes are branch-prefixed, which recovers the placement class
    r.placement.device = r.device;
    r.placement.location_class = r.reason_code.starts_with("in:")
                                     ? LocationClass::kInZone
                                     : LocationClass::kNearZone;
    if (!f[5].empty()) r.placement.tract_id = std::string(f[5]);
    r.placement.zone_id = std::string(f[6]);
    auto opt_time = [](std::string_view s) -> std::optional<Instant> {
      if (s.empty()) return std::nullopt;
      auto t = parse_instant(s);
      if (!t) throw std::runtime_error("classifications csv: bad timestamp");
      return t;
    };
    r.t_l = opt_time(f[7]);
    r.t_e = opt_time(f[8]);
    r.t_r = opt_time(f[9]);
    results.push_back(std::move(r));
  }
  return results;
}

inline void write_truth_csv(std::ostream& out,
                            const std::vector<TruthRecord>& truth) {
  out << "agent_id,label,t_e,home_lat,home_lon\n";
  char buf[64];
  for (const auto& t : truth) {
    std::snprintf(buf, sizeof buf, "%.10f,%.10f", t.true_home.lat,
                  t.true_home.lon);
    out << t.agent_id << ',' << to_string(t.label) << ','
        << (t.t_e ? format_iso8601(*t.t_e) : std::string()) << ',' << buf
        << '\n';
  }
}

inline nlohmann::json geometry_to_geojson(const ZoneGeometry& g) {
  nlohmann::json rings = nlohmann::json::array();
  for (const auto& r : g.rings) {
    nlohmann::json ring = nlohmann::json::array();
    for (const auto& v : r.vertices)
      ring.push_back(nlohmann::json::array({v.lon, v.lat}));
    rings.push_back(std::move(ring));
  }
  return {{"type", "Polygon"}, {"coordinates", std::move(rings)}};
}

inline nlohmann::json zones_to_geojson(const Scenario& s) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& z : s.zones) {
    nlohmann::json props = {{"zone_id", z.zone_id},
                            {"lifted", format_iso8601(z.lifted)}};
    props["warning_issued"] =
        z.warning_issued ? nlohmann::json(format_iso8601(*z.warning_issued))
                         : nlohmann::json(nullptr);
    props["order_issued"] =
        z.order_issued ? nlohmann::json(format_iso8601(*z.order_issued))
                       : nlohmann::json(nullptr);
    features.push_back({{"type", "Feature"},
                        {"properties", std::move(props)},
                        {"geometry", geometry_to_geojson(z.geometry)}});
  }
  return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

inline nlohmann::json tracts_to_geojson(const Scenario& s) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& t : s.tracts) {
    features.push_back(
        {{"type", "Feature"},
         {"properties", {{"tract_id", t.tract_id}, {"population", t.population}}},
         {"geometry", geometry_to_geojson(t.geometry)}});
  }
  return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

// ---- stage runners ----

struct HomeStage {
  std::set<DeviceId> residents;
  std::map<DeviceId, HomeLocation> homes;
  std::vector<DeviceId> excluded_no_night_pings;
  GridSpec grid;
};

// Splits pre-fire, selects residents, infers a home per resident.
// Parallel across residents.
inline HomeStage run_home_stage(const std::vector<PingRecord>& cleaned,
                                const Config& cfg, int workers) {
  HomeStage stage;
  auto [pre, post] = split_pre_post_fire(cleaned, cfg.ignition);
  if (pre.empty()) return stage;
  auto days = complete_pre_fire_days(cfg);
  stage.residents =
      filter_frequent_users(pre, days, cfg.min_daily_signals, cfg.tz);
  stage.grid = grid_from_pings(cleaned, cfg.cell_size_m);
  NightWindow night{cfg.night_start, cfg.night_end, cfg.tz};

  auto traces = group_by_device(pre);
  std::vector<const DeviceTrace*> resident_traces;
  for (const auto& t : traces)
    if (stage.residents.count(t.device)) resident_traces.push_back(&t);

  std::vector<std::optional<HomeLocation>> out(resident_traces.size());
  parallel_for(resident_traces.size(), workers, [&](size_t i) {
    DeviceTrace nightly = nighttime_filter(*resident_traces[i], night);
    out[i] = infer_home(nightly, stage.grid);
  });
  for (size_t i = 0; i < out.size(); ++i) {
    if (out[i])
      stage.homes.emplace(out[i]->device, *out[i]);
    else
      stage.excluded_no_night_pings.push_back(resident_traces[i]->device);
  }
  return stage;
}

struct ClassifyStage {
  std::map<DeviceId, HomePlacement> placements;
  std::vector<ClassificationResult> results;
  std::uint64_t out_of_scope_count = 0;
};

// Places homes and classifies every in-scope resident. Parallel across
// residents; the scenario is shared read-only.
inline ClassifyStage run_classify_stage(
    const std::vector<PingRecord>& cleaned,
    const std::map<DeviceId, HomeLocation>& homes, const Scenario& s,
    const Config& cfg, int workers) {
  ClassifyStage stage;
  auto [pre, post] = split_pre_post_fire(cleaned, cfg.ignition);
  auto post_traces = group_by_device(post);
  std::map<DeviceId, const DeviceTrace*> trace_index;
  for (const auto& t : post_traces) trace_index[t.device] = &t;

  std::vector<const HomeLocation*> ordered;
  for (const auto& [device, home] : homes) ordered.push_back(&home);

  ClassifierParams params = ClassifierParams::from_config(cfg);
  std::vector<std::optional<ClassificationResult>> out(ordered.size());
  std::vector<HomePlacement> placements(ordered.size());
  parallel_for(ordered.size(), workers, [&](size_t i) {
    const HomeLocation& home = *ordered[i];
    placements[i] = place_home(home, s);
    if (placements[i].location_class == LocationClass::kOutOfScope) return;
    auto it = trace_index.find(home.device);
    if (it == trace_index.end() || it->second->pings.empty()) {
      ClassificationResult r;
      r.device = home.device;
      r.placement = placements[i];
      r.label = ResidentLabel::kUncategorized;
      r.reason_code =
          (placements[i].location_class == LocationClass::kInZone ? "in:"
                                                                  : "out:");
      r.reason_code += "no_post_fire_signals";
      out[i] = std::move(r);
      return;
    }
    auto episodes = detect_absences(*it->second, home, params);
    out[i] = placements[i].location_class == LocationClass::kInZone
                 ? classify_in_zone(episodes, home, placements[i], s)
                 : classify_outside_zone(episodes, home, placements[i], s);
  });
  for (size_t i = 0; i < ordered.size(); ++i) {
    stage.placements.emplace(ordered[i]->device, placements[i]);
    if (out[i])
      stage.results.push_back(std::move(*out[i]));
    else
      ++stage.out_of_scope_count;
  }
  return stage;
}

// ---- metrics emission ----

struct MetricsOptions {
  int horizon_days = 12;
  DenominatorMode denominator = DenominatorMode::kAllResidents;
};

inline void write_metrics_outputs(const std::filesystem::path& outdir,
                                  const std::vector<ClassificationResult>& results,
                                  const std::vector<Tract>& tracts,
                                  const Config& cfg,
                                  const MetricsOptions& opts) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  const TimeInterval period{cfg.ignition,
                            cfg.ignition + opts.horizon_days * kSecondsPerDay};

  // compliance.csv + compliance.geojson
  {
    auto out = open_output((outdir / "compliance.csv").string());
    out << "area_id,period_start,period_end,evacuee_departures,resident_count,"
           "alpha\n";
    nlohmann::json features = nlohmann::json::array();
    for (const auto& t : tracts) {
      auto rec = tract_compliance(results, t.tract_id, period, opts.denominator);
      out << rec.area_id << ',' << format_iso8601(period.start) << ','
          << format_iso8601(period.end) << ',' << rec.evacuee_departures << ','
          << rec.resident_count << ',';
      if (rec.alpha) out << *rec.alpha;
      out << '\n';
      nlohmann::json props = {{"tract_id", t.tract_id},
                              {"population", t.population},
                              {"evacuee_departures", rec.evacuee_departures},
                              {"resident_count", rec.resident_count}};
      props["alpha"] = rec.alpha ? nlohmann::json(*rec.alpha)
                                 : nlohmann::json(nullptr);
      features.push_back({{"type", "Feature"},
                          {"properties", std::move(props)},
                          {"geometry", geometry_to_geojson(t.geometry)}});
    }
    auto gj = open_output((outdir / "compliance.geojson").string());
    gj << nlohmann::json{{"type", "FeatureCollection"},
                         {"features", std::move(features)}}
              .dump(2)
       << '\n';
  }

  // curves.csv + curves.svg
  auto curves = response_curves(results, cfg.ignition, opts.horizon_days);
  {
    auto out = open_output((outdir / "curves.csv").string());
    out << "bin,group,cumulative\n";
    for (const auto& c : curves)
      for (size_t k = 0; k < c.bins.size(); ++k)
        out << format_iso8601(c.bins[k]) << ',' << c.group << ','
            << c.cumulative[k] << '\n';

    std::uint64_t y_max = 1;
    for (const auto& c : curves)
      if (!c.cumulative.empty()) y_max = std::max(y_max, c.cumulative.back());
    const double w = 640, h = 400, ml = 50, mb = 30;
    auto svg = open_output((outdir / "curves.svg").string());
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
        << "\" height=\"" << h << "\">\n";
    const char* colors[] = {"#1f77b4", "#2ca02c", "#ff7f0e", "#d62728",
                            "#000000"};
    for (size_t ci = 0; ci < curves.size(); ++ci) {
      svg << "<polyline fill=\"none\" stroke=\"" << colors[ci % 5]
          << "\" points=\"";
      for (size_t k = 0; k < curves[ci].cumulative.size(); ++k) {
        double x = ml + (w - ml - 10) * k / (curves[ci].cumulative.size() - 1);
        double y = (h - mb) -
                   (h - mb - 10) * curves[ci].cumulative[k] / double(y_max);
        svg << x << ',' << y << ' ';
      }
      svg << "\"/>\n";
    }
    svg << "</svg>\n";
  }

  // proportions.csv, both universes
  {
    auto out = open_output((outdir / "proportions.csv").string());
    out << "universe,label,count,share\n";
    for (auto universe :
         {ProportionUniverse::kAllInScope, ProportionUniverse::kInZoneOnly}) {
      const char* name =
          universe == ProportionUniverse::kAllInScope ? "ALL_IN_SCOPE"
                                                      : "IN_ZONE_ONLY";
      bool any = false;
      for (const auto& r : results) {
        if (universe == ProportionUniverse::kInZoneOnly &&
            r.placement.location_class != LocationClass::kInZone)
          continue;
        any = true;
        break;
      }
      if (!any) continue;
      auto gp = group_proportions(results, universe);
      for (const auto& [label, count] : gp.counts)
        out << name << ',' << to_string(label) << ',' << count << ','
            << gp.shares.at(label) << '\n';
    }
  }

  // regression.txt: sampling-bias OLS + per-tract sampling rates
  {
    auto out = open_output((outdir / "regression.txt").string());
    std::map<std::string, std::pair<std::int64_t, std::int64_t>> per_tract;
    for (const auto& t : tracts) per_tract[t.tract_id] = {0, t.population};
    for (const auto& r : results)
      if (r.placement.tract_id) ++per_tract[*r.placement.tract_id].first;
    std::vector<double> xs, ys;
    for (const auto& [tract, counts] : per_tract) {
      xs.push_back(static_cast<double>(counts.second));
      ys.push_back(static_cast<double>(counts.first));
    }
    try {
      auto fit = ols_fit(xs, ys);
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "slope %.10g\nintercept %.10g\nr_squared %.10g\n"
                    "p_value %.6g\nn_points %d\n",
                    fit.slope, fit.intercept, fit.r_squared, fit.p_value,
                    fit.n_points);
      out << buf;
    } catch (const std::exception& e) {
      out << "regression_error " << e.what() << '\n';
    }
    out << "\n# tract_id inferred population rate\n";
    auto rates = sampling_rates(per_tract);
    for (const auto& [tract, counts] : per_tract) {
      out << tract << ' ' << counts.first << ' ' << counts.second << ' ';
      if (rates.at(tract)) out << *rates.at(tract);
      else out << "undefined";
      out << '\n';
    }
  }
}

// ---- run manifest ----

class StageTimer {
 public:
  void record(const std::string& stage, std::uint64_t records, double seconds) {
    stages_.push_back({{"stage", stage},
                       {"records", records},
                       {"seconds", seconds}});
  }
  nlohmann::json stages() const { return stages_; }

 private:
  nlohmann::json stages_ = nlohmann::json::array();
};

inline nlohmann::json make_manifest(
    const Config& cfg, const std::map<std::string, std::string>& input_digests,
    const StageTimer& timer) {
  nlohmann::json cfg_json;
  for (const auto& [k, v] : cfg.to_map()) cfg_json[k] = v;
  return {{"version", kVersion},
          {"config", std::move(cfg_json)},
          {"inputs", input_digests},
          {"stages", timer.stages()}};
}

}  // namespace evactrace
