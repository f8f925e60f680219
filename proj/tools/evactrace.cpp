// evactrace — batch pipeline from raw GPS pings to evacuation-behavior
// labels and compliance metrics. Subcommands mirror the pipeline stages;
// run-all chains them with on-disk checkpoints and a run manifest.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "evactrace/pipeline.hpp"

namespace fs = std::filesystem;
using namespace evactrace;

namespace {

// Input/schema problems exit with code 2; other runtime failures with 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path))
    throw UsageError(std::string(what) + " not found: " + path);
}

Config load_config_checked(const std::string& path) {
  require_file(path, "config file");
  try {
    return Config::load(path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

struct StageCounts {
  std::uint64_t records = 0;
};

std::uint64_t stage_clean(const std::string& pings_path, const Config& cfg,
                          const std::string& out_path,
                          const std::string& errlog_path,
                          CleaningReport* report_out = nullptr) {
  auto in = open_input(pings_path);
  DeviceTable devices;
  ParseResult parsed;
  try {
    parsed = parse_pings(*in, ColumnMapping{}, devices);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (!errlog_path.empty()) {
    auto log = open_output(errlog_path);
    for (const auto& err : parsed.errors)
      log << "line " << err.line << ": " << err.message << '\n';
  } else {
    for (const auto& err : parsed.errors)
      std::cerr << "parse error, line " << err.line << ": " << err.message
                << '\n';
  }
  auto cleaned = clean_pings(parsed.records, cfg.accuracy_max_m,
                             cfg.study_start, cfg.study_end);
  auto out = open_output(out_path);
  write_pings_csv(out, cleaned.records, devices);
  if (report_out) *report_out = cleaned.report;
  return cleaned.report.retained_count;
}

std::uint64_t stage_infer_homes(const std::string& pings_path,
                                const Config& cfg, const std::string& out_path,
                                int workers) {
  auto in = open_input(pings_path);
  DeviceTable devices;
  ParseResult parsed = parse_pings(*in, ColumnMapping{}, devices);
  HomeStage stage = run_home_stage(parsed.records, cfg, workers);
  auto out = open_output(out_path);
  write_homes_csv(out, stage.homes, devices);
  if (stage.homes.empty())
    std::cerr << "warning: no homes inferred (no daily-frequent users?)\n";
  if (!stage.excluded_no_night_pings.empty())
    std::cerr << "note: " << stage.excluded_no_night_pings.size()
              << " resident(s) excluded for lack of nighttime pings\n";
  return stage.homes.size();
}

std::uint64_t stage_classify(const std::string& pings_path,
                             const std::string& homes_path,
                             const std::string& zones_path,
                             const std::string& tracts_path, const Config& cfg,
                             const std::string& out_path, int workers) {
  require_file(homes_path, "homes file");
  require_file(zones_path, "zones file");
  require_file(tracts_path, "tracts file");
  auto zones_in = open_input(zones_path);
  auto tracts_in = open_input(tracts_path);
  Scenario scenario = load_scenario(*zones_in, *tracts_in, cfg);

  DeviceTable devices;
  auto pings_in = open_input(pings_path);
  ParseResult parsed = parse_pings(*pings_in, ColumnMapping{}, devices);
  auto homes_in = open_input(homes_path);
  auto homes = read_homes_csv(*homes_in, devices);

  ClassifyStage stage =
      run_classify_stage(parsed.records, homes, scenario, cfg, workers);
  auto out = open_output(out_path);
  write_classifications_csv(out, stage.results, homes, devices);
  if (stage.out_of_scope_count > 0)
    std::cerr << "note: " << stage.out_of_scope_count
              << " resident(s) out of scope (beyond the shadow buffer)\n";
  return stage.results.size();
}

std::uint64_t stage_metrics(const std::string& classifications_path,
                            const std::string& tracts_path, const Config& cfg,
                            const std::string& outdir,
                            const MetricsOptions& opts) {
  require_file(classifications_path, "classifications file");
  require_file(tracts_path, "tracts file");
  DeviceTable devices;
  auto cls_in = open_input(classifications_path);
  auto results = read_classifications_csv(*cls_in, devices);
  auto tracts_in = open_input(tracts_path);
  nlohmann::json doc;
  *tracts_in >> doc;
  std::vector<Tract> tracts;
  for (const auto& f : doc.at("features")) {
    Tract t;
    t.tract_id = f.at("properties").at("tract_id").get<std::string>();
    t.population = f.at("properties").at("population").get<std::int64_t>();
    t.geometry = geojson::parse_geometry(f.at("geometry"), t.tract_id);
    tracts.push_back(std::move(t));
  }
  write_metrics_outputs(outdir, results, tracts, cfg, opts);
  return results.size();
}

std::vector<std::pair<ResidentLabel, double>> parse_mix(const std::string& spec) {
  static const std::map<std::string, ResidentLabel> aliases = {
      {"self", ResidentLabel::kSelfEvacuee},
      {"shadow", ResidentLabel::kShadowEvacuee},
      {"warning", ResidentLabel::kEvacueeUnderWarning},
      {"ordered", ResidentLabel::kOrderedEvacuee},
      {"stay_in", ResidentLabel::kNonEvacueeInZone},
      {"stay_out", ResidentLabel::kNonEvacueeOutsideZone},
      {"uncat", ResidentLabel::kUncategorized},
  };
  std::vector<std::pair<ResidentLabel, double>> mix;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw UsageError("mix entries look like self=0.33: " + item);
    std::string key = item.substr(0, eq);
    auto it = aliases.find(key);
    if (it == aliases.end()) throw UsageError("unknown mix group: " + key);
    mix.emplace_back(it->second, std::stod(item.substr(eq + 1)));
  }
  if (mix.empty()) throw UsageError("empty mix");
  return mix;
}

void run_synth(const std::string& tmpl_name, int n, const std::string& mix_spec,
               std::uint64_t seed, double noise_m, double rate,
               const std::string& outdir) {
  auto tmpl = template_from_string(tmpl_name);
  if (!tmpl) throw UsageError("unknown template: " + tmpl_name);
  SynthParams params;
  params.tmpl = *tmpl;
  params.n_agents = n;
  params.seed = seed;
  params.position_noise_m = noise_m;
  params.ping_rate_per_hour = rate;
  if (!mix_spec.empty()) params.mix = parse_mix(mix_spec);

  SyntheticDataset ds = generate_dataset(params);
  fs::create_directories(outdir);
  fs::path dir(outdir);
  {
    auto out = open_output((dir / "pings.csv").string());
    write_pings_csv(out, ds.pings, ds.devices);
  }
  {
    auto out = open_output((dir / "truth.csv").string());
    write_truth_csv(out, ds.truth);
  }
  open_output((dir / "zones.geojson").string())
      << zones_to_geojson(ds.scenario).dump(2) << '\n';
  open_output((dir / "tracts.geojson").string())
      << tracts_to_geojson(ds.scenario).dump(2) << '\n';
  {
    auto out = open_output((dir / "config.txt").string());
    for (const auto& [k, v] : ds.config.to_map()) out << k << " = " << v << '\n';
  }
  std::cout << "synth: " << ds.truth.size() << " agents, " << ds.pings.size()
            << " pings -> " << outdir << '\n';
}

int run_all(const std::string& pings, const std::string& zones,
            const std::string& tracts, const std::string& config_path,
            const std::string& outdir, const MetricsOptions& opts,
            int workers) {
  Config cfg = load_config_checked(config_path);
  require_file(pings, "pings file");
  require_file(zones, "zones file");
  require_file(tracts, "tracts file");
  fs::create_directories(outdir);
  fs::path dir(outdir);
  std::vector<fs::path> written;
  StageTimer timer;
  auto timed = [&](const char* name, const fs::path& artifact, auto&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    std::uint64_t n = fn();
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                      .count();
    timer.record(name, n, secs);
    if (!artifact.empty()) written.push_back(artifact);
    std::cout << name << ": " << n << " records in " << secs << " s\n";
  };
  const fs::path cleaned = dir / "cleaned.csv";
  const fs::path homes = dir / "homes.csv";
  const fs::path classifications = dir / "classifications.csv";
  try {
    timed("clean", cleaned, [&] {
      return stage_clean(pings, cfg, cleaned.string(),
                         (dir / "parse_errors.log").string());
    });
    timed("infer_homes", homes, [&] {
      return stage_infer_homes(cleaned.string(), cfg, homes.string(), workers);
    });
    timed("classify", classifications, [&] {
      return stage_classify(cleaned.string(), homes.string(), zones, tracts,
                            cfg, classifications.string(), workers);
    });
    timed("metrics", {}, [&] {
      return stage_metrics(classifications.string(), tracts, cfg,
                           dir.string(), opts);
    });
  } catch (...) {
    // a half-written checkpoint must not look like a finished run
    for (const auto& p : written) fs::remove(p);
    fs::remove(dir / "cleaned.csv");
    throw;
  }
  std::map<std::string, std::string> digests = {
      {"pings", file_digest_hex(pings)},
      {"zones", file_digest_hex(zones)},
      {"tracts", file_digest_hex(tracts)},
  };
  open_output((dir / "manifest.json").string())
      << make_manifest(cfg, digests, timer).dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wildfire evacuation behavior inference pipeline"};
  app.require_subcommand(1);
  int workers = 0;
  app.add_option("--workers", workers, "worker thread count (default: cores)");

  std::string pings, config_path, out, errlog, homes, zones, tracts, outdir;
  std::string classifications, tmpl_name = "BASIC", mix_spec;
  int n_agents = 100, horizon = 12;
  std::uint64_t seed = 1;
  double noise_m = 30.0, rate = 4.0;
  bool categorized_only = false;

  auto* clean = app.add_subcommand("clean", "parse, validate and clean pings");
  clean->add_option("--pings", pings)->required();
  clean->add_option("--config", config_path)->required();
  clean->add_option("--out", out)->required();
  clean->add_option("--error-log", errlog, "parse-error log path");

  auto* infer = app.add_subcommand("infer-homes", "infer resident homes");
  infer->add_option("--pings", pings)->required();
  infer->add_option("--config", config_path)->required();
  infer->add_option("--out", out)->required();

  auto* classify = app.add_subcommand("classify", "label evacuation behavior");
  classify->add_option("--pings", pings)->required();
  classify->add_option("--homes", homes)->required();
  classify->add_option("--zones", zones)->required();
  classify->add_option("--tracts", tracts)->required();
  classify->add_option("--config", config_path)->required();
  classify->add_option("--out", out)->required();

  auto* metrics = app.add_subcommand("metrics", "aggregate classifications");
  metrics->add_option("--classifications", classifications)->required();
  metrics->add_option("--tracts", tracts)->required();
  metrics->add_option("--config", config_path)->required();
  metrics->add_option("--outdir", outdir)->required();
  metrics->add_flag("--categorized-only", categorized_only,
                    "drop uncategorized residents from compliance denominators");
  metrics->add_option("--horizon-days", horizon);

  auto* synth = app.add_subcommand("synth", "generate a synthetic bundle");
  synth->add_option("--template", tmpl_name, "BASIC | ORDER_FIRST | OVERLAPPING");
  synth->add_option("--n", n_agents)->required();
  synth->add_option("--mix", mix_spec, "e.g. self=0.33,shadow=0.23,ordered=0.44");
  synth->add_option("--seed", seed);
  synth->add_option("--noise-m", noise_m, "positional noise sigma, meters");
  synth->add_option("--rate", rate, "pings per hour");
  synth->add_option("--outdir", outdir)->required();

  auto* runall = app.add_subcommand("run-all", "full pipeline with manifest");
  runall->add_option("--pings", pings)->required();
  runall->add_option("--zones", zones)->required();
  runall->add_option("--tracts", tracts)->required();
  runall->add_option("--config", config_path)->required();
  runall->add_option("--outdir", outdir)->required();
  runall->add_flag("--categorized-only", categorized_only);
  runall->add_option("--horizon-days", horizon);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  MetricsOptions opts;
  opts.horizon_days = horizon;
  opts.denominator = categorized_only ? DenominatorMode::kCategorizedOnly
                                      : DenominatorMode::kAllResidents;
  const int nworkers = worker_count(workers);

  try {
    if (clean->parsed()) {
      Config cfg = load_config_checked(config_path);
      require_file(pings, "pings file");
      CleaningReport report;
      stage_clean(pings, cfg, out, errlog, &report);
      std::cout << "input " << report.input_count << ", retained "
                << report.retained_count << ", dropped_inaccurate "
                << report.dropped_inaccurate << ", dropped_duplicate "
                << report.dropped_duplicate << ", dropped_out_of_bounds "
                << report.dropped_out_of_bounds << '\n';
    } else if (infer->parsed()) {
      Config cfg = load_config_checked(config_path);
      require_file(pings, "pings file");
      std::cout << stage_infer_homes(pings, cfg, out, nworkers)
                << " homes -> " << out << '\n';
    } else if (classify->parsed()) {
      Config cfg = load_config_checked(config_path);
      require_file(pings, "pings file");
      std::cout << stage_classify(pings, homes, zones, tracts, cfg, out,
                                  nworkers)
                << " classifications -> " << out << '\n';
    } else if (metrics->parsed()) {
      Config cfg = load_config_checked(config_path);
      stage_metrics(classifications, tracts, cfg, outdir, opts);
      std::cout << "metrics -> " << outdir << '\n';
    } else if (synth->parsed()) {
      run_synth(tmpl_name, n_agents, mix_spec, seed, noise_m, rate, outdir);
    } else if (runall->parsed()) {
      return run_all(pings, zones, tracts, config_path, outdir, opts, nworkers);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
