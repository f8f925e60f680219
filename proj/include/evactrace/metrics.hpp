#pragma once

// Aggregations over classification results: compliance rates, cumulative
// response curves, group proportions, and the sampling-bias regression.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evactrace/classifier.hpp"

namespace evactrace {

struct TimeInterval {
  Instant start = 0;
  Instant end = 0;  // exclusive

  bool contains(Instant t) const { return t >= start && t < end; }
};

struct ComplianceRecord {
  std::string area_id;
  TimeInterval period;
  std::uint64_t evacuee_departures = 0;  // M
  std::uint64_t resident_count = 0;      // N
  std::optional<double> alpha;           // absent when N = 0
};

enum class DenominatorMode { kAllResidents, kCategorizedOnly };

// Compliance rate: evacuee departures in the period over residents
// living in the area. in_area keys on the placement (tract or zone id).
template <typename AreaPred>
inline ComplianceRecord compliance_rate(
    const std::vector<ClassificationResult>& results, std::string area_id,
    TimeInterval period, AreaPred&& in_area,
    DenominatorMode mode = DenominatorMode::kAllResidents) {
  ComplianceRecord rec;
  rec.area_id = std::move(area_id);
  rec.period = period;
  for (const auto& r : results) {
    if (!in_area(r)) continue;
    if (mode == DenominatorMode::kCategorizedOnly &&
        r.label == ResidentLabel::kUncategorized)
      continue;
    ++rec.resident_count;
    if (r.t_e && period.contains(*r.t_e)) ++rec.evacuee_departures;
  }
  if (rec.resident_count > 0)
    rec.alpha = static_cast<double>(rec.evacuee_departures) /
                static_cast<double>(rec.resident_count);
  return rec;
}

inline ComplianceRecord tract_compliance(
    const std::vector<ClassificationResult>& results,
    const std::string& tract_id, TimeInterval period,
    DenominatorMode mode = DenominatorMode::kAllResidents) {
  return compliance_rate(
      results, tract_id, period,
      [&](const ClassificationResult& r) {
        return r.placement.tract_id && *r.placement.tract_id == tract_id;
      },
      mode);
}

struct ResponseCurve {
  std::string group;                     // label name or "ALL"
  std::vector<Instant> bins;             // bin boundaries, ignition + k*bin
  std::vector<std::uint64_t> cumulative; // one entry per boundary
  std::uint64_t beyond_horizon = 0;      // departures folded into the last bin
};

// One cumulative curve per evacuee group plus their pointwise sum. Entry k
// counts departures strictly before ignition + k bins; departures past the
// horizon land in the final bin and are flagged.
inline std::vector<ResponseCurve> response_curves(
    const std::vector<ClassificationResult>& results, Instant ignition,
    int horizon_days = 12, std::int64_t bin_seconds = kSecondsPerDay) {
  const ResidentLabel groups[] = {
      ResidentLabel::kSelfEvacuee, ResidentLabel::kShadowEvacuee,
      ResidentLabel::kEvacueeUnderWarning, ResidentLabel::kOrderedEvacuee};
  std::vector<ResponseCurve> curves;
  for (auto g : groups) curves.push_back({to_string(g), {}, {}, 0});
  curves.push_back({"ALL", {}, {}, 0});
  for (auto& c : curves) {
    for (int k = 0; k <= horizon_days; ++k)
      c.bins.push_back(ignition + k * bin_seconds);
    c.cumulative.assign(horizon_days + 1, 0);
  }
  for (const auto& r : results) {
    if (!is_evacuee(r.label)) continue;
    if (!r.t_e) throw std::logic_error("evacuee without departure time");
    if (*r.t_e < ignition)
      throw std::logic_error("departure before ignition in response_curves");
    size_t gi = 0;
    for (; gi < 4; ++gi)
      if (to_string(groups[gi]) == std::string(to_string(r.label))) break;
    std::int64_t k = (*r.t_e - ignition) / bin_seconds + 1;
    bool beyond = k > horizon_days;
    if (beyond) k = horizon_days;
    for (auto* c : {&curves[gi], &curves.back()}) {
      for (std::int64_t j = k; j <= horizon_days; ++j) ++c->cumulative[j];
      if (beyond) ++c->beyond_horizon;
    }
  }
  return curves;
}

enum class ProportionUniverse { kAllInScope, kInZoneOnly };

struct GroupProportions {
  std::map<ResidentLabel, std::uint64_t> counts;
  std::map<ResidentLabel, double> shares;
  std::uint64_t total = 0;
};

inline GroupProportions group_proportions(
    const std::vector<ClassificationResult>& results,
    ProportionUniverse universe) {
  GroupProportions gp;
  for (const auto& r : results) {
    if (universe == ProportionUniverse::kInZoneOnly &&
        r.placement.location_class != LocationClass::kInZone)
      continue;
    ++gp.counts[r.label];
    ++gp.total;
  }
  if (gp.total == 0)
    throw std::runtime_error("group_proportions: empty universe");
  for (const auto& [label, n] : gp.counts)
    gp.shares[label] = static_cast<double>(n) / static_cast<double>(gp.total);
  return gp;
}

// --- small special-function kernel for the regression p-value ---

namespace stats {

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
inline double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16, kFpMin = 1e-300;
  const double qab = a + b, qap = a + 1, qam = a - 1;
  double c = 1, d = 1 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

inline double ibeta(double a, double b, double x) {
  if (x <= 0) return 0;
  if (x >= 1) return 1;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1) / (a + b + 2)) return front * betacf(a, b, x) / a;
  return 1 - front * betacf(b, a, 1 - x) / b;
}

// Two-sided p-value for a t statistic with df degrees of freedom.
inline double t_two_sided_p(double t, double df) {
  return ibeta(df / 2, 0.5, df / (df + t * t));
}

}  // namespace stats

struct RegressionSummary {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
  double p_value = 1;  // two-sided, for the slope
  int n_points = 0;
};

// Ordinary least squares of y on x with the slope's t-test p-value.
inline RegressionSummary ols_fit(const std::vector<double>& x,
                                 const std::vector<double>& y) {
  const size_t n = x.size();
  if (n != y.size() || n < 3)
    throw std::invalid_argument("ols_fit: need >= 3 paired points");
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0) throw std::invalid_argument("ols_fit: constant regressor");
  RegressionSummary s;
  s.n_points = static_cast<int>(n);
  s.slope = sxy / sxx;
  s.intercept = my - s.slope * mx;
  double ss_res = 0;
  for (size_t i = 0; i < n; ++i) {
    const double r = y[i] - (s.intercept + s.slope * x[i]);
    ss_res += r * r;
  }
  s.r_squared = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  const double df = static_cast<double>(n) - 2;
  const double se2 = ss_res / df / sxx;
  if (se2 <= 0) {
    s.p_value = std::numeric_limits<double>::min();  // exact fit
  } else {
    s.p_value = stats::t_two_sided_p(s.slope / std::sqrt(se2), df);
  }
  return s;
}

// Per-tract sampling rate: inferred residents over census population.
inline std::map<std::string, std::optional<double>> sampling_rates(
    const std::map<std::string, std::pair<std::int64_t, std::int64_t>>&
        inferred_vs_population) {
  std::map<std::string, std::optional<double>> rates;
  for (const auto& [tract, counts] : inferred_vs_population) {
    if (counts.second > 0)
      rates[tract] = static_cast<double>(counts.first) /
                     static_cast<double>(counts.second);
    else
      rates[tract] = std::nullopt;
  }
  return rates;
}

}  // namespace evactrace
