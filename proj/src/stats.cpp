#include "vchatter/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "vchatter/error.hpp"

namespace vchatter::stats {

namespace {

double normal_two_sided(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

// Null distribution of 2*W+ by dynamic programming over doubled mid-ranks.
// Doubled mid-ranks are integers, so the tail comparison below is exact.
double exact_two_sided(const std::vector<long>& doubled_ranks, long doubled_w_plus) {
  const long total = std::accumulate(doubled_ranks.begin(), doubled_ranks.end(), 0L);
  std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
  counts[0] = 1.0;
  long reach = 0;
  for (long r : doubled_ranks) {
    for (long s = reach; s >= 0; --s) {
      if (counts[static_cast<std::size_t>(s)] != 0.0) {
        counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
      }
    }
    reach += r;
  }
  // |2W - total| >= |2w_obs - total| in doubled units.
  const long observed = std::labs(2 * doubled_w_plus - total);
  double extreme = 0.0;
  for (long s = 0; s <= total; ++s) {
    if (std::labs(2 * s - total) >= observed) extreme += counts[static_cast<std::size_t>(s)];
  }
  const double p = extreme / std::ldexp(1.0, static_cast<int>(doubled_ranks.size()));
  return std::min(1.0, p);
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

std::vector<double> mid_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(values[a]) < std::fabs(values[b]);
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && std::fabs(values[order[j]]) == std::fabs(values[order[i]])) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

WilcoxonResult wilcoxon_signed_rank(const PairedSample& s, const WilcoxonOptions& opts) {
  if (s.pre.size() != s.post.size()) {
    throw Error(ErrorCode::Validation, "paired sample: pre has " + std::to_string(s.pre.size()) +
                                           " values, post has " + std::to_string(s.post.size()));
  }
  if (s.pre.empty()) throw Error(ErrorCode::Validation, "paired sample is empty");

  WilcoxonResult out;
  out.n_input = s.pre.size();
  std::vector<double> diffs;
  diffs.reserve(s.pre.size());
  for (std::size_t i = 0; i < s.pre.size(); ++i) {
    const double d = s.post[i] - s.pre[i];
    if (d != 0.0) diffs.push_back(d);
  }
  out.n_effective = diffs.size();
  if (diffs.empty()) {
    throw Error(ErrorCode::NoEffectiveSamples, "all paired differences are zero");
  }

  const auto ranks = mid_ranks(diffs);
  std::vector<long> doubled(ranks.size());
  long doubled_w_plus = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    doubled[i] = std::lround(2.0 * ranks[i]);
    if (diffs[i] > 0) {
      out.w_plus += ranks[i];
      doubled_w_plus += doubled[i];
    } else {
      out.w_minus += ranks[i];
    }
  }

  // Tie correction: sum of (t^3 - t) over groups of equal |d|.
  double tie_term = 0.0;
  {
    std::vector<double> sorted(ranks);
    std::sort(sorted.begin(), sorted.end());
    std::size_t i = 0;
    while (i < sorted.size()) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i);
      tie_term += t * t * t - t;
      i = j;
    }
  }
  const double n = static_cast<double>(out.n_effective);
  const double mu = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  double dev = out.w_plus - mu;
  if (opts.continuity_correction) {
    dev = std::copysign(std::max(std::fabs(dev) - 0.5, 0.0), dev);
  }
  out.z = var > 0.0 ? dev / std::sqrt(var) : 0.0;

  if (!opts.force_normal && out.n_effective <= opts.exact_cutoff) {
    out.method = WilcoxonMethod::Exact;
    out.p_two_sided = exact_two_sided(doubled, doubled_w_plus);
  } else {
    out.method = WilcoxonMethod::NormalApprox;
    out.p_two_sided = std::min(1.0, normal_two_sided(out.z));
  }
  return out;
}

double mean(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::InsufficientData, "mean of an empty list");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

Descriptive descriptive(std::span<const double> values) {
  if (values.size() < 2) {
    throw Error(ErrorCode::InsufficientData,
                "standard deviation needs at least 2 values, got " + std::to_string(values.size()));
  }
  Descriptive d;
  d.mean = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - d.mean) * (v - d.mean);
  d.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return d;
}

std::string significance_marks(double p) {
  if (p <= 0.01) return "***";
  if (p < 0.05) return "**";
  return "";
}

OutcomeReport build_outcome_report(const std::map<std::string, PairedSample>& cohort,
                                   const WilcoxonOptions& opts) {
  const auto& measures = outcome_measures();
  for (const auto& [name, _] : cohort) {
    if (std::find(measures.begin(), measures.end(), name) == measures.end()) {
      throw Error(ErrorCode::Validation, "unknown outcome measure '" + name + "'");
    }
  }
  OutcomeReport report;
  bool first = true;
  for (const auto& measure : measures) {
    auto it = cohort.find(measure);
    if (it == cohort.end()) throw Error(ErrorCode::MissingMeasure, "cohort lacks measure " + measure);
    const PairedSample& s = it->second;
    if (s.pre.size() != s.post.size()) {
      throw Error(ErrorCode::ParticipantMismatch,
                  measure + ": pre and post participant counts differ");
    }
    if (first) {
      report.participants = s.pre.size();
      first = false;
    } else if (s.pre.size() != report.participants) {
      throw Error(ErrorCode::ParticipantMismatch,
                  measure + " has " + std::to_string(s.pre.size()) + " participants, expected " +
                      std::to_string(report.participants));
    }
    OutcomeRow row;
    row.measure = measure;
    row.pre = descriptive(s.pre);
    row.post = descriptive(s.post);
    row.test = wilcoxon_signed_rank(s, opts);
    row.significance = significance_marks(row.test.p_two_sided);
    report.rows.push_back(std::move(row));
  }
  return report;
}

nlohmann::json to_json(const OutcomeReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({
        {"measure", r.measure},
        {"pre_mean", r.pre.mean},
        {"pre_sd", r.pre.sd},
        {"post_mean", r.post.mean},
        {"post_sd", r.post.sd},
        {"z", r.test.z},
        {"p", r.test.p_two_sided},
        {"significance", r.significance},
        {"method", r.test.method == WilcoxonMethod::Exact ? "exact" : "normal"},
        {"n_effective", r.test.n_effective},
        {"w_plus", r.test.w_plus},
        {"w_minus", r.test.w_minus},
    });
  }
  return {{"participants", report.participants}, {"test", "wilcoxon_signed_rank"}, {"rows", rows}};
}

std::string render_table(const OutcomeReport& report) {
  auto pad = [](std::string s, std::size_t w, bool right) {
    if (s.size() >= w) return s;
    return right ? std::string(w - s.size(), ' ') + s : s + std::string(w - s.size(), ' ');
  };
  auto mean_sd = [&](const Descriptive& d) { return fixed(d.mean, 2) + " (" + fixed(d.sd, 2) + ")"; };

  std::ostringstream out;
  out << pad("Measure", 12, false) << pad("Before Mean(SD)", 17, true)
      << pad("After Mean(SD)", 17, true) << pad("Z", 9, true) << pad("p", 8, true)
      << pad("Sig.", 6, true) << '\n';
  for (const auto& r : report.rows) {
    out << pad(r.measure, 12, false) << pad(mean_sd(r.pre), 17, true)
        << pad(mean_sd(r.post), 17, true) << pad(fixed(r.test.z, 3), 9, true)
        << pad(fixed(r.test.p_two_sided, 3), 8, true) << pad(r.significance, 6, true) << '\n';
  }
  out << "Wilcoxon signed-rank test; N = " << report.participants << '\n';
  return out.str();
}

}  // namespace vchatter::stats
