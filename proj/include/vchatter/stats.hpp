#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vchatter::stats {

struct PairedSample {
  std::vector<double> pre;
  std::vector<double> post;
};

enum class WilcoxonMethod { Exact, NormalApprox };

struct WilcoxonOptions {
  // n_effective at or below this uses exact enumeration of the null distribution.
  std::size_t exact_cutoff = 12;
  bool continuity_correction = false;
  bool force_normal = false;
};

struct WilcoxonResult {
  std::size_t n_input = 0;
  std::size_t n_effective = 0;
  double w_plus = 0.0;
  double w_minus = 0.0;
  double z = 0.0;
  double p_two_sided = 1.0;
  WilcoxonMethod method = WilcoxonMethod::Exact;
};

/// Paired signed-rank test on d = post - pre. Zero differences are dropped,
/// |d| gets mid-ranks, and the variance is always tie-corrected. A uniform
/// decrease from pre to post gives z < 0.
WilcoxonResult wilcoxon_signed_rank(const PairedSample& s, const WilcoxonOptions& opts = {});

/// Mid-ranks (1-based) of |values|; ties share the average rank.
std::vector<double> mid_ranks(std::span<const double> values);

struct Descriptive {
  double mean = 0.0;
  double sd = 0.0;  // sample SD, n - 1 denominator
};

double mean(std::span<const double> values);
Descriptive descriptive(std::span<const double> values);

// Row order of the cohort report.
inline const std::vector<std::string>& outcome_measures() {
  static const std::vector<std::string> kMeasures{"SAS-A", "UCLA", "Contravene", "Fear",
                                                  "Isolation"};
  return kMeasures;
}

struct OutcomeRow {
  std::string measure;
  Descriptive pre;
  Descriptive post;
  WilcoxonResult test;
  std::string significance;
};

struct OutcomeReport {
  std::size_t participants = 0;
  std::vector<OutcomeRow> rows;
};

/// "***" for p <= .01, "**" for p < .05, empty otherwise.
std::string significance_marks(double p);

OutcomeReport build_outcome_report(const std::map<std::string, PairedSample>& cohort,
                                   const WilcoxonOptions& opts = {});

nlohmann::json to_json(const OutcomeReport& report);

/// Aligned plain-text table: Measure, Before Mean(SD), After Mean(SD), Z, p, Sig.
std::string render_table(const OutcomeReport& report);

}  // namespace vchatter::stats
