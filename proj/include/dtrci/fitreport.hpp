#pragma once

#include "dtrci/config.hpp"
#include "dtrci/qlearn.hpp"
#include "dtrci/resample.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace dtrci {

struct ReportRow {
  int stage = 1;
  std::string label;
  double estimate = 0.0;
  Interval interval;
  // zero lies outside the interval
  bool sufficient() const { return !interval.contains(0.0); }
};

// Coefficients of every stage with ACI intervals before the last stage and
// CPB at the last, plus treatment-effect rows for each distinct history of
// a two-treatment stage and any user contrasts. All intervals come from one
// bootstrap pass; each equals the single-contrast interval with the same plan.
struct FitReport {
  QFit fit;
  int n = 0;
  double alpha = 0.05;
  std::string lambda_rule;
  std::vector<std::vector<ReportRow>> coefficients;  // [stage - 1]
  std::vector<ReportRow> evidence;
  std::vector<ReportRow> contrasts;
  int redraws = 0;
};

FitReport fit_report(const Dataset& ds, const FitConfig& cfg, int threads = 1);

// "5%" / "95%" for alpha = 0.1.
std::string lower_label(double alpha);
std::string upper_label(double alpha);

void write_fit_report(std::ostream& out, const FitReport& report);

}  // namespace dtrci
