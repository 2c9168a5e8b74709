#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fpeval/eval.hpp"
#include "fpeval/stats.hpp"

namespace fpeval {

/// Toolkit version, printed by the CLI and stamped into reports.
inline constexpr const char* kToolkitVersion = "0.1.0";
/// Version of the report / file formats.
inline constexpr const char* kFormatVersion = "1";

/// JSON report envelope: {"params", "metrics", "f1_sweep",
/// "error_breakdown"}; sections not produced by a command are null.
/// Serialization is key-sorted so identical inputs give identical bytes.
std::string report_to_json(const EvalParams& params, const MetricReport* metrics,
                           const std::vector<std::pair<double, double>>* sweep,
                           const std::vector<PRBreakdown>* breakdown);

/// PR curves as CSV rows "group,setting,recall,precision".
std::string breakdown_to_csv(const std::vector<PRBreakdown>& breakdown,
                             const std::vector<double>& recall_points);

/// AUC table as CSV rows "group,setting,auc".
std::string breakdown_auc_to_csv(const std::vector<PRBreakdown>& breakdown);

/// Sweep curve as CSV rows "tau_f1,ap".
std::string sweep_to_csv(const std::vector<std::pair<double, double>>& sweep);

/// Statistics summaries plus the instance-count tables.
std::string stats_to_json(const std::vector<StatSummary>& summaries,
                          const InstanceCounts& counts, uint64_t seed, int replicates);

/// Summary table as CSV rows
/// "metric,n,mean,mean_ci_lo,mean_ci_hi,median,median_ci_lo,median_ci_hi".
std::string stats_to_csv(const std::vector<StatSummary>& summaries);

/// Histogram series as CSV rows "metric,bin_lo,bin_hi,count".
std::string histograms_to_csv(const std::vector<StatSummary>& summaries);

/// Validation findings as printable lines "instance <id>: <kind>: <message>".
std::string violations_to_text(const std::vector<Violation>& violations);

} // namespace fpeval
