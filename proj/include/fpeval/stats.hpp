#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fpeval/dataset.hpp"

namespace fpeval {

enum class Statistic { mean, median };

/// Percentile bootstrap interval of the statistic over `replicates` resamples
/// with replacement. Replicate r draws from a generator derived from
/// (seed, r), so results do not depend on scheduling. Endpoints are order
/// statistics of the replicate values.
std::pair<double, double> bootstrap_ci(const std::vector<double>& samples, Statistic statistic,
                                       int replicates, double confidence, uint64_t seed);

/// Median with the even-length convention: mean of the two central order
/// statistics.
double sample_median(std::vector<double> values);

struct Histogram {
    std::vector<double> edges;   // bin b covers [edges[b], edges[b+1]); last bin closed
    std::vector<int64_t> counts; // counts sum to the sample size
};

struct StatSummary {
    std::string name;
    double mean = 0.0;
    double median = 0.0;
    std::pair<double, double> ci_mean{0.0, 0.0};
    std::pair<double, double> ci_median{0.0, 0.0};
    Histogram histogram;
    int64_t n = 0;
};

/// Corpus statistics: masks per image, category diversity, relative mask
/// size, boundary complexity, vertices per polygon, attributes per mask, and
/// instance-count distributions per category / attribute. Each summary comes
/// with bootstrapped 95% confidence intervals for the mean and median.
std::vector<StatSummary> dataset_statistics(const EvalDataset& ds, const Ontology& ontology,
                                            uint64_t seed, int replicates = 10000);

/// Instance counts keyed by category / attribute id (the long-tail
/// distributions), for plot-ready export next to the summaries.
struct InstanceCounts {
    std::vector<std::pair<int, int64_t>> per_category;
    std::vector<std::pair<int, int64_t>> per_attribute;
};

InstanceCounts instance_counts(const EvalDataset& ds, const Ontology& ontology);

} // namespace fpeval
