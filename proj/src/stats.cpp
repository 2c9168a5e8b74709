#include "fpeval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

namespace fpeval {

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::mt19937_64 replicate_rng(uint64_t seed, uint64_t replicate) {
    return std::mt19937_64(splitmix64(splitmix64(seed) + replicate));
}

double median_inplace(std::vector<double>& v) {
    const size_t n = v.size();
    const auto mid = v.begin() + n / 2;
    std::nth_element(v.begin(), mid, v.end());
    const double hi = *mid;
    if (n % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), mid);
    return (lo + hi) / 2.0;
}

double mean_of(const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

// One resampling pass producing both statistics per replicate; the public
// single-statistic interval slices the matching vector so paired calls with
// the same seed share resamples.
void bootstrap_replicates(const std::vector<double>& samples, int replicates, uint64_t seed,
                          std::vector<double>* means, std::vector<double>* medians) {
    const size_t n = samples.size();
    means->resize(replicates);
    medians->resize(replicates);
    std::vector<double> buffer(n);
    for (int r = 0; r < replicates; ++r) {
        auto rng = replicate_rng(seed, static_cast<uint64_t>(r));
        double sum = 0.0;
        for (size_t i = 0; i < n; ++i) {
            buffer[i] = samples[rng() % n];
            sum += buffer[i];
        }
        (*means)[r] = sum / static_cast<double>(n);
        (*medians)[r] = median_inplace(buffer);
    }
}

std::pair<double, double> percentile_interval(std::vector<double> values, double confidence) {
    std::sort(values.begin(), values.end());
    const double alpha = (1.0 - confidence) / 2.0;
    const auto order_stat = [&](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        size_t idx = static_cast<size_t>(std::lround(pos));
        idx = std::min(idx, values.size() - 1);
        return values[idx];
    };
    return {order_stat(alpha), order_stat(1.0 - alpha)};
}

} // namespace

double sample_median(std::vector<double> values) {
    if (values.empty()) throw ContractError("median of empty sample");
    return median_inplace(values);
}

std::pair<double, double> bootstrap_ci(const std::vector<double>& samples, Statistic statistic,
                                       int replicates, double confidence, uint64_t seed) {
    if (samples.empty()) throw ContractError("bootstrap_ci: empty sample");
    if (replicates < 1) throw ContractError("bootstrap_ci: replicates must be >= 1");
    if (confidence <= 0.0 || confidence >= 1.0) {
        throw ContractError("bootstrap_ci: confidence must be in (0, 1)");
    }
    std::vector<double> means, medians;
    bootstrap_replicates(samples, replicates, seed, &means, &medians);
    return percentile_interval(statistic == Statistic::mean ? std::move(means)
                                                            : std::move(medians),
                               confidence);
}

namespace {

Histogram integer_histogram(const std::vector<double>& samples, double lo) {
    Histogram h;
    if (samples.empty()) return h;
    double hi = lo;
    for (double v : samples) hi = std::max(hi, v);
    const int64_t first = static_cast<int64_t>(std::floor(lo));
    const int64_t last = static_cast<int64_t>(std::floor(hi));
    for (int64_t b = first; b <= last + 1; ++b) h.edges.push_back(static_cast<double>(b));
    h.counts.assign(h.edges.size() - 1, 0);
    for (double v : samples) {
        int64_t b = static_cast<int64_t>(std::floor(v)) - first;
        b = std::clamp<int64_t>(b, 0, static_cast<int64_t>(h.counts.size()) - 1);
        ++h.counts[b];
    }
    return h;
}

Histogram fixed_width_histogram(const std::vector<double>& samples, double lo, double width) {
    Histogram h;
    if (samples.empty()) return h;
    double hi = lo;
    for (double v : samples) hi = std::max(hi, v);
    const int64_t bins = std::max<int64_t>(
        1, static_cast<int64_t>(std::ceil((hi - lo) / width)) + 1);
    for (int64_t b = 0; b <= bins; ++b) h.edges.push_back(lo + width * static_cast<double>(b));
    h.counts.assign(bins, 0);
    for (double v : samples) {
        int64_t b = static_cast<int64_t>(std::floor((v - lo) / width));
        b = std::clamp<int64_t>(b, 0, bins - 1);
        ++h.counts[b];
    }
    return h;
}

// Counts of values rounded to two decimals, one bin per rounded step.
Histogram rounded_centi_histogram(const std::vector<double>& samples) {
    Histogram h;
    if (samples.empty()) return h;
    for (int k = 0; k <= 101; ++k) h.edges.push_back(k / 100.0);
    h.counts.assign(101, 0);
    for (double v : samples) {
        int64_t b = std::lround(v * 100.0);
        b = std::clamp<int64_t>(b, 0, 100);
        ++h.counts[b];
    }
    return h;
}

} // namespace

std::vector<StatSummary> dataset_statistics(const EvalDataset& ds, const Ontology& ontology,
                                            uint64_t seed, int replicates) {
    std::vector<StatSummary> out;
    if (ds.images().empty()) return out;

    std::map<int64_t, int64_t> masks_per_image;
    std::map<int64_t, std::set<int>> cats_per_image;
    for (const auto& img : ds.images()) {
        masks_per_image[img.id] = 0;
    }
    std::vector<double> relative_sizes;
    std::vector<double> complexities;
    std::vector<double> vertices;
    std::vector<double> attrs_per_mask;
    std::map<int, int64_t> per_category;
    std::map<int, int64_t> per_attribute;
    for (const auto& c : ontology.categories()) per_category[c.id] = 0;
    for (const auto& a : ontology.attributes()) per_attribute[a.id] = 0;

    for (const auto& g : ds.ground_truth()) {
        ++masks_per_image[g.image_id];
        cats_per_image[g.image_id].insert(g.category_id);
        const auto& img = ds.image(g.image_id);
        relative_sizes.push_back(relative_size(g.area, img.height, img.width));
        if (g.segmentation.polygons) {
            if (const auto c = boundary_complexity(*g.segmentation.polygons)) {
                complexities.push_back(*c);
            }
            for (int n : vertices_per_polygon(*g.segmentation.polygons)) {
                vertices.push_back(static_cast<double>(n));
            }
        }
        if (ontology.has_category(g.category_id) &&
            ontology.category_has_attributes(g.category_id)) {
            attrs_per_mask.push_back(static_cast<double>(g.attributes.size()));
        }
        ++per_category[g.category_id];
        for (int32_t a : g.attributes.ids()) ++per_attribute[a];
    }

    uint64_t metric_index = 0;
    const auto push = [&](const std::string& name, const std::vector<double>& samples,
                          Histogram histogram) {
        ++metric_index;
        if (samples.empty()) return;
        StatSummary s;
        s.name = name;
        s.n = static_cast<int64_t>(samples.size());
        s.mean = mean_of(samples);
        s.median = sample_median(samples);
        const uint64_t metric_seed = splitmix64(seed) ^ metric_index;
        std::vector<double> means, medians;
        bootstrap_replicates(samples, replicates, metric_seed, &means, &medians);
        s.ci_mean = percentile_interval(std::move(means), 0.95);
        s.ci_median = percentile_interval(std::move(medians), 0.95);
        s.histogram = std::move(histogram);
        out.push_back(std::move(s));
    };

    std::vector<double> mask_counts, cat_counts;
    for (const auto& img : ds.images()) {
        mask_counts.push_back(static_cast<double>(masks_per_image[img.id]));
        const auto it = cats_per_image.find(img.id);
        cat_counts.push_back(it == cats_per_image.end()
                                 ? 0.0
                                 : static_cast<double>(it->second.size()));
    }
    push("masks_per_image", mask_counts, integer_histogram(mask_counts, 0.0));
    push("categories_per_image", cat_counts, integer_histogram(cat_counts, 0.0));
    push("relative_mask_size", relative_sizes, rounded_centi_histogram(relative_sizes));
    push("boundary_complexity", complexities, fixed_width_histogram(complexities, 1.0, 0.25));
    push("vertices_per_polygon", vertices, integer_histogram(vertices, 3.0));
    push("attributes_per_mask", attrs_per_mask, integer_histogram(attrs_per_mask, 0.0));

    // Instance-count distributions across the vocabulary: one sample per
    // category / attribute; the histogram bins the count values themselves.
    std::vector<double> cat_dist, attr_dist;
    for (const auto& [_, c] : per_category) cat_dist.push_back(static_cast<double>(c));
    for (const auto& [_, c] : per_attribute) attr_dist.push_back(static_cast<double>(c));
    push("instances_per_category", cat_dist, integer_histogram(cat_dist, 0.0));
    push("instances_per_attribute", attr_dist, integer_histogram(attr_dist, 0.0));

    return out;
}

InstanceCounts instance_counts(const EvalDataset& ds, const Ontology& ontology) {
    std::map<int, int64_t> per_category;
    std::map<int, int64_t> per_attribute;
    for (const auto& c : ontology.categories()) per_category[c.id] = 0;
    for (const auto& a : ontology.attributes()) per_attribute[a.id] = 0;
    for (const auto& g : ds.ground_truth()) {
        ++per_category[g.category_id];
        for (int32_t a : g.attributes.ids()) ++per_attribute[a];
    }
    InstanceCounts counts;
    counts.per_category.assign(per_category.begin(), per_category.end());
    counts.per_attribute.assign(per_attribute.begin(), per_attribute.end());
    return counts;
}

} // namespace fpeval
