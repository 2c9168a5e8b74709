#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fpeval/attribute_f1.hpp"
#include "fpeval/dataset.hpp"

namespace fpeval {

/// Named instance-area bucket, half-open [lo, hi).
struct AreaRange {
    std::string name;
    double lo = 0.0;
    double hi = 0.0;
};

struct EvalParams {
    enum class Kind { box, mask };

    std::vector<double> iou_thresholds;  // ascending
    std::vector<double> f1_thresholds;   // ascending
    F1Mode f1_mode = F1Mode::binary_macro;
    std::vector<double> recall_points;   // ascending, first 0, last 1
    std::vector<int> max_detections;     // ascending
    std::vector<AreaRange> area_ranges;  // first entry is the unrestricted range
    Kind kind = Kind::mask;
    bool f1_constraint_enabled = true;
    int threads = 0; // 0 = machine parallelism

    /// 10 IoU and F1 thresholds 0.50..0.95, 101 recall points, max
    /// detections {1, 10, 100}, areas all/small/medium/large, mask kind,
    /// binary-macro F1.
    static EvalParams defaults();

    void check() const; // throws ContractError on breach
};

enum class MatchOutcome { tp, fp, ignored };

struct MatchRecord {
    int det_index = -1; // position in the score-sorted detection list
    double score = 0.0;
    std::optional<int64_t> gt_id; // present iff outcome == tp
    double best_iou = 0.0;
    std::optional<double> f1;
    MatchOutcome outcome = MatchOutcome::fp;
};

/// Inputs to the greedy matcher for one (image, category) cell. Detections
/// are score-descending; ground truth is ordered by ascending id.
struct MatchInputs {
    std::vector<double> det_scores;
    std::vector<double> det_areas;
    std::vector<int64_t> gt_ids;
    std::vector<double> gt_areas;
    std::vector<uint8_t> gt_ignore; // base ignore flags
    std::vector<double> iou;        // [det * gt_count + gt]
    std::vector<double> f1;         // same layout; empty when the category carries no attributes

    size_t det_count() const { return det_scores.size(); }
    size_t gt_count() const { return gt_ids.size(); }
};

/// Score-greedy assignment under the joint IoU+F1 constraint. Each detection
/// in order takes the eligible (IoU >= iou_threshold, and F1 >= f1_threshold
/// when given and an F1 matrix exists) unmatched ground truth with maximal
/// IoU, smallest id on ties. Non-ignored ground truth is always preferred; a
/// detection whose only eligible partners are ignored becomes `ignored`, as
/// does an unmatched detection whose own area falls outside the range.
std::vector<MatchRecord> match_kernel(const MatchInputs& in, double iou_threshold,
                                      std::optional<double> f1_threshold, const AreaRange& area,
                                      int max_detections);

/// Convenience form over instances; detections must already be sorted by
/// descending score (ContractError otherwise). Masks are required for mask
/// kind, boxes for box kind.
std::vector<MatchRecord> match(const std::vector<DetectionInstance>& dets,
                               const std::vector<GroundTruthInstance>& gts, double iou_threshold,
                               std::optional<double> f1_threshold, const AreaRange& area,
                               int max_detections, int universe, EvalParams::Kind kind,
                               F1Mode f1_mode, bool category_has_attributes);

/// Precision/recall tensors over the full evaluation grid. The F1 axis is
/// [disabled, τ_f1...]: entry 0 carries the IoU-only protocol. Entries are
/// -1 where the (category, area) cell has no ground truth.
struct EvalResult {
    std::vector<double> iou_thresholds;
    std::vector<std::optional<double>> f1_axis;
    std::vector<double> recall_points;
    std::vector<int> category_ids;
    std::vector<uint8_t> category_has_attributes; // per category_ids entry
    std::vector<AreaRange> area_ranges;
    std::vector<int> max_detections;
    F1Mode f1_mode = F1Mode::binary_macro;
    EvalParams::Kind kind = EvalParams::Kind::mask;

    // precision: [iou][f1][recall][category][area][maxdet]
    std::vector<double> precision;
    // recall:    [iou][f1][category][area][maxdet]
    std::vector<double> recall;
    // in-range, non-ignored ground truth per [category][area]
    std::vector<int64_t> gt_counts;

    size_t precision_index(size_t t, size_t f, size_t r, size_t k, size_t a, size_t m) const;
    size_t recall_index(size_t t, size_t f, size_t k, size_t a, size_t m) const;

    /// Mean precision over all defined tensor entries of the selected slice;
    /// nullopt when every entry is undefined. Iteration order is fixed
    /// (iou, then recall point, then category) so results are reproducible
    /// bit-for-bit. `iou_index` / `f1_index` of nullopt mean "average over
    /// the axis" (the F1 axis average skips the disabled entry 0).
    std::optional<double> average_precision(std::optional<size_t> iou_index,
                                            std::optional<size_t> f1_index,
                                            const std::vector<size_t>& category_indices,
                                            size_t area_index, size_t maxdet_index) const;

    /// Mean of the best-recall entries over the selected slice.
    std::optional<double> average_recall(std::optional<size_t> iou_index,
                                         std::optional<size_t> f1_index,
                                         const std::vector<size_t>& category_indices,
                                         size_t area_index, size_t maxdet_index) const;
};

/// Runs matching and accumulation for a dataset. Matching runs on a worker
/// pool; results are merged by cell index, so outputs are identical for any
/// thread count.
EvalResult evaluate(const EvalDataset& ds, const EvalParams& params);

struct MetricPair {
    std::optional<double> iou;    // IoU-only protocol
    std::optional<double> iou_f1; // joint protocol (attribute-bearing categories)
};

struct CategoryMetrics {
    int id = 0;
    std::string name;
    std::string supercategory;
    bool has_attributes = false;
    MetricPair ap;
    MetricPair ap50;
    MetricPair ap75;
    MetricPair ar_top; // at the largest detection budget
};

struct SupercategoryMetrics {
    std::string name;
    MetricPair ap;
    MetricPair ap50;
    MetricPair ap75;
    MetricPair ap_small;
    MetricPair ap_medium;
    MetricPair ap_large;
    std::map<int, MetricPair> ar_at; // keyed by detection budget
};

struct MetricReport {
    MetricPair ap; // AP_IoU / AP_IoU+F1
    MetricPair ap50;
    MetricPair ap75;
    MetricPair ap_small;
    MetricPair ap_medium;
    MetricPair ap_large;
    std::map<int, MetricPair> ar_at;
    std::vector<CategoryMetrics> per_category;
    std::vector<SupercategoryMetrics> per_supercategory;
};

/// Headline metrics from a result tensor. AP uses the unrestricted area range
/// and the largest detection budget; joint values average the enabled F1 axis
/// restricted to attribute-bearing categories.
MetricReport summarize(const EvalResult& result, const Ontology& ontology);

/// AP as a function of the F1 threshold: for every τ in `grid`, the joint AP
/// averaged over the IoU thresholds and attribute-bearing categories.
std::vector<std::pair<double, double>> f1_sweep(const EvalDataset& ds, const EvalParams& params,
                                                const std::vector<double>& grid);

/// Uniform τ_F1 grid 0..1 with the given step.
std::vector<double> sweep_grid(double step = 0.01);

enum class BreakdownScope { overall, supercategory, category };

BreakdownScope parse_breakdown_scope(std::string_view name);

inline constexpr std::array<const char*, 7> kBreakdownSettings = {"C75", "C50", "Loc", "Sim",
                                                                  "Oth", "BG",  "FN"};

/// Seven progressively permissive precision-recall curves for one scope
/// group: strict IoU 0.75 and 0.5; localization errors ignored (IoU 0.1);
/// same-supercategory confusion FPs removed; any-category confusion FPs
/// removed; all remaining background FPs removed; misses removed (curve 1).
struct PRBreakdown {
    std::string group;
    std::array<std::vector<double>, 7> curves; // sampled at recall_points
    std::array<double, 7> auc = {};
};

/// Error analysis per Hoiem-style detector diagnosis. The F1 constraint is
/// off unless `f1_threshold` is given. Uses the unrestricted area range and
/// the largest detection budget.
std::vector<PRBreakdown> error_breakdown(const EvalDataset& ds, BreakdownScope scope,
                                         const EvalParams& params,
                                         std::optional<double> f1_threshold = std::nullopt);

} // namespace fpeval
