#include "fpeval/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

namespace fpeval {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void parallel_for(size_t n, int threads, const std::function<void(size_t)>& body) {
    if (n == 0) return;
    size_t workers = threads > 0 ? static_cast<size_t>(threads)
                                 : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    body(i);
                } catch (...) {
                    std::scoped_lock lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

bool in_range(double area, const AreaRange& range) {
    return area >= range.lo && (range.hi == kInf ? true : area < range.hi);
}

// Core greedy assignment; emits one outcome per detection through the sink:
// sink(det_index, outcome, gt_slot_or_-1, best_iou).
template <typename Sink>
void greedy_match(const MatchInputs& in, double iou_threshold, std::optional<double> f1_threshold,
                  const AreaRange& area, int max_detections, Sink&& sink) {
    const size_t n_g = in.gt_count();
    const size_t n_d = std::min(in.det_count(), static_cast<size_t>(std::max(max_detections, 0)));
    const bool use_f1 = f1_threshold.has_value() && !in.f1.empty();

    std::vector<uint8_t> effective_ignore(n_g);
    for (size_t g = 0; g < n_g; ++g) {
        effective_ignore[g] = in.gt_ignore[g] || !in_range(in.gt_areas[g], area);
    }
    std::vector<uint8_t> taken(n_g, 0);

    for (size_t d = 0; d < n_d; ++d) {
        int best_real = -1, best_ignored = -1;
        double best_real_iou = -1.0, best_ignored_iou = -1.0;
        for (size_t g = 0; g < n_g; ++g) {
            if (taken[g]) continue;
            const double iou = in.iou[d * n_g + g];
            if (iou < iou_threshold) continue;
            if (use_f1 && in.f1[d * n_g + g] < *f1_threshold) continue;
            // ground truth is id-ascending, so strict `>` keeps the smallest
            // id among IoU ties
            if (effective_ignore[g]) {
                if (iou > best_ignored_iou) {
                    best_ignored = static_cast<int>(g);
                    best_ignored_iou = iou;
                }
            } else {
                if (iou > best_real_iou) {
                    best_real = static_cast<int>(g);
                    best_real_iou = iou;
                }
            }
        }
        if (best_real >= 0) {
            taken[best_real] = 1;
            sink(d, MatchOutcome::tp, best_real, best_real_iou);
        } else if (best_ignored >= 0) {
            taken[best_ignored] = 1;
            sink(d, MatchOutcome::ignored, best_ignored, best_ignored_iou);
        } else if (!in_range(in.det_areas[d], area)) {
            sink(d, MatchOutcome::ignored, -1, 0.0);
        } else {
            sink(d, MatchOutcome::fp, -1, 0.0);
        }
    }
}

// Cumulative precision/recall for one pooled, score-ordered outcome sequence,
// with the monotone envelope applied and sampled at the recall points.
// Returns the sampled curve; `final_recall` gets the last recall value.
std::vector<double> sample_curve(const std::vector<uint8_t>& outcomes, int64_t gt_count,
                                 const std::vector<double>& recall_points, double* final_recall) {
    std::vector<double> precisions, recalls;
    precisions.reserve(outcomes.size());
    recalls.reserve(outcomes.size());
    int64_t tp = 0, fp = 0;
    for (uint8_t o : outcomes) {
        if (o == static_cast<uint8_t>(MatchOutcome::ignored)) continue;
        if (o == static_cast<uint8_t>(MatchOutcome::tp)) {
            ++tp;
        } else {
            ++fp;
        }
        recalls.push_back(static_cast<double>(tp) / static_cast<double>(gt_count));
        precisions.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    }
    if (final_recall) *final_recall = recalls.empty() ? 0.0 : recalls.back();

    for (size_t i = precisions.size(); i > 1; --i) {
        if (precisions[i - 1] > precisions[i - 2]) precisions[i - 2] = precisions[i - 1];
    }

    std::vector<double> sampled(recall_points.size(), 0.0);
    for (size_t r = 0; r < recall_points.size(); ++r) {
        const auto it = std::lower_bound(recalls.begin(), recalls.end(), recall_points[r]);
        const size_t idx = static_cast<size_t>(it - recalls.begin());
        sampled[r] = idx < precisions.size() ? precisions[idx] : 0.0;
    }
    return sampled;
}

} // namespace

EvalParams EvalParams::defaults() {
    EvalParams p;
    for (int i = 0; i <= 9; ++i) p.iou_thresholds.push_back((50 + 5 * i) / 100.0);
    p.f1_thresholds = p.iou_thresholds;
    for (int i = 0; i <= 100; ++i) p.recall_points.push_back(i / 100.0);
    p.max_detections = {1, 10, 100};
    p.area_ranges = {{"all", 0.0, kInf},
                     {"small", 0.0, 32.0 * 32.0},
                     {"medium", 32.0 * 32.0, 96.0 * 96.0},
                     {"large", 96.0 * 96.0, kInf}};
    return p;
}

void EvalParams::check() const {
    const auto sorted = [](const std::vector<double>& v) {
        return std::is_sorted(v.begin(), v.end());
    };
    if (iou_thresholds.empty() || !sorted(iou_thresholds)) {
        throw ContractError("iou thresholds must be non-empty and ascending");
    }
    if (f1_constraint_enabled && (f1_thresholds.empty() || !sorted(f1_thresholds))) {
        throw ContractError("f1 thresholds must be non-empty and ascending");
    }
    for (double t : iou_thresholds) {
        if (t < 0.0 || t > 1.0) throw ContractError("iou threshold outside [0, 1]");
    }
    for (double t : f1_thresholds) {
        if (t < 0.0 || t > 1.0) throw ContractError("f1 threshold outside [0, 1]");
    }
    if (recall_points.size() < 2 || !sorted(recall_points) || recall_points.front() != 0.0 ||
        recall_points.back() != 1.0) {
        throw ContractError("recall points must ascend from 0 to 1");
    }
    if (max_detections.empty() || !std::is_sorted(max_detections.begin(), max_detections.end())) {
        throw ContractError("max detections must be non-empty and ascending");
    }
    for (int m : max_detections) {
        if (m <= 0) throw ContractError("max detections must be positive");
    }
    if (area_ranges.empty()) throw ContractError("at least one area range is required");
    for (const auto& a : area_ranges) {
        if (!(a.lo <= a.hi)) throw ContractError("area range '" + a.name + "' has lo > hi");
    }
    if (threads < 0) throw ContractError("threads must be >= 0");
}

std::vector<MatchRecord> match_kernel(const MatchInputs& in, double iou_threshold,
                                      std::optional<double> f1_threshold, const AreaRange& area,
                                      int max_detections) {
    std::vector<MatchRecord> records;
    records.reserve(std::min(in.det_count(), static_cast<size_t>(std::max(max_detections, 0))));
    greedy_match(in, iou_threshold, f1_threshold, area, max_detections,
                 [&](size_t d, MatchOutcome outcome, int gt_slot, double best_iou) {
                     MatchRecord rec;
                     rec.det_index = static_cast<int>(d);
                     rec.score = in.det_scores[d];
                     rec.outcome = outcome;
                     rec.best_iou = best_iou;
                     if (gt_slot >= 0) {
                         if (outcome == MatchOutcome::tp) rec.gt_id = in.gt_ids[gt_slot];
                         if (!in.f1.empty()) rec.f1 = in.f1[d * in.gt_count() + gt_slot];
                     }
                     records.push_back(std::move(rec));
                 });
    return records;
}

namespace {

// Per-instance geometry prepared for one evaluation kind.
struct PreparedGeometry {
    std::vector<BinaryMask> owned_masks;
    std::vector<const BinaryMask*> gt_mask;
    std::vector<const BinaryMask*> det_mask;
    std::vector<BBox> gt_box;
    std::vector<BBox> det_box;
    std::vector<double> det_area;
};

const BinaryMask* prepare_mask(const Segmentation& seg, const ImageInfo& img,
                               std::vector<BinaryMask>& arena) {
    if (seg.mask) {
        if (seg.mask->height() != img.height || seg.mask->width() != img.width) {
            throw ContractError("mask size does not match its image");
        }
        return &*seg.mask;
    }
    if (seg.polygons) {
        arena.push_back(rasterize(*seg.polygons, img.height, img.width));
        return &arena.back();
    }
    return nullptr;
}

PreparedGeometry prepare_geometry(const EvalDataset& ds, EvalParams::Kind kind) {
    PreparedGeometry prep;
    const auto& gts = ds.ground_truth();
    const auto& dets = ds.detections();
    // Arena never reallocates: reserve one slot per instance.
    prep.owned_masks.reserve(gts.size() + dets.size());
    prep.gt_mask.resize(gts.size(), nullptr);
    prep.det_mask.resize(dets.size(), nullptr);
    prep.gt_box.resize(gts.size());
    prep.det_box.resize(dets.size());
    prep.det_area.resize(dets.size(), 0.0);

    if (kind == EvalParams::Kind::mask) {
        for (size_t i = 0; i < gts.size(); ++i) {
            prep.gt_mask[i] = prepare_mask(gts[i].segmentation, ds.image(gts[i].image_id),
                                           prep.owned_masks);
            if (!prep.gt_mask[i]) {
                throw ContractError("ground truth " + std::to_string(gts[i].id) +
                                    " has no segmentation; mask evaluation impossible");
            }
        }
        for (size_t i = 0; i < dets.size(); ++i) {
            prep.det_mask[i] = prepare_mask(dets[i].segmentation, ds.image(dets[i].image_id),
                                            prep.owned_masks);
            if (!prep.det_mask[i]) {
                throw ContractError("a detection lacks segmentation; mask evaluation impossible");
            }
            prep.det_area[i] = static_cast<double>(prep.det_mask[i]->area());
        }
    } else {
        for (size_t i = 0; i < gts.size(); ++i) {
            prep.gt_box[i] = gts[i].bbox;
        }
        for (size_t i = 0; i < dets.size(); ++i) {
            if (dets[i].bbox) {
                prep.det_box[i] = *dets[i].bbox;
            } else {
                throw ContractError("a detection lacks a bbox; box evaluation impossible");
            }
            prep.det_area[i] = prep.det_box[i].area();
        }
    }
    return prep;
}

} // namespace

std::vector<MatchRecord> match(const std::vector<DetectionInstance>& dets,
                               const std::vector<GroundTruthInstance>& gts, double iou_threshold,
                               std::optional<double> f1_threshold, const AreaRange& area,
                               int max_detections, int universe, EvalParams::Kind kind,
                               F1Mode f1_mode, bool category_has_attributes) {
    for (size_t d = 1; d < dets.size(); ++d) {
        if (dets[d].score > dets[d - 1].score) {
            throw ContractError("detections must be sorted by descending score");
        }
    }
    MatchInputs in;
    std::vector<BinaryMask> arena;
    arena.reserve(dets.size() + gts.size());
    std::vector<const BinaryMask*> det_masks, gt_masks;

    for (const auto& d : dets) {
        in.det_scores.push_back(d.score);
        if (kind == EvalParams::Kind::mask) {
            if (d.segmentation.mask) {
                det_masks.push_back(&*d.segmentation.mask);
            } else {
                throw ContractError("mask matching requires detections in mask form");
            }
            in.det_areas.push_back(static_cast<double>(det_masks.back()->area()));
        } else {
            if (!d.bbox) throw ContractError("box matching requires detection bboxes");
            in.det_areas.push_back(d.bbox->area());
        }
    }
    std::vector<size_t> gt_order(gts.size());
    for (size_t i = 0; i < gts.size(); ++i) gt_order[i] = i;
    std::sort(gt_order.begin(), gt_order.end(),
              [&](size_t a, size_t b) { return gts[a].id < gts[b].id; });
    for (size_t gi : gt_order) {
        const auto& g = gts[gi];
        in.gt_ids.push_back(g.id);
        in.gt_areas.push_back(g.area);
        in.gt_ignore.push_back(g.ignore ? 1 : 0);
        if (kind == EvalParams::Kind::mask) {
            if (!g.segmentation.mask) {
                throw ContractError("mask matching requires ground truth in mask form");
            }
            gt_masks.push_back(&*g.segmentation.mask);
        }
    }
    in.iou.resize(dets.size() * gts.size(), 0.0);
    for (size_t d = 0; d < dets.size(); ++d) {
        for (size_t g = 0; g < gt_order.size(); ++g) {
            in.iou[d * gts.size() + g] =
                kind == EvalParams::Kind::mask
                    ? mask_iou(*det_masks[d], *gt_masks[g])
                    : bbox_iou(*dets[d].bbox, gts[gt_order[g]].bbox);
        }
    }
    if (category_has_attributes && f1_threshold.has_value()) {
        in.f1.resize(dets.size() * gts.size(), 0.0);
        for (size_t d = 0; d < dets.size(); ++d) {
            for (size_t g = 0; g < gt_order.size(); ++g) {
                in.f1[d * gts.size() + g] =
                    attribute_f1(gts[gt_order[g]].attributes, dets[d].attributes, universe,
                                 f1_mode);
            }
        }
    }
    return match_kernel(in, iou_threshold, f1_threshold, area, max_detections);
}

size_t EvalResult::precision_index(size_t t, size_t f, size_t r, size_t k, size_t a,
                                   size_t m) const {
    const size_t F = f1_axis.size(), R = recall_points.size(), K = category_ids.size(),
                 A = area_ranges.size(), M = max_detections.size();
    return ((((t * F + f) * R + r) * K + k) * A + a) * M + m;
}

size_t EvalResult::recall_index(size_t t, size_t f, size_t k, size_t a, size_t m) const {
    const size_t F = f1_axis.size(), K = category_ids.size(), A = area_ranges.size(),
                 M = max_detections.size();
    return (((t * F + f) * K + k) * A + a) * M + m;
}

std::optional<double> EvalResult::average_precision(std::optional<size_t> iou_index,
                                                    std::optional<size_t> f1_index,
                                                    const std::vector<size_t>& category_indices,
                                                    size_t area_index,
                                                    size_t maxdet_index) const {
    double sum = 0.0;
    int64_t count = 0;
    const size_t t_begin = iou_index.value_or(0);
    const size_t t_end = iou_index ? *iou_index + 1 : iou_thresholds.size();
    const size_t f_begin = f1_index.value_or(1);
    const size_t f_end = f1_index ? *f1_index + 1 : f1_axis.size();
    for (size_t t = t_begin; t < t_end; ++t) {
        for (size_t f = f_begin; f < f_end; ++f) {
            for (size_t r = 0; r < recall_points.size(); ++r) {
                for (size_t k : category_indices) {
                    const double v = precision[precision_index(t, f, r, k, area_index,
                                                               maxdet_index)];
                    if (v < 0.0) continue;
                    sum += v;
                    ++count;
                }
            }
        }
    }
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
}

std::optional<double> EvalResult::average_recall(std::optional<size_t> iou_index,
                                                 std::optional<size_t> f1_index,
                                                 const std::vector<size_t>& category_indices,
                                                 size_t area_index, size_t maxdet_index) const {
    double sum = 0.0;
    int64_t count = 0;
    const size_t t_begin = iou_index.value_or(0);
    const size_t t_end = iou_index ? *iou_index + 1 : iou_thresholds.size();
    const size_t f_begin = f1_index.value_or(1);
    const size_t f_end = f1_index ? *f1_index + 1 : f1_axis.size();
    for (size_t t = t_begin; t < t_end; ++t) {
        for (size_t f = f_begin; f < f_end; ++f) {
            for (size_t k : category_indices) {
                const double v = recall[recall_index(t, f, k, area_index, maxdet_index)];
                if (v < 0.0) continue;
                sum += v;
                ++count;
            }
        }
    }
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
}

namespace {

struct Cell {
    size_t cat_axis = 0;
    int64_t image_id = 0;
    std::vector<size_t> gt;  // indices into ds.ground_truth(), id-ascending
    std::vector<size_t> det; // indices into ds.detections(), score-descending
};

struct CellOutput {
    std::vector<double> det_scores;   // truncated to the largest budget
    std::vector<uint8_t> outcomes;    // [iou][f1][area][det]
    std::vector<int64_t> gt_in_range; // [area]
};

} // namespace

EvalResult evaluate(const EvalDataset& ds, const EvalParams& params) {
    params.check();
    if (!ds.ontology()) throw ContractError("dataset has no ontology attached");
    const Ontology& onto = *ds.ontology();

    EvalResult res;
    res.iou_thresholds = params.iou_thresholds;
    res.f1_axis.push_back(std::nullopt);
    if (params.f1_constraint_enabled) {
        for (double t : params.f1_thresholds) res.f1_axis.push_back(t);
    }
    res.recall_points = params.recall_points;
    res.category_ids = ds.present_categories();
    for (int cid : res.category_ids) {
        res.category_has_attributes.push_back(onto.category_has_attributes(cid) ? 1 : 0);
    }
    res.area_ranges = params.area_ranges;
    res.max_detections = params.max_detections;
    res.f1_mode = params.f1_mode;
    res.kind = params.kind;

    const size_t T = res.iou_thresholds.size();
    const size_t F = res.f1_axis.size();
    const size_t R = res.recall_points.size();
    const size_t K = res.category_ids.size();
    const size_t A = res.area_ranges.size();
    const size_t M = res.max_detections.size();
    res.precision.assign(T * F * R * K * A * M, -1.0);
    res.recall.assign(T * F * K * A * M, -1.0);
    res.gt_counts.assign(K * A, 0);

    const PreparedGeometry prep = prepare_geometry(ds, params.kind);
    const int maxdet_cap = params.max_detections.back();
    const int universe = onto.attribute_universe();

    // One cell per (category, image) with any ground truth or detections,
    // listed in (category, image) order.
    std::vector<Cell> cells;
    for (size_t k = 0; k < K; ++k) {
        const int cid = res.category_ids[k];
        for (const auto& img : ds.images()) {
            Cell cell;
            cell.cat_axis = k;
            cell.image_id = img.id;
            cell.gt = ds.ground_truth_in(img.id, cid);
            cell.det = ds.detections_in(img.id, cid);
            if (cell.gt.empty() && cell.det.empty()) continue;
            if (cell.det.size() > static_cast<size_t>(maxdet_cap)) {
                cell.det.resize(static_cast<size_t>(maxdet_cap));
            }
            cells.push_back(std::move(cell));
        }
    }

    std::vector<CellOutput> outputs(cells.size());
    const auto& gts = ds.ground_truth();
    const auto& dets = ds.detections();

    parallel_for(cells.size(), params.threads, [&](size_t ci) {
        const Cell& cell = cells[ci];
        CellOutput& out = outputs[ci];
        const size_t n_d = cell.det.size();
        const size_t n_g = cell.gt.size();
        const bool has_attrs = res.category_has_attributes[cell.cat_axis] != 0;

        MatchInputs in;
        in.det_scores.reserve(n_d);
        in.det_areas.reserve(n_d);
        for (size_t di : cell.det) {
            in.det_scores.push_back(dets[di].score);
            in.det_areas.push_back(prep.det_area[di]);
        }
        for (size_t gi : cell.gt) {
            in.gt_ids.push_back(gts[gi].id);
            in.gt_areas.push_back(gts[gi].area);
            in.gt_ignore.push_back(gts[gi].ignore ? 1 : 0);
        }
        in.iou.resize(n_d * n_g, 0.0);
        for (size_t d = 0; d < n_d; ++d) {
            for (size_t g = 0; g < n_g; ++g) {
                in.iou[d * n_g + g] =
                    params.kind == EvalParams::Kind::mask
                        ? mask_iou(*prep.det_mask[cell.det[d]], *prep.gt_mask[cell.gt[g]])
                        : bbox_iou(prep.det_box[cell.det[d]], prep.gt_box[cell.gt[g]]);
            }
        }
        if (has_attrs && F > 1) {
            in.f1.resize(n_d * n_g, 0.0);
            for (size_t d = 0; d < n_d; ++d) {
                for (size_t g = 0; g < n_g; ++g) {
                    in.f1[d * n_g + g] = attribute_f1(gts[cell.gt[g]].attributes,
                                                      dets[cell.det[d]].attributes, universe,
                                                      params.f1_mode);
                }
            }
        }

        out.det_scores = in.det_scores;
        out.gt_in_range.assign(A, 0);
        for (size_t a = 0; a < A; ++a) {
            for (size_t g = 0; g < n_g; ++g) {
                if (!in.gt_ignore[g] && in_range(in.gt_areas[g], res.area_ranges[a])) {
                    ++out.gt_in_range[a];
                }
            }
        }
        out.outcomes.assign(T * F * A * n_d, static_cast<uint8_t>(MatchOutcome::fp));
        for (size_t t = 0; t < T; ++t) {
            for (size_t f = 0; f < F; ++f) {
                for (size_t a = 0; a < A; ++a) {
                    uint8_t* slot = out.outcomes.data() + ((t * F + f) * A + a) * n_d;
                    greedy_match(in, res.iou_thresholds[t], res.f1_axis[f], res.area_ranges[a],
                                 maxdet_cap,
                                 [&](size_t d, MatchOutcome outcome, int, double) {
                                     slot[d] = static_cast<uint8_t>(outcome);
                                 });
                }
            }
        }
    });

    // Deterministic serial accumulation, pooled per category.
    std::vector<std::vector<size_t>> cells_per_cat(K);
    for (size_t ci = 0; ci < cells.size(); ++ci) {
        cells_per_cat[cells[ci].cat_axis].push_back(ci);
    }

    struct PoolRef {
        double score;
        int64_t image_id;
        int det_idx;
        size_t cell;
    };

    std::vector<PoolRef> pooled;
    std::vector<uint8_t> ordered;
    for (size_t k = 0; k < K; ++k) {
        for (size_t a = 0; a < A; ++a) {
            int64_t total = 0;
            for (size_t ci : cells_per_cat[k]) total += outputs[ci].gt_in_range[a];
            res.gt_counts[k * A + a] = total;
        }

        pooled.clear();
        for (size_t ci : cells_per_cat[k]) {
            const auto& out = outputs[ci];
            for (size_t d = 0; d < out.det_scores.size(); ++d) {
                pooled.push_back({out.det_scores[d], cells[ci].image_id, static_cast<int>(d), ci});
            }
        }
        std::sort(pooled.begin(), pooled.end(), [](const PoolRef& x, const PoolRef& y) {
            if (x.score != y.score) return x.score > y.score;
            if (x.image_id != y.image_id) return x.image_id < y.image_id;
            return x.det_idx < y.det_idx;
        });

        for (size_t m = 0; m < M; ++m) {
            const int budget = res.max_detections[m];
            for (size_t t = 0; t < T; ++t) {
                for (size_t f = 0; f < F; ++f) {
                    for (size_t a = 0; a < A; ++a) {
                        const int64_t n_gt = res.gt_counts[k * A + a];
                        if (n_gt == 0) continue; // stays -1: undefined cell
                        ordered.clear();
                        for (const auto& ref : pooled) {
                            if (ref.det_idx >= budget) continue;
                            const auto& out = outputs[ref.cell];
                            const size_t n_d = out.det_scores.size();
                            ordered.push_back(
                                out.outcomes[((t * F + f) * A + a) * n_d + ref.det_idx]);
                        }
                        double final_recall = 0.0;
                        const std::vector<double> sampled =
                            sample_curve(ordered, n_gt, res.recall_points, &final_recall);
                        for (size_t r = 0; r < R; ++r) {
                            res.precision[res.precision_index(t, f, r, k, a, m)] = sampled[r];
                        }
                        res.recall[res.recall_index(t, f, k, a, m)] = final_recall;
                    }
                }
            }
        }
    }
    return res;
}

namespace {

std::optional<size_t> find_threshold(const std::vector<double>& values, double target) {
    for (size_t i = 0; i < values.size(); ++i) {
        if (std::abs(values[i] - target) < 1e-9) return i;
    }
    return std::nullopt;
}

std::optional<size_t> find_area(const std::vector<AreaRange>& ranges, std::string_view name) {
    for (size_t i = 0; i < ranges.size(); ++i) {
        if (ranges[i].name == name) return i;
    }
    return std::nullopt;
}

} // namespace

MetricReport summarize(const EvalResult& res, const Ontology& onto) {
    MetricReport report;
    const size_t K = res.category_ids.size();
    const size_t area_all = 0;
    const size_t m_top = res.max_detections.size() - 1;
    const bool joint = res.f1_axis.size() > 1;

    std::vector<size_t> all_cats(K);
    for (size_t k = 0; k < K; ++k) all_cats[k] = k;
    std::vector<size_t> attr_cats;
    for (size_t k = 0; k < K; ++k) {
        if (res.category_has_attributes[k]) attr_cats.push_back(k);
    }

    const auto pair_at = [&](std::optional<size_t> t, size_t area, size_t m,
                             const std::vector<size_t>& cats,
                             const std::vector<size_t>& joint_cats) {
        MetricPair p;
        p.iou = res.average_precision(t, 0, cats, area, m);
        if (joint) p.iou_f1 = res.average_precision(t, std::nullopt, joint_cats, area, m);
        return p;
    };

    report.ap = pair_at(std::nullopt, area_all, m_top, all_cats, attr_cats);
    if (const auto t50 = find_threshold(res.iou_thresholds, 0.5)) {
        report.ap50 = pair_at(t50, area_all, m_top, all_cats, attr_cats);
    }
    if (const auto t75 = find_threshold(res.iou_thresholds, 0.75)) {
        report.ap75 = pair_at(t75, area_all, m_top, all_cats, attr_cats);
    }
    if (const auto a = find_area(res.area_ranges, "small")) {
        report.ap_small = pair_at(std::nullopt, *a, m_top, all_cats, attr_cats);
    }
    if (const auto a = find_area(res.area_ranges, "medium")) {
        report.ap_medium = pair_at(std::nullopt, *a, m_top, all_cats, attr_cats);
    }
    if (const auto a = find_area(res.area_ranges, "large")) {
        report.ap_large = pair_at(std::nullopt, *a, m_top, all_cats, attr_cats);
    }
    for (size_t m = 0; m < res.max_detections.size(); ++m) {
        MetricPair p;
        p.iou = res.average_recall(std::nullopt, 0, all_cats, area_all, m);
        if (joint) p.iou_f1 = res.average_recall(std::nullopt, std::nullopt, attr_cats, area_all, m);
        report.ar_at[res.max_detections[m]] = p;
    }

    for (size_t k = 0; k < K; ++k) {
        CategoryMetrics cm;
        cm.id = res.category_ids[k];
        const auto& def = onto.category(cm.id);
        cm.name = def.name;
        cm.supercategory = def.supercategory;
        cm.has_attributes = res.category_has_attributes[k] != 0;
        const std::vector<size_t> self{k};
        const std::vector<size_t> joint_self = cm.has_attributes ? self : std::vector<size_t>{};
        cm.ap = pair_at(std::nullopt, area_all, m_top, self, joint_self);
        if (const auto t50 = find_threshold(res.iou_thresholds, 0.5)) {
            cm.ap50 = pair_at(t50, area_all, m_top, self, joint_self);
        }
        if (const auto t75 = find_threshold(res.iou_thresholds, 0.75)) {
            cm.ap75 = pair_at(t75, area_all, m_top, self, joint_self);
        }
        cm.ar_top.iou = res.average_recall(std::nullopt, 0, self, area_all, m_top);
        if (joint && cm.has_attributes) {
            cm.ar_top.iou_f1 = res.average_recall(std::nullopt, std::nullopt, self, area_all,
                                                  m_top);
        }
        report.per_category.push_back(std::move(cm));
    }

    for (const auto& super : onto.supercategories()) {
        std::vector<size_t> cats, cats_attr;
        for (size_t k = 0; k < K; ++k) {
            if (onto.category(res.category_ids[k]).supercategory != super) continue;
            cats.push_back(k);
            if (res.category_has_attributes[k]) cats_attr.push_back(k);
        }
        if (cats.empty()) continue;
        SupercategoryMetrics sm;
        sm.name = super;
        sm.ap = pair_at(std::nullopt, area_all, m_top, cats, cats_attr);
        if (const auto t50 = find_threshold(res.iou_thresholds, 0.5)) {
            sm.ap50 = pair_at(t50, area_all, m_top, cats, cats_attr);
        }
        if (const auto t75 = find_threshold(res.iou_thresholds, 0.75)) {
            sm.ap75 = pair_at(t75, area_all, m_top, cats, cats_attr);
        }
        if (const auto a = find_area(res.area_ranges, "small")) {
            sm.ap_small = pair_at(std::nullopt, *a, m_top, cats, cats_attr);
        }
        if (const auto a = find_area(res.area_ranges, "medium")) {
            sm.ap_medium = pair_at(std::nullopt, *a, m_top, cats, cats_attr);
        }
        if (const auto a = find_area(res.area_ranges, "large")) {
            sm.ap_large = pair_at(std::nullopt, *a, m_top, cats, cats_attr);
        }
        for (size_t m = 0; m < res.max_detections.size(); ++m) {
            MetricPair p;
            p.iou = res.average_recall(std::nullopt, 0, cats, area_all, m);
            if (joint) {
                p.iou_f1 = res.average_recall(std::nullopt, std::nullopt, cats_attr, area_all, m);
            }
            sm.ar_at[res.max_detections[m]] = p;
        }
        report.per_supercategory.push_back(std::move(sm));
    }
    return report;
}

std::vector<double> sweep_grid(double step) {
    if (step <= 0.0 || step > 1.0) throw ContractError("sweep step must be in (0, 1]");
    const int n = static_cast<int>(std::lround(1.0 / step));
    std::vector<double> grid;
    grid.reserve(n + 1);
    for (int i = 0; i <= n; ++i) grid.push_back(static_cast<double>(i) / n);
    return grid;
}

std::vector<std::pair<double, double>> f1_sweep(const EvalDataset& ds, const EvalParams& params,
                                                const std::vector<double>& grid) {
    if (grid.empty() || !std::is_sorted(grid.begin(), grid.end())) {
        throw ContractError("sweep grid must be non-empty and ascending");
    }
    EvalParams p = params;
    p.f1_thresholds = grid;
    p.f1_constraint_enabled = true;
    p.area_ranges = {params.area_ranges.front()};
    p.max_detections = {params.max_detections.back()};

    const EvalResult res = evaluate(ds, p);
    std::vector<size_t> attr_cats;
    for (size_t k = 0; k < res.category_ids.size(); ++k) {
        if (res.category_has_attributes[k]) attr_cats.push_back(k);
    }
    if (attr_cats.empty()) {
        throw ContractError("f1 sweep needs at least one attribute-bearing category");
    }

    std::vector<std::pair<double, double>> curve;
    curve.reserve(grid.size());
    for (size_t f = 1; f < res.f1_axis.size(); ++f) {
        const auto ap = res.average_precision(std::nullopt, f, attr_cats, 0, 0);
        curve.emplace_back(grid[f - 1], ap.value_or(0.0));
    }
    return curve;
}

BreakdownScope parse_breakdown_scope(std::string_view name) {
    if (name == "overall") return BreakdownScope::overall;
    if (name == "supercategory") return BreakdownScope::supercategory;
    if (name == "category") return BreakdownScope::category;
    throw ContractError("unknown breakdown scope: " + std::string(name));
}

std::vector<PRBreakdown> error_breakdown(const EvalDataset& ds, BreakdownScope scope,
                                         const EvalParams& params,
                                         std::optional<double> f1_threshold) {
    params.check();
    if (!ds.ontology()) throw ContractError("dataset has no ontology attached");
    const Ontology& onto = *ds.ontology();
    const PreparedGeometry prep = prepare_geometry(ds, params.kind);
    const AreaRange area = params.area_ranges.front();
    const int budget = params.max_detections.back();
    const int universe = onto.attribute_universe();
    const std::vector<int> category_ids = ds.present_categories();
    const size_t K = category_ids.size();
    const auto& gts = ds.ground_truth();
    const auto& dets = ds.detections();

    const auto iou_of = [&](size_t det_idx, size_t gt_idx) {
        return params.kind == EvalParams::Kind::mask
                   ? mask_iou(*prep.det_mask[det_idx], *prep.gt_mask[gt_idx])
                   : bbox_iou(prep.det_box[det_idx], prep.gt_box[gt_idx]);
    };

    std::map<int64_t, std::vector<size_t>> gts_by_image;
    for (size_t i = 0; i < gts.size(); ++i) gts_by_image[gts[i].image_id].push_back(i);

    // Per-category pooled outcome sequences for the five matched settings
    // (C75, C50, Loc, Sim, Oth); BG and FN derive from Oth.
    struct CatCurves {
        int64_t n_gt = 0;
        std::array<std::vector<double>, 7> curves;
    };
    std::vector<CatCurves> per_cat(K);

    struct DetRef {
        double score;
        int64_t image_id;
        int det_idx;
        std::array<uint8_t, 5> outcome;
    };

    for (size_t k = 0; k < K; ++k) {
        const int cid = category_ids[k];
        const std::string& super = onto.category(cid).supercategory;
        const bool has_attrs = onto.category_has_attributes(cid);
        std::vector<DetRef> refs;
        int64_t n_gt = 0;

        for (const auto& img : ds.images()) {
            const auto gt_idx = ds.ground_truth_in(img.id, cid);
            auto det_idx = ds.detections_in(img.id, cid);
            if (det_idx.size() > static_cast<size_t>(budget)) {
                det_idx.resize(static_cast<size_t>(budget));
            }
            if (gt_idx.empty() && det_idx.empty()) continue;

            MatchInputs in;
            for (size_t di : det_idx) {
                in.det_scores.push_back(dets[di].score);
                in.det_areas.push_back(prep.det_area[di]);
            }
            for (size_t gi : gt_idx) {
                in.gt_ids.push_back(gts[gi].id);
                in.gt_areas.push_back(gts[gi].area);
                in.gt_ignore.push_back(gts[gi].ignore ? 1 : 0);
                if (!gts[gi].ignore && in_range(gts[gi].area, area)) ++n_gt;
            }
            in.iou.resize(det_idx.size() * gt_idx.size(), 0.0);
            for (size_t d = 0; d < det_idx.size(); ++d) {
                for (size_t g = 0; g < gt_idx.size(); ++g) {
                    in.iou[d * gt_idx.size() + g] = iou_of(det_idx[d], gt_idx[g]);
                }
            }
            if (has_attrs && f1_threshold.has_value()) {
                in.f1.resize(det_idx.size() * gt_idx.size(), 0.0);
                for (size_t d = 0; d < det_idx.size(); ++d) {
                    for (size_t g = 0; g < gt_idx.size(); ++g) {
                        in.f1[d * gt_idx.size() + g] =
                            attribute_f1(gts[gt_idx[g]].attributes, dets[det_idx[d]].attributes,
                                         universe, params.f1_mode);
                    }
                }
            }

            // Max overlap of each detection with other-category ground truth,
            // for the confusion-removal settings.
            std::vector<double> other_same_super(det_idx.size(), 0.0);
            std::vector<double> other_any(det_idx.size(), 0.0);
            const auto img_gts = gts_by_image.find(img.id);
            if (img_gts != gts_by_image.end()) {
                for (size_t d = 0; d < det_idx.size(); ++d) {
                    for (size_t gi : img_gts->second) {
                        if (gts[gi].category_id == cid) continue;
                        const double iou = iou_of(det_idx[d], gi);
                        other_any[d] = std::max(other_any[d], iou);
                        if (onto.category(gts[gi].category_id).supercategory == super) {
                            other_same_super[d] = std::max(other_same_super[d], iou);
                        }
                    }
                }
            }

            const size_t base = refs.size();
            for (size_t d = 0; d < det_idx.size(); ++d) {
                refs.push_back({in.det_scores[d], img.id, static_cast<int>(d), {}});
            }
            const std::array<double, 3> taus{0.75, 0.5, 0.1};
            for (size_t s = 0; s < 3; ++s) {
                greedy_match(in, taus[s], f1_threshold, area, budget,
                             [&](size_t d, MatchOutcome outcome, int, double) {
                                 refs[base + d].outcome[s] = static_cast<uint8_t>(outcome);
                             });
            }
            // Sim / Oth: start from the Loc outcomes and additionally ignore
            // confusion false positives.
            for (size_t d = 0; d < det_idx.size(); ++d) {
                uint8_t loc = refs[base + d].outcome[2];
                uint8_t sim = loc, oth = loc;
                if (loc == static_cast<uint8_t>(MatchOutcome::fp)) {
                    if (other_same_super[d] >= 0.1) sim = static_cast<uint8_t>(MatchOutcome::ignored);
                    if (other_any[d] >= 0.1) oth = static_cast<uint8_t>(MatchOutcome::ignored);
                }
                refs[base + d].outcome[3] = sim;
                refs[base + d].outcome[4] = oth;
            }
        }

        per_cat[k].n_gt = n_gt;
        if (n_gt == 0) continue;

        std::sort(refs.begin(), refs.end(), [](const DetRef& x, const DetRef& y) {
            if (x.score != y.score) return x.score > y.score;
            if (x.image_id != y.image_id) return x.image_id < y.image_id;
            return x.det_idx < y.det_idx;
        });

        std::vector<uint8_t> ordered;
        ordered.reserve(refs.size());
        for (size_t s = 0; s < 5; ++s) {
            ordered.clear();
            for (const auto& r : refs) ordered.push_back(r.outcome[s]);
            per_cat[k].curves[s] = sample_curve(ordered, n_gt, params.recall_points, nullptr);
        }
        // BG: every remaining false positive removed.
        ordered.clear();
        for (const auto& r : refs) {
            uint8_t o = r.outcome[4];
            if (o == static_cast<uint8_t>(MatchOutcome::fp)) {
                o = static_cast<uint8_t>(MatchOutcome::ignored);
            }
            ordered.push_back(o);
        }
        per_cat[k].curves[5] = sample_curve(ordered, n_gt, params.recall_points, nullptr);
        // FN: misses removed as well; the curve is identically 1.
        per_cat[k].curves[6].assign(params.recall_points.size(), 1.0);
    }

    // Group and average.
    std::vector<std::pair<std::string, std::vector<size_t>>> groups;
    if (scope == BreakdownScope::overall) {
        std::vector<size_t> all;
        for (size_t k = 0; k < K; ++k) all.push_back(k);
        groups.emplace_back("overall", std::move(all));
    } else if (scope == BreakdownScope::supercategory) {
        for (const auto& super : onto.supercategories()) {
            std::vector<size_t> cats;
            for (size_t k = 0; k < K; ++k) {
                if (onto.category(category_ids[k]).supercategory == super) cats.push_back(k);
            }
            if (!cats.empty()) groups.emplace_back(super, std::move(cats));
        }
    } else {
        for (size_t k = 0; k < K; ++k) {
            groups.emplace_back(onto.category(category_ids[k]).name, std::vector<size_t>{k});
        }
    }

    std::vector<PRBreakdown> out;
    for (const auto& [name, cats] : groups) {
        std::vector<size_t> defined;
        for (size_t k : cats) {
            if (per_cat[k].n_gt > 0) defined.push_back(k);
        }
        PRBreakdown b;
        b.group = name;
        const size_t R = params.recall_points.size();
        for (size_t s = 0; s < 7; ++s) {
            b.curves[s].assign(R, 0.0);
            if (defined.empty()) {
                b.auc[s] = 0.0;
                continue;
            }
            for (size_t r = 0; r < R; ++r) {
                double sum = 0.0;
                for (size_t k : defined) sum += per_cat[k].curves[s][r];
                b.curves[s][r] = sum / static_cast<double>(defined.size());
            }
            double auc = 0.0;
            for (double v : b.curves[s]) auc += v;
            b.auc[s] = auc / static_cast<double>(R);
        }
        out.push_back(std::move(b));
    }
    return out;
}

} // namespace fpeval
