#include "reference_engine.hpp"

#include <algorithm>
#include <cmath>

namespace fpeval::testing {

namespace {

// Independent RLE expansion (column-major, first run zeros).
std::vector<uint8_t> expand_runs(const BinaryMask& m) {
    std::vector<uint8_t> flat(size_t(m.height()) * m.width(), 0);
    size_t pos = 0;
    bool value = false;
    for (uint32_t run : m.runs()) {
        for (uint32_t i = 0; i < run; ++i) flat[pos++] = value ? 1 : 0;
        value = !value;
    }
    return flat; // column-major order
}

double dense_mask_iou(const BinaryMask& a, const BinaryMask& b) {
    const auto fa = expand_runs(a);
    const auto fb = expand_runs(b);
    int64_t inter = 0, uni = 0;
    for (size_t i = 0; i < fa.size(); ++i) {
        if (fa[i] && fb[i]) ++inter;
        if (fa[i] || fb[i]) ++uni;
    }
    if (uni == 0) return 0.0;
    return double(inter) / double(uni);
}

double ref_box_iou(const BBox& a, const BBox& b) {
    const double x0 = std::max(a.x, b.x);
    const double y0 = std::max(a.y, b.y);
    const double x1 = std::min(a.x + a.w, b.x + b.w);
    const double y1 = std::min(a.y + a.h, b.y + b.h);
    const double inter = std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0);
    const double uni = a.w * a.h + b.w * b.h - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

std::vector<uint8_t> multihot(const AttributeVector& v, int universe) {
    std::vector<uint8_t> bits(universe, 0);
    for (int32_t id : v.ids()) bits[size_t(id)] = 1;
    return bits;
}

double ref_f1(const AttributeVector& gt, const AttributeVector& pred, int universe, F1Mode mode) {
    const auto g = multihot(gt, universe);
    const auto p = multihot(pred, universe);
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (int i = 0; i < universe; ++i) {
        if (g[i] && p[i]) ++tp;
        if (!g[i] && p[i]) ++fp;
        if (g[i] && !p[i]) ++fn;
        if (!g[i] && !p[i]) ++tn;
    }
    switch (mode) {
        case F1Mode::micro: {
            if (2 * tp + fp + fn == 0) return 1.0;
            return 2.0 * tp / double(2 * tp + fp + fn);
        }
        case F1Mode::macro: {
            double sum = 0.0;
            for (int i = 0; i < universe; ++i) {
                if (g[i] && p[i]) {
                    sum += 1.0; // per-class F1 of an agreeing set bit
                }
                // mismatches and zero-support classes contribute 0
            }
            return sum / double(universe);
        }
        case F1Mode::binary_micro: {
            const int64_t hamming = fp + fn;
            return double(universe - hamming) / double(universe);
        }
        case F1Mode::binary_macro: {
            const double pos = (2 * tp + fp + fn == 0) ? 1.0 : 2.0 * tp / double(2 * tp + fp + fn);
            const double neg = (2 * tn + fn + fp == 0) ? 1.0 : 2.0 * tn / double(2 * tn + fn + fp);
            return (pos + neg) / 2.0;
        }
    }
    return 0.0;
}

// Everything the matcher needs for one (image, category) pair.
struct RefImageCell {
    int64_t image_id = 0;
    std::vector<double> det_scores;
    std::vector<double> det_areas;
    std::vector<double> gt_areas;
    std::vector<bool> gt_ignore;
    std::vector<std::vector<double>> iou; // [det][gt]
    std::vector<std::vector<double>> f1;  // [det][gt]; empty when unused
};

struct RefRecord {
    double score = 0.0;
    int64_t image_id = 0;
    int det_idx = 0;
    int outcome = 0; // 0 tp, 1 fp, 2 ignored
};

} // namespace

EvalResult reference_evaluate(const EvalDataset& ds, const EvalParams& params) {
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

    const size_t T = res.iou_thresholds.size(), F = res.f1_axis.size(),
                 R = res.recall_points.size(), K = res.category_ids.size(),
                 A = res.area_ranges.size(), M = res.max_detections.size();
    res.precision.assign(T * F * R * K * A * M, -1.0);
    res.recall.assign(T * F * K * A * M, -1.0);
    res.gt_counts.assign(K * A, 0);

    const int universe = onto.attribute_universe();
    const auto& gts = ds.ground_truth();
    const auto& dets = ds.detections();

    const auto inside = [](double area, const AreaRange& range) {
        if (area < range.lo) return false;
        if (std::isinf(range.hi)) return true;
        return area < range.hi;
    };

    for (size_t k = 0; k < K; ++k) {
        const int cid = res.category_ids[k];
        const bool has_attrs = onto.category_has_attributes(cid);

        // Pairwise overlap/F1 tables, one per image.
        std::vector<RefImageCell> cells;
        for (const auto& img : ds.images()) {
            const auto gt_idx = ds.ground_truth_in(img.id, cid);
            const auto det_idx = ds.detections_in(img.id, cid);
            if (gt_idx.empty() && det_idx.empty()) continue;
            RefImageCell cell;
            cell.image_id = img.id;
            for (size_t di : det_idx) {
                cell.det_scores.push_back(dets[di].score);
                cell.det_areas.push_back(params.kind == EvalParams::Kind::mask
                                             ? double(dets[di].segmentation.mask->area())
                                             : dets[di].bbox->area());
            }
            for (size_t gi : gt_idx) {
                cell.gt_areas.push_back(gts[gi].area);
                cell.gt_ignore.push_back(gts[gi].ignore);
            }
            for (size_t d = 0; d < det_idx.size(); ++d) {
                std::vector<double> row, f1row;
                for (size_t g = 0; g < gt_idx.size(); ++g) {
                    row.push_back(params.kind == EvalParams::Kind::mask
                                      ? dense_mask_iou(*dets[det_idx[d]].segmentation.mask,
                                                       *gts[gt_idx[g]].segmentation.mask)
                                      : ref_box_iou(*dets[det_idx[d]].bbox, gts[gt_idx[g]].bbox));
                    if (has_attrs && F > 1) {
                        f1row.push_back(ref_f1(gts[gt_idx[g]].attributes,
                                               dets[det_idx[d]].attributes, universe,
                                               params.f1_mode));
                    }
                }
                cell.iou.push_back(std::move(row));
                if (has_attrs && F > 1) cell.f1.push_back(std::move(f1row));
            }
            cells.push_back(std::move(cell));
        }

        for (size_t a = 0; a < A; ++a) {
            int64_t n_gt = 0;
            for (const auto& cell : cells) {
                for (size_t g = 0; g < cell.gt_areas.size(); ++g) {
                    if (!cell.gt_ignore[g] && inside(cell.gt_areas[g], res.area_ranges[a])) {
                        ++n_gt;
                    }
                }
            }
            res.gt_counts[k * A + a] = n_gt;
        }

        for (size_t m = 0; m < M; ++m) {
            const size_t budget = size_t(res.max_detections[m]);
            for (size_t t = 0; t < T; ++t) {
                for (size_t f = 0; f < F; ++f) {
                    for (size_t a = 0; a < A; ++a) {
                        const AreaRange& range = res.area_ranges[a];
                        std::vector<RefRecord> records;
                        for (const auto& cell : cells) {
                            const size_t n_d = std::min(cell.det_scores.size(), budget);
                            std::vector<bool> taken(cell.gt_areas.size(), false);
                            for (size_t d = 0; d < n_d; ++d) {
                                int pick = -1;
                                double pick_iou = -1.0;
                                int pick_ign = -1;
                                double pick_ign_iou = -1.0;
                                for (size_t g = 0; g < cell.gt_areas.size(); ++g) {
                                    if (taken[g]) continue;
                                    const double iou = cell.iou[d][g];
                                    if (iou < res.iou_thresholds[t]) continue;
                                    if (res.f1_axis[f].has_value() && !cell.f1.empty() &&
                                        cell.f1[d][g] < *res.f1_axis[f]) {
                                        continue;
                                    }
                                    const bool ign = cell.gt_ignore[g] ||
                                                     !inside(cell.gt_areas[g], range);
                                    if (ign) {
                                        if (iou > pick_ign_iou) {
                                            pick_ign = int(g);
                                            pick_ign_iou = iou;
                                        }
                                    } else {
                                        if (iou > pick_iou) {
                                            pick = int(g);
                                            pick_iou = iou;
                                        }
                                    }
                                }
                                RefRecord rec;
                                rec.score = cell.det_scores[d];
                                rec.image_id = cell.image_id;
                                rec.det_idx = int(d);
                                if (pick >= 0) {
                                    taken[size_t(pick)] = true;
                                    rec.outcome = 0;
                                } else if (pick_ign >= 0) {
                                    taken[size_t(pick_ign)] = true;
                                    rec.outcome = 2;
                                } else {
                                    rec.outcome = inside(cell.det_areas[d], range) ? 1 : 2;
                                }
                                records.push_back(rec);
                            }
                        }
                        const int64_t n_gt = res.gt_counts[k * A + a];
                        if (n_gt == 0) continue;
                        std::sort(records.begin(), records.end(),
                                  [](const RefRecord& x, const RefRecord& y) {
                                      if (x.score != y.score) return x.score > y.score;
                                      if (x.image_id != y.image_id) return x.image_id < y.image_id;
                                      return x.det_idx < y.det_idx;
                                  });
                        std::vector<double> precisions, recalls;
                        int64_t tp = 0, fp = 0;
                        for (const auto& rec : records) {
                            if (rec.outcome == 2) continue;
                            if (rec.outcome == 0) ++tp;
                            if (rec.outcome == 1) ++fp;
                            recalls.push_back(double(tp) / double(n_gt));
                            precisions.push_back(double(tp) / double(tp + fp));
                        }
                        for (size_t i = precisions.size(); i > 1; --i) {
                            if (precisions[i - 1] > precisions[i - 2]) {
                                precisions[i - 2] = precisions[i - 1];
                            }
                        }
                        for (size_t r = 0; r < R; ++r) {
                            double value = 0.0;
                            bool found = false;
                            for (size_t i = 0; i < recalls.size(); ++i) {
                                if (recalls[i] >= res.recall_points[r]) {
                                    value = precisions[i];
                                    found = true;
                                    break;
                                }
                            }
                            res.precision[res.precision_index(t, f, r, k, a, m)] =
                                found ? value : 0.0;
                        }
                        res.recall[res.recall_index(t, f, k, a, m)] =
                            recalls.empty() ? 0.0 : recalls.back();
                    }
                }
            }
        }
    }
    return res;
}

} // namespace fpeval::testing
