#include "fpeval/report.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace fpeval {

namespace {

using nlohmann::json;

json opt_to_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

json pair_to_json(const MetricPair& p) {
    return json{{"iou", opt_to_json(p.iou)}, {"iou_f1", opt_to_json(p.iou_f1)}};
}

json params_to_json(const EvalParams& p) {
    json j;
    j["iou_thresholds"] = p.iou_thresholds;
    j["f1_thresholds"] = p.f1_thresholds;
    j["f1_mode"] = to_string(p.f1_mode);
    j["f1_constraint_enabled"] = p.f1_constraint_enabled;
    j["recall_points"] = p.recall_points.size();
    j["max_detections"] = p.max_detections;
    json areas = json::array();
    for (const auto& a : p.area_ranges) {
        areas.push_back({{"name", a.name},
                         {"lo", a.lo},
                         {"hi", std::isinf(a.hi) ? json(nullptr) : json(a.hi)}});
    }
    j["area_ranges"] = areas;
    j["kind"] = p.kind == EvalParams::Kind::mask ? "mask" : "box";
    j["toolkit_version"] = kToolkitVersion;
    j["format_version"] = kFormatVersion;
    return j;
}

json metrics_to_json(const MetricReport& r) {
    json j;
    j["AP_IoU"] = opt_to_json(r.ap.iou);
    j["AP_IoU_F1"] = opt_to_json(r.ap.iou_f1);
    j["AP50"] = pair_to_json(r.ap50);
    j["AP75"] = pair_to_json(r.ap75);
    j["APs"] = pair_to_json(r.ap_small);
    j["APm"] = pair_to_json(r.ap_medium);
    j["APl"] = pair_to_json(r.ap_large);
    for (const auto& [budget, p] : r.ar_at) {
        j["AR@" + std::to_string(budget)] = pair_to_json(p);
    }
    json cats = json::array();
    for (const auto& c : r.per_category) {
        cats.push_back({{"id", c.id},
                        {"name", c.name},
                        {"supercategory", c.supercategory},
                        {"has_attributes", c.has_attributes},
                        {"ap", pair_to_json(c.ap)},
                        {"ap50", pair_to_json(c.ap50)},
                        {"ap75", pair_to_json(c.ap75)},
                        {"ar_top", pair_to_json(c.ar_top)}});
    }
    j["per_category"] = cats;
    json supers = json::array();
    for (const auto& s : r.per_supercategory) {
        json ar;
        for (const auto& [budget, p] : s.ar_at) {
            ar["AR@" + std::to_string(budget)] = pair_to_json(p);
        }
        supers.push_back({{"name", s.name},
                          {"ap", pair_to_json(s.ap)},
                          {"ap50", pair_to_json(s.ap50)},
                          {"ap75", pair_to_json(s.ap75)},
                          {"ap_small", pair_to_json(s.ap_small)},
                          {"ap_medium", pair_to_json(s.ap_medium)},
                          {"ap_large", pair_to_json(s.ap_large)},
                          {"ar", ar}});
    }
    j["per_supercategory"] = supers;
    return j;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

std::string report_to_json(const EvalParams& params, const MetricReport* metrics,
                           const std::vector<std::pair<double, double>>* sweep,
                           const std::vector<PRBreakdown>* breakdown) {
    json j;
    j["params"] = params_to_json(params);
    j["metrics"] = metrics ? metrics_to_json(*metrics) : json(nullptr);
    if (sweep) {
        json curve = json::array();
        for (const auto& [tau, ap] : *sweep) curve.push_back({tau, ap});
        j["f1_sweep"] = curve;
    } else {
        j["f1_sweep"] = nullptr;
    }
    if (breakdown) {
        json groups;
        for (const auto& b : *breakdown) {
            json settings;
            for (size_t s = 0; s < kBreakdownSettings.size(); ++s) {
                settings[kBreakdownSettings[s]] = {{"auc", b.auc[s]}, {"curve", b.curves[s]}};
            }
            groups[b.group] = settings;
        }
        j["error_breakdown"] = groups;
    } else {
        j["error_breakdown"] = nullptr;
    }
    return j.dump(2) + "\n";
}

std::string breakdown_to_csv(const std::vector<PRBreakdown>& breakdown,
                             const std::vector<double>& recall_points) {
    std::ostringstream out;
    out << "group,setting,recall,precision\n";
    for (const auto& b : breakdown) {
        for (size_t s = 0; s < kBreakdownSettings.size(); ++s) {
            for (size_t r = 0; r < recall_points.size(); ++r) {
                out << b.group << ',' << kBreakdownSettings[s] << ','
                    << format_double(recall_points[r]) << ',' << format_double(b.curves[s][r])
                    << '\n';
            }
        }
    }
    return out.str();
}

std::string breakdown_auc_to_csv(const std::vector<PRBreakdown>& breakdown) {
    std::ostringstream out;
    out << "group,setting,auc\n";
    for (const auto& b : breakdown) {
        for (size_t s = 0; s < kBreakdownSettings.size(); ++s) {
            out << b.group << ',' << kBreakdownSettings[s] << ',' << format_double(b.auc[s])
                << '\n';
        }
    }
    return out.str();
}

std::string sweep_to_csv(const std::vector<std::pair<double, double>>& sweep) {
    std::ostringstream out;
    out << "tau_f1,ap\n";
    for (const auto& [tau, ap] : sweep) {
        out << format_double(tau) << ',' << format_double(ap) << '\n';
    }
    return out.str();
}

std::string stats_to_json(const std::vector<StatSummary>& summaries,
                          const InstanceCounts& counts, uint64_t seed, int replicates) {
    json j;
    j["seed"] = seed;
    j["replicates"] = replicates;
    j["toolkit_version"] = kToolkitVersion;
    j["format_version"] = kFormatVersion;
    json metrics = json::array();
    for (const auto& s : summaries) {
        metrics.push_back({{"metric", s.name},
                           {"n", s.n},
                           {"mean", s.mean},
                           {"median", s.median},
                           {"ci_mean", {s.ci_mean.first, s.ci_mean.second}},
                           {"ci_median", {s.ci_median.first, s.ci_median.second}},
                           {"histogram",
                            {{"edges", s.histogram.edges}, {"counts", s.histogram.counts}}}});
    }
    j["summaries"] = metrics;
    json cat = json::array();
    for (const auto& [id, c] : counts.per_category) cat.push_back({id, c});
    json attr = json::array();
    for (const auto& [id, c] : counts.per_attribute) attr.push_back({id, c});
    j["instances_per_category"] = cat;
    j["instances_per_attribute"] = attr;
    return j.dump(2) + "\n";
}

std::string stats_to_csv(const std::vector<StatSummary>& summaries) {
    std::ostringstream out;
    out << "metric,n,mean,mean_ci_lo,mean_ci_hi,median,median_ci_lo,median_ci_hi\n";
    for (const auto& s : summaries) {
        out << s.name << ',' << s.n << ',' << format_double(s.mean) << ','
            << format_double(s.ci_mean.first) << ',' << format_double(s.ci_mean.second) << ','
            << format_double(s.median) << ',' << format_double(s.ci_median.first) << ','
            << format_double(s.ci_median.second) << '\n';
    }
    return out.str();
}

std::string histograms_to_csv(const std::vector<StatSummary>& summaries) {
    std::ostringstream out;
    out << "metric,bin_lo,bin_hi,count\n";
    for (const auto& s : summaries) {
        for (size_t b = 0; b + 1 < s.histogram.edges.size(); ++b) {
            out << s.name << ',' << format_double(s.histogram.edges[b]) << ','
                << format_double(s.histogram.edges[b + 1]) << ',' << s.histogram.counts[b]
                << '\n';
        }
    }
    return out.str();
}

std::string violations_to_text(const std::vector<Violation>& violations) {
    std::ostringstream out;
    for (const auto& v : violations) {
        out << "instance " << v.instance_id << ": " << to_string(v.kind) << ": " << v.message
            << '\n';
    }
    return out.str();
}

} // namespace fpeval
