#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>

#include "fpeval/dataset.hpp"
#include "fpeval/eval.hpp"
#include "fpeval/geometry.hpp"
#include "fpeval/ontology.hpp"
#include "fpeval/report.hpp"
#include "fpeval/stats.hpp"

namespace py = pybind11;
using namespace fpeval;

namespace {

PolygonSet polygons_from_flat(const std::vector<std::vector<double>>& flat) {
    PolygonSet p;
    for (const auto& coords : flat) {
        if (coords.size() < 6 || coords.size() % 2 != 0) {
            throw GeometryError("polygon needs an even list of >= 6 coordinates");
        }
        std::vector<Point> poly;
        for (size_t i = 0; i + 1 < coords.size(); i += 2) {
            poly.push_back({coords[i], coords[i + 1]});
        }
        p.polygons.push_back(std::move(poly));
    }
    return p;
}

BBox bbox_from_tuple(const std::vector<double>& b) {
    if (b.size() != 4) throw ContractError("bbox must be [x, y, w, h]");
    return BBox{b[0], b[1], b[2], b[3]};
}

EvalParams params_from_args(const std::string& kind, const std::string& f1_mode, bool with_f1,
                            int threads) {
    EvalParams p = EvalParams::defaults();
    p.kind = kind == "box" ? EvalParams::Kind::box : EvalParams::Kind::mask;
    p.f1_mode = parse_f1_mode(f1_mode);
    p.f1_constraint_enabled = with_f1;
    p.threads = threads;
    return p;
}

EvalDataset load_pair(const std::string& gt_path, const std::string& pred_path,
                      const std::string& ontology_path, double attr_threshold) {
    auto onto = std::make_shared<const Ontology>(Ontology::load(ontology_path));
    EvalDataset ds = load_ground_truth(gt_path, onto);
    if (!pred_path.empty()) load_predictions(pred_path, ds, attr_threshold);
    return ds;
}

} // namespace

PYBIND11_MODULE(_fpeval, m) {
    m.doc() = "Instance segmentation with attribute localization: evaluation core";
    m.attr("__version__") = kToolkitVersion;

    py::register_exception<Error>(m, "FpevalError");

    py::class_<BinaryMask>(m, "Mask")
        .def_static("from_runs",
                    [](int h, int w, const std::vector<uint32_t>& runs) {
                        return BinaryMask::from_runs(h, w, runs);
                    },
                    py::arg("height"), py::arg("width"), py::arg("runs"))
        .def_static("from_grid",
                    [](const std::vector<std::vector<int>>& rows) {
                        if (rows.empty() || rows[0].empty()) {
                            throw GeometryError("grid must be non-empty");
                        }
                        const int h = int(rows.size());
                        const int w = int(rows[0].size());
                        std::vector<uint8_t> grid;
                        grid.reserve(size_t(h) * w);
                        for (const auto& row : rows) {
                            if (int(row.size()) != w) {
                                throw GeometryError("grid rows differ in length");
                            }
                            for (int v : row) grid.push_back(v ? 1 : 0);
                        }
                        return BinaryMask::from_grid(h, w, grid);
                    },
                    py::arg("rows"))
        .def_property_readonly("height", &BinaryMask::height)
        .def_property_readonly("width", &BinaryMask::width)
        .def_property_readonly("runs", [](const BinaryMask& m) { return m.runs(); })
        .def("area", &BinaryMask::area)
        .def("decode",
             [](const BinaryMask& m) {
                 const auto flat = m.decode();
                 std::vector<std::vector<int>> rows(m.height(), std::vector<int>(m.width(), 0));
                 for (int r = 0; r < m.height(); ++r) {
                     for (int c = 0; c < m.width(); ++c) {
                         rows[size_t(r)][size_t(c)] = flat[size_t(r) * m.width() + c];
                     }
                 }
                 return rows;
             })
        .def("__eq__", [](const BinaryMask& a, const BinaryMask& b) { return a == b; });

    m.def("mask_iou", &mask_iou, py::arg("a"), py::arg("b"));
    m.def("bbox_iou",
          [](const std::vector<double>& a, const std::vector<double>& b) {
              return bbox_iou(bbox_from_tuple(a), bbox_from_tuple(b));
          },
          py::arg("a"), py::arg("b"));
    m.def("rasterize",
          [](const std::vector<std::vector<double>>& polygons, int height, int width) {
              return rasterize(polygons_from_flat(polygons), height, width);
          },
          py::arg("polygons"), py::arg("height"), py::arg("width"));
    m.def("polygon_area",
          [](const std::vector<std::vector<double>>& p) { return polygon_area(polygons_from_flat(p)); });
    m.def("polygon_perimeter",
          [](const std::vector<std::vector<double>>& p) {
              return polygon_perimeter(polygons_from_flat(p));
          });
    m.def("boundary_complexity",
          [](const std::vector<std::vector<double>>& p) -> std::optional<double> {
              return boundary_complexity(polygons_from_flat(p));
          });
    m.def("relative_size", &relative_size, py::arg("instance_area"), py::arg("image_height"),
          py::arg("image_width"));
    m.def("vertices_per_polygon",
          [](const std::vector<std::vector<double>>& p) {
              return vertices_per_polygon(polygons_from_flat(p));
          });

    m.def("confusion_counts",
          [](const std::vector<int32_t>& gt, const std::vector<int32_t>& pred, int universe) {
              const auto c = confusion_counts(AttributeVector(gt), AttributeVector(pred), universe);
              py::dict out;
              out["tp"] = c.tp;
              out["fp"] = c.fp;
              out["fn"] = c.fn;
              out["tn"] = c.tn;
              return out;
          },
          py::arg("gt"), py::arg("pred"), py::arg("universe"));
    m.def("attribute_f1",
          [](const std::vector<int32_t>& gt, const std::vector<int32_t>& pred, int universe,
             const std::string& mode) {
              return attribute_f1(AttributeVector(gt), AttributeVector(pred), universe,
                                  parse_f1_mode(mode));
          },
          py::arg("gt"), py::arg("pred"), py::arg("universe"), py::arg("mode") = "binary-macro");

    py::class_<Ontology, std::shared_ptr<Ontology>>(m, "Ontology")
        .def_static("load", [](const std::string& path) {
            return std::make_shared<Ontology>(Ontology::load(path));
        })
        .def_property_readonly("num_categories",
                               [](const Ontology& o) { return o.categories().size(); })
        .def_property_readonly("num_attributes",
                               [](const Ontology& o) { return o.attributes().size(); })
        .def("category_name", [](const Ontology& o, int id) { return o.category(id).name; })
        .def("attribute_superclasses", &Ontology::attribute_superclasses)
        .def("attributes_in_superclass",
             [](const Ontology& o, const std::string& s) { return o.attributes_in_superclass(s); })
        .def("applicable_attributes", &Ontology::applicable_attributes, py::arg("category_id"))
        .def("map_external",
             [](const Ontology& o, const std::string& taxonomy, const std::string& label) {
                 const auto mapping = o.map_external(taxonomy, label);
                 py::dict out;
                 out["category_ids"] = mapping.category_ids;
                 out["attribute_ids"] = mapping.attribute_ids;
                 return out;
             },
             py::arg("taxonomy"), py::arg("label"));

    m.def("validate",
          [](const std::string& gt_path, const std::string& ontology_path) {
              auto onto = std::make_shared<const Ontology>(Ontology::load(ontology_path));
              const EvalDataset ds = load_ground_truth(gt_path, onto);
              py::list out;
              for (const auto& v : validate(ds.ground_truth(), *onto)) {
                  py::dict item;
                  item["instance_id"] = v.instance_id;
                  item["kind"] = to_string(v.kind);
                  item["message"] = v.message;
                  out.append(item);
              }
              return out;
          },
          py::arg("gt_path"), py::arg("ontology_path"));

    m.def("evaluate_json",
          [](const std::string& gt_path, const std::string& pred_path,
             const std::string& ontology_path, const std::string& kind,
             const std::string& f1_mode, bool with_f1, double attr_threshold, int threads) {
              const EvalParams params = params_from_args(kind, f1_mode, with_f1, threads);
              const EvalDataset ds = load_pair(gt_path, pred_path, ontology_path, attr_threshold);
              const EvalResult result = evaluate(ds, params);
              const MetricReport metrics = summarize(result, *ds.ontology());
              return report_to_json(params, &metrics, nullptr, nullptr);
          },
          py::arg("gt_path"), py::arg("pred_path"), py::arg("ontology_path"),
          py::arg("kind") = "mask", py::arg("f1_mode") = "binary-macro",
          py::arg("with_f1") = true, py::arg("attr_threshold") = 0.5, py::arg("threads") = 0);

    m.def("f1_sweep",
          [](const std::string& gt_path, const std::string& pred_path,
             const std::string& ontology_path, double grid_step, const std::string& f1_mode,
             const std::string& kind, double attr_threshold, int threads) {
              EvalParams params = params_from_args(kind, f1_mode, true, threads);
              const EvalDataset ds = load_pair(gt_path, pred_path, ontology_path, attr_threshold);
              return f1_sweep(ds, params, sweep_grid(grid_step));
          },
          py::arg("gt_path"), py::arg("pred_path"), py::arg("ontology_path"),
          py::arg("grid_step") = 0.01, py::arg("f1_mode") = "binary-macro",
          py::arg("kind") = "mask", py::arg("attr_threshold") = 0.5, py::arg("threads") = 0);

    m.def("error_breakdown_json",
          [](const std::string& gt_path, const std::string& pred_path,
             const std::string& ontology_path, const std::string& scope, const std::string& kind,
             double attr_threshold) {
              const EvalParams params = params_from_args(kind, "binary-macro", false, 0);
              const EvalDataset ds = load_pair(gt_path, pred_path, ontology_path, attr_threshold);
              const auto breakdown =
                  error_breakdown(ds, parse_breakdown_scope(scope), params, std::nullopt);
              return report_to_json(params, nullptr, nullptr, &breakdown);
          },
          py::arg("gt_path"), py::arg("pred_path"), py::arg("ontology_path"),
          py::arg("scope") = "overall", py::arg("kind") = "mask", py::arg("attr_threshold") = 0.5);

    m.def("dataset_statistics_json",
          [](const std::string& gt_path, const std::string& ontology_path, uint64_t seed,
             int replicates) {
              auto onto = std::make_shared<const Ontology>(Ontology::load(ontology_path));
              const EvalDataset ds = load_ground_truth(gt_path, onto);
              const auto summaries = dataset_statistics(ds, *onto, seed, replicates);
              const auto counts = instance_counts(ds, *onto);
              return stats_to_json(summaries, counts, seed, replicates);
          },
          py::arg("gt_path"), py::arg("ontology_path"), py::arg("seed") = 0,
          py::arg("replicates") = 10000);

    m.def("bootstrap_ci",
          [](const std::vector<double>& samples, const std::string& statistic, int replicates,
             double confidence, uint64_t seed) {
              const Statistic stat =
                  statistic == "median" ? Statistic::median : Statistic::mean;
              return bootstrap_ci(samples, stat, replicates, confidence, seed);
          },
          py::arg("samples"), py::arg("statistic") = "mean", py::arg("replicates") = 10000,
          py::arg("confidence") = 0.95, py::arg("seed") = 0);
}
