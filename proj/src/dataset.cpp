#include "fpeval/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fpeval {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open file for writing: " + path);
    out << text;
    if (!out) throw ParseError("failed writing file: " + path);
}

// Segmentation is either a list of flat polygon coordinate lists
// [[x1,y1,x2,y2,...], ...] or an uncompressed RLE object
// {"size":[h,w],"counts":[...]}.
Segmentation parse_segmentation(const json& seg, int64_t ann_id) {
    Segmentation out;
    if (seg.is_array()) {
        PolygonSet polys;
        for (const auto& flat : seg) {
            if (!flat.is_array() || flat.size() < 6 || flat.size() % 2 != 0) {
                throw ParseError("annotation " + std::to_string(ann_id) +
                                 ": polygon needs an even list of >= 6 coordinates");
            }
            std::vector<Point> poly;
            poly.reserve(flat.size() / 2);
            for (size_t i = 0; i + 1 < flat.size(); i += 2) {
                poly.push_back({flat[i].get<double>(), flat[i + 1].get<double>()});
            }
            polys.polygons.push_back(std::move(poly));
        }
        out.polygons = std::move(polys);
        return out;
    }
    if (seg.is_object()) {
        const auto& size = seg.at("size");
        if (!size.is_array() || size.size() != 2) {
            throw ParseError("annotation " + std::to_string(ann_id) + ": RLE size must be [h, w]");
        }
        std::vector<uint32_t> counts;
        for (const auto& c : seg.at("counts")) counts.push_back(c.get<uint32_t>());
        try {
            out.mask = BinaryMask::from_runs(size[0].get<int>(), size[1].get<int>(), counts);
        } catch (const GeometryError& e) {
            throw ParseError("annotation " + std::to_string(ann_id) + ": " + e.what());
        }
        return out;
    }
    throw ParseError("annotation " + std::to_string(ann_id) +
                     ": segmentation must be polygons or an RLE object");
}

json segmentation_to_json(const Segmentation& seg) {
    if (seg.mask) {
        json rle;
        rle["size"] = {seg.mask->height(), seg.mask->width()};
        rle["counts"] = seg.mask->runs();
        return rle;
    }
    json polys = json::array();
    if (seg.polygons) {
        for (const auto& poly : seg.polygons->polygons) {
            json flat = json::array();
            for (const auto& v : poly) {
                flat.push_back(v.x);
                flat.push_back(v.y);
            }
            polys.push_back(std::move(flat));
        }
    }
    return polys;
}

BBox parse_bbox(const json& b, int64_t ann_id) {
    if (!b.is_array() || b.size() != 4) {
        throw ParseError("annotation " + std::to_string(ann_id) + ": bbox must be [x, y, w, h]");
    }
    BBox box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    if (box.w < 0 || box.h < 0) {
        throw ParseError("annotation " + std::to_string(ann_id) + ": bbox with negative size");
    }
    return box;
}

BBox derive_bbox(const Segmentation& seg) {
    if (seg.mask) return seg.mask->bounds();
    if (seg.polygons) return polygon_bounds(*seg.polygons);
    return BBox{};
}

} // namespace

const ImageInfo& EvalDataset::image(int64_t id) const {
    const auto it = image_index_.find(id);
    if (it == image_index_.end()) {
        throw ContractError("unknown image id " + std::to_string(id));
    }
    return images_[it->second];
}

bool EvalDataset::has_image(int64_t id) const { return image_index_.count(id) > 0; }

std::vector<size_t> EvalDataset::ground_truth_in(int64_t image_id, int category_id) const {
    const auto it = gt_index_.find({image_id, category_id});
    return it == gt_index_.end() ? std::vector<size_t>{} : it->second;
}

std::vector<size_t> EvalDataset::detections_in(int64_t image_id, int category_id) const {
    const auto it = det_index_.find({image_id, category_id});
    return it == det_index_.end() ? std::vector<size_t>{} : it->second;
}

std::vector<int> EvalDataset::present_categories() const {
    std::set<int> cats;
    for (const auto& g : ground_truth_) cats.insert(g.category_id);
    for (const auto& d : detections_) cats.insert(d.category_id);
    return {cats.begin(), cats.end()};
}

void EvalDataset::rebuild_index() {
    image_index_.clear();
    gt_index_.clear();
    det_index_.clear();
    for (size_t i = 0; i < images_.size(); ++i) image_index_[images_[i].id] = i;
    for (size_t i = 0; i < ground_truth_.size(); ++i) {
        gt_index_[{ground_truth_[i].image_id, ground_truth_[i].category_id}].push_back(i);
    }
    // Ground truth per cell ordered by ascending annotation id (stable
    // matching tie-break).
    for (auto& [key, idx] : gt_index_) {
        (void)key;
        std::sort(idx.begin(), idx.end(), [this](size_t a, size_t b) {
            return ground_truth_[a].id < ground_truth_[b].id;
        });
    }
    for (size_t i = 0; i < detections_.size(); ++i) {
        det_index_[{detections_[i].image_id, detections_[i].category_id}].push_back(i);
    }
    // Detections per cell ordered by descending score, ties by input order.
    for (auto& [key, idx] : det_index_) {
        (void)key;
        std::stable_sort(idx.begin(), idx.end(), [this](size_t a, size_t b) {
            return detections_[a].score > detections_[b].score;
        });
    }
}

bool EvalDataset::operator==(const EvalDataset& other) const {
    const auto image_eq = [](const ImageInfo& a, const ImageInfo& b) {
        return a.id == b.id && a.height == b.height && a.width == b.width &&
               a.file_name == b.file_name;
    };
    const auto bbox_eq = [](const BBox& a, const BBox& b) {
        return a.x == b.x && a.y == b.y && a.w == b.w && a.h == b.h;
    };
    const auto seg_eq = [](const Segmentation& a, const Segmentation& b) {
        if (a.mask.has_value() != b.mask.has_value()) return false;
        if (a.mask && !(*a.mask == *b.mask)) return false;
        if (a.polygons.has_value() != b.polygons.has_value()) return false;
        if (a.polygons) {
            if (a.polygons->polygons.size() != b.polygons->polygons.size()) return false;
            for (size_t i = 0; i < a.polygons->polygons.size(); ++i) {
                const auto& pa = a.polygons->polygons[i];
                const auto& pb = b.polygons->polygons[i];
                if (pa.size() != pb.size()) return false;
                for (size_t j = 0; j < pa.size(); ++j) {
                    if (pa[j].x != pb[j].x || pa[j].y != pb[j].y) return false;
                }
            }
        }
        return true;
    };

    if (images_.size() != other.images_.size() ||
        ground_truth_.size() != other.ground_truth_.size() ||
        detections_.size() != other.detections_.size()) {
        return false;
    }
    for (size_t i = 0; i < images_.size(); ++i) {
        if (!image_eq(images_[i], other.images_[i])) return false;
    }
    for (size_t i = 0; i < ground_truth_.size(); ++i) {
        const auto& a = ground_truth_[i];
        const auto& b = other.ground_truth_[i];
        if (a.id != b.id || a.image_id != b.image_id || a.category_id != b.category_id ||
            a.area != b.area || a.ignore != b.ignore || !(a.attributes == b.attributes) ||
            !bbox_eq(a.bbox, b.bbox) || !seg_eq(a.segmentation, b.segmentation)) {
            return false;
        }
    }
    for (size_t i = 0; i < detections_.size(); ++i) {
        const auto& a = detections_[i];
        const auto& b = other.detections_[i];
        if (a.image_id != b.image_id || a.category_id != b.category_id || a.score != b.score ||
            !(a.attributes == b.attributes) || !seg_eq(a.segmentation, b.segmentation)) {
            return false;
        }
        if (a.bbox.has_value() != b.bbox.has_value()) return false;
        if (a.bbox && !bbox_eq(*a.bbox, *b.bbox)) return false;
    }
    return true;
}

EvalDataset load_ground_truth(const std::string& path, std::shared_ptr<const Ontology> ontology) {
    return load_ground_truth_text(read_file(path), std::move(ontology));
}

EvalDataset load_ground_truth_text(const std::string& text,
                                   std::shared_ptr<const Ontology> ontology) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("ground truth parse error: ") + e.what());
    }

    EvalDataset ds;
    ds.ontology_ = std::move(ontology);

    try {
        for (const auto& img : doc.value("images", json::array())) {
            ImageInfo info;
            info.id = img.at("id").get<int64_t>();
            info.height = img.at("height").get<int>();
            info.width = img.at("width").get<int>();
            info.file_name = img.value("file_name", std::string{});
            if (info.height <= 0 || info.width <= 0) {
                throw ParseError("image " + std::to_string(info.id) + ": non-positive size");
            }
            if (ds.image_index_.count(info.id)) {
                throw ParseError("duplicate image id " + std::to_string(info.id));
            }
            ds.image_index_[info.id] = ds.images_.size();
            ds.images_.push_back(std::move(info));
        }

        std::set<int64_t> seen_ann_ids;
        for (const auto& ann : doc.value("annotations", json::array())) {
            GroundTruthInstance inst;
            inst.id = ann.at("id").get<int64_t>();
            inst.image_id = ann.at("image_id").get<int64_t>();
            inst.category_id = ann.at("category_id").get<int>();
            if (!seen_ann_ids.insert(inst.id).second) {
                throw ParseError("duplicate annotation id " + std::to_string(inst.id));
            }
            if (!ds.image_index_.count(inst.image_id)) {
                throw ParseError("annotation " + std::to_string(inst.id) +
                                 " references missing image " + std::to_string(inst.image_id));
            }
            if (ds.ontology_ && !ds.ontology_->has_category(inst.category_id)) {
                throw ParseError("annotation " + std::to_string(inst.id) +
                                 " references missing category " +
                                 std::to_string(inst.category_id));
            }
            if (ann.contains("segmentation")) {
                inst.segmentation = parse_segmentation(ann.at("segmentation"), inst.id);
            }
            inst.ignore = ann.value("ignore", 0) != 0 || ann.value("iscrowd", 0) != 0;
            if (ann.contains("attribute_ids")) {
                std::vector<int32_t> ids;
                for (const auto& a : ann.at("attribute_ids")) ids.push_back(a.get<int32_t>());
                inst.attributes = AttributeVector(std::move(ids));
            }
            if (ann.contains("area")) {
                inst.area = ann.at("area").get<double>();
            } else if (inst.segmentation.mask) {
                inst.area = static_cast<double>(inst.segmentation.mask->area());
            } else if (inst.segmentation.polygons) {
                const auto& img = ds.images_[ds.image_index_[inst.image_id]];
                inst.area = static_cast<double>(
                    rasterize(*inst.segmentation.polygons, img.height, img.width).area());
            }
            if (ann.contains("bbox")) {
                inst.bbox = parse_bbox(ann.at("bbox"), inst.id);
            } else if (inst.segmentation.has_any()) {
                inst.bbox = derive_bbox(inst.segmentation);
            }
            ds.ground_truth_.push_back(std::move(inst));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("ground truth schema error: ") + e.what());
    }

    ds.rebuild_index();
    return ds;
}

void load_predictions(const std::string& path, EvalDataset& ds, double attr_threshold) {
    load_predictions_text(read_file(path), ds, attr_threshold);
}

void load_predictions_text(const std::string& text, EvalDataset& ds, double attr_threshold) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("predictions parse error: ") + e.what());
    }
    if (!doc.is_array()) throw ParseError("predictions file must be a JSON array");

    std::vector<DetectionInstance> dets;
    try {
        int64_t index = 0;
        for (const auto& p : doc) {
            DetectionInstance det;
            det.image_id = p.at("image_id").get<int64_t>();
            det.category_id = p.at("category_id").get<int>();
            if (!ds.has_image(det.image_id)) {
                throw ParseError("detection #" + std::to_string(index) +
                                 " references missing image " + std::to_string(det.image_id));
            }
            if (ds.ontology() && !ds.ontology()->has_category(det.category_id)) {
                throw ParseError("detection #" + std::to_string(index) +
                                 " references missing category " +
                                 std::to_string(det.category_id));
            }
            det.score = p.at("score").get<double>();
            if (!std::isfinite(det.score) || det.score < 0.0 || det.score > 1.0) {
                throw ParseError("detection #" + std::to_string(index) +
                                 " has score outside [0, 1]");
            }
            if (p.contains("segmentation")) {
                det.segmentation = parse_segmentation(p.at("segmentation"), index);
            }
            if (p.contains("bbox")) {
                det.bbox = parse_bbox(p.at("bbox"), index);
            } else if (det.segmentation.has_any()) {
                det.bbox = derive_bbox(det.segmentation);
            }
            if (!det.segmentation.has_any() && !det.bbox) {
                throw ParseError("detection #" + std::to_string(index) +
                                 " carries neither segmentation nor bbox");
            }
            if (p.contains("attribute_ids")) {
                std::vector<int32_t> ids;
                for (const auto& a : p.at("attribute_ids")) ids.push_back(a.get<int32_t>());
                det.attributes = AttributeVector(std::move(ids));
            } else if (p.contains("attribute_scores")) {
                std::vector<int32_t> ids;
                for (const auto& [key, value] : p.at("attribute_scores").items()) {
                    const double s = value.get<double>();
                    if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
                        throw ParseError("detection #" + std::to_string(index) +
                                         " has attribute score outside [0, 1]");
                    }
                    if (s >= attr_threshold) ids.push_back(std::stoi(key));
                }
                det.attributes = AttributeVector(std::move(ids));
            }
            dets.push_back(std::move(det));
            ++index;
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("predictions schema error: ") + e.what());
    }

    ds.detections_ = std::move(dets);
    ds.rebuild_index();
}

std::string save_ground_truth_text(const EvalDataset& ds) {
    json doc;
    doc["images"] = json::array();
    for (const auto& img : ds.images()) {
        doc["images"].push_back({{"id", img.id},
                                 {"height", img.height},
                                 {"width", img.width},
                                 {"file_name", img.file_name}});
    }
    doc["annotations"] = json::array();
    for (const auto& g : ds.ground_truth()) {
        json ann;
        ann["id"] = g.id;
        ann["image_id"] = g.image_id;
        ann["category_id"] = g.category_id;
        ann["segmentation"] = segmentation_to_json(g.segmentation);
        ann["area"] = g.area;
        ann["bbox"] = {g.bbox.x, g.bbox.y, g.bbox.w, g.bbox.h};
        ann["iscrowd"] = g.ignore ? 1 : 0;
        ann["attribute_ids"] = g.attributes.ids();
        doc["annotations"].push_back(std::move(ann));
    }
    doc["categories"] = json::array();
    doc["attributes"] = json::array();
    if (ds.ontology()) {
        for (const auto& c : ds.ontology()->categories()) {
            doc["categories"].push_back(
                {{"id", c.id}, {"name", c.name}, {"supercategory", c.supercategory}});
        }
        for (const auto& a : ds.ontology()->attributes()) {
            doc["attributes"].push_back(
                {{"id", a.id}, {"name", a.name}, {"superclass", a.superclass}});
        }
    }
    return doc.dump(2) + "\n";
}

void save_ground_truth(const EvalDataset& ds, const std::string& path) {
    write_file(path, save_ground_truth_text(ds));
}

GroundTruthInstance convert_segmentation(const GroundTruthInstance& instance, int image_height,
                                         int image_width) {
    GroundTruthInstance out = instance;
    if (out.segmentation.mask) return out; // already a mask
    if (!out.segmentation.polygons) return out;
    BinaryMask mask = rasterize(*out.segmentation.polygons, image_height, image_width);
    out.area = static_cast<double>(mask.area());
    out.bbox = mask.bounds();
    out.segmentation.mask = std::move(mask);
    out.segmentation.polygons.reset();
    return out;
}

void exclude_attribute_superclasses(EvalDataset& ds,
                                    const std::vector<std::string>& superclasses) {
    if (!ds.ontology_) throw ContractError("dataset has no ontology attached");
    std::set<int32_t> excluded;
    for (const auto& name : superclasses) {
        bool known = false;
        for (const auto& a : ds.ontology_->attributes()) {
            if (a.superclass == name) {
                excluded.insert(a.id);
                known = true;
            }
        }
        if (!known) throw ContractError("unknown attribute superclass '" + name + "'");
    }
    const auto filter = [&](const AttributeVector& v) {
        std::vector<int32_t> kept;
        for (int32_t id : v.ids()) {
            if (!excluded.count(id)) kept.push_back(id);
        }
        return AttributeVector(std::move(kept));
    };
    for (auto& g : ds.ground_truth_) g.attributes = filter(g.attributes);
    for (auto& d : ds.detections_) d.attributes = filter(d.attributes);
}

void convert_segmentation_to_masks(EvalDataset& ds) {
    for (auto& g : ds.ground_truth_) {
        if (g.segmentation.mask || !g.segmentation.polygons) continue;
        const auto& img = ds.image(g.image_id);
        g = convert_segmentation(g, img.height, img.width);
    }
    for (auto& d : ds.detections_) {
        if (d.segmentation.mask || !d.segmentation.polygons) continue;
        const auto& img = ds.image(d.image_id);
        BinaryMask mask = rasterize(*d.segmentation.polygons, img.height, img.width);
        d.bbox = mask.bounds();
        d.segmentation.mask = std::move(mask);
        d.segmentation.polygons.reset();
    }
    ds.rebuild_index();
}

} // namespace fpeval
