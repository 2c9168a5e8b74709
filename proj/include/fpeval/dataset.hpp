#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fpeval/attribute_f1.hpp"
#include "fpeval/geometry.hpp"
#include "fpeval/ontology.hpp"

namespace fpeval {

/// Segmentation in either source form. Polygon lists are kept as loaded;
/// masks are uncompressed RLE.
struct Segmentation {
    std::optional<PolygonSet> polygons;
    std::optional<BinaryMask> mask;

    bool has_any() const { return polygons.has_value() || mask.has_value(); }
};

struct GroundTruthInstance {
    int64_t id = 0;
    int64_t image_id = 0;
    int category_id = 0;
    Segmentation segmentation;
    double area = 0.0;
    BBox bbox;
    AttributeVector attributes;
    bool ignore = false;
};

struct DetectionInstance {
    int64_t image_id = 0;
    int category_id = 0;
    Segmentation segmentation; // may be empty for box-only evaluation
    std::optional<BBox> bbox;
    double score = 0.0;
    AttributeVector attributes;
};

struct ImageInfo {
    int64_t id = 0;
    int height = 0;
    int width = 0;
    std::string file_name;
};

/// Indexed, immutable view of one ground-truth corpus plus (optionally) the
/// detections to evaluate against it. Detection lists per (image, category)
/// are sorted by descending score, ties by input order.
class EvalDataset {
public:
    const std::vector<ImageInfo>& images() const { return images_; }
    const ImageInfo& image(int64_t id) const;
    bool has_image(int64_t id) const;

    const std::vector<GroundTruthInstance>& ground_truth() const { return ground_truth_; }
    const std::vector<DetectionInstance>& detections() const { return detections_; }

    /// Indices into ground_truth() for one (image, category) cell, ordered by
    /// ascending annotation id.
    std::vector<size_t> ground_truth_in(int64_t image_id, int category_id) const;

    /// Indices into detections() for one (image, category) cell, ordered by
    /// descending score (ties by input order).
    std::vector<size_t> detections_in(int64_t image_id, int category_id) const;

    const std::shared_ptr<const Ontology>& ontology() const { return ontology_; }

    /// Category ids present in the ground truth or detections, ascending.
    std::vector<int> present_categories() const;

    bool operator==(const EvalDataset& other) const;

    friend EvalDataset load_ground_truth(const std::string&, std::shared_ptr<const Ontology>);
    friend EvalDataset load_ground_truth_text(const std::string&, std::shared_ptr<const Ontology>);
    friend void load_predictions_text(const std::string&, EvalDataset&, double);
    friend void convert_segmentation_to_masks(EvalDataset&);
    friend void exclude_attribute_superclasses(EvalDataset&, const std::vector<std::string>&);

private:
    std::vector<ImageInfo> images_;
    std::vector<GroundTruthInstance> ground_truth_;
    std::vector<DetectionInstance> detections_;
    std::map<int64_t, size_t> image_index_;
    std::map<std::pair<int64_t, int>, std::vector<size_t>> gt_index_;
    std::map<std::pair<int64_t, int>, std::vector<size_t>> det_index_;
    std::shared_ptr<const Ontology> ontology_;

    void rebuild_index();
};

/// Parses a ground-truth annotation file (COCO-style JSON). Areas missing
/// from the file are recomputed as the rasterized pixel count of the
/// segmentation. Throws ParseError on malformed input, dangling image or
/// category references, or duplicate annotation ids.
EvalDataset load_ground_truth(const std::string& path, std::shared_ptr<const Ontology> ontology);
EvalDataset load_ground_truth_text(const std::string& text,
                                   std::shared_ptr<const Ontology> ontology);

/// Parses a prediction file into an existing dataset. Detections carrying
/// per-attribute scores keep attribute a iff score_a >= attr_threshold.
void load_predictions(const std::string& path, EvalDataset& ds, double attr_threshold = 0.5);
void load_predictions_text(const std::string& text, EvalDataset& ds, double attr_threshold = 0.5);

/// Serializes the ground truth back to the annotation format; reloading the
/// output yields an equal dataset.
std::string save_ground_truth_text(const EvalDataset& ds);
void save_ground_truth(const EvalDataset& ds, const std::string& path);

/// Rasterizes every polygon segmentation to mask form in place; instances
/// already in mask form are unchanged. Areas become pixel counts.
void convert_segmentation_to_masks(EvalDataset& ds);

/// Rasterizes one instance's segmentation to mask form using the image size.
GroundTruthInstance convert_segmentation(const GroundTruthInstance& instance, int image_height,
                                         int image_width);

/// Drops every attribute whose superclass is listed, from ground truth and
/// detections alike. Lets callers score without superclasses that annotators
/// could rarely decide on (occlusion-prone groups like waistlines or opening
/// types).
void exclude_attribute_superclasses(EvalDataset& ds,
                                    const std::vector<std::string>& superclasses);

} // namespace fpeval
