#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "fpeval/dataset.hpp"
#include "fpeval/ontology.hpp"

namespace fpeval::testing {

/// Rectangle helper: rows [r0, r1) x cols [c0, c1) inside an h x w image.
struct Rect {
    int r0 = 0, c0 = 0, r1 = 0, c1 = 0;

    int64_t area() const { return int64_t(r1 - r0) * (c1 - c0); }
};

BinaryMask rect_mask(int height, int width, const Rect& rect);

struct GtSpec {
    int64_t id = 0;
    int64_t image_id = 0;
    int category_id = 0;
    Rect rect;
    std::vector<int32_t> attributes;
    bool ignore = false;
};

struct DetSpec {
    int64_t image_id = 0;
    int category_id = 0;
    Rect rect;
    double score = 1.0;
    std::vector<int32_t> attributes;
};

struct ImageSpec {
    int64_t id = 0;
    int height = 0;
    int width = 0;
};

/// Builds ground-truth / prediction JSON texts in the toolkit file formats.
std::string gt_json(const std::vector<ImageSpec>& images, const std::vector<GtSpec>& gts);
std::string pred_json(const std::vector<DetSpec>& dets);

/// Small ontology: categories 1 "jacket" (outerwear, attributes), 2 "shoe"
/// (accessory, none), 3 "pants" (outerwear, attributes); `universe`
/// attributes in one superclass.
std::shared_ptr<const Ontology> mini_ontology(int universe);

/// The ontology bundled under data/ (requires FPEVAL_DATA_DIR).
std::shared_ptr<const Ontology> bundled_ontology();

EvalDataset make_dataset(const std::vector<ImageSpec>& images, const std::vector<GtSpec>& gts,
                         const std::vector<DetSpec>& dets,
                         std::shared_ptr<const Ontology> ontology);

/// Seeded random mini-dataset for oracle-equivalence runs: up to `max_images`
/// images (<= 24x24 px), rectangles as masks, up to 5 ground truths and
/// detections per (image, category), attribute sets over `universe` ids,
/// occasional ignore flags.
EvalDataset random_mini_dataset(uint64_t seed, int max_images, int universe,
                                std::shared_ptr<const Ontology> ontology);

/// Large synthetic corpus for throughput and determinism checks; written as
/// (gt, pred) JSON texts.
void synthetic_corpus(int images, int dets_per_image, uint64_t seed, std::string* gt_text,
                      std::string* pred_text);

} // namespace fpeval::testing
