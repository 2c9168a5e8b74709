#include "fixtures.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

#ifndef FPEVAL_DATA_DIR
#define FPEVAL_DATA_DIR "data"
#endif

namespace fpeval::testing {

namespace {

using nlohmann::json;

json rect_segmentation(const ImageSpec& img, const Rect& r) {
    const BinaryMask mask = rect_mask(img.height, img.width, r);
    json seg;
    seg["size"] = {img.height, img.width};
    seg["counts"] = mask.runs();
    return seg;
}

} // namespace

BinaryMask rect_mask(int height, int width, const Rect& rect) {
    std::vector<uint8_t> grid(size_t(height) * width, 0);
    for (int row = std::max(rect.r0, 0); row < std::min(rect.r1, height); ++row) {
        for (int col = std::max(rect.c0, 0); col < std::min(rect.c1, width); ++col) {
            grid[size_t(row) * width + col] = 1;
        }
    }
    return BinaryMask::from_grid(height, width, grid);
}

std::string gt_json(const std::vector<ImageSpec>& images, const std::vector<GtSpec>& gts) {
    json doc;
    doc["images"] = json::array();
    for (const auto& img : images) {
        doc["images"].push_back({{"id", img.id},
                                 {"height", img.height},
                                 {"width", img.width},
                                 {"file_name", "img" + std::to_string(img.id) + ".jpg"}});
    }
    doc["annotations"] = json::array();
    for (const auto& g : gts) {
        const auto img = std::find_if(images.begin(), images.end(),
                                      [&](const ImageSpec& i) { return i.id == g.image_id; });
        json ann;
        ann["id"] = g.id;
        ann["image_id"] = g.image_id;
        ann["category_id"] = g.category_id;
        ann["segmentation"] = rect_segmentation(*img, g.rect);
        ann["area"] = double(g.rect.area());
        ann["bbox"] = {double(g.rect.c0), double(g.rect.r0), double(g.rect.c1 - g.rect.c0),
                       double(g.rect.r1 - g.rect.r0)};
        ann["iscrowd"] = g.ignore ? 1 : 0;
        ann["attribute_ids"] = g.attributes;
        doc["annotations"].push_back(std::move(ann));
    }
    return doc.dump();
}

std::string pred_json(const std::vector<DetSpec>& dets) {
    // Box-only prediction file; mask form goes through make_dataset.
    json arr = json::array();
    for (const auto& d : dets) {
        json det;
        det["image_id"] = d.image_id;
        det["category_id"] = d.category_id;
        det["score"] = d.score;
        det["bbox"] = {double(d.rect.c0), double(d.rect.r0), double(d.rect.c1 - d.rect.c0),
                       double(d.rect.r1 - d.rect.r0)};
        det["attribute_ids"] = d.attributes;
        arr.push_back(std::move(det));
    }
    return arr.dump();
}

std::shared_ptr<const Ontology> mini_ontology(int universe) {
    json doc;
    doc["categories"] = {{{"id", 1}, {"name", "jacket"}, {"supercategory", "outerwear"}},
                         {{"id", 2}, {"name", "shoe"}, {"supercategory", "accessory"}},
                         {{"id", 3}, {"name", "pants"}, {"supercategory", "outerwear"}}};
    doc["attributes"] = json::array();
    for (int i = 0; i < universe; ++i) {
        doc["attributes"].push_back(
            {{"id", i}, {"name", "attr" + std::to_string(i)}, {"superclass", "S"}});
    }
    doc["applicability"] = {{"1", {"S"}}, {"3", {"S"}}};
    return std::make_shared<const Ontology>(Ontology::from_json_text(doc.dump()));
}

std::shared_ptr<const Ontology> bundled_ontology() {
    static const std::shared_ptr<const Ontology> onto = std::make_shared<const Ontology>(
        Ontology::load(std::string(FPEVAL_DATA_DIR) + "/fashionpedia_ontology.json"));
    return onto;
}

EvalDataset make_dataset(const std::vector<ImageSpec>& images, const std::vector<GtSpec>& gts,
                         const std::vector<DetSpec>& dets,
                         std::shared_ptr<const Ontology> ontology) {
    EvalDataset ds = load_ground_truth_text(gt_json(images, gts), std::move(ontology));
    // Predictions carry real masks: rebuild with sizes from the image table.
    json arr = json::array();
    for (const auto& d : dets) {
        const auto img = std::find_if(images.begin(), images.end(),
                                      [&](const ImageSpec& i) { return i.id == d.image_id; });
        json det;
        det["image_id"] = d.image_id;
        det["category_id"] = d.category_id;
        det["score"] = d.score;
        det["segmentation"] = rect_segmentation(*img, d.rect);
        det["attribute_ids"] = d.attributes;
        arr.push_back(std::move(det));
    }
    load_predictions_text(arr.dump(), ds);
    return ds;
}

EvalDataset random_mini_dataset(uint64_t seed, int max_images, int universe,
                                std::shared_ptr<const Ontology> ontology) {
    std::mt19937_64 rng(seed);
    const auto randint = [&](int lo, int hi) { // inclusive
        return lo + int(rng() % uint64_t(hi - lo + 1));
    };

    const int n_images = randint(1, max_images);
    std::vector<ImageSpec> images;
    std::vector<GtSpec> gts;
    std::vector<DetSpec> dets;
    const std::vector<int> cats = {1, 2, 3};
    int64_t next_gt_id = 1;

    const auto random_rect = [&](int h, int w) {
        Rect r;
        r.r0 = randint(0, h - 2);
        r.c0 = randint(0, w - 2);
        r.r1 = randint(r.r0 + 1, h);
        r.c1 = randint(r.c0 + 1, w);
        return r;
    };
    const auto random_attrs = [&]() {
        std::set<int32_t> ids;
        const int n = randint(0, 8);
        for (int i = 0; i < n; ++i) ids.insert(int32_t(randint(0, universe - 1)));
        return std::vector<int32_t>(ids.begin(), ids.end());
    };

    for (int i = 0; i < n_images; ++i) {
        ImageSpec img;
        img.id = i + 1;
        img.height = randint(8, 16);
        img.width = randint(8, 16);
        images.push_back(img);
        for (int c : cats) {
            const int n_gt = randint(0, 5);
            for (int g = 0; g < n_gt; ++g) {
                GtSpec gt;
                gt.id = next_gt_id++;
                gt.image_id = img.id;
                gt.category_id = c;
                gt.rect = random_rect(img.height, img.width);
                if (c != 2) gt.attributes = random_attrs();
                gt.ignore = randint(0, 9) == 0;
                gts.push_back(std::move(gt));
            }
            const int n_det = randint(0, 5);
            for (int d = 0; d < n_det; ++d) {
                DetSpec det;
                det.image_id = img.id;
                det.category_id = c;
                det.rect = random_rect(img.height, img.width);
                det.score = randint(0, 1000) / 1000.0;
                if (c != 2) det.attributes = random_attrs();
                dets.push_back(std::move(det));
            }
        }
    }
    return make_dataset(images, gts, dets, std::move(ontology));
}

void synthetic_corpus(int n_images, int dets_per_image, uint64_t seed, std::string* gt_text,
                      std::string* pred_text) {
    std::mt19937_64 rng(seed);
    const auto randint = [&](int lo, int hi) {
        return lo + int(rng() % uint64_t(hi - lo + 1));
    };
    std::vector<ImageSpec> images;
    std::vector<GtSpec> gts;
    json preds = json::array();
    int64_t next_id = 1;
    const int H = 128, W = 128;
    const std::vector<int> cats = {1, 2, 3};

    for (int i = 0; i < n_images; ++i) {
        ImageSpec img{i + 1, H, W};
        images.push_back(img);
        const int n_gt = 5;
        std::vector<Rect> rects;
        for (int g = 0; g < n_gt; ++g) {
            GtSpec gt;
            gt.id = next_id++;
            gt.image_id = img.id;
            gt.category_id = cats[size_t(randint(0, 2))];
            const int size = randint(8, 48);
            gt.rect.r0 = randint(0, H - size);
            gt.rect.c0 = randint(0, W - size);
            gt.rect.r1 = gt.rect.r0 + size;
            gt.rect.c1 = gt.rect.c0 + size;
            if (gt.category_id != 2) {
                gt.attributes = {int32_t(randint(0, 7)), int32_t(8 + randint(0, 7))};
            }
            rects.push_back(gt.rect);
            gts.push_back(gt);
        }
        for (int d = 0; d < dets_per_image; ++d) {
            const auto& gt = gts[gts.size() - size_t(n_gt) + size_t(d % n_gt)];
            json det;
            det["image_id"] = img.id;
            det["category_id"] = gt.category_id;
            det["score"] = randint(0, 10000) / 10000.0;
            // jittered copy of a ground-truth box
            Rect r = gt.rect;
            const int jitter = randint(0, 6) - 3;
            r.r0 = std::clamp(r.r0 + jitter, 0, H - 1);
            r.r1 = std::clamp(r.r1 + jitter, r.r0 + 1, H);
            json seg;
            seg["size"] = {H, W};
            seg["counts"] = rect_mask(H, W, r).runs();
            det["segmentation"] = seg;
            det["attribute_ids"] = gt.attributes;
            preds.push_back(std::move(det));
        }
    }
    *gt_text = gt_json(images, gts);
    *pred_text = preds.dump();
}

} // namespace fpeval::testing
