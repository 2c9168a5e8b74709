#include "doctest.h"
#include "fixtures.hpp"
#include "fpeval/dataset.hpp"

#include "json.hpp"

using namespace fpeval;
using namespace fpeval::testing;
using nlohmann::json;

TEST_CASE("ground truth loading") {
    const auto onto = mini_ontology(16);
    const std::vector<ImageSpec> images{{1, 16, 16}, {2, 24, 24}};
    const std::vector<GtSpec> gts{{1, 1, 1, {0, 0, 4, 4}, {2}, false},
                                  {2, 1, 3, {4, 4, 8, 8}, {}, false},
                                  {3, 2, 1, {0, 0, 8, 8}, {1, 5}, false}};
    const auto ds = make_dataset(images, gts, {}, onto);
    CHECK(ds.images().size() == 2);
    CHECK(ds.ground_truth().size() == 3);
    CHECK(ds.ground_truth_in(1, 1).size() == 1);
    CHECK(ds.ground_truth_in(2, 1).size() == 1);
    CHECK(ds.ground_truth()[0].area == 16.0);

    // identical bytes -> identical datasets
    const std::string text = gt_json(images, gts);
    const auto a = load_ground_truth_text(text, onto);
    const auto b = load_ground_truth_text(text, onto);
    CHECK(a == b);
}

TEST_CASE("loading errors") {
    const auto onto = mini_ontology(16);
    // annotation referencing a missing image
    json doc;
    doc["images"] = {{{"id", 1}, {"height", 8}, {"width", 8}}};
    doc["annotations"] = {{{"id", 1},
                           {"image_id", 99},
                           {"category_id", 1},
                           {"bbox", {0.0, 0.0, 2.0, 2.0}},
                           {"area", 4.0}}};
    CHECK_THROWS_WITH_AS(load_ground_truth_text(doc.dump(), onto),
                         doctest::Contains("99"), ParseError);

    // duplicate annotation id
    doc["annotations"] = json::array();
    json ann = {{"id", 7},       {"image_id", 1},   {"category_id", 1},
                {"area", 4.0},   {"bbox", {0.0, 0.0, 2.0, 2.0}}};
    doc["annotations"].push_back(ann);
    doc["annotations"].push_back(ann);
    CHECK_THROWS_AS(load_ground_truth_text(doc.dump(), onto), ParseError);
}

TEST_CASE("area recomputed from polygon segmentation") {
    const auto onto = mini_ontology(16);
    json doc;
    doc["images"] = {{{"id", 1}, {"height", 8}, {"width", 8}}};
    doc["annotations"] = {{{"id", 1},
                           {"image_id", 1},
                           {"category_id", 1},
                           {"segmentation", {{0.0, 0.0, 4.0, 0.0, 4.0, 4.0, 0.0, 4.0}}}}};
    const auto ds = load_ground_truth_text(doc.dump(), onto);
    CHECK(ds.ground_truth()[0].area == 16.0); // rasterized pixel count
    // bbox derived from the polygon bounds
    CHECK(ds.ground_truth()[0].bbox.w == 4.0);
}

TEST_CASE("prediction loading") {
    const auto onto = mini_ontology(16);
    auto ds = make_dataset({{1, 16, 16}}, {{1, 1, 1, {0, 0, 4, 4}, {}, false}}, {}, onto);

    SUBCASE("attribute scores are thresholded at 0.5 by default") {
        json arr = json::array();
        arr.push_back({{"image_id", 1},
                       {"category_id", 1},
                       {"score", 0.9},
                       {"bbox", {0.0, 0.0, 4.0, 4.0}},
                       {"attribute_scores", {{"3", 0.7}, {"5", 0.4}}}});
        load_predictions_text(arr.dump(), ds);
        REQUIRE(ds.detections().size() == 1);
        CHECK(ds.detections()[0].attributes.ids() == std::vector<int32_t>{3});
    }

    SUBCASE("detections sorted by descending score") {
        json arr = json::array();
        arr.push_back({{"image_id", 1}, {"category_id", 1}, {"score", 0.4},
                       {"bbox", {0.0, 0.0, 2.0, 2.0}}});
        arr.push_back({{"image_id", 1}, {"category_id", 1}, {"score", 0.9},
                       {"bbox", {1.0, 1.0, 2.0, 2.0}}});
        load_predictions_text(arr.dump(), ds);
        const auto order = ds.detections_in(1, 1);
        REQUIRE(order.size() == 2);
        CHECK(ds.detections()[order[0]].score == 0.9);
        CHECK(ds.detections()[order[1]].score == 0.4);
    }

    SUBCASE("empty prediction file is valid") {
        load_predictions_text("[]", ds);
        CHECK(ds.detections().empty());
    }

    SUBCASE("score outside unit interval is rejected") {
        json arr = json::array();
        arr.push_back({{"image_id", 1}, {"category_id", 1}, {"score", 1.5},
                       {"bbox", {0.0, 0.0, 2.0, 2.0}}});
        CHECK_THROWS_AS(load_predictions_text(arr.dump(), ds), ParseError);
    }

    SUBCASE("unknown image is rejected") {
        json arr = json::array();
        arr.push_back({{"image_id", 42}, {"category_id", 1}, {"score", 0.5},
                       {"bbox", {0.0, 0.0, 2.0, 2.0}}});
        CHECK_THROWS_AS(load_predictions_text(arr.dump(), ds), ParseError);
    }
}

TEST_CASE("segmentation conversion") {
    const auto onto = mini_ontology(16);
    json doc;
    doc["images"] = {{{"id", 1}, {"height", 8}, {"width", 8}}};
    doc["annotations"] = {{{"id", 1},
                           {"image_id", 1},
                           {"category_id", 1},
                           {"segmentation", {{0.0, 0.0, 8.0, 0.0, 8.0, 8.0, 0.0, 8.0}}}},
                          {{"id", 2},
                           {"image_id", 1},
                           {"category_id", 1},
                           {"segmentation", {{0.0, 0.0, 4.0, 0.0, 4.0, 4.0, 0.0, 4.0}}}}};
    auto ds = load_ground_truth_text(doc.dump(), onto);
    convert_segmentation_to_masks(ds);

    // full-image polygon becomes runs [0, h*w]
    REQUIRE(ds.ground_truth()[0].segmentation.mask.has_value());
    CHECK(ds.ground_truth()[0].segmentation.mask->runs() == std::vector<uint32_t>{0, 64});
    CHECK(ds.ground_truth()[1].segmentation.mask->area() == 16);
    CHECK(ds.ground_truth()[1].area == 16.0);

    // converting again changes nothing (mask instances pass through)
    auto twice = ds;
    convert_segmentation_to_masks(twice);
    CHECK(twice == ds);
}

TEST_CASE("excluding attribute superclasses") {
    const auto onto = bundled_ontology();
    const int waist = onto->attributes_in_superclass("Waistline").front();
    const int neck = onto->attributes_in_superclass("Neckline").front();
    auto ds = make_dataset({{1, 32, 32}},
                           {{1, 1, 4, {0, 0, 10, 10}, {int32_t(waist), int32_t(neck)}, false}},
                           {{1, 4, {0, 0, 10, 10}, 0.9, {int32_t(waist)}}}, onto);
    exclude_attribute_superclasses(ds, {"Waistline"});
    CHECK(ds.ground_truth()[0].attributes.ids() == std::vector<int32_t>{int32_t(neck)});
    CHECK(ds.detections()[0].attributes.empty());
    CHECK_THROWS_AS(exclude_attribute_superclasses(ds, {"No Such Superclass"}), ContractError);
}

TEST_CASE("ground truth round trip") {
    const auto onto = mini_ontology(16);
    const auto ds = make_dataset({{1, 16, 16}, {2, 24, 24}},
                                 {{1, 1, 1, {0, 0, 4, 4}, {2, 7}, false},
                                  {2, 1, 3, {4, 4, 8, 8}, {}, true},
                                  {3, 2, 1, {0, 0, 8, 8}, {1}, false}},
                                 {}, onto);
    const std::string text = save_ground_truth_text(ds);
    const auto reloaded = load_ground_truth_text(text, onto);
    CHECK(reloaded == ds);
    // byte-stable serialization
    CHECK(save_ground_truth_text(reloaded) == text);
}
