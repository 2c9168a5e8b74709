#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "fpeval/eval.hpp"
#include "reference_engine.hpp"

#include "json.hpp"

#ifndef FPEVAL_CLI_PATH
#define FPEVAL_CLI_PATH "fpeval"
#endif
#ifndef FPEVAL_DATA_DIR
#define FPEVAL_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace fpeval;
using namespace fpeval::testing;
using nlohmann::json;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(FPEVAL_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult result;
    char buf[4096];
    while (size_t n = fread(buf, 1, sizeof(buf), pipe)) {
        result.output.append(buf, n);
        if (n < sizeof(buf)) {
            if (feof(pipe)) break;
        }
    }
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string write_temp(const std::string& name, const std::string& text) {
    const fs::path dir = fs::temp_directory_path() / "fpeval_cli_tests";
    fs::create_directories(dir);
    const fs::path path = dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    return path.string();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string mini_ontology_path() {
    json doc;
    doc["categories"] = {{{"id", 1}, {"name", "jacket"}, {"supercategory", "outerwear"}},
                         {{"id", 2}, {"name", "shoe"}, {"supercategory", "accessory"}},
                         {{"id", 3}, {"name", "pants"}, {"supercategory", "outerwear"}}};
    doc["attributes"] = json::array();
    for (int i = 0; i < 16; ++i) {
        doc["attributes"].push_back(
            {{"id", i}, {"name", "attr" + std::to_string(i)}, {"superclass", "S"}});
    }
    doc["applicability"] = {{"1", {"S"}}, {"3", {"S"}}};
    return write_temp("onto.json", doc.dump());
}

} // namespace

TEST_CASE("cli help and usage errors") {
    CHECK(run_cli("--help").exit_code == 0);
    CHECK(run_cli("evaluate --help").exit_code == 0);
    CHECK(run_cli("frobnicate").exit_code == 2);
    CHECK(run_cli("evaluate --no-such-flag").exit_code == 2);
    CHECK(run_cli("--version").output.find("fpeval") != std::string::npos);
}

TEST_CASE("cli evaluate matches the reference engine and is thread independent") {
    const auto onto_path = mini_ontology_path();
    const auto onto = mini_ontology(16);
    const auto ds = random_mini_dataset(7, 6, 16, onto);

    // serialize the fixture
    const std::string gt_path = write_temp("gt.json", save_ground_truth_text(ds));
    json preds = json::array();
    for (const auto& d : ds.detections()) {
        json det;
        det["image_id"] = d.image_id;
        det["category_id"] = d.category_id;
        det["score"] = d.score;
        json seg;
        seg["size"] = {d.segmentation.mask->height(), d.segmentation.mask->width()};
        seg["counts"] = d.segmentation.mask->runs();
        det["segmentation"] = seg;
        det["attribute_ids"] = d.attributes.ids();
        preds.push_back(det);
    }
    const std::string pred_path = write_temp("pred.json", preds.dump());

    const std::string out1 = write_temp("report1.json", "");
    const std::string out2 = write_temp("report2.json", "");
    const std::string base = "evaluate --gt " + gt_path + " --pred " + pred_path +
                             " --ontology " + onto_path + " --out ";
    const auto r1 = run_cli(base + out1 + " --threads 1");
    CHECK(r1.exit_code == 0);
    const auto r2 = run_cli(base + out2 + " --threads 4");
    CHECK(r2.exit_code == 0);
    CHECK(read_file(out1) == read_file(out2)); // byte-identical

    // AP values agree with the naive reference bit-exactly
    EvalParams params = EvalParams::defaults();
    const auto ref = reference_evaluate(ds, params);
    std::vector<size_t> all_cats, attr_cats;
    for (size_t k = 0; k < ref.category_ids.size(); ++k) {
        all_cats.push_back(k);
        if (ref.category_has_attributes[k]) attr_cats.push_back(k);
    }
    const auto ap_iou = ref.average_precision(std::nullopt, 0, all_cats, 0, 2);
    const auto ap_joint = ref.average_precision(std::nullopt, std::nullopt, attr_cats, 0, 2);

    const json report = json::parse(read_file(out1));
    CHECK(report.at("metrics").at("AP_IoU").get<double>() == *ap_iou);
    CHECK(report.at("metrics").at("AP_IoU_F1").get<double>() == *ap_joint);
    CHECK(report.at("f1_sweep").is_null());
}

TEST_CASE("cli validate reports findings with exit 1") {
    const auto onto_path = mini_ontology_path();
    json doc;
    doc["images"] = {{{"id", 1}, {"height", 16}, {"width", 16}}};
    doc["annotations"] = {{{"id", 1},
                           {"image_id", 1},
                           {"category_id", 2}, // accessory with an attribute
                           {"area", 16.0},
                           {"bbox", {0.0, 0.0, 4.0, 4.0}},
                           {"attribute_ids", {3}}}};
    const std::string gt_path = write_temp("bad_gt.json", doc.dump());
    const auto r = run_cli("validate --gt " + gt_path + " --ontology " + onto_path);
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("inapplicable-attribute") != std::string::npos);

    // clean corpus exits 0
    doc["annotations"][0].erase("attribute_ids");
    const std::string clean_path = write_temp("clean_gt.json", doc.dump());
    const auto ok = run_cli("validate --gt " + clean_path + " --ontology " + onto_path);
    CHECK(ok.exit_code == 0);
}

TEST_CASE("cli convert is idempotent") {
    const auto onto_path = mini_ontology_path();
    json doc;
    doc["images"] = {{{"id", 1}, {"height", 8}, {"width", 8}}};
    doc["annotations"] = {{{"id", 1},
                           {"image_id", 1},
                           {"category_id", 1},
                           {"segmentation", {{0.0, 0.0, 4.0, 0.0, 4.0, 4.0, 0.0, 4.0}}}}};
    const std::string gt_path = write_temp("poly_gt.json", doc.dump());
    const std::string once = write_temp("converted1.json", "");
    const std::string twice = write_temp("converted2.json", "");
    CHECK(run_cli("convert --gt " + gt_path + " --to mask --ontology " + onto_path + " --out " +
                  once)
              .exit_code == 0);
    CHECK(run_cli("convert --gt " + once + " --to mask --ontology " + onto_path + " --out " +
                  twice)
              .exit_code == 0);
    CHECK(read_file(once) == read_file(twice));
    const json converted = json::parse(read_file(once));
    CHECK(converted.at("annotations")[0].at("segmentation").contains("counts"));
}

TEST_CASE("cli analyze and sweep write their artifacts") {
    const auto onto_path = mini_ontology_path();
    const auto onto = mini_ontology(16);
    const auto ds = random_mini_dataset(21, 4, 16, onto);
    const std::string gt_path = write_temp("gt_sweep.json", save_ground_truth_text(ds));
    json preds = json::array();
    for (const auto& d : ds.detections()) {
        json det;
        det["image_id"] = d.image_id;
        det["category_id"] = d.category_id;
        det["score"] = d.score;
        json seg;
        seg["size"] = {d.segmentation.mask->height(), d.segmentation.mask->width()};
        seg["counts"] = d.segmentation.mask->runs();
        det["segmentation"] = seg;
        det["attribute_ids"] = d.attributes.ids();
        preds.push_back(det);
    }
    const std::string pred_path = write_temp("pred_sweep.json", preds.dump());

    const fs::path analyze_dir = fs::temp_directory_path() / "fpeval_cli_tests" / "analyze_out";
    const auto analyze = run_cli("analyze --gt " + gt_path + " --pred " + pred_path +
                                 " --ontology " + onto_path + " --scope supercategory --out " +
                                 analyze_dir.string());
    CHECK(analyze.exit_code == 0);
    CHECK(fs::exists(analyze_dir / "report.json"));
    CHECK(fs::exists(analyze_dir / "pr_curves.csv"));
    CHECK(fs::exists(analyze_dir / "auc.csv"));
    const std::string curves = read_file((analyze_dir / "pr_curves.csv").string());
    CHECK(curves.rfind("group,setting,recall,precision", 0) == 0);

    const std::string sweep_out = write_temp("sweep.csv", "");
    const auto sweep = run_cli("sweep --gt " + gt_path + " --pred " + pred_path + " --ontology " +
                               onto_path + " --grid-step 0.05 --out " + sweep_out);
    CHECK(sweep.exit_code == 0);
    const std::string sweep_text = read_file(sweep_out);
    CHECK(sweep_text.rfind("tau_f1,ap", 0) == 0);
    // 21 grid points for step 0.05
    CHECK(std::count(sweep_text.begin(), sweep_text.end(), '\n') == 22);
}

TEST_CASE("cli stats emits json and csv") {
    const auto onto_path = mini_ontology_path();
    const auto onto = mini_ontology(16);
    const auto ds = random_mini_dataset(5, 4, 16, onto);
    const std::string gt_path = write_temp("gt_stats.json", save_ground_truth_text(ds));
    const fs::path out_dir = fs::temp_directory_path() / "fpeval_cli_tests" / "stats_out";
    const auto r = run_cli("stats --gt " + gt_path + " --ontology " + onto_path +
                           " --seed 3 --replicates 200 --out " + out_dir.string());
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(out_dir / "stats.json"));
    CHECK(fs::exists(out_dir / "summary.csv"));
    CHECK(fs::exists(out_dir / "histograms.csv"));
    const json stats = json::parse(read_file((out_dir / "stats.json").string()));
    CHECK(stats.at("replicates") == 200);
    CHECK(stats.at("summaries").is_array());
}

TEST_CASE("cli evaluate can exclude an attribute superclass") {
    const auto onto_path = mini_ontology_path();
    // detection disagrees on every attribute; excluding the whole superclass
    // makes both sides empty and the joint metric perfect
    json gt;
    gt["images"] = {{{"id", 1}, {"height", 16}, {"width", 16}}};
    gt["annotations"] = {{{"id", 1},
                          {"image_id", 1},
                          {"category_id", 1},
                          {"segmentation", {{0.0, 0.0, 8.0, 0.0, 8.0, 8.0, 0.0, 8.0}}},
                          {"attribute_ids", {1, 2}}}};
    json preds = json::array();
    preds.push_back({{"image_id", 1},
                     {"category_id", 1},
                     {"segmentation", {{0.0, 0.0, 8.0, 0.0, 8.0, 8.0, 0.0, 8.0}}},
                     {"score", 0.9},
                     {"attribute_ids", {7, 8}}});
    const std::string gt_path = write_temp("gt_excl.json", gt.dump());
    const std::string pred_path = write_temp("pred_excl.json", preds.dump());
    const std::string out_a = write_temp("report_excl_a.json", "");
    const std::string out_b = write_temp("report_excl_b.json", "");
    const std::string base = "evaluate --gt " + gt_path + " --pred " + pred_path +
                             " --ontology " + onto_path + " --out ";
    CHECK(run_cli(base + out_a).exit_code == 0);
    CHECK(run_cli(base + out_b + " --exclude-superclass S").exit_code == 0);
    const json plain = json::parse(read_file(out_a));
    const json excluded = json::parse(read_file(out_b));
    CHECK(plain.at("metrics").at("AP_IoU_F1").get<double>() == 0.0);
    CHECK(excluded.at("metrics").at("AP_IoU_F1").get<double>() == 1.0);
}

TEST_CASE("cli data errors exit 3") {
    const auto onto_path = mini_ontology_path();
    const std::string bad = write_temp("not_json.json", "{nope");
    const auto r = run_cli("validate --gt " + bad + " --ontology " + onto_path);
    CHECK(r.exit_code == 3);
}
