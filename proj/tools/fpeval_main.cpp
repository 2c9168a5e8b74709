#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fpeval/dataset.hpp"
#include "fpeval/eval.hpp"
#include "fpeval/ontology.hpp"
#include "fpeval/report.hpp"
#include "fpeval/stats.hpp"

namespace fs = std::filesystem;
using namespace fpeval;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFindings = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

// Decimal string -> integer numerator at the given power-of-ten denominator.
int64_t decimal_to_scaled(const std::string& text, int64_t den) {
    const double v = std::stod(text);
    return std::llround(v * static_cast<double>(den));
}

// Threshold list syntax: either comma-separated values ("0.5,0.75") or an
// inclusive range "lo:step:hi". Values are built from scaled integers so the
// produced doubles are the exact decimal grid points.
std::vector<double> parse_threshold_list(const std::string& text) {
    constexpr int64_t kDen = 1000000;
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        const auto first = text.find(':');
        const auto second = text.find(':', first + 1);
        if (second == std::string::npos) {
            throw ContractError("range syntax is lo:step:hi");
        }
        const int64_t lo = decimal_to_scaled(text.substr(0, first), kDen);
        const int64_t step = decimal_to_scaled(text.substr(first + 1, second - first - 1), kDen);
        const int64_t hi = decimal_to_scaled(text.substr(second + 1), kDen);
        if (step <= 0) throw ContractError("range step must be positive");
        for (int64_t v = lo; v <= hi; v += step) {
            out.push_back(static_cast<double>(v) / static_cast<double>(kDen));
        }
        return out;
    }
    std::string token;
    std::istringstream stream(text);
    while (std::getline(stream, token, ',')) {
        if (token.empty()) continue;
        out.push_back(static_cast<double>(decimal_to_scaled(token, kDen)) /
                      static_cast<double>(kDen));
    }
    if (out.empty()) throw ContractError("empty threshold list");
    return out;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::string token;
    std::istringstream stream(text);
    while (std::getline(stream, token, ',')) {
        if (token.empty()) continue;
        out.push_back(std::stoi(token));
    }
    if (out.empty()) throw ContractError("empty list");
    return out;
}

int default_threads() {
    if (const char* env = std::getenv("FPEVAL_THREADS")) {
        try {
            return std::max(0, std::stoi(env));
        } catch (const std::exception&) {
            return 0;
        }
    }
    return 0;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open output file: " + path);
    out << text;
    if (!out) throw Error("failed writing output file: " + path);
}

struct CommonInputs {
    std::string gt_path;
    std::string pred_path;
    std::string ontology_path;
    double attr_threshold = 0.5;
    std::vector<std::string> exclude_superclasses;
};

EvalDataset load_inputs(const CommonInputs& in, bool with_predictions) {
    auto ontology = std::make_shared<const Ontology>(Ontology::load(in.ontology_path));
    EvalDataset ds = load_ground_truth(in.gt_path, ontology);
    if (with_predictions) {
        load_predictions(in.pred_path, ds, in.attr_threshold);
    }
    if (!in.exclude_superclasses.empty()) {
        exclude_attribute_superclasses(ds, in.exclude_superclasses);
    }
    return ds;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Instance segmentation with attribute localization: evaluation toolkit"};
    app.set_version_flag("--version", std::string("fpeval ") + kToolkitVersion +
                                          " (format " + kFormatVersion + ")");
    app.require_subcommand(1);

    CommonInputs in;
    EvalParams params = EvalParams::defaults();
    params.threads = default_threads();

    std::string out_path;
    std::string kind = "mask";
    std::string f1_mode = "binary-macro";
    std::string iou_thrs, f1_thrs, max_dets;
    bool no_f1 = false;
    int threads = params.threads;

    auto* evaluate_cmd = app.add_subcommand("evaluate", "Compute AP/AR metrics");
    evaluate_cmd->add_option("--gt", in.gt_path, "Ground truth JSON")->required();
    evaluate_cmd->add_option("--pred", in.pred_path, "Predictions JSON")->required();
    evaluate_cmd->add_option("--ontology", in.ontology_path, "Ontology JSON")->required();
    evaluate_cmd->add_option("--out", out_path, "Report JSON path")->required();
    evaluate_cmd->add_option("--kind", kind, "box|mask")->check(CLI::IsMember({"box", "mask"}));
    evaluate_cmd->add_option("--f1-mode", f1_mode, "micro|macro|binary-micro|binary-macro");
    evaluate_cmd->add_flag("--no-f1", no_f1, "Disable the attribute F1 constraint");
    evaluate_cmd->add_option("--attr-threshold", in.attr_threshold,
                             "Attribute score threshold (default 0.5)");
    evaluate_cmd->add_option("--max-dets", max_dets, "Detection budgets, e.g. 1,10,100");
    evaluate_cmd->add_option("--iou-thrs", iou_thrs, "IoU thresholds (list or lo:step:hi)");
    evaluate_cmd->add_option("--f1-thrs", f1_thrs, "F1 thresholds (list or lo:step:hi)");
    evaluate_cmd->add_option("--threads", threads, "Worker threads (0 = all cores)");
    evaluate_cmd->add_option("--exclude-superclass", in.exclude_superclasses,
                             "Drop attributes of this superclass before scoring (repeatable)");

    std::string scope = "overall";
    std::optional<double> breakdown_f1;
    double with_f1_value = -1.0;
    auto* analyze_cmd = app.add_subcommand("analyze", "Detector error breakdown (PR curves)");
    analyze_cmd->add_option("--gt", in.gt_path, "Ground truth JSON")->required();
    analyze_cmd->add_option("--pred", in.pred_path, "Predictions JSON")->required();
    analyze_cmd->add_option("--ontology", in.ontology_path, "Ontology JSON")->required();
    analyze_cmd->add_option("--out", out_path, "Output directory")->required();
    analyze_cmd->add_option("--scope", scope, "overall|supercategory|category")
        ->check(CLI::IsMember({"overall", "supercategory", "category"}));
    analyze_cmd->add_option("--kind", kind, "box|mask")->check(CLI::IsMember({"box", "mask"}));
    analyze_cmd->add_option("--attr-threshold", in.attr_threshold,
                            "Attribute score threshold (default 0.5)");
    analyze_cmd->add_option("--with-f1", with_f1_value,
                            "Also require attribute F1 >= this threshold for TPs");
    analyze_cmd->add_option("--f1-mode", f1_mode, "micro|macro|binary-micro|binary-macro");
    analyze_cmd->add_option("--exclude-superclass", in.exclude_superclasses,
                            "Drop attributes of this superclass before scoring (repeatable)");

    double grid_step = 0.01;
    std::string sweep_json_path;
    auto* sweep_cmd = app.add_subcommand("sweep", "AP as a function of the F1 threshold");
    sweep_cmd->add_option("--gt", in.gt_path, "Ground truth JSON")->required();
    sweep_cmd->add_option("--pred", in.pred_path, "Predictions JSON")->required();
    sweep_cmd->add_option("--ontology", in.ontology_path, "Ontology JSON")->required();
    sweep_cmd->add_option("--out", out_path, "Sweep CSV path")->required();
    sweep_cmd->add_option("--json", sweep_json_path, "Also write the JSON report here");
    sweep_cmd->add_option("--grid-step", grid_step, "Threshold increment (default 0.01)");
    sweep_cmd->add_option("--f1-mode", f1_mode, "micro|macro|binary-micro|binary-macro");
    sweep_cmd->add_option("--kind", kind, "box|mask")->check(CLI::IsMember({"box", "mask"}));
    sweep_cmd->add_option("--attr-threshold", in.attr_threshold,
                          "Attribute score threshold (default 0.5)");
    sweep_cmd->add_option("--threads", threads, "Worker threads (0 = all cores)");
    sweep_cmd->add_option("--exclude-superclass", in.exclude_superclasses,
                          "Drop attributes of this superclass before scoring (repeatable)");

    uint64_t seed = 0;
    int replicates = 10000;
    auto* stats_cmd = app.add_subcommand("stats", "Dataset statistics with bootstrap CIs");
    stats_cmd->add_option("--gt", in.gt_path, "Ground truth JSON")->required();
    stats_cmd->add_option("--ontology", in.ontology_path, "Ontology JSON")->required();
    stats_cmd->add_option("--out", out_path, "Output directory")->required();
    stats_cmd->add_option("--seed", seed, "Bootstrap seed (default 0)");
    stats_cmd->add_option("--replicates", replicates, "Bootstrap replicates (default 10000)");

    int max_violations = 100;
    auto* validate_cmd = app.add_subcommand("validate", "Audit annotations against the ontology");
    validate_cmd->add_option("--gt", in.gt_path, "Ground truth JSON")->required();
    validate_cmd->add_option("--ontology", in.ontology_path, "Ontology JSON")->required();
    validate_cmd->add_option("--max-violations", max_violations,
                             "Print at most this many findings (default 100)");

    std::string convert_to = "mask";
    auto* convert_cmd = app.add_subcommand("convert", "Convert segmentation representations");
    convert_cmd->add_option("--gt", in.gt_path, "Ground truth JSON")->required();
    convert_cmd->add_option("--ontology", in.ontology_path, "Ontology JSON (optional)");
    convert_cmd->add_option("--to", convert_to, "mask|polygon-passthrough")
        ->check(CLI::IsMember({"mask", "polygon-passthrough"}));
    convert_cmd->add_option("--out", out_path, "Output JSON path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // prints help, exit 0
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e); // prints the message
        return kExitUsage;
    }

    try {
        params.kind = kind == "box" ? EvalParams::Kind::box : EvalParams::Kind::mask;
        params.f1_mode = parse_f1_mode(f1_mode);
        params.f1_constraint_enabled = !no_f1;
        params.threads = threads;
        if (!iou_thrs.empty()) params.iou_thresholds = parse_threshold_list(iou_thrs);
        if (!f1_thrs.empty()) params.f1_thresholds = parse_threshold_list(f1_thrs);
        if (!max_dets.empty()) params.max_detections = parse_int_list(max_dets);
        if (with_f1_value >= 0.0) breakdown_f1 = with_f1_value;

        if (evaluate_cmd->parsed()) {
            const EvalDataset ds = load_inputs(in, true);
            const EvalResult result = evaluate(ds, params);
            const MetricReport metrics = summarize(result, *ds.ontology());
            write_text_file(out_path, report_to_json(params, &metrics, nullptr, nullptr));
            std::cout << "wrote " << out_path << "\n";
            return kExitOk;
        }

        if (analyze_cmd->parsed()) {
            const EvalDataset ds = load_inputs(in, true);
            const auto breakdown =
                error_breakdown(ds, parse_breakdown_scope(scope), params, breakdown_f1);
            const std::string report = report_to_json(params, nullptr, nullptr, &breakdown);
            const std::string curves = breakdown_to_csv(breakdown, params.recall_points);
            const std::string auc = breakdown_auc_to_csv(breakdown);
            fs::create_directories(out_path);
            write_text_file((fs::path(out_path) / "report.json").string(), report);
            write_text_file((fs::path(out_path) / "pr_curves.csv").string(), curves);
            write_text_file((fs::path(out_path) / "auc.csv").string(), auc);
            std::cout << "wrote " << out_path << "/{report.json,pr_curves.csv,auc.csv}\n";
            return kExitOk;
        }

        if (sweep_cmd->parsed()) {
            const EvalDataset ds = load_inputs(in, true);
            const auto curve = f1_sweep(ds, params, sweep_grid(grid_step));
            const std::string csv = sweep_to_csv(curve);
            const std::string json_report =
                sweep_json_path.empty() ? std::string{}
                                        : report_to_json(params, nullptr, &curve, nullptr);
            write_text_file(out_path, csv);
            if (!sweep_json_path.empty()) write_text_file(sweep_json_path, json_report);
            std::cout << "wrote " << out_path << "\n";
            return kExitOk;
        }

        if (stats_cmd->parsed()) {
            auto ontology = std::make_shared<const Ontology>(Ontology::load(in.ontology_path));
            const EvalDataset ds = load_ground_truth(in.gt_path, ontology);
            const auto summaries = dataset_statistics(ds, *ontology, seed, replicates);
            const auto counts = instance_counts(ds, *ontology);
            const std::string json_text = stats_to_json(summaries, counts, seed, replicates);
            const std::string summary_csv = stats_to_csv(summaries);
            const std::string hist_csv = histograms_to_csv(summaries);
            fs::create_directories(out_path);
            write_text_file((fs::path(out_path) / "stats.json").string(), json_text);
            write_text_file((fs::path(out_path) / "summary.csv").string(), summary_csv);
            write_text_file((fs::path(out_path) / "histograms.csv").string(), hist_csv);
            std::cout << "wrote " << out_path << "/{stats.json,summary.csv,histograms.csv}\n";
            return kExitOk;
        }

        if (validate_cmd->parsed()) {
            auto ontology = std::make_shared<const Ontology>(Ontology::load(in.ontology_path));
            const EvalDataset ds = load_ground_truth(in.gt_path, ontology);
            const auto violations = validate(ds.ground_truth(), *ontology);
            int printed = 0;
            for (const auto& v : violations) {
                if (printed++ >= max_violations) break;
                std::cout << "instance " << v.instance_id << ": " << to_string(v.kind) << ": "
                          << v.message << "\n";
            }
            std::cout << violations.size() << " finding(s)\n";
            return violations.empty() ? kExitOk : kExitFindings;
        }

        if (convert_cmd->parsed()) {
            std::shared_ptr<const Ontology> ontology;
            if (!in.ontology_path.empty()) {
                ontology = std::make_shared<const Ontology>(Ontology::load(in.ontology_path));
            }
            EvalDataset ds = load_ground_truth(in.gt_path, ontology);
            if (convert_to == "mask") convert_segmentation_to_masks(ds);
            write_text_file(out_path, save_ground_truth_text(ds));
            std::cout << "wrote " << out_path << "\n";
            return kExitOk;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
