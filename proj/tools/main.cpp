#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rockcluster/characterize.hpp"
#include "rockcluster/csv.hpp"
#include "rockcluster/data_model.hpp"
#include "rockcluster/runner.hpp"
#include "rockcluster/scaling.hpp"
#include "rockcluster/synth.hpp"

namespace fs = std::filesystem;
using namespace rockcluster;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void spill(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(out.good(), "write failed for " + path.string());
}

struct SynthArgs {
    std::string scenario_path;
    std::string builtin;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 1;
};

int cmd_synth(const SynthArgs& args) {
    GeologyScenario scenario;
    if (!args.builtin.empty()) {
        require(args.builtin == "benchmark",
                "unknown builtin scenario " + args.builtin + " (available: benchmark)");
        scenario = benchmark_scenario();
    } else {
        scenario = scenario_from_json(slurp(args.scenario_path));
    }
    if (args.seed_given) scenario.seed = args.seed;

    const SynthResult result = generate(scenario, args.threads);
    fs::create_directories(args.out_dir);
    const fs::path dir(args.out_dir);
    {
        std::ofstream readings(dir / "readings.csv", std::ios::binary);
        require(readings.good(), "cannot write " + (dir / "readings.csv").string());
        write_readings_long_csv(readings, result.sections);
    }
    {
        std::ofstream sections(dir / "sections.csv", std::ios::binary);
        require(sections.good(), "cannot write " + (dir / "sections.csv").string());
        write_section_attributes_csv(sections, result.sections);
    }
    spill(dir / "manifest.json", manifest_to_json(result.manifest));
    spill(dir / "scenario.json", scenario_to_json(scenario));

    std::cout << "generated " << result.sections.size() << " sections ("
              << result.manifest.outlier_sections.size() << " outliers) with seed "
              << scenario.seed << "\n"
              << "wrote readings.csv, sections.csv, manifest.json, scenario.json under "
              << args.out_dir << "\n";
    return 0;
}

struct ExtractArgs {
    std::string raw_dir;
    std::string feature_set = "all";
    std::string out_path;
};

int cmd_extract(const ExtractArgs& args) {
    const FeatureSetId schema = feature_set_from_string(args.feature_set);
    const fs::path dir(args.raw_dir);
    std::ifstream readings(dir / "readings.csv", std::ios::binary);
    require(readings.good(), "cannot open " + (dir / "readings.csv").string());
    std::ifstream sections_csv(dir / "sections.csv", std::ios::binary);
    require(sections_csv.good(), "cannot open " + (dir / "sections.csv").string());

    IngestReport report;
    const std::vector<SectionSample> sections = ingest_sections(readings, sections_csv, &report);
    require(!sections.empty(), "no usable sections in " + args.raw_dir);

    std::vector<FeatureVector> features;
    features.reserve(sections.size());
    for (const auto& section : sections) features.push_back(extract_features(section, schema));
    const FeatureTable table = to_table(features);
    {
        std::ofstream out(args.out_path, std::ios::binary);
        require(out.good(), "cannot write " + args.out_path);
        write_wide_csv(out, table);
    }

    std::cout << "ingested " << report.rows_used << "/" << report.rows_total
              << " reading rows (" << report.rows_rejected_nonfinite << " non-finite dropped)\n";
    for (const auto& note : report.dropped_sections)
        std::cout << "dropped section: " << note << "\n";
    std::cout << "wrote " << table.section_ids.size() << " sections x " << table.values.cols()
              << " " << args.feature_set << " features to " << args.out_path << "\n";
    return 0;
}

struct RunArgs {
    std::string config_path;
    std::string features_path;
    std::string sections_path;
    std::string registry;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

int cmd_run(const RunArgs& args) {
    PipelineConfig config = config_from_json(slurp(args.config_path));
    if (args.seed_given) config.seed = args.seed;
    const DataSet data = load_dataset(args.features_path, args.sections_path);
    const std::string registry = resolve_registry_dir(args.registry);

    const RunRecord record = run_pipeline(config, data, registry);
    std::cout << "run " << record.run_id << "\n";
    if (record.status != "completed") {
        std::cerr << "error: stage " << record.failure_stage << ": " << record.failure_message
                  << "\n";
        return 1;
    }
    std::cout << metric_report_csv_header(record.metrics)
              << metric_report_csv_row(record.metrics);
    if (record.metrics.excluded) {
        std::cout << "verdict: excluded\n";
        for (const auto& reason : record.metrics.exclusion_reasons)
            std::cout << "  reason: " << reason << "\n";
    } else {
        std::cout << "verdict: retained\n";
    }
    std::cout << "artifacts under " << registry << "/runs/" << record.run_id << "\n";
    return 0;
}

struct OptimizeArgs {
    std::string features_path;
    std::string sections_path;
    std::string space_path;
    std::string registry;
    std::string reducer;
    std::string clusterer;
    int trials = 50;
    int parallel = 1;
    bool fixed_scaler = false;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

int cmd_optimize(const OptimizeArgs& args) {
    PipelineConfig template_config;
    StudyOptions options;
    if (!args.space_path.empty()) {
        nlohmann::json space;
        try {
            space = nlohmann::json::parse(slurp(args.space_path));
        } catch (const nlohmann::json::exception& e) {
            fail(std::string("space file: invalid JSON: ") + e.what());
        }
        require(space.value("version", 0) == 1, "space file: unsupported or missing version");
        options.reducer = space.value("reducer", options.reducer);
        options.clusterer = space.value("clusterer", options.clusterer);
        options.tune_scaler = space.value("tune_scaler", options.tune_scaler);
        if (space.contains("template"))
            template_config = config_from_json(space.at("template").dump());
    }
    if (!args.reducer.empty()) options.reducer = args.reducer;
    if (!args.clusterer.empty()) options.clusterer = args.clusterer;
    if (args.fixed_scaler) options.tune_scaler = false;
    options.n_trials = args.trials;
    options.parallel = args.parallel;
    if (args.seed_given) template_config.seed = args.seed;
    template_config.reducer.kind = options.reducer;
    template_config.clusterer.kind = options.clusterer;

    const DataSet data = load_dataset(args.features_path, args.sections_path);
    const std::string registry = resolve_registry_dir(args.registry);
    const StudyArtifacts artifacts = optimize_pipeline(template_config, data, options, registry);

    for (std::size_t t = 0; t < artifacts.study.trials.size(); ++t) {
        const auto& trial = artifacts.study.trials[t];
        std::cout << "trial " << trial.trial_id << ": ";
        if (trial.complete()) {
            const auto& o = *trial.objectives;
            std::cout << "silhouette=" << format_double(o[0])
                      << " davies_bouldin=" << format_double(o[1])
                      << " calinski_harabasz=" << format_double(o[2]);
        } else {
            std::cout << "failed";
        }
        std::cout << " run=" << artifacts.trial_run_ids[t] << "\n";
    }
    std::cout << "front: " << artifacts.study.front.members.size()
              << " members, hypervolume " << format_double(artifacts.study.front.hypervolume)
              << "\n"
              << "best trial " << artifacts.best_trial_id << " run " << artifacts.best_run_id
              << "\n"
              << "study " << artifacts.study_id << " artifacts under " << registry << "/studies/"
              << artifacts.study_id << "\n";
    return 0;
}

struct ReportArgs {
    std::string run_id;
    std::string registry;
};

int cmd_report(const ReportArgs& args) {
    const std::string registry = resolve_registry_dir(args.registry);
    const RunRecord record = load_run(registry, args.run_id);
    std::cout << "run " << record.run_id << "\n"
              << "status " << record.status << "\n";
    if (record.status != "completed") {
        std::cout << "failure stage " << record.failure_stage << ": " << record.failure_message
                  << "\n";
        return 0;
    }
    std::cout << "config " << config_to_json(record.config) << "\n\n"
              << "summary\n"
              << metric_report_csv_header(record.metrics)
              << metric_report_csv_row(record.metrics) << "\n";
    std::cout << "verdict: " << (record.metrics.excluded ? "excluded" : "retained") << "\n";
    for (const auto& reason : record.metrics.exclusion_reasons)
        std::cout << "  reason: " << reason << "\n";
    std::cout << "\nlabel alignment\n"
              << "label_set,adjusted_rand,adjusted_mutual_info\n";
    for (const auto& [name, alignment] : record.metrics.alignments)
        std::cout << name << "," << format_double(alignment.adjusted_rand) << ","
                  << format_double(alignment.adjusted_mutual_info) << "\n";
    if (!record.profiles.empty())
        std::cout << "\ncluster profiles\n" << profiles_to_csv(record.profiles);
    return 0;
}

struct ExportArgs {
    std::string run_id;
    std::string study_id;
    std::string registry;
    std::string out_dir;
    std::string features_path;
    std::string sections_path;
};

int cmd_export_plots(const ExportArgs& args) {
    const std::string registry = resolve_registry_dir(args.registry);
    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);

    if (!args.study_id.empty()) {
        const fs::path study_dir = fs::path(registry) / "studies" / args.study_id;
        require(fs::exists(study_dir / "front.csv"), "no study at " + study_dir.string());
        fs::copy_file(study_dir / "front.csv", out / "pareto.csv",
                      fs::copy_options::overwrite_existing);
        fs::copy_file(study_dir / "convergence.csv", out / "convergence.csv",
                      fs::copy_options::overwrite_existing);
        std::cout << "wrote pareto.csv, convergence.csv to " << args.out_dir << "\n";
        return 0;
    }

    const RunRecord record = load_run(registry, args.run_id);
    require(record.status == "completed",
            "run " + args.run_id + " failed at stage " + record.failure_stage +
                "; nothing to plot");

    std::string cdf;
    if (!args.features_path.empty()) {
        const DataSet data = load_dataset(args.features_path, args.sections_path);
        require(dataset_fingerprint(data) == record.data_fingerprint,
                "feature/label files do not match the data this run was built from");
        const FeatureTable selected =
            select_feature_set(data.features, record.config.feature_set);
        FeatureTable scaled = selected;
        scaled.values =
            transform(fit_scaler(selected.values, scaler_from_string(record.config.scaler)),
                      selected.values);
        cdf = key_feature_cdf_csv(scaled, record.labels);
    }

    const fs::path run_dir = fs::path(registry) / "runs" / record.run_id;
    fs::copy_file(run_dir / "embedding.csv", out / "embedding.csv",
                  fs::copy_options::overwrite_existing);
    if (!cdf.empty()) {
        spill(out / "cdf.csv", cdf);
        std::cout << "wrote embedding.csv, cdf.csv to " << args.out_dir << "\n";
    } else {
        std::cout << "wrote embedding.csv to " << args.out_dir << "\n"
                  << "pass --features (and --sections if labels were used) to export the "
                     "per-cluster distribution table\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"drilling-data clustering toolkit: synthetic geology, feature extraction,\n"
                 "clustering pipelines, multi-objective tuning, and result reporting"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    CLI::App* synth_cmd = app.add_subcommand(
        "synth", "Generate synthetic drilling data from a geology scenario");
    synth_cmd->add_option("--scenario", synth_args.scenario_path,
                          "Scenario JSON file describing rock archetypes");
    synth_cmd->add_option("--builtin", synth_args.builtin,
                          "Bundled scenario name (benchmark: 2000 sections, 4 rock types)");
    synth_cmd->add_option("--out", synth_args.out_dir, "Output directory")->required();
    CLI::Option* synth_seed =
        synth_cmd->add_option("--seed", synth_args.seed, "Override the scenario seed");
    synth_cmd->add_option("--threads", synth_args.threads,
                          "Worker threads (output is identical for any value)");

    ExtractArgs extract_args;
    CLI::App* extract_cmd = app.add_subcommand(
        "extract", "Compute per-section statistical features from raw readings");
    extract_cmd
        ->add_option("--raw", extract_args.raw_dir,
                     "Directory holding readings.csv and sections.csv")
        ->required();
    extract_cmd->add_option("--feature-set", extract_args.feature_set,
                            "Feature set: all | mwd | mwd_rock | mwd_median");
    extract_cmd->add_option("--out", extract_args.out_path, "Output wide CSV path")->required();

    RunArgs run_args;
    CLI::App* run_cmd =
        app.add_subcommand("run", "Execute one clustering pipeline and record the results");
    run_cmd->add_option("--config", run_args.config_path, "Pipeline config JSON file")
        ->required();
    run_cmd->add_option("--features", run_args.features_path, "Wide feature CSV")->required();
    run_cmd->add_option("--sections", run_args.sections_path,
                        "Section attribute CSV contributing rock_type/q_class labels");
    run_cmd->add_option("--registry", run_args.registry,
                        "Registry directory (default: $ROCKCLUSTER_REGISTRY or ./registry)");
    CLI::Option* run_seed = run_cmd->add_option("--seed", run_args.seed,
                                                "Override the config's random seed");

    OptimizeArgs optimize_args;
    CLI::App* optimize_cmd = app.add_subcommand(
        "optimize", "Tune a pipeline with the multi-objective optimizer");
    optimize_cmd->add_option("--features", optimize_args.features_path, "Wide feature CSV")
        ->required();
    optimize_cmd->add_option("--sections", optimize_args.sections_path,
                             "Section attribute CSV contributing label sets");
    optimize_cmd->add_option("--space", optimize_args.space_path,
                             "Search space JSON: reducer, clusterer, tune_scaler, template");
    optimize_cmd->add_option("--reducer", optimize_args.reducer,
                             "Reducer to tune: none | pca | umap");
    optimize_cmd->add_option("--clusterer", optimize_args.clusterer,
                             "Clusterer to tune: kmeans | agglomerative | hdbscan");
    optimize_cmd->add_option("--trials", optimize_args.trials, "Number of trials");
    optimize_cmd->add_option("--parallel", optimize_args.parallel,
                             "Max in-flight evaluations (>1 is not reproducible)");
    optimize_cmd->add_flag("--fixed-scaler", optimize_args.fixed_scaler,
                           "Keep the template's scaler out of the search space");
    CLI::Option* optimize_seed =
        optimize_cmd->add_option("--seed", optimize_args.seed, "Study seed");
    optimize_cmd->add_option("--registry", optimize_args.registry,
                             "Registry directory (default: $ROCKCLUSTER_REGISTRY or ./registry)");

    ReportArgs report_args;
    CLI::App* report_cmd =
        app.add_subcommand("report", "Print the stored tables for a recorded run");
    report_cmd->add_option("--run", report_args.run_id, "Run id")->required();
    report_cmd->add_option("--registry", report_args.registry,
                           "Registry directory (default: $ROCKCLUSTER_REGISTRY or ./registry)");

    ExportArgs export_args;
    CLI::App* export_cmd = app.add_subcommand(
        "export-plots", "Emit plot-ready CSV files for a run or a study");
    export_cmd->add_option("--run", export_args.run_id, "Run id (embedding + distribution CSV)");
    export_cmd->add_option("--study", export_args.study_id,
                           "Study id (pareto + convergence CSV)");
    export_cmd->add_option("--out", export_args.out_dir, "Output directory")->required();
    export_cmd->add_option("--features", export_args.features_path,
                           "Wide feature CSV the run was built from (enables cdf.csv)");
    export_cmd->add_option("--sections", export_args.sections_path,
                           "Section attribute CSV the run was built from");
    export_cmd->add_option("--registry", export_args.registry,
                           "Registry directory (default: $ROCKCLUSTER_REGISTRY or ./registry)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    synth_args.seed_given = synth_seed->count() > 0;
    run_args.seed_given = run_seed->count() > 0;
    optimize_args.seed_given = optimize_seed->count() > 0;

    try {
        if (*synth_cmd) {
            if (synth_args.scenario_path.empty() == synth_args.builtin.empty()) {
                std::cerr << "synth: provide exactly one of --scenario or --builtin\n";
                return 2;
            }
            return cmd_synth(synth_args);
        }
        if (*extract_cmd) return cmd_extract(extract_args);
        if (*run_cmd) return cmd_run(run_args);
        if (*optimize_cmd) return cmd_optimize(optimize_args);
        if (*report_cmd) return cmd_report(report_args);
        if (*export_cmd) {
            if (export_args.run_id.empty() == export_args.study_id.empty()) {
                std::cerr << "export-plots: provide exactly one of --run or --study\n";
                return 2;
            }
            return cmd_export_plots(export_args);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
