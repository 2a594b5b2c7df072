#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rockcluster/characterize.hpp"
#include "rockcluster/data_model.hpp"
#include "rockcluster/linalg.hpp"
#include "rockcluster/metrics.hpp"
#include "rockcluster/motpe.hpp"

namespace rockcluster {

// ------------------------------------------------------------ configuration

struct PcaReducerConfig {
    int n_components = 2;
};

struct UmapReducerConfig {
    int n_neighbors = 15;
    double min_dist = 0.1;
    int n_components = 2;
    std::string metric = "euclidean";
};

struct ReducerConfig {
    std::string kind = "umap";  // none | pca | umap
    PcaReducerConfig pca;
    UmapReducerConfig umap;
};

struct KmeansClustererConfig {
    int n_clusters = 8;
};

struct AgglomerativeClustererConfig {
    int n_clusters = 8;
    std::string linkage = "ward";
    std::string metric = "euclidean";
};

struct HdbscanClustererConfig {
    int min_cluster_size = 5;
    int min_samples = 5;
    double epsilon = 0.0;
    std::string metric = "euclidean";
};

struct ClustererConfig {
    std::string kind = "hdbscan";  // kmeans | agglomerative | hdbscan
    KmeansClustererConfig kmeans;
    AgglomerativeClustererConfig agglomerative;
    HdbscanClustererConfig hdbscan;
};

struct PipelineConfig {
    FeatureSetId feature_set = FeatureSetId::All;
    std::string scaler = "minmax";
    ReducerConfig reducer;
    ClustererConfig clusterer;
    std::uint64_t seed = 0;
};

// Checks every referenced parameter against the bounds the optimizer searches
// (and ward's euclidean-only constraint) before any stage runs; error
// messages name the offending field.
void validate_config(const PipelineConfig& config);

// Canonical single-line JSON (sorted keys) used for hashing; parse accepts
// the same document shape with a mandatory version field.
std::string config_to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const std::string& text);

// ------------------------------------------------------------------- dataset

struct DataSet {
    FeatureTable features;
    // External labels aligned to feature rows; empty string = unlabeled.
    std::map<std::string, std::vector<std::string>> label_sets;
};

// Wide feature CSV plus an optional section attribute CSV contributing
// rock_type / q_class label sets (rows matched by section id).
DataSet load_dataset(const std::string& features_csv_path,
                     const std::string& sections_csv_path = "");

// SHA-256 of the canonical wide CSV bytes plus the serialized label sets, so
// feature or label edits both invalidate runs.
std::string dataset_fingerprint(const DataSet& data);

std::string sha256_hex(const std::string& bytes);

// ----------------------------------------------------------------- execution

struct RunRecord {
    std::string run_id;
    PipelineConfig config;
    std::string data_fingerprint;
    std::string status = "completed";  // completed | failed
    std::string failure_stage;         // set when failed
    std::string failure_message;
    MetricReport metrics;
    std::vector<ClusterProfile> profiles;
    std::vector<std::string> section_ids;
    std::vector<int> labels;
    Matrix embedding;  // the representation that was clustered
    std::string tree_json;  // dendrogram / condensed tree when applicable
    std::vector<std::string> artifacts;  // file names under the run directory
    std::map<std::string, double> timings_ms;
};

std::string compute_run_id(const PipelineConfig& config, const std::string& fingerprint);

// scale -> reduce -> cluster -> score -> characterize. A stage failure yields
// status "failed" with the stage name and cause instead of throwing. When
// registry_dir is non-empty the record is persisted under
// <registry_dir>/runs/<run_id>/.
RunRecord run_pipeline(const PipelineConfig& config, const DataSet& data,
                       const std::string& registry_dir = "");

void persist_run(const std::string& registry_dir, const RunRecord& record);
RunRecord load_run(const std::string& registry_dir, const std::string& run_id);

// Explicit path if non-empty, else $ROCKCLUSTER_REGISTRY, else "registry".
std::string resolve_registry_dir(const std::string& explicit_path);

// -------------------------------------------------------------- optimization

struct StudyOptions {
    int n_trials = 50;
    bool tune_scaler = true;  // otherwise the template's scaler stays fixed
    int parallel = 1;         // >1: bounded-parallel trials, not reproducible
    std::string reducer = "umap";
    std::string clusterer = "hdbscan";
};

struct StudyArtifacts {
    std::string study_id;
    StudyResult study;
    std::vector<std::string> trial_run_ids;  // indexed by trial id
    int best_trial_id = -1;
    std::string best_run_id;
};

// Drives run_pipeline as the optimizer's evaluator over the pipeline search
// space. Completed runs feed objectives even when the exclusion rules flag
// them, but the final pick considers only retained (non-excluded) trials:
// their own nondominated front is rebuilt and the silhouette-first rule picks
// the winner. Throws when no trial completes or every completed run is
// excluded. Study artifacts land under <registry_dir>/studies/<study_id>/.
StudyArtifacts optimize_pipeline(const PipelineConfig& template_config, const DataSet& data,
                                 const StudyOptions& options, const std::string& registry_dir);

}  // namespace rockcluster
