#include "rockcluster/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "rockcluster/csv.hpp"
#include "rockcluster/hdbscan.hpp"
#include "rockcluster/partition.hpp"
#include "rockcluster/pca.hpp"
#include "rockcluster/scaling.hpp"
#include "rockcluster/umap.hpp"

namespace rockcluster {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    require(ctx != nullptr, "sha256: cannot allocate digest context");
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
                    EVP_DigestFinal_ex(ctx, digest, &length) == 1;
    EVP_MD_CTX_free(ctx);
    require(ok, "sha256: digest computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * length);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

// ------------------------------------------------------------ configuration

namespace {

void check_range_int(long long value, long long lo, long long hi, const std::string& field) {
    if (value < lo || value > hi)
        fail(field + " = " + std::to_string(value) + " outside [" + std::to_string(lo) + ", " +
             std::to_string(hi) + "]");
}

void check_range_real(double value, double lo, double hi, const std::string& field) {
    if (!(value >= lo && value <= hi))
        fail(field + " = " + format_double(value) + " outside [" + format_double(lo) + ", " +
             format_double(hi) + "]");
}

}  // namespace

void validate_config(const PipelineConfig& config) {
    scaler_from_string(config.scaler);  // throws naming the value

    const auto& reducer = config.reducer;
    if (reducer.kind == "none") {
        // nothing to check
    } else if (reducer.kind == "pca") {
        check_range_int(reducer.pca.n_components, 1, 50, "reducer.pca.n_components");
    } else if (reducer.kind == "umap") {
        check_range_int(reducer.umap.n_neighbors, 2, 250, "reducer.umap.n_neighbors");
        check_range_real(reducer.umap.min_dist, 0.0, 0.99, "reducer.umap.min_dist");
        check_range_int(reducer.umap.n_components, 2, 15, "reducer.umap.n_components");
        metric_from_string(reducer.umap.metric);
    } else {
        fail("reducer.kind must be none, pca, or umap; got " + reducer.kind);
    }

    const auto& clusterer = config.clusterer;
    if (clusterer.kind == "kmeans") {
        check_range_int(clusterer.kmeans.n_clusters, 2, 20, "clusterer.kmeans.n_clusters");
    } else if (clusterer.kind == "agglomerative") {
        check_range_int(clusterer.agglomerative.n_clusters, 2, 20,
                        "clusterer.agglomerative.n_clusters");
        const Linkage linkage = linkage_from_name(clusterer.agglomerative.linkage);
        metric_from_string(clusterer.agglomerative.metric);
        if (linkage == Linkage::Ward && clusterer.agglomerative.metric != "euclidean")
            fail("clusterer.agglomerative.metric must be euclidean under ward linkage");
    } else if (clusterer.kind == "hdbscan") {
        check_range_int(clusterer.hdbscan.min_cluster_size, 5, 200,
                        "clusterer.hdbscan.min_cluster_size");
        check_range_int(clusterer.hdbscan.min_samples, 1, 50, "clusterer.hdbscan.min_samples");
        check_range_real(clusterer.hdbscan.epsilon, 0.0, 1.0, "clusterer.hdbscan.epsilon");
        metric_from_string(clusterer.hdbscan.metric);
    } else {
        fail("clusterer.kind must be kmeans, agglomerative, or hdbscan; got " + clusterer.kind);
    }
}

std::string config_to_json(const PipelineConfig& config) {
    json doc;
    doc["version"] = 1;
    doc["seed"] = config.seed;
    doc["feature_set"] = to_string(config.feature_set);
    doc["scaler"] = config.scaler;
    json reducer;
    reducer["kind"] = config.reducer.kind;
    if (config.reducer.kind == "pca") {
        reducer["n_components"] = config.reducer.pca.n_components;
    } else if (config.reducer.kind == "umap") {
        reducer["n_neighbors"] = config.reducer.umap.n_neighbors;
        reducer["min_dist"] = config.reducer.umap.min_dist;
        reducer["n_components"] = config.reducer.umap.n_components;
        reducer["metric"] = config.reducer.umap.metric;
    }
    doc["reducer"] = std::move(reducer);
    json clusterer;
    clusterer["kind"] = config.clusterer.kind;
    if (config.clusterer.kind == "kmeans") {
        clusterer["n_clusters"] = config.clusterer.kmeans.n_clusters;
    } else if (config.clusterer.kind == "agglomerative") {
        clusterer["n_clusters"] = config.clusterer.agglomerative.n_clusters;
        clusterer["linkage"] = config.clusterer.agglomerative.linkage;
        clusterer["metric"] = config.clusterer.agglomerative.metric;
    } else if (config.clusterer.kind == "hdbscan") {
        clusterer["min_cluster_size"] = config.clusterer.hdbscan.min_cluster_size;
        clusterer["min_samples"] = config.clusterer.hdbscan.min_samples;
        clusterer["epsilon"] = config.clusterer.hdbscan.epsilon;
        clusterer["metric"] = config.clusterer.hdbscan.metric;
    }
    doc["clusterer"] = std::move(clusterer);
    return doc.dump();
}

PipelineConfig config_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        fail(std::string("config: invalid JSON: ") + e.what());
    }
    if (doc.value("version", 0) != 1) fail("config: unsupported or missing version");
    for (const char* key : {"feature_set", "scaler", "reducer", "clusterer"})
        if (!doc.contains(key)) fail(std::string("config: missing field ") + key);

    PipelineConfig config;
    config.seed = doc.value("seed", std::uint64_t{0});
    config.feature_set = feature_set_from_string(doc.at("feature_set").get<std::string>());
    config.scaler = doc.at("scaler").get<std::string>();

    const auto& reducer = doc.at("reducer");
    if (!reducer.is_object() || !reducer.contains("kind")) fail("config: reducer needs a kind");
    config.reducer.kind = reducer.at("kind").get<std::string>();
    if (config.reducer.kind == "pca") {
        config.reducer.pca.n_components = reducer.value("n_components", 2);
    } else if (config.reducer.kind == "umap") {
        config.reducer.umap.n_neighbors = reducer.value("n_neighbors", 15);
        config.reducer.umap.min_dist = reducer.value("min_dist", 0.1);
        config.reducer.umap.n_components = reducer.value("n_components", 2);
        config.reducer.umap.metric = reducer.value("metric", std::string("euclidean"));
    }

    const auto& clusterer = doc.at("clusterer");
    if (!clusterer.is_object() || !clusterer.contains("kind"))
        fail("config: clusterer needs a kind");
    config.clusterer.kind = clusterer.at("kind").get<std::string>();
    if (config.clusterer.kind == "kmeans") {
        config.clusterer.kmeans.n_clusters = clusterer.value("n_clusters", 8);
    } else if (config.clusterer.kind == "agglomerative") {
        config.clusterer.agglomerative.n_clusters = clusterer.value("n_clusters", 8);
        config.clusterer.agglomerative.linkage = clusterer.value("linkage", std::string("ward"));
        config.clusterer.agglomerative.metric = clusterer.value("metric", std::string("euclidean"));
    } else if (config.clusterer.kind == "hdbscan") {
        config.clusterer.hdbscan.min_cluster_size = clusterer.value("min_cluster_size", 5);
        config.clusterer.hdbscan.min_samples = clusterer.value("min_samples", 5);
        config.clusterer.hdbscan.epsilon = clusterer.value("epsilon", 0.0);
        config.clusterer.hdbscan.metric = clusterer.value("metric", std::string("euclidean"));
    }
    validate_config(config);
    return config;
}

// ------------------------------------------------------------------- dataset

DataSet load_dataset(const std::string& features_csv_path, const std::string& sections_csv_path) {
    DataSet data;
    std::ifstream features(features_csv_path);
    require(features.good(), "cannot open feature file " + features_csv_path);
    data.features = read_wide_csv(features);

    if (!sections_csv_path.empty()) {
        std::ifstream attrs(sections_csv_path);
        require(attrs.good(), "cannot open section attribute file " + sections_csv_path);
        std::string line;
        require(read_csv_line(attrs, line), "section attribute file is empty");
        require(line == "section_id,overburden_m,tunnel_width_m,rock_type,q_class",
                "section attribute file has an unexpected header");
        std::map<std::string, std::pair<std::string, std::string>> labels;
        while (read_csv_line(attrs, line)) {
            if (line.empty()) continue;
            const auto fields = split_csv_line(line);
            require(fields.size() == 5, "section attribute row needs 5 fields");
            labels[fields[0]] = {fields[3], fields[4]};
        }
        auto& rock = data.label_sets["rock_type"];
        auto& q = data.label_sets["q_class"];
        for (const auto& id : data.features.section_ids) {
            const auto it = labels.find(id);
            rock.push_back(it == labels.end() ? "" : it->second.first);
            q.push_back(it == labels.end() ? "" : it->second.second);
        }
    }
    return data;
}

std::string dataset_fingerprint(const DataSet& data) {
    std::ostringstream wide;
    write_wide_csv(wide, data.features);
    const json labels = data.label_sets;  // sorted keys, canonical dump
    return sha256_hex(wide.str() + "\n" + labels.dump());
}

std::string compute_run_id(const PipelineConfig& config, const std::string& fingerprint) {
    return sha256_hex(config_to_json(config) + "\n" + fingerprint + "\n" +
                      std::to_string(config.seed));
}

// ----------------------------------------------------------------- execution

namespace {

bool schema_has(FeatureSetId schema, ParameterId param, StatKind stat) {
    for (const auto& column : feature_schema(schema))
        if (column.param == param && column.stat == stat) return true;
    return false;
}

bool schema_has_key_columns(FeatureSetId schema) {
    return schema_has(schema, ParameterId::FeedPressNorm, StatKind::Mean) &&
           schema_has(schema, ParameterId::PenetrNorm, StatKind::Mean) &&
           schema_has(schema, ParameterId::RotaPressNorm, StatKind::Mean);
}

std::string dendrogram_to_json(const std::vector<DendrogramRow>& rows) {
    json merges = json::array();
    for (const auto& row : rows)
        merges.push_back({{"left", row.left},
                          {"right", row.right},
                          {"height", row.height},
                          {"size", row.size}});
    return json{{"kind", "dendrogram"}, {"merges", std::move(merges)}}.dump(2) + "\n";
}

class StageTimer {
public:
    explicit StageTimer(std::map<std::string, double>& sink) : sink_(sink) {}

    template <typename Fn>
    void run(const std::string& name, std::string& stage, Fn&& fn) {
        stage = name;
        const auto start = std::chrono::steady_clock::now();
        fn();
        const auto stop = std::chrono::steady_clock::now();
        sink_[name] = std::chrono::duration<double, std::milli>(stop - start).count();
    }

private:
    std::map<std::string, double>& sink_;
};

void atomic_write(const fs::path& path, const std::string& bytes) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        require(out.good(), "cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        require(out.good(), "write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

json profile_to_json(const ClusterProfile& profile) {
    json node;
    node["cluster_id"] = profile.cluster_id;
    node["n_samples"] = profile.n_samples;
    node["feed_press_median"] = profile.feed_press_median;
    node["penetr_median"] = profile.penetr_median;
    node["rota_press_median"] = profile.rota_press_median;
    if (profile.feed_press_median_raw) node["feed_press_median_raw"] = *profile.feed_press_median_raw;
    if (profile.penetr_median_raw) node["penetr_median_raw"] = *profile.penetr_median_raw;
    if (profile.rota_press_median_raw) node["rota_press_median_raw"] = *profile.rota_press_median_raw;
    json votes = json::object();
    for (const auto& [set, vote] : profile.votes)
        votes[set] = {{"label", vote.label}, {"fraction", vote.fraction}};
    node["votes"] = std::move(votes);
    return node;
}

// The exact file list persist_run leaves beside record.json; timings.json is
// written too but kept off the list so reruns stay byte-comparable.
std::vector<std::string> artifact_names(const RunRecord& record) {
    std::vector<std::string> names{"record.json"};
    if (record.status == "completed") {
        names.push_back("labels.csv");
        names.push_back("embedding.csv");
        names.push_back("summary_row.csv");
        if (!record.tree_json.empty()) names.push_back("tree.json");
        if (!record.profiles.empty()) names.push_back("profiles.csv");
    }
    return names;
}

ClusterProfile profile_from_json(const json& node) {
    ClusterProfile profile;
    profile.cluster_id = node.at("cluster_id").get<int>();
    profile.n_samples = node.at("n_samples").get<std::size_t>();
    profile.feed_press_median = node.at("feed_press_median").get<double>();
    profile.penetr_median = node.at("penetr_median").get<double>();
    profile.rota_press_median = node.at("rota_press_median").get<double>();
    if (node.contains("feed_press_median_raw"))
        profile.feed_press_median_raw = node.at("feed_press_median_raw").get<double>();
    if (node.contains("penetr_median_raw"))
        profile.penetr_median_raw = node.at("penetr_median_raw").get<double>();
    if (node.contains("rota_press_median_raw"))
        profile.rota_press_median_raw = node.at("rota_press_median_raw").get<double>();
    for (const auto& [set, vote] : node.at("votes").items())
        profile.votes[set] = {vote.at("label").get<std::string>(),
                              vote.at("fraction").get<double>()};
    return profile;
}

}  // namespace

RunRecord run_pipeline(const PipelineConfig& config, const DataSet& data,
                       const std::string& registry_dir) {
    RunRecord record;
    record.config = config;
    record.section_ids = data.features.section_ids;

    std::string stage = "validate";
    StageTimer timer(record.timings_ms);
    try {
        FeatureTable working;
        timer.run("validate", stage, [&] {
            validate_config(config);
            require(data.features.values.rows() > 0, "dataset is empty");
            require(static_cast<std::size_t>(data.features.values.rows()) ==
                        data.features.section_ids.size(),
                    "feature rows and section ids disagree");
            for (const auto& [name, labels] : data.label_sets)
                require(labels.size() == data.features.section_ids.size(),
                        "label set " + name + " does not match the feature rows");
            record.data_fingerprint = dataset_fingerprint(data);
            record.run_id = compute_run_id(config, record.data_fingerprint);
            working = select_feature_set(data.features, config.feature_set);
        });

        Matrix scaled;
        timer.run("scale", stage, [&] {
            const auto spec = fit_scaler(working.values, scaler_from_string(config.scaler));
            scaled = transform(spec, working.values);
        });

        timer.run("reduce", stage, [&] {
            if (config.reducer.kind == "none") {
                record.embedding = scaled;
            } else if (config.reducer.kind == "pca") {
                require(config.reducer.pca.n_components <= scaled.cols(),
                        "reducer.pca.n_components exceeds the feature count");
                const auto model = fit_pca(scaled, config.reducer.pca.n_components);
                record.embedding = transform_pca(model, scaled);
            } else {
                UmapParams params;
                params.n_neighbors = config.reducer.umap.n_neighbors;
                params.min_dist = config.reducer.umap.min_dist;
                params.n_components = config.reducer.umap.n_components;
                params.metric = metric_from_string(config.reducer.umap.metric);
                params.seed = config.seed;
                record.embedding = umap_fit(scaled, params).embedding;
            }
        });

        timer.run("cluster", stage, [&] {
            if (config.clusterer.kind == "kmeans") {
                KmeansParams params;
                params.n_clusters = config.clusterer.kmeans.n_clusters;
                params.seed = config.seed;
                record.labels = kmeans(record.embedding, params).labels;
            } else if (config.clusterer.kind == "agglomerative") {
                AgglomerativeParams params;
                params.n_clusters = config.clusterer.agglomerative.n_clusters;
                params.linkage = linkage_from_name(config.clusterer.agglomerative.linkage);
                params.metric = metric_from_string(config.clusterer.agglomerative.metric);
                const auto result = agglomerative(record.embedding, params);
                record.labels = result.labels;
                record.tree_json = dendrogram_to_json(result.dendrogram);
            } else {
                HdbscanParams params;
                params.min_cluster_size = config.clusterer.hdbscan.min_cluster_size;
                params.min_samples = config.clusterer.hdbscan.min_samples;
                params.cluster_selection_epsilon = config.clusterer.hdbscan.epsilon;
                params.metric = metric_from_string(config.clusterer.hdbscan.metric);
                const auto result = hdbscan_cluster(record.embedding, params);
                record.labels = result.labels;
                record.tree_json = condensed_tree_to_json(result.tree);
            }
        });

        timer.run("score", stage, [&] {
            record.metrics =
                build_metric_report(record.embedding, record.labels, data.label_sets, {});
        });

        timer.run("characterize", stage, [&] {
            // needs the three key mean columns; other feature sets skip the
            // profile artifacts rather than failing the run
            if (!schema_has_key_columns(config.feature_set)) return;
            FeatureTable scaled_table;
            scaled_table.schema = config.feature_set;
            scaled_table.section_ids = working.section_ids;
            scaled_table.values = scaled;
            record.profiles =
                profile_clusters(scaled_table, record.labels, data.label_sets, &working);
        });
    } catch (const std::exception& e) {
        record.status = "failed";
        record.failure_stage = stage;
        record.failure_message = e.what();
    }

    // a record that failed before it could be fingerprinted has no identity
    // to file it under, so it is only returned
    if (!registry_dir.empty() && !record.run_id.empty()) {
        record.artifacts = artifact_names(record);
        persist_run(registry_dir, record);
    }
    return record;
}

void persist_run(const std::string& registry_dir, const RunRecord& record) {
    require(!record.run_id.empty(), "cannot persist a run without an id");
    const fs::path dir = fs::path(registry_dir) / "runs" / record.run_id;
    fs::create_directories(dir);

    const std::vector<std::string> artifacts = artifact_names(record);
    if (record.status == "completed") {
        std::string labels = "section_id,label\n";
        for (std::size_t i = 0; i < record.labels.size(); ++i) {
            append_csv_field(labels, record.section_ids[i]);
            labels += ',';
            labels += std::to_string(record.labels[i]);
            labels += '\n';
        }
        atomic_write(dir / "labels.csv", labels);

        std::string embedding = "section_id";
        for (Eigen::Index c = 0; c < record.embedding.cols(); ++c)
            embedding += ",e" + std::to_string(c);
        embedding += '\n';
        for (Eigen::Index r = 0; r < record.embedding.rows(); ++r) {
            append_csv_field(embedding, record.section_ids[static_cast<std::size_t>(r)]);
            for (Eigen::Index c = 0; c < record.embedding.cols(); ++c) {
                embedding += ',';
                embedding += format_double(record.embedding(r, c));
            }
            embedding += '\n';
        }
        atomic_write(dir / "embedding.csv", embedding);

        atomic_write(dir / "summary_row.csv",
                     metric_report_csv_header(record.metrics) + metric_report_csv_row(record.metrics));

        if (!record.tree_json.empty()) atomic_write(dir / "tree.json", record.tree_json);
        if (!record.profiles.empty())
            atomic_write(dir / "profiles.csv", profiles_to_csv(record.profiles));
    }

    json doc;
    doc["version"] = 1;
    doc["run_id"] = record.run_id;
    doc["status"] = record.status;
    if (record.status == "failed") {
        doc["failure_stage"] = record.failure_stage;
        doc["failure_message"] = record.failure_message;
    }
    doc["config"] = json::parse(config_to_json(record.config));
    doc["data_fingerprint"] = record.data_fingerprint;
    doc["section_count"] = record.section_ids.size();
    if (record.status == "completed") {
        doc["metrics"] = json::parse(metric_report_to_json(record.metrics));
        json profiles = json::array();
        for (const auto& profile : record.profiles) profiles.push_back(profile_to_json(profile));
        doc["profiles"] = std::move(profiles);
    }
    doc["artifacts"] = artifacts;
    atomic_write(dir / "record.json", doc.dump(2) + "\n");

    json timings = json::object();
    for (const auto& [name, ms] : record.timings_ms) timings[name] = ms;
    atomic_write(dir / "timings.json", timings.dump(2) + "\n");
}

RunRecord load_run(const std::string& registry_dir, const std::string& run_id) {
    const fs::path dir = fs::path(registry_dir) / "runs" / run_id;
    std::ifstream record_file(dir / "record.json");
    require(record_file.good(), "no run record at " + (dir / "record.json").string());
    json doc;
    try {
        doc = json::parse(record_file);
    } catch (const json::exception& e) {
        fail(std::string("run record: invalid JSON: ") + e.what());
    }

    RunRecord record;
    record.run_id = doc.at("run_id").get<std::string>();
    record.status = doc.at("status").get<std::string>();
    record.config = config_from_json(doc.at("config").dump());
    record.data_fingerprint = doc.at("data_fingerprint").get<std::string>();
    if (record.status == "failed") {
        record.failure_stage = doc.value("failure_stage", std::string());
        record.failure_message = doc.value("failure_message", std::string());
        return record;
    }
    record.metrics = metric_report_from_json(doc.at("metrics").dump());
    for (const auto& node : doc.at("profiles")) record.profiles.push_back(profile_from_json(node));

    std::ifstream labels_file(dir / "labels.csv");
    require(labels_file.good(), "no labels at " + (dir / "labels.csv").string());
    std::string line;
    require(read_csv_line(labels_file, line) && line == "section_id,label",
            "labels.csv has an unexpected header");
    while (read_csv_line(labels_file, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        require(fields.size() == 2, "labels.csv row needs 2 fields");
        record.section_ids.push_back(fields[0]);
        record.labels.push_back(std::stoi(fields[1]));
    }

    std::ifstream embedding_file(dir / "embedding.csv");
    require(embedding_file.good(), "no embedding at " + (dir / "embedding.csv").string());
    require(read_csv_line(embedding_file, line), "embedding.csv is empty");
    const auto header = split_csv_line(line);
    require(header.size() >= 2 && header[0] == "section_id",
            "embedding.csv has an unexpected header");
    const Eigen::Index dims = static_cast<Eigen::Index>(header.size()) - 1;
    std::vector<double> flat;
    Eigen::Index rows = 0;
    while (read_csv_line(embedding_file, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        require(fields.size() == header.size(), "embedding.csv row width mismatch");
        for (std::size_t c = 1; c < fields.size(); ++c)
            flat.push_back(parse_double_or_fail(fields[c], "embedding.csv"));
        ++rows;
    }
    record.embedding.resize(rows, dims);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < dims; ++c)
            record.embedding(r, c) = flat[static_cast<std::size_t>(r * dims + c)];

    std::ifstream tree_file(dir / "tree.json");
    if (tree_file.good()) {
        std::ostringstream tree;
        tree << tree_file.rdbuf();
        record.tree_json = tree.str();
    }
    std::ifstream timing_file(dir / "timings.json");
    if (timing_file.good()) {
        const json timings = json::parse(timing_file);
        for (const auto& [name, ms] : timings.items())
            record.timings_ms[name] = ms.get<double>();
    }
    for (const auto& name : doc.at("artifacts"))
        record.artifacts.push_back(name.get<std::string>());
    return record;
}

std::string resolve_registry_dir(const std::string& explicit_path) {
    if (!explicit_path.empty()) return explicit_path;
    if (const char* env = std::getenv("ROCKCLUSTER_REGISTRY"); env != nullptr && *env != '\0')
        return env;
    return "registry";
}

// -------------------------------------------------------------- optimization

namespace {

PipelineConfig apply_assignment(const PipelineConfig& base, const Assignment& assignment,
                                const StudyOptions& options) {
    PipelineConfig config = base;
    config.reducer.kind = options.reducer;
    config.clusterer.kind = options.clusterer;
    for (const auto& [name, value] : assignment) {
        if (name == "scaler")
            config.scaler = as_label(value);
        else if (name == "umap.n_neighbors")
            config.reducer.umap.n_neighbors = static_cast<int>(as_integer(value));
        else if (name == "umap.min_dist")
            config.reducer.umap.min_dist = as_real(value);
        else if (name == "umap.n_components")
            config.reducer.umap.n_components = static_cast<int>(as_integer(value));
        else if (name == "umap.metric")
            config.reducer.umap.metric = as_label(value);
        else if (name == "kmeans.n_clusters")
            config.clusterer.kmeans.n_clusters = static_cast<int>(as_integer(value));
        else if (name == "agglomerative.n_clusters")
            config.clusterer.agglomerative.n_clusters = static_cast<int>(as_integer(value));
        else if (name == "agglomerative.linkage")
            config.clusterer.agglomerative.linkage = as_label(value);
        else if (name == "agglomerative.metric")
            config.clusterer.agglomerative.metric = as_label(value);
        else if (name == "hdbscan.min_cluster_size")
            config.clusterer.hdbscan.min_cluster_size = static_cast<int>(as_integer(value));
        else if (name == "hdbscan.min_samples")
            config.clusterer.hdbscan.min_samples = static_cast<int>(as_integer(value));
        else if (name == "hdbscan.epsilon")
            config.clusterer.hdbscan.epsilon = as_real(value);
        else if (name == "hdbscan.metric")
            config.clusterer.hdbscan.metric = as_label(value);
        else
            fail("unknown search dimension " + name);
    }
    // ward accepts euclidean only; sampled metric values are coerced so the
    // trial measures the linkage rather than failing
    if (config.clusterer.kind == "agglomerative" &&
        config.clusterer.agglomerative.linkage == "ward")
        config.clusterer.agglomerative.metric = "euclidean";
    return config;
}

}  // namespace

StudyArtifacts optimize_pipeline(const PipelineConfig& template_config, const DataSet& data,
                                 const StudyOptions& options, const std::string& registry_dir) {
    require(options.n_trials >= 1, "a study needs at least one trial");
    const auto space =
        SearchSpace::pipeline_space(options.reducer, options.clusterer, options.tune_scaler);
    const std::string fingerprint = dataset_fingerprint(data);
    const std::string study_id = sha256_hex(
        "study\n" + config_to_json(template_config) + "\n" + fingerprint + "\n" + options.reducer +
        "\n" + options.clusterer + "\n" + std::to_string(options.n_trials) + "\n" +
        (options.tune_scaler ? "1" : "0") + "\n" + std::to_string(template_config.seed));

    struct TrialOutcome {
        std::string status;
        bool excluded = false;
        std::vector<std::string> exclusion_reasons;
        std::string failure;
    };
    std::map<std::string, TrialOutcome> outcomes;
    std::mutex outcomes_guard;

    const Evaluator evaluate = [&](const Assignment& assignment) {
        const auto config = apply_assignment(template_config, assignment, options);
        const auto record = run_pipeline(config, data, registry_dir);
        {
            const std::lock_guard<std::mutex> lock(outcomes_guard);
            auto& outcome = outcomes[record.run_id];
            outcome.status = record.status;
            outcome.excluded = record.metrics.excluded;
            outcome.exclusion_reasons = record.metrics.exclusion_reasons;
            outcome.failure = record.failure_stage.empty()
                                  ? record.failure_message
                                  : record.failure_stage + ": " + record.failure_message;
        }
        if (record.status != "completed")
            fail(record.failure_stage + ": " + record.failure_message);
        const auto& m = record.metrics;
        if (m.calinski_harabasz_degenerate || !std::isfinite(m.silhouette) ||
            !std::isfinite(m.davies_bouldin) || !std::isfinite(m.calinski_harabasz))
            fail("degenerate metric values");
        return std::vector<double>{m.silhouette, m.davies_bouldin, m.calinski_harabasz};
    };

    OptimizerParams params;  // silhouette max, davies-bouldin min, calinski max
    StudyArtifacts artifacts;
    artifacts.study_id = study_id;
    artifacts.study = run_study_parallel(evaluate, space, options.n_trials, params,
                                         template_config.seed, options.parallel);

    // map every trial back to its run id through the deterministic config hash
    for (const auto& trial : artifacts.study.trials) {
        const auto config = apply_assignment(template_config, trial.params, options);
        artifacts.trial_run_ids.push_back(compute_run_id(config, fingerprint));
    }

    // the final pick sees only retained (completed, non-excluded) trials
    std::vector<const Trial*> retained;
    std::size_t n_completed = 0;
    for (std::size_t t = 0; t < artifacts.study.trials.size(); ++t) {
        const auto& trial = artifacts.study.trials[t];
        if (!trial.complete()) continue;
        ++n_completed;
        const auto it = outcomes.find(artifacts.trial_run_ids[t]);
        if (it != outcomes.end() && !it->second.excluded) retained.push_back(&trial);
    }
    if (retained.empty()) {
        std::map<std::string, int> modes;
        for (const auto& [run_id, outcome] : outcomes) {
            if (outcome.status != "completed")
                ++modes["failed (" + outcome.failure + ")"];
            else if (outcome.excluded)
                for (const auto& reason : outcome.exclusion_reasons) ++modes["excluded: " + reason];
        }
        std::string summary = n_completed == 0 ? "all trials failed" : "every completed run was excluded";
        for (const auto& [mode, count] : modes)
            summary += "; " + mode + " x" + std::to_string(count);
        fail(summary);
    }

    std::vector<std::vector<double>> retained_objectives;
    for (const auto* trial : retained) retained_objectives.push_back(*trial->objectives);
    const auto fronts = nondominated_sort(retained_objectives, params.directions);
    ParetoFront retained_front;
    retained_front.reference = artifacts.study.front.reference;
    std::vector<int> member_indices = fronts.front();
    std::sort(member_indices.begin(), member_indices.end(), [&](int a, int b) {
        return retained[static_cast<std::size_t>(a)]->trial_id <
               retained[static_cast<std::size_t>(b)]->trial_id;
    });
    std::vector<std::vector<double>> member_objectives;
    for (int idx : member_indices) {
        retained_front.members.push_back(*retained[static_cast<std::size_t>(idx)]);
        member_objectives.push_back(retained_objectives[static_cast<std::size_t>(idx)]);
    }
    retained_front.hypervolume =
        retained_front.reference.empty()
            ? 0.0
            : hypervolume(member_objectives, retained_front.reference, params.directions);
    const Trial& best = pick_final(retained_front);
    artifacts.best_trial_id = best.trial_id;
    artifacts.best_run_id = artifacts.trial_run_ids[static_cast<std::size_t>(best.trial_id)];

    if (!registry_dir.empty()) {
        const fs::path dir = fs::path(registry_dir) / "studies" / study_id;
        fs::create_directories(dir);
        write_study_jsonl((dir / "trials.jsonl").string(), artifacts.study.trials);
        atomic_write(dir / "front.json", front_to_json(artifacts.study.front));
        write_study_csv((dir / "front.csv").string(), artifacts.study.trials,
                        artifacts.study.front);
        std::string convergence = "after_trial,hypervolume\n";
        for (const auto& snapshot : artifacts.study.snapshots)
            convergence += std::to_string(snapshot.after_trial) + "," +
                           format_double(snapshot.hypervolume) + "\n";
        atomic_write(dir / "convergence.csv", convergence);

        json doc;
        doc["version"] = 1;
        doc["study_id"] = study_id;
        doc["seed"] = template_config.seed;
        doc["n_trials"] = options.n_trials;
        doc["tune_scaler"] = options.tune_scaler;
        doc["parallel"] = options.parallel;
        doc["reducer"] = options.reducer;
        doc["clusterer"] = options.clusterer;
        doc["template"] = json::parse(config_to_json(template_config));
        doc["data_fingerprint"] = fingerprint;
        doc["trial_run_ids"] = artifacts.trial_run_ids;
        doc["best_trial_id"] = artifacts.best_trial_id;
        doc["best_run_id"] = artifacts.best_run_id;
        json retained_ids = json::array();
        for (const auto& member : retained_front.members) retained_ids.push_back(member.trial_id);
        doc["retained_front_trials"] = std::move(retained_ids);
        doc["reference"] = artifacts.study.front.reference;
        doc["hypervolume"] = artifacts.study.front.hypervolume;
        atomic_write(dir / "study.json", doc.dump(2) + "\n");
    }
    return artifacts;
}

}  // namespace rockcluster
