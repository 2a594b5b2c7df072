#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rockcluster/data_model.hpp"
#include "rockcluster/metrics.hpp"

namespace rockcluster {

// Majority label of a cluster within one label set; fraction counts voters
// (members with a non-empty label), ties resolved to the smaller string.
struct LabelVote {
    std::string label;
    double fraction = 0.0;
};

struct ClusterProfile {
    int cluster_id = 0;  // -1 = noise
    std::size_t n_samples = 0;
    // medians of the per-section mean features, in the units that were
    // clustered (normally scaled)
    double feed_press_median = 0.0;
    double penetr_median = 0.0;
    double rota_press_median = 0.0;
    // medians in raw units, when the unscaled table is supplied
    std::optional<double> feed_press_median_raw;
    std::optional<double> penetr_median_raw;
    std::optional<double> rota_press_median_raw;
    std::map<std::string, LabelVote> votes;  // per label set with any voters
};

// One profile per realized cluster (noise included when present), ordered by
// ascending penetration median, ties by cluster id. The table's schema must
// carry the mean columns of FeedPressNorm, PenetrNorm, and RotaPressNorm.
std::vector<ClusterProfile> profile_clusters(
    const FeatureTable& features, const std::vector<int>& labels,
    const std::map<std::string, std::vector<std::string>>& label_sets,
    const FeatureTable* raw = nullptr);

std::string profiles_to_csv(const std::vector<ClusterProfile>& profiles);

// Right-continuous empirical CDF of one feature column, one series per
// cluster (noise included), duplicate values collapsed to their final step.
struct CdfSeries {
    int cluster_id = 0;
    std::vector<std::pair<double, double>> points;  // (value, quantile)
};

std::vector<CdfSeries> feature_cdf(const FeatureTable& features, const std::vector<int>& labels,
                                   const std::string& feature_name);

// Long plotting table `cluster,feature,value,quantile`.
std::string cdf_to_csv(const std::vector<CdfSeries>& series, const std::string& feature_name);

// The three key drilling-response features in one long table.
std::string key_feature_cdf_csv(const FeatureTable& features, const std::vector<int>& labels);

struct ContingencyTable {
    std::vector<int> cluster_ids;                  // ascending, -1 first
    std::vector<std::string> labels;               // lexicographic
    std::vector<std::vector<std::size_t>> counts;  // [cluster][label]
};

struct AlignmentReport {
    std::map<std::string, LabelAlignment> alignments;
    std::map<std::string, ContingencyTable> tables;
};

// External agreement per label set; rows whose label is empty are skipped
// pairwise, and label sets without a single labeled row are omitted.
AlignmentReport alignment_report(const std::vector<int>& assignment,
                                 const std::map<std::string, std::vector<std::string>>& label_sets);

std::string contingency_to_csv(const ContingencyTable& table);

}  // namespace rockcluster
