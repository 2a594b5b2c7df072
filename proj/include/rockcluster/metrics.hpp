#pragma once

#include <map>
#include <string>
#include <vector>

#include "rockcluster/linalg.hpp"

namespace rockcluster {

// Internal metrics (silhouette, Davies-Bouldin, Calinski-Harabasz) drop noise
// points (label -1) and use euclidean distances on the representation that
// was clustered. External metrics (ARI, AMI) keep -1 as a genuine category.

double silhouette_score(const Matrix& x, const std::vector<int>& labels);

double davies_bouldin_score(const Matrix& x, const std::vector<int>& labels);

// Returns +infinity when the within-cluster sum of squares is exactly 0; the
// report layer stores that as a flagged finite sentinel.
double calinski_harabasz_score(const Matrix& x, const std::vector<int>& labels);

double adjusted_rand_index(const std::vector<int>& labels_a, const std::vector<int>& labels_b);

// Exact hypergeometric chance correction, normalized by the mean entropy.
// Returns the raw value, which can be marginally negative.
double adjusted_mutual_info(const std::vector<int>& labels_a, const std::vector<int>& labels_b);

// Standard Gini coefficient of a size vector: sum_ij |s_i - s_j| / (2 k sum s).
// 0 means perfectly equal sizes; values toward 1 mean extreme inequality.
double gini_index(const std::vector<std::size_t>& sizes);

// Sizes of non-noise clusters, ordered by ascending label id.
std::vector<std::size_t> cluster_sizes(const std::vector<int>& labels);
int count_clusters(const std::vector<int>& labels);

struct LabelAlignment {
    double adjusted_rand = 0.0;
    double adjusted_mutual_info = 0.0;      // clipped at 0
    double adjusted_mutual_info_raw = 0.0;  // unclipped
};

struct ExclusionConfig {
    double max_unclustered_fraction = 0.10;
    int min_cluster_count_exclusive = 3;  // excluded when n_clusters <= this
    int max_cluster_count = 50;           // excluded when n_clusters > this
    double max_dominant_fraction = 0.99;  // excluded when one cluster's share > this
};

struct MetricReport {
    double silhouette = 0.0;
    double davies_bouldin = 0.0;
    double calinski_harabasz = 0.0;
    bool calinski_harabasz_degenerate = false;  // W = 0; stored value is a finite sentinel
    double gini = 0.0;
    int n_clusters = 0;
    std::size_t n_samples = 0;
    std::size_t largest_cluster = 0;
    std::size_t n_unclustered = 0;
    double unclustered_fraction = 0.0;
    std::map<std::string, LabelAlignment> alignments;  // per external label set
    bool excluded = false;
    std::vector<std::string> exclusion_reasons;
};

void apply_exclusion_rules(MetricReport& report, const ExclusionConfig& config);

// Computes internal metrics on x (the clustered representation), alignment
// against each external label set (entries with an empty label are skipped
// pairwise), structural counts, and the exclusion verdict.
MetricReport build_metric_report(const Matrix& x, const std::vector<int>& labels,
                                 const std::map<std::string, std::vector<std::string>>& label_sets,
                                 const ExclusionConfig& config);

std::string metric_report_to_json(const MetricReport& report);
MetricReport metric_report_from_json(const std::string& text);

// One-row CSV rendering of the headline scores and structural counts.
std::string metric_report_csv_header(const MetricReport& report);
std::string metric_report_csv_row(const MetricReport& report);

}  // namespace rockcluster
