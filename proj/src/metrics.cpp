#include "rockcluster/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "rockcluster/common.hpp"
#include "rockcluster/csv.hpp"
#include "rockcluster/distance.hpp"
#include "rockcluster/parallel.hpp"

namespace rockcluster {

namespace {

// Maps non-noise labels to dense ids [0, k); noise (-1) maps to -1.
std::vector<int> dense_labels(const std::vector<int>& labels, int& k) {
    std::map<int, int> ids;
    for (int label : labels)
        if (label != -1) ids.emplace(label, 0);
    int next = 0;
    for (auto& [label, id] : ids) id = next++;
    k = next;
    std::vector<int> out(labels.size(), -1);
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != -1) out[i] = ids.at(labels[i]);
    return out;
}

void check_rows(const Matrix& x, const std::vector<int>& labels, const char* op) {
    require(static_cast<std::size_t>(x.rows()) == labels.size(),
            std::string(op) + ": label count does not match row count");
}

double log_binomial(double n, double k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

std::vector<std::size_t> cluster_sizes(const std::vector<int>& labels) {
    std::map<int, std::size_t> counts;
    for (int label : labels)
        if (label != -1) ++counts[label];
    std::vector<std::size_t> sizes;
    sizes.reserve(counts.size());
    for (const auto& [label, count] : counts) sizes.push_back(count);
    return sizes;
}

int count_clusters(const std::vector<int>& labels) {
    return static_cast<int>(cluster_sizes(labels).size());
}

double silhouette_score(const Matrix& x, const std::vector<int>& labels) {
    check_rows(x, labels, "silhouette");
    int k = 0;
    const auto dense = dense_labels(labels, k);
    if (k < 2) fail("silhouette: undefined for fewer than 2 clusters");

    std::vector<Eigen::Index> included;
    for (std::size_t i = 0; i < dense.size(); ++i)
        if (dense[i] != -1) included.push_back(static_cast<Eigen::Index>(i));
    std::vector<double> cluster_count(static_cast<std::size_t>(k), 0.0);
    for (int label : dense)
        if (label != -1) cluster_count[static_cast<std::size_t>(label)] += 1.0;

    const std::size_t m = included.size();
    const auto d = static_cast<std::size_t>(x.cols());
    std::vector<double> scores(m, 0.0);
    parallel_for_chunks(m, default_thread_count(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> sums(static_cast<std::size_t>(k));
        for (std::size_t a = begin; a < end; ++a) {
            const Eigen::Index i = included[a];
            const int own = dense[static_cast<std::size_t>(i)];
            if (cluster_count[static_cast<std::size_t>(own)] <= 1.0) {
                scores[a] = 0.0;  // singleton convention
                continue;
            }
            std::fill(sums.begin(), sums.end(), 0.0);
            const double* xi = x.data() + i * x.cols();
            for (std::size_t b = 0; b < m; ++b) {
                const Eigen::Index j = included[b];
                if (j == i) continue;
                const double* xj = x.data() + j * x.cols();
                sums[static_cast<std::size_t>(dense[static_cast<std::size_t>(j)])] +=
                    std::sqrt(squared_euclidean(xi, xj, d));
            }
            const double a_i = sums[static_cast<std::size_t>(own)] /
                               (cluster_count[static_cast<std::size_t>(own)] - 1.0);
            double b_i = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                if (c == own) continue;
                b_i = std::min(b_i, sums[static_cast<std::size_t>(c)] /
                                        cluster_count[static_cast<std::size_t>(c)]);
            }
            const double denom = std::max(a_i, b_i);
            scores[a] = denom > 0.0 ? (b_i - a_i) / denom : 0.0;
        }
    });

    double total = 0.0;
    for (double s : scores) total += s;
    return total / static_cast<double>(m);
}

double davies_bouldin_score(const Matrix& x, const std::vector<int>& labels) {
    check_rows(x, labels, "davies_bouldin");
    int k = 0;
    const auto dense = dense_labels(labels, k);
    if (k < 2) fail("davies_bouldin: undefined for fewer than 2 clusters");

    Matrix centroids = Matrix::Zero(k, x.cols());
    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    for (std::size_t i = 0; i < dense.size(); ++i) {
        if (dense[i] == -1) continue;
        centroids.row(dense[i]) += x.row(static_cast<Eigen::Index>(i));
        counts[static_cast<std::size_t>(dense[i])] += 1.0;
    }
    for (int c = 0; c < k; ++c) centroids.row(c) /= counts[static_cast<std::size_t>(c)];

    std::vector<double> dispersion(static_cast<std::size_t>(k), 0.0);
    for (std::size_t i = 0; i < dense.size(); ++i) {
        if (dense[i] == -1) continue;
        dispersion[static_cast<std::size_t>(dense[i])] +=
            (x.row(static_cast<Eigen::Index>(i)) - centroids.row(dense[i])).norm();
    }
    for (int c = 0; c < k; ++c) dispersion[static_cast<std::size_t>(c)] /= counts[static_cast<std::size_t>(c)];

    double total = 0.0;
    for (int i = 0; i < k; ++i) {
        double worst = 0.0;
        for (int j = 0; j < k; ++j) {
            if (i == j) continue;
            const double separation = (centroids.row(i) - centroids.row(j)).norm();
            if (separation == 0.0) fail("davies_bouldin: duplicate cluster centroids");
            worst = std::max(worst, (dispersion[static_cast<std::size_t>(i)] +
                                     dispersion[static_cast<std::size_t>(j)]) /
                                        separation);
        }
        total += worst;
    }
    return total / static_cast<double>(k);
}

double calinski_harabasz_score(const Matrix& x, const std::vector<int>& labels) {
    check_rows(x, labels, "calinski_harabasz");
    int k = 0;
    const auto dense = dense_labels(labels, k);
    if (k < 2) fail("calinski_harabasz: undefined for fewer than 2 clusters");

    std::vector<Eigen::Index> included;
    for (std::size_t i = 0; i < dense.size(); ++i)
        if (dense[i] != -1) included.push_back(static_cast<Eigen::Index>(i));
    const auto n = static_cast<double>(included.size());
    if (static_cast<int>(included.size()) == k)
        fail("calinski_harabasz: undefined when every cluster is a single point");

    Vector overall = Vector::Zero(x.cols());
    for (const Eigen::Index i : included) overall += x.row(i).transpose();
    overall /= n;

    Matrix centroids = Matrix::Zero(k, x.cols());
    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    for (const Eigen::Index i : included) {
        const int c = dense[static_cast<std::size_t>(i)];
        centroids.row(c) += x.row(i);
        counts[static_cast<std::size_t>(c)] += 1.0;
    }
    for (int c = 0; c < k; ++c) centroids.row(c) /= counts[static_cast<std::size_t>(c)];

    double between = 0.0;
    for (int c = 0; c < k; ++c)
        between += counts[static_cast<std::size_t>(c)] *
                   (centroids.row(c).transpose() - overall).squaredNorm();
    double within = 0.0;
    for (const Eigen::Index i : included)
        within += (x.row(i) - centroids.row(dense[static_cast<std::size_t>(i)])).squaredNorm();

    if (within == 0.0) return std::numeric_limits<double>::infinity();
    return (between / static_cast<double>(k - 1)) / (within / (n - static_cast<double>(k)));
}

namespace {

// Contingency table between two labelings over the same indices.
struct Contingency {
    std::vector<std::vector<double>> cells;  // rows: labels_a, cols: labels_b
    std::vector<double> row_sums, col_sums;
    double n = 0.0;
};

Contingency contingency_table(const std::vector<int>& a, const std::vector<int>& b) {
    std::map<int, std::size_t> ids_a, ids_b;
    for (int v : a) ids_a.emplace(v, 0);
    for (int v : b) ids_b.emplace(v, 0);
    std::size_t next = 0;
    for (auto& [v, id] : ids_a) id = next++;
    next = 0;
    for (auto& [v, id] : ids_b) id = next++;

    Contingency table;
    table.cells.assign(ids_a.size(), std::vector<double>(ids_b.size(), 0.0));
    table.row_sums.assign(ids_a.size(), 0.0);
    table.col_sums.assign(ids_b.size(), 0.0);
    table.n = static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const std::size_t r = ids_a.at(a[i]);
        const std::size_t c = ids_b.at(b[i]);
        table.cells[r][c] += 1.0;
        table.row_sums[r] += 1.0;
        table.col_sums[c] += 1.0;
    }
    return table;
}

}  // namespace

double adjusted_rand_index(const std::vector<int>& labels_a, const std::vector<int>& labels_b) {
    require(labels_a.size() == labels_b.size(), "adjusted_rand: label vectors differ in length");
    require(labels_a.size() >= 2, "adjusted_rand: needs at least 2 samples");
    const auto table = contingency_table(labels_a, labels_b);

    auto choose2 = [](double v) { return v * (v - 1.0) / 2.0; };
    double index = 0.0;
    for (const auto& row : table.cells)
        for (double cell : row) index += choose2(cell);
    double sum_a = 0.0, sum_b = 0.0;
    for (double v : table.row_sums) sum_a += choose2(v);
    for (double v : table.col_sums) sum_b += choose2(v);
    const double expected = sum_a * sum_b / choose2(table.n);
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;  // both labelings degenerate and identical as partitions
    return (index - expected) / (max_index - expected);
}

double adjusted_mutual_info(const std::vector<int>& labels_a, const std::vector<int>& labels_b) {
    require(labels_a.size() == labels_b.size(), "adjusted_mutual_info: label vectors differ in length");
    require(labels_a.size() >= 2, "adjusted_mutual_info: needs at least 2 samples");
    const auto table = contingency_table(labels_a, labels_b);
    const double n = table.n;

    double mi = 0.0;
    for (std::size_t r = 0; r < table.cells.size(); ++r) {
        for (std::size_t c = 0; c < table.cells[r].size(); ++c) {
            const double cell = table.cells[r][c];
            if (cell <= 0.0) continue;
            mi += (cell / n) * std::log(n * cell / (table.row_sums[r] * table.col_sums[c]));
        }
    }

    auto entropy = [n](const std::vector<double>& sums) {
        double h = 0.0;
        for (double v : sums)
            if (v > 0.0) h -= (v / n) * std::log(v / n);
        return h;
    };
    const double h_a = entropy(table.row_sums);
    const double h_b = entropy(table.col_sums);

    // Exact expected mutual information under the hypergeometric model.
    double emi = 0.0;
    for (const double ai : table.row_sums) {
        for (const double bj : table.col_sums) {
            const auto start = static_cast<long>(std::max(1.0, ai + bj - n));
            const auto stop = static_cast<long>(std::min(ai, bj));
            for (long nij = start; nij <= stop; ++nij) {
                const double v = static_cast<double>(nij);
                const double log_p = log_binomial(bj, v) + log_binomial(n - bj, ai - v) -
                                     log_binomial(n, ai);
                emi += std::exp(log_p) * (v / n) * std::log(n * v / (ai * bj));
            }
        }
    }

    const double normalizer = 0.5 * (h_a + h_b) - emi;
    if (std::fabs(normalizer) < 1e-15) {
        // Both labelings constant: identical trivial partitions agree perfectly.
        return h_a == 0.0 && h_b == 0.0 ? 1.0 : 0.0;
    }
    return (mi - emi) / normalizer;
}

double gini_index(const std::vector<std::size_t>& sizes) {
    require(!sizes.empty(), "gini_index: empty size vector");
    const auto k = static_cast<double>(sizes.size());
    double total = 0.0;
    for (const std::size_t s : sizes) total += static_cast<double>(s);
    require(total > 0.0, "gini_index: total size must be positive");
    double diff_sum = 0.0;
    for (const std::size_t a : sizes)
        for (const std::size_t b : sizes)
            diff_sum += std::fabs(static_cast<double>(a) - static_cast<double>(b));
    return diff_sum / (2.0 * k * total);
}

void apply_exclusion_rules(MetricReport& report, const ExclusionConfig& config) {
    report.excluded = false;
    report.exclusion_reasons.clear();
    if (report.unclustered_fraction > config.max_unclustered_fraction)
        report.exclusion_reasons.push_back(
            "unclustered fraction " + format_double(report.unclustered_fraction) + " exceeds " +
            format_double(config.max_unclustered_fraction));
    if (report.n_clusters <= config.min_cluster_count_exclusive)
        report.exclusion_reasons.push_back("cluster count " + std::to_string(report.n_clusters) +
                                           " is at or below " +
                                           std::to_string(config.min_cluster_count_exclusive));
    if (report.n_clusters > config.max_cluster_count)
        report.exclusion_reasons.push_back("cluster count " + std::to_string(report.n_clusters) +
                                           " exceeds " + std::to_string(config.max_cluster_count));
    if (report.n_samples > 0 &&
        static_cast<double>(report.largest_cluster) >
            config.max_dominant_fraction * static_cast<double>(report.n_samples))
        report.exclusion_reasons.push_back(
            "largest cluster holds more than " +
            format_double(100.0 * config.max_dominant_fraction) + "% of samples");
    if (report.calinski_harabasz_degenerate)
        report.exclusion_reasons.push_back("calinski_harabasz degenerate (zero within-cluster scatter)");
    report.excluded = !report.exclusion_reasons.empty();
}

namespace {

// Encodes string labels as dense ints; rows where either side is missing
// (empty external label) are dropped pairwise.
void encode_pairwise(const std::vector<int>& labels, const std::vector<std::string>& external,
                     std::vector<int>& out_labels, std::vector<int>& out_external) {
    std::map<std::string, int> ids;
    for (const auto& v : external)
        if (!v.empty()) ids.emplace(v, 0);
    int next = 0;
    for (auto& [v, id] : ids) id = next++;
    out_labels.clear();
    out_external.clear();
    for (std::size_t i = 0; i < external.size(); ++i) {
        if (external[i].empty()) continue;
        out_labels.push_back(labels[i]);
        out_external.push_back(ids.at(external[i]));
    }
}

}  // namespace

MetricReport build_metric_report(const Matrix& x, const std::vector<int>& labels,
                                 const std::map<std::string, std::vector<std::string>>& label_sets,
                                 const ExclusionConfig& config) {
    check_rows(x, labels, "build_metric_report");
    MetricReport report;
    report.n_samples = labels.size();
    report.n_unclustered = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), -1));
    report.unclustered_fraction =
        report.n_samples > 0
            ? static_cast<double>(report.n_unclustered) / static_cast<double>(report.n_samples)
            : 0.0;
    const auto sizes = cluster_sizes(labels);
    report.n_clusters = static_cast<int>(sizes.size());
    report.largest_cluster = sizes.empty() ? 0 : *std::max_element(sizes.begin(), sizes.end());

    report.silhouette = silhouette_score(x, labels);
    report.davies_bouldin = davies_bouldin_score(x, labels);
    const double chi = calinski_harabasz_score(x, labels);
    if (std::isinf(chi)) {
        report.calinski_harabasz = std::numeric_limits<double>::max();
        report.calinski_harabasz_degenerate = true;
    } else {
        report.calinski_harabasz = chi;
    }
    report.gini = gini_index(sizes);

    for (const auto& [name, external] : label_sets) {
        require(external.size() == labels.size(),
                "build_metric_report: label set '" + name + "' has wrong length");
        std::vector<int> sub_labels, sub_external;
        encode_pairwise(labels, external, sub_labels, sub_external);
        if (sub_labels.size() < 2) continue;  // nothing to align against
        LabelAlignment alignment;
        alignment.adjusted_rand = adjusted_rand_index(sub_labels, sub_external);
        alignment.adjusted_mutual_info_raw = adjusted_mutual_info(sub_labels, sub_external);
        alignment.adjusted_mutual_info = std::max(0.0, alignment.adjusted_mutual_info_raw);
        report.alignments[name] = alignment;
    }

    apply_exclusion_rules(report, config);
    return report;
}

std::string metric_report_to_json(const MetricReport& report) {
    nlohmann::json j;
    j["silhouette"] = report.silhouette;
    j["davies_bouldin"] = report.davies_bouldin;
    j["calinski_harabasz"] = report.calinski_harabasz;
    j["calinski_harabasz_degenerate"] = report.calinski_harabasz_degenerate;
    j["gini"] = report.gini;
    j["n_clusters"] = report.n_clusters;
    j["n_samples"] = report.n_samples;
    j["largest_cluster"] = report.largest_cluster;
    j["n_unclustered"] = report.n_unclustered;
    j["unclustered_fraction"] = report.unclustered_fraction;
    nlohmann::json alignments = nlohmann::json::object();
    for (const auto& [name, alignment] : report.alignments) {
        alignments[name] = {{"adjusted_rand", alignment.adjusted_rand},
                            {"adjusted_mutual_info", alignment.adjusted_mutual_info},
                            {"adjusted_mutual_info_raw", alignment.adjusted_mutual_info_raw}};
    }
    j["alignments"] = alignments;
    j["excluded"] = report.excluded;
    j["exclusion_reasons"] = report.exclusion_reasons;
    return j.dump(2);
}

MetricReport metric_report_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    MetricReport report;
    report.silhouette = j.at("silhouette").get<double>();
    report.davies_bouldin = j.at("davies_bouldin").get<double>();
    report.calinski_harabasz = j.at("calinski_harabasz").get<double>();
    report.calinski_harabasz_degenerate = j.at("calinski_harabasz_degenerate").get<bool>();
    report.gini = j.at("gini").get<double>();
    report.n_clusters = j.at("n_clusters").get<int>();
    report.n_samples = j.at("n_samples").get<std::size_t>();
    report.largest_cluster = j.at("largest_cluster").get<std::size_t>();
    report.n_unclustered = j.at("n_unclustered").get<std::size_t>();
    report.unclustered_fraction = j.at("unclustered_fraction").get<double>();
    for (const auto& [name, a] : j.at("alignments").items()) {
        LabelAlignment alignment;
        alignment.adjusted_rand = a.at("adjusted_rand").get<double>();
        alignment.adjusted_mutual_info = a.at("adjusted_mutual_info").get<double>();
        alignment.adjusted_mutual_info_raw = a.at("adjusted_mutual_info_raw").get<double>();
        report.alignments[name] = alignment;
    }
    report.excluded = j.at("excluded").get<bool>();
    report.exclusion_reasons = j.at("exclusion_reasons").get<std::vector<std::string>>();
    return report;
}

std::string metric_report_csv_header(const MetricReport& report) {
    std::vector<std::string> fields = {"silhouette",      "davies_bouldin", "calinski_harabasz",
                                       "n_clusters",      "largest_cluster", "n_unclustered",
                                       "unclustered_fraction", "gini",      "verdict"};
    for (const auto& [name, alignment] : report.alignments) {
        fields.push_back("ari_" + name);
        fields.push_back("ami_" + name);
    }
    return join_csv_row(fields);
}

std::string metric_report_csv_row(const MetricReport& report) {
    std::vector<std::string> fields = {
        format_double(report.silhouette),
        format_double(report.davies_bouldin),
        format_double(report.calinski_harabasz),
        std::to_string(report.n_clusters),
        std::to_string(report.largest_cluster),
        std::to_string(report.n_unclustered),
        format_double(report.unclustered_fraction),
        format_double(report.gini),
        report.excluded ? "excluded" : "retained",
    };
    for (const auto& [name, alignment] : report.alignments) {
        fields.push_back(format_double(alignment.adjusted_rand));
        fields.push_back(format_double(alignment.adjusted_mutual_info));
    }
    return join_csv_row(fields);
}

}  // namespace rockcluster
