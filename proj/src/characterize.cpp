#include "rockcluster/characterize.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "rockcluster/csv.hpp"

namespace rockcluster {

namespace {

int column_index(const FeatureTable& table, const FeatureColumn& column) {
    const auto& schema = feature_schema(table.schema);
    for (std::size_t i = 0; i < schema.size(); ++i)
        if (schema[i] == column) return static_cast<int>(i);
    require(false, "feature set " + to_string(table.schema) + " lacks column " + column.name());
    return -1;
}

double column_median(const FeatureTable& table, const std::vector<std::size_t>& rows, int col) {
    std::vector<double> values;
    values.reserve(rows.size());
    for (std::size_t r : rows) values.push_back(table.values(static_cast<Eigen::Index>(r), col));
    return stats::median(std::move(values));
}

std::vector<int> sorted_cluster_ids(const std::vector<int>& labels) {
    std::set<int> ids(labels.begin(), labels.end());
    return {ids.begin(), ids.end()};
}

}  // namespace

std::vector<ClusterProfile> profile_clusters(
    const FeatureTable& features, const std::vector<int>& labels,
    const std::map<std::string, std::vector<std::string>>& label_sets, const FeatureTable* raw) {
    const auto n = static_cast<std::size_t>(features.values.rows());
    require(labels.size() == n, "label count does not match the feature rows");
    const int feed_col = column_index(features, {ParameterId::FeedPressNorm, StatKind::Mean});
    const int penetr_col = column_index(features, {ParameterId::PenetrNorm, StatKind::Mean});
    const int rota_col = column_index(features, {ParameterId::RotaPressNorm, StatKind::Mean});
    int feed_raw = -1, penetr_raw = -1, rota_raw = -1;
    if (raw != nullptr) {
        require(static_cast<std::size_t>(raw->values.rows()) == n,
                "raw feature rows do not match the clustered rows");
        feed_raw = column_index(*raw, {ParameterId::FeedPressNorm, StatKind::Mean});
        penetr_raw = column_index(*raw, {ParameterId::PenetrNorm, StatKind::Mean});
        rota_raw = column_index(*raw, {ParameterId::RotaPressNorm, StatKind::Mean});
    }
    for (const auto& [set_name, set_labels] : label_sets)
        require(set_labels.size() == n,
                "label set " + set_name + " does not match the feature rows");

    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < n; ++i) members[labels[i]].push_back(i);

    std::vector<ClusterProfile> profiles;
    for (const auto& [cluster_id, rows] : members) {
        ClusterProfile profile;
        profile.cluster_id = cluster_id;
        profile.n_samples = rows.size();
        profile.feed_press_median = column_median(features, rows, feed_col);
        profile.penetr_median = column_median(features, rows, penetr_col);
        profile.rota_press_median = column_median(features, rows, rota_col);
        if (raw != nullptr) {
            profile.feed_press_median_raw = column_median(*raw, rows, feed_raw);
            profile.penetr_median_raw = column_median(*raw, rows, penetr_raw);
            profile.rota_press_median_raw = column_median(*raw, rows, rota_raw);
        }
        for (const auto& [set_name, set_labels] : label_sets) {
            std::map<std::string, std::size_t> counts;
            std::size_t voters = 0;
            for (std::size_t r : rows) {
                const auto& label = set_labels[r];
                if (label.empty()) continue;
                ++counts[label];
                ++voters;
            }
            if (voters == 0) continue;
            // ascending map order makes the smaller string win ties
            const std::string* best = nullptr;
            std::size_t best_count = 0;
            for (const auto& [label, count] : counts)
                if (count > best_count) {
                    best = &label;
                    best_count = count;
                }
            profile.votes[set_name] = {
                *best, static_cast<double>(best_count) / static_cast<double>(voters)};
        }
        profiles.push_back(std::move(profile));
    }
    std::sort(profiles.begin(), profiles.end(), [](const auto& a, const auto& b) {
        if (a.penetr_median != b.penetr_median) return a.penetr_median < b.penetr_median;
        return a.cluster_id < b.cluster_id;
    });
    return profiles;
}

std::string profiles_to_csv(const std::vector<ClusterProfile>& profiles) {
    bool with_raw = false;
    std::set<std::string> set_names;
    for (const auto& profile : profiles) {
        with_raw = with_raw || profile.feed_press_median_raw.has_value();
        for (const auto& [name, vote] : profile.votes) set_names.insert(name);
    }
    std::string out = "cluster,n_samples,feed_press_norm_median,penetr_norm_median,"
                      "rota_press_norm_median";
    if (with_raw)
        out += ",feed_press_norm_median_raw,penetr_norm_median_raw,rota_press_norm_median_raw";
    for (const auto& name : set_names) out += "," + name + "_label," + name + "_fraction";
    out += "\n";
    for (const auto& profile : profiles) {
        out += std::to_string(profile.cluster_id);
        out += "," + std::to_string(profile.n_samples);
        out += "," + format_double(profile.feed_press_median);
        out += "," + format_double(profile.penetr_median);
        out += "," + format_double(profile.rota_press_median);
        if (with_raw) {
            out += "," + format_double(profile.feed_press_median_raw.value_or(0.0));
            out += "," + format_double(profile.penetr_median_raw.value_or(0.0));
            out += "," + format_double(profile.rota_press_median_raw.value_or(0.0));
        }
        for (const auto& name : set_names) {
            const auto it = profile.votes.find(name);
            out += ",";
            if (it != profile.votes.end()) {
                append_csv_field(out, it->second.label);
                out += "," + format_double(it->second.fraction);
            } else {
                out += ",";
            }
        }
        out += "\n";
    }
    return out;
}

std::vector<CdfSeries> feature_cdf(const FeatureTable& features, const std::vector<int>& labels,
                                   const std::string& feature_name) {
    const auto n = static_cast<std::size_t>(features.values.rows());
    require(labels.size() == n, "label count does not match the feature rows");
    const auto& schema = feature_schema(features.schema);
    int col = -1;
    for (std::size_t i = 0; i < schema.size(); ++i)
        if (schema[i].name() == feature_name) col = static_cast<int>(i);
    require(col >= 0, "feature set " + to_string(features.schema) + " lacks column " +
                          feature_name);

    std::vector<CdfSeries> series;
    for (int cluster_id : sorted_cluster_ids(labels)) {
        std::vector<double> values;
        for (std::size_t i = 0; i < n; ++i)
            if (labels[i] == cluster_id)
                values.push_back(features.values(static_cast<Eigen::Index>(i), col));
        std::sort(values.begin(), values.end());
        CdfSeries cdf;
        cdf.cluster_id = cluster_id;
        const auto total = static_cast<double>(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
            cdf.points.emplace_back(values[i], static_cast<double>(i + 1) / total);
        }
        series.push_back(std::move(cdf));
    }
    return series;
}

std::string cdf_to_csv(const std::vector<CdfSeries>& series, const std::string& feature_name) {
    std::string out = "cluster,feature,value,quantile\n";
    for (const auto& cdf : series)
        for (const auto& [value, quantile] : cdf.points) {
            out += std::to_string(cdf.cluster_id);
            out += ",";
            append_csv_field(out, feature_name);
            out += "," + format_double(value) + "," + format_double(quantile) + "\n";
        }
    return out;
}

std::string key_feature_cdf_csv(const FeatureTable& features, const std::vector<int>& labels) {
    const std::vector<FeatureColumn> keys{{ParameterId::PenetrNorm, StatKind::Mean},
                                          {ParameterId::FeedPressNorm, StatKind::Mean},
                                          {ParameterId::RotaPressNorm, StatKind::Mean}};
    std::string out = "cluster,feature,value,quantile\n";
    for (const auto& key : keys) {
        const auto series = feature_cdf(features, labels, key.name());
        const auto block = cdf_to_csv(series, key.name());
        out += block.substr(block.find('\n') + 1);  // skip the block's header
    }
    return out;
}

AlignmentReport alignment_report(
    const std::vector<int>& assignment,
    const std::map<std::string, std::vector<std::string>>& label_sets) {
    AlignmentReport report;
    for (const auto& [set_name, set_labels] : label_sets) {
        require(set_labels.size() == assignment.size(),
                "label set " + set_name + " does not match the assignment length");
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < set_labels.size(); ++i)
            if (!set_labels[i].empty()) rows.push_back(i);
        if (rows.empty()) continue;

        std::set<std::string> distinct;
        for (std::size_t r : rows) distinct.insert(set_labels[r]);
        std::map<std::string, int> code;
        ContingencyTable table;
        for (const auto& label : distinct) {
            code[label] = static_cast<int>(table.labels.size());
            table.labels.push_back(label);
        }
        std::vector<int> clusters, encoded;
        clusters.reserve(rows.size());
        encoded.reserve(rows.size());
        std::set<int> cluster_ids;
        for (std::size_t r : rows) {
            clusters.push_back(assignment[r]);
            encoded.push_back(code[set_labels[r]]);
            cluster_ids.insert(assignment[r]);
        }
        table.cluster_ids.assign(cluster_ids.begin(), cluster_ids.end());
        table.counts.assign(table.cluster_ids.size(),
                            std::vector<std::size_t>(table.labels.size(), 0));
        std::map<int, std::size_t> row_of;
        for (std::size_t r = 0; r < table.cluster_ids.size(); ++r)
            row_of[table.cluster_ids[r]] = r;
        for (std::size_t i = 0; i < clusters.size(); ++i)
            ++table.counts[row_of[clusters[i]]][static_cast<std::size_t>(encoded[i])];

        LabelAlignment alignment;
        alignment.adjusted_rand = adjusted_rand_index(clusters, encoded);
        alignment.adjusted_mutual_info_raw = adjusted_mutual_info(clusters, encoded);
        alignment.adjusted_mutual_info = std::max(0.0, alignment.adjusted_mutual_info_raw);
        report.alignments[set_name] = alignment;
        report.tables[set_name] = std::move(table);
    }
    return report;
}

std::string contingency_to_csv(const ContingencyTable& table) {
    std::string out = "cluster";
    for (const auto& label : table.labels) {
        out += ",";
        append_csv_field(out, label);
    }
    out += "\n";
    for (std::size_t r = 0; r < table.cluster_ids.size(); ++r) {
        out += std::to_string(table.cluster_ids[r]);
        for (std::size_t c = 0; c < table.labels.size(); ++c)
            out += "," + std::to_string(table.counts[r][c]);
        out += "\n";
    }
    return out;
}

}  // namespace rockcluster
