#include "rockcluster/data_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "rockcluster/csv.hpp"

namespace rockcluster {

namespace {

const std::array<std::string, kParameterCount> kParameterNames = {
    "PenetrNorm",     "PenetrRMS",    "RotaPressNorm", "RotaPressRMS", "FeedPressNorm",
    "HammerPressNorm", "WaterflowNorm", "WaterflowRMS",  "Overburden",   "TunnelWidth",
};

const std::array<std::string, kStatCount> kStatNames = {
    "mean", "median", "stdDev", "variance", "skewness", "kurtosis",
};

const std::array<std::string, 4> kFeatureSetNames = {"all", "mwd", "mwd_rock", "mwd_median"};

std::vector<FeatureColumn> make_schema(FeatureSetId id) {
    std::vector<FeatureColumn> columns;
    const bool drop_waterflow = id == FeatureSetId::MwdRock;
    const bool drop_std_dev = id == FeatureSetId::MwdRock;
    const bool median_only = id == FeatureSetId::MwdMedian;
    for (int p = 0; p < kMwdParameterCount; ++p) {
        const auto param = static_cast<ParameterId>(p);
        if (drop_waterflow &&
            (param == ParameterId::WaterflowNorm || param == ParameterId::WaterflowRMS))
            continue;
        for (int s = 0; s < kStatCount; ++s) {
            const auto stat = static_cast<StatKind>(s);
            if (median_only && stat != StatKind::Median) continue;
            if (drop_std_dev && stat == StatKind::StdDev) continue;
            columns.push_back({param, stat});
        }
    }
    if (id == FeatureSetId::All) {
        columns.push_back({ParameterId::Overburden, std::nullopt});
        columns.push_back({ParameterId::TunnelWidth, std::nullopt});
    }
    return columns;
}

}  // namespace

const std::string& to_string(ParameterId id) {
    return kParameterNames[static_cast<int>(id)];
}

const std::string& to_string(StatKind kind) { return kStatNames[static_cast<int>(kind)]; }

ParameterId parameter_from_string(const std::string& name) {
    for (int i = 0; i < kParameterCount; ++i)
        if (kParameterNames[i] == name) return static_cast<ParameterId>(i);
    fail("unknown parameter: " + name);
}

StatKind stat_from_string(const std::string& name) {
    for (int i = 0; i < kStatCount; ++i)
        if (kStatNames[i] == name) return static_cast<StatKind>(i);
    fail("unknown statistic: " + name);
}

bool is_mwd_parameter(ParameterId id) { return static_cast<int>(id) < kMwdParameterCount; }

const std::string& to_string(FeatureSetId id) { return kFeatureSetNames[static_cast<int>(id)]; }

FeatureSetId feature_set_from_string(const std::string& name) {
    for (std::size_t i = 0; i < kFeatureSetNames.size(); ++i)
        if (kFeatureSetNames[i] == name) return static_cast<FeatureSetId>(i);
    fail("unknown feature set: " + name);
}

std::string FeatureColumn::name() const {
    if (!stat.has_value()) return to_string(param);
    return to_string(param) + "_" + to_string(*stat);
}

const std::vector<FeatureColumn>& feature_schema(FeatureSetId id) {
    static const std::vector<FeatureColumn> all = make_schema(FeatureSetId::All);
    static const std::vector<FeatureColumn> mwd = make_schema(FeatureSetId::Mwd);
    static const std::vector<FeatureColumn> mwd_rock = make_schema(FeatureSetId::MwdRock);
    static const std::vector<FeatureColumn> mwd_median = make_schema(FeatureSetId::MwdMedian);
    switch (id) {
        case FeatureSetId::All: return all;
        case FeatureSetId::Mwd: return mwd;
        case FeatureSetId::MwdRock: return mwd_rock;
        case FeatureSetId::MwdMedian: return mwd_median;
    }
    fail("unreachable feature set");
}

namespace stats {

double mean(const std::vector<double>& xs) {
    require(!xs.empty(), "mean: empty series");
    double acc = 0.0;
    for (double x : xs) acc += x;
    return acc / static_cast<double>(xs.size());
}

double median(std::vector<double> xs) {
    require(!xs.empty(), "median: empty series");
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    if (n % 2 == 1) return xs[n / 2];
    return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

namespace {
// Central moment of given order around the series mean.
double central_moment(const std::vector<double>& xs, int order) {
    const double mu = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += std::pow(x - mu, order);
    return acc / static_cast<double>(xs.size());
}
}  // namespace

double variance(const std::vector<double>& xs) {
    require(xs.size() >= 2, "variance: needs at least 2 readings");
    const double mu = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - mu) * (x - mu);
    return acc / static_cast<double>(xs.size() - 1);
}

double std_dev(const std::vector<double>& xs) { return std::sqrt(variance(xs)); }

double skewness(const std::vector<double>& xs) {
    require(xs.size() >= 2, "skewness: needs at least 2 readings");
    const double n = static_cast<double>(xs.size());
    if (xs.size() < 3) return 0.0;  // bias correction undefined below n=3
    const double m2 = central_moment(xs, 2);
    if (m2 == 0.0) return 0.0;  // constant series
    const double m3 = central_moment(xs, 3);
    const double g1 = m3 / std::pow(m2, 1.5);
    return g1 * std::sqrt(n * (n - 1.0)) / (n - 2.0);
}

double kurtosis_excess(const std::vector<double>& xs) {
    require(xs.size() >= 2, "kurtosis: needs at least 2 readings");
    const double n = static_cast<double>(xs.size());
    if (xs.size() < 4) return 0.0;  // bias correction undefined below n=4
    const double m2 = central_moment(xs, 2);
    if (m2 == 0.0) return 0.0;  // constant series
    const double m4 = central_moment(xs, 4);
    const double g2 = m4 / (m2 * m2) - 3.0;
    return ((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0));
}

double stat_of(const std::vector<double>& xs, StatKind kind) {
    switch (kind) {
        case StatKind::Mean: return mean(xs);
        case StatKind::Median: return median(xs);
        case StatKind::StdDev: return std_dev(xs);
        case StatKind::Variance: return variance(xs);
        case StatKind::Skewness: return skewness(xs);
        case StatKind::Kurtosis: return kurtosis_excess(xs);
    }
    fail("unreachable stat kind");
}

}  // namespace stats

FeatureVector extract_features(const SectionSample& section, FeatureSetId schema_id) {
    const auto& schema = feature_schema(schema_id);
    FeatureVector out;
    out.section_id = section.section_id;
    out.schema = schema_id;
    out.values.reserve(schema.size());
    for (const auto& column : schema) {
        if (!column.stat.has_value()) {
            out.values.push_back(column.param == ParameterId::Overburden ? section.overburden_m
                                                                         : section.tunnel_width_m);
            continue;
        }
        const auto it = section.readings.find(column.param);
        if (it == section.readings.end())
            fail("section " + section.section_id + ": missing readings for " +
                 to_string(column.param));
        if (it->second.size() < 2)
            fail("section " + section.section_id + ": fewer than 2 readings for " +
                 to_string(column.param));
        out.values.push_back(stats::stat_of(it->second, *column.stat));
    }
    return out;
}

FeatureVector project_feature_set(const FeatureVector& source, FeatureSetId target) {
    const auto& source_schema = feature_schema(source.schema);
    require(source.values.size() == source_schema.size(),
            "project_feature_set: value count does not match schema " + to_string(source.schema));
    const auto& target_schema = feature_schema(target);
    FeatureVector out;
    out.section_id = source.section_id;
    out.schema = target;
    out.values.reserve(target_schema.size());
    for (const auto& column : target_schema) {
        const auto it = std::find(source_schema.begin(), source_schema.end(), column);
        if (it == source_schema.end())
            fail("project_feature_set: column " + column.name() + " not present in schema " +
                 to_string(source.schema));
        out.values.push_back(source.values[static_cast<std::size_t>(it - source_schema.begin())]);
    }
    return out;
}

FeatureTable select_feature_set(const FeatureTable& source, FeatureSetId target) {
    if (source.schema == target) return source;
    const auto& from = feature_schema(source.schema);
    const auto& to = feature_schema(target);
    std::vector<Eigen::Index> mapping;
    mapping.reserve(to.size());
    for (const auto& column : to) {
        const auto it = std::find(from.begin(), from.end(), column);
        require(it != from.end(), "select_feature_set: column " + column.name() +
                                      " not present in schema " + to_string(source.schema));
        mapping.push_back(static_cast<Eigen::Index>(it - from.begin()));
    }
    FeatureTable result;
    result.schema = target;
    result.section_ids = source.section_ids;
    result.values.resize(source.values.rows(), static_cast<Eigen::Index>(mapping.size()));
    for (Eigen::Index c = 0; c < result.values.cols(); ++c)
        result.values.col(c) = source.values.col(mapping[static_cast<std::size_t>(c)]);
    return result;
}

namespace {

void check_header(const std::vector<std::string>& fields, const std::vector<std::string>& expected,
                  const std::string& file) {
    if (fields != expected) {
        std::string want;
        for (std::size_t i = 0; i < expected.size(); ++i) {
            if (i > 0) want.push_back(',');
            want += expected[i];
        }
        fail(file + ": expected header '" + want + "'");
    }
}

struct SectionAttributes {
    double overburden_m = 0.0;
    double tunnel_width_m = 0.0;
    std::string rock_type;
    std::string q_class;
};

}  // namespace

std::vector<SectionSample> ingest_sections(std::istream& long_csv, std::istream& sections_csv,
                                           IngestReport* report) {
    IngestReport local;
    IngestReport& rep = report != nullptr ? *report : local;
    rep = IngestReport{};

    std::string line;
    require(read_csv_line(sections_csv, line), "section attribute file: empty");
    check_header(split_csv_line(line),
                 {"section_id", "overburden_m", "tunnel_width_m", "rock_type", "q_class"},
                 "section attribute file");
    std::unordered_map<std::string, SectionAttributes> attributes;
    std::size_t side_row = 1;
    while (read_csv_line(sections_csv, line)) {
        ++side_row;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 5)
            fail("section attribute file row " + std::to_string(side_row) + ": expected 5 fields");
        SectionAttributes attr;
        attr.overburden_m = parse_double_or_fail(
            fields[1], "section attribute file row " + std::to_string(side_row));
        attr.tunnel_width_m = parse_double_or_fail(
            fields[2], "section attribute file row " + std::to_string(side_row));
        if (!(attr.overburden_m >= 0.0))
            fail("section " + fields[0] + ": overburden_m must be >= 0");
        if (!(attr.tunnel_width_m > 0.0))
            fail("section " + fields[0] + ": tunnel_width_m must be > 0");
        attr.rock_type = fields[3];
        attr.q_class = fields[4];
        if (!attributes.emplace(fields[0], std::move(attr)).second)
            fail("section attribute file row " + std::to_string(side_row) +
                 ": duplicate section_id " + fields[0]);
    }

    require(read_csv_line(long_csv, line), "reading file: empty");
    check_header(split_csv_line(line), {"tunnel_id", "section_id", "chainage_m", "parameter", "value"},
                 "reading file");

    std::unordered_map<std::string, SectionSample> sections;
    std::vector<std::string> order;  // first-seen order, re-sorted below
    std::size_t row = 1;
    while (read_csv_line(long_csv, line)) {
        ++row;
        if (line.empty()) continue;
        ++rep.rows_total;
        const auto fields = split_csv_line(line);
        if (fields.size() != 5)
            fail("reading file row " + std::to_string(row) + ": expected 5 fields");
        const std::string& tunnel_id = fields[0];
        const std::string& section_id = fields[1];
        const double chainage =
            parse_double_or_fail(fields[2], "reading file row " + std::to_string(row));
        const ParameterId param = [&] {
            try {
                return parameter_from_string(fields[3]);
            } catch (const Error&) {
                fail("reading file row " + std::to_string(row) + ": unknown parameter '" +
                     fields[3] + "'");
            }
        }();
        if (!is_mwd_parameter(param))
            fail("reading file row " + std::to_string(row) + ": parameter '" + fields[3] +
                 "' is a section attribute, not a drilling reading");
        const double value =
            parse_double_or_fail(fields[4], "reading file row " + std::to_string(row));
        if (!std::isfinite(value)) {
            ++rep.rows_rejected_nonfinite;
            continue;
        }

        auto it = sections.find(section_id);
        if (it == sections.end()) {
            const auto attr_it = attributes.find(section_id);
            if (attr_it == attributes.end())
                fail("reading file row " + std::to_string(row) + ": section " + section_id +
                     " missing from the section attribute file");
            SectionSample section;
            section.tunnel_id = tunnel_id;
            section.section_id = section_id;
            section.chainage_m = chainage;
            section.overburden_m = attr_it->second.overburden_m;
            section.tunnel_width_m = attr_it->second.tunnel_width_m;
            section.rock_type = attr_it->second.rock_type;
            section.q_class = attr_it->second.q_class;
            it = sections.emplace(section_id, std::move(section)).first;
            order.push_back(section_id);
        } else {
            if (it->second.tunnel_id != tunnel_id)
                fail("reading file row " + std::to_string(row) + ": section " + section_id +
                     " appears under two tunnels");
            if (it->second.chainage_m != chainage)
                fail("reading file row " + std::to_string(row) + ": section " + section_id +
                     " appears with two chainages");
        }
        it->second.readings[param].push_back(value);
        ++rep.rows_used;
    }

    std::vector<SectionSample> out;
    out.reserve(order.size());
    for (const auto& id : order) {
        SectionSample& section = sections.at(id);
        std::string reason;
        for (const auto& [param, values] : section.readings) {
            if (values.size() < 2) {
                reason = id + ": fewer than 2 readings for " + to_string(param);
                break;
            }
        }
        if (!reason.empty()) {
            rep.dropped_sections.push_back(std::move(reason));
            continue;
        }
        out.push_back(std::move(section));
    }
    std::sort(out.begin(), out.end(), [](const SectionSample& a, const SectionSample& b) {
        if (a.tunnel_id != b.tunnel_id) return a.tunnel_id < b.tunnel_id;
        if (a.chainage_m != b.chainage_m) return a.chainage_m < b.chainage_m;
        return a.section_id < b.section_id;
    });
    return out;
}

FeatureTable to_table(const std::vector<FeatureVector>& features) {
    require(!features.empty(), "to_table: no feature vectors");
    FeatureTable table;
    table.schema = features.front().schema;
    const auto& schema = feature_schema(table.schema);
    table.section_ids.reserve(features.size());
    table.values.resize(static_cast<Eigen::Index>(features.size()),
                        static_cast<Eigen::Index>(schema.size()));
    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto& fv = features[i];
        require(fv.schema == table.schema, "to_table: mixed feature schemas");
        require(fv.values.size() == schema.size(),
                "to_table: value count does not match schema for section " + fv.section_id);
        table.section_ids.push_back(fv.section_id);
        for (std::size_t j = 0; j < fv.values.size(); ++j)
            table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                fv.values[j];
    }
    return table;
}

void write_wide_csv(std::ostream& out, const FeatureTable& table) {
    const auto& schema = feature_schema(table.schema);
    require(table.values.rows() == static_cast<Eigen::Index>(table.section_ids.size()),
            "write_wide_csv: row count mismatch");
    require(table.values.cols() == static_cast<Eigen::Index>(schema.size()),
            "write_wide_csv: column count mismatch");
    std::vector<std::string> header;
    header.reserve(schema.size() + 1);
    header.emplace_back("section_id");
    for (const auto& column : schema) header.push_back(column.name());
    out << join_csv_row(header);
    std::vector<std::string> fields;
    for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
        fields.clear();
        fields.push_back(table.section_ids[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < table.values.cols(); ++j)
            fields.push_back(format_double(table.values(i, j)));
        out << join_csv_row(fields);
    }
}

FeatureTable read_wide_csv(std::istream& in) {
    std::string line;
    require(read_csv_line(in, line), "wide feature file: empty");
    const auto header = split_csv_line(line);
    require(!header.empty() && header[0] == "section_id",
            "wide feature file: first column must be section_id");

    FeatureSetId schema_id = FeatureSetId::All;
    bool matched = false;
    for (const auto id :
         {FeatureSetId::All, FeatureSetId::Mwd, FeatureSetId::MwdRock, FeatureSetId::MwdMedian}) {
        const auto& schema = feature_schema(id);
        if (header.size() != schema.size() + 1) continue;
        bool same = true;
        for (std::size_t j = 0; j < schema.size(); ++j) {
            if (header[j + 1] != schema[j].name()) {
                same = false;
                break;
            }
        }
        if (same) {
            schema_id = id;
            matched = true;
            break;
        }
    }
    require(matched, "wide feature file: header does not match any known feature schema");

    const auto& schema = feature_schema(schema_id);
    std::vector<std::string> ids;
    std::vector<double> values;
    std::size_t row = 1;
    while (read_csv_line(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != schema.size() + 1)
            fail("wide feature file row " + std::to_string(row) + ": expected " +
                 std::to_string(schema.size() + 1) + " fields");
        ids.push_back(fields[0]);
        for (std::size_t j = 1; j < fields.size(); ++j) {
            const double v =
                parse_double_or_fail(fields[j], "wide feature file row " + std::to_string(row));
            if (!std::isfinite(v))
                fail("wide feature file row " + std::to_string(row) + ": non-finite value");
            values.push_back(v);
        }
    }
    require(!ids.empty(), "wide feature file: no data rows");

    FeatureTable table;
    table.schema = schema_id;
    table.section_ids = std::move(ids);
    table.values.resize(static_cast<Eigen::Index>(table.section_ids.size()),
                        static_cast<Eigen::Index>(schema.size()));
    for (Eigen::Index i = 0; i < table.values.rows(); ++i)
        for (Eigen::Index j = 0; j < table.values.cols(); ++j)
            table.values(i, j) = values[static_cast<std::size_t>(i) * schema.size() +
                                        static_cast<std::size_t>(j)];
    return table;
}

}  // namespace rockcluster
