#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rockcluster/common.hpp"
#include "rockcluster/linalg.hpp"

namespace rockcluster {

// Measurement-while-drilling parameters plus the two geometric attributes.
// Enum order is the canonical parameter order used by every feature schema.
enum class ParameterId {
    PenetrNorm,
    PenetrRMS,
    RotaPressNorm,
    RotaPressRMS,
    FeedPressNorm,
    HammerPressNorm,
    WaterflowNorm,
    WaterflowRMS,
    Overburden,
    TunnelWidth,
};

inline constexpr int kParameterCount = 10;
inline constexpr int kMwdParameterCount = 8;

enum class StatKind { Mean, Median, StdDev, Variance, Skewness, Kurtosis };
inline constexpr int kStatCount = 6;

const std::string& to_string(ParameterId id);
const std::string& to_string(StatKind kind);
ParameterId parameter_from_string(const std::string& name);
StatKind stat_from_string(const std::string& name);
bool is_mwd_parameter(ParameterId id);

enum class FeatureSetId { All, Mwd, MwdRock, MwdMedian };
const std::string& to_string(FeatureSetId id);
FeatureSetId feature_set_from_string(const std::string& name);

struct FeatureColumn {
    ParameterId param;
    std::optional<StatKind> stat;  // geometric columns carry no stat

    std::string name() const;
    bool operator==(const FeatureColumn& other) const = default;
};

// Column layout of a feature set: parameter-major (all stats of one parameter
// before the next parameter), geometric attributes last.
const std::vector<FeatureColumn>& feature_schema(FeatureSetId id);

// One blasting round: raw per-parameter readings pooled over the section's
// drillholes, plus the geometric attributes and optional geologist labels.
struct SectionSample {
    std::string tunnel_id;
    std::string section_id;
    double chainage_m = 0.0;
    std::map<ParameterId, std::vector<double>> readings;
    double overburden_m = 0.0;
    double tunnel_width_m = 0.0;
    std::string rock_type;  // empty = unlabeled
    std::string q_class;    // empty = unlabeled
};

struct FeatureVector {
    std::string section_id;
    FeatureSetId schema = FeatureSetId::All;
    std::vector<double> values;
};

// Descriptive statistics behind feature extraction. Spread statistics use the
// n-1 denominator; skewness is the adjusted Fisher-Pearson coefficient and
// kurtosis the bias-corrected excess form. Constant series (and series too
// short for the bias correction) report skewness and kurtosis 0.
namespace stats {
double mean(const std::vector<double>& xs);
double median(std::vector<double> xs);
double variance(const std::vector<double>& xs);
double std_dev(const std::vector<double>& xs);
double skewness(const std::vector<double>& xs);
double kurtosis_excess(const std::vector<double>& xs);
double stat_of(const std::vector<double>& xs, StatKind kind);
}  // namespace stats

FeatureVector extract_features(const SectionSample& section, FeatureSetId schema);

// Selects the target schema's columns out of a wider feature vector; every
// target column must exist in the source schema.
FeatureVector project_feature_set(const FeatureVector& source, FeatureSetId target);

struct FeatureTable;

// Table-level counterpart of project_feature_set: narrows a full-schema table
// to the target columns; a table already in the target schema passes through.
FeatureTable select_feature_set(const FeatureTable& source, FeatureSetId target);

struct IngestReport {
    std::size_t rows_total = 0;
    std::size_t rows_used = 0;
    std::size_t rows_rejected_nonfinite = 0;
    std::vector<std::string> dropped_sections;  // "S07: fewer than 2 readings for PenetrRMS"
};

// Reads the long reading file (tunnel_id,section_id,chainage_m,parameter,value)
// and the section attribute file (section_id,overburden_m,tunnel_width_m,
// rock_type,q_class). Returns sections ordered by (tunnel_id, chainage_m,
// section_id). Malformed rows are hard errors naming the row number;
// non-finite readings are dropped and counted; sections left with fewer than
// two readings for a present parameter are dropped with a reason.
std::vector<SectionSample> ingest_sections(std::istream& long_csv, std::istream& sections_csv,
                                           IngestReport* report = nullptr);

struct FeatureTable {
    FeatureSetId schema = FeatureSetId::All;
    std::vector<std::string> section_ids;
    Matrix values;  // n x d, column order given by feature_schema(schema)
};

FeatureTable to_table(const std::vector<FeatureVector>& features);

// Wide CSV: header "section_id,<column names>", one row per section.
void write_wide_csv(std::ostream& out, const FeatureTable& table);
FeatureTable read_wide_csv(std::istream& in);

}  // namespace rockcluster
