#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rockcluster/common.hpp"

namespace rockcluster {

// ---------------------------------------------------------------- search space

enum class DimKind { Real, Integer, Categorical };

struct Dimension {
    std::string name;
    DimKind kind = DimKind::Real;
    double lo = 0.0, hi = 0.0;         // numeric bounds, inclusive for integers
    bool log_scale = false;            // real dims only; requires lo > 0
    std::vector<std::string> choices;  // categorical dims only

    static Dimension real(std::string name, double lo, double hi, bool log_scale = false);
    static Dimension integer(std::string name, long long lo, long long hi);
    static Dimension categorical(std::string name, std::vector<std::string> choices);
};

struct SearchSpace {
    std::vector<Dimension> dims;

    void validate() const;  // throws on bad bounds, empty choices, duplicate names
    const Dimension* find(const std::string& name) const;

    // Canonical tuning space for one pipeline: optional scaler choice, the
    // reducer's dimensions (none | pca | umap), and the clusterer's
    // (kmeans | agglomerative | hdbscan).
    static SearchSpace pipeline_space(const std::string& reducer, const std::string& clusterer,
                                      bool include_scaler = true);
};

// Parameter assignments carry the native type per dimension: real -> double,
// integer -> long long, categorical -> the chosen label.
using ParamValue = std::variant<double, long long, std::string>;
using Assignment = std::map<std::string, ParamValue>;

double as_real(const ParamValue& v);
long long as_integer(const ParamValue& v);
const std::string& as_label(const ParamValue& v);

// -------------------------------------------------------------------- trials

enum class Direction { Minimize, Maximize };

struct Trial {
    int trial_id = 0;
    Assignment params;
    std::optional<std::vector<double>> objectives;  // absent once failed
    bool complete() const { return objectives.has_value(); }
};

struct OptimizerParams {
    // Objective orientation; defaults to the clustering study triple
    // (silhouette up, davies-bouldin down, calinski-harabasz up).
    std::vector<Direction> directions{Direction::Maximize, Direction::Minimize,
                                      Direction::Maximize};
    double gamma = 0.10;    // fraction of completed trials treated as "good"
    int n_candidates = 24;  // draws from the good-density per suggestion
    int n_startup = 10;     // uniform suggestions until this many completions
};

// --------------------------------------------------------- front computations

// Fronts of indices into `objectives`: front 0 is the nondominated set, front
// r the nondominated set once fronts < r are removed.
std::vector<std::vector<int>> nondominated_sort(const std::vector<std::vector<double>>& objectives,
                                                const std::vector<Direction>& directions);

// Exact dominated measure between front and reference (orientation given by
// `directions`, both arguments in raw orientation). Supports 1-3 objectives.
double hypervolume(const std::vector<std::vector<double>>& front,
                   const std::vector<double>& reference,
                   const std::vector<Direction>& directions);

// Greedy hypervolume subset selection: k picks maximizing marginal gain,
// ties resolved toward the lower trial id. Returns indices into `front`.
std::vector<int> hssp_select(const std::vector<std::vector<double>>& front,
                             const std::vector<int>& trial_ids, int k,
                             const std::vector<double>& reference,
                             const std::vector<Direction>& directions);

// Worst observed value per objective plus 10% of the observed span, in raw
// orientation (degenerate spans padded so every point stays strictly inside).
std::vector<double> study_reference_point(const std::vector<std::vector<double>>& objectives,
                                          const std::vector<Direction>& directions);

// ----------------------------------------------------------------- suggestion

// Uniform drawing until n_startup completions, then the density-ratio pick:
// completed trials split into good/bad by nondomination rank (boundary rank
// ordered by hypervolume contribution), per-dimension Parzen estimators
// fitted to each side, n_candidates drawn from the good side, and the
// candidate maximizing l(x)/g(x) returned.
Assignment suggest(const std::vector<Trial>& history, const SearchSpace& space,
                   const OptimizerParams& params, std::uint64_t seed);

// -------------------------------------------------------------------- studies

struct ParetoFront {
    std::vector<Trial> members;     // nondominated completed trials, by trial_id
    std::vector<double> reference;  // raw orientation
    double hypervolume = 0.0;
};

struct FrontSnapshot {
    int after_trial = 0;          // front state once this many trials finished
    std::vector<int> member_ids;  // ascending trial ids
    double hypervolume = 0.0;     // measured against the final reference point
};

struct StudyResult {
    std::vector<Trial> trials;
    ParetoFront front;
    std::vector<FrontSnapshot> snapshots;  // one per executed trial
};

// Returns the objective vector for an assignment; signal failure by throwing
// or by returning an empty vector.
using Evaluator = std::function<std::vector<double>(const Assignment&)>;

StudyResult run_study(const Evaluator& evaluate, const SearchSpace& space, int n_trials,
                      const OptimizerParams& params, std::uint64_t seed);

// Bounded-parallel variant: up to max_in_flight evaluations run concurrently,
// each suggested against the latest committed results. Completion order
// depends on scheduling, so parallel studies are not reproducible;
// max_in_flight <= 1 falls back to the serial, reproducible path. Snapshots
// are reconstructed in trial-id order after the fact.
StudyResult run_study_parallel(const Evaluator& evaluate, const SearchSpace& space, int n_trials,
                               const OptimizerParams& params, std::uint64_t seed,
                               int max_in_flight);

// Front member with the best silhouette; ties broken by higher
// calinski-harabasz, then lower trial id.
const Trial& pick_final(const ParetoFront& front);

// ---------------------------------------------------------------- persistence

std::string trial_to_json_line(const Trial& trial);
Trial trial_from_json_line(const std::string& line);
void write_study_jsonl(const std::string& path, const std::vector<Trial>& trials);
std::vector<Trial> read_study_jsonl(const std::string& path);
std::string front_to_json(const ParetoFront& front);

// Scatter export: one row per completed trial with its objectives and a
// front-membership flag.
void write_study_csv(const std::string& path, const std::vector<Trial>& trials,
                     const ParetoFront& front);

}  // namespace rockcluster
