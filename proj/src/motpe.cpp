#include "rockcluster/motpe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rockcluster/csv.hpp"
#include "rockcluster/rng.hpp"

namespace rockcluster {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kLogSqrt2Pi = 0.9189385332046727;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

// Acklam's rational approximation to the standard normal quantile, sharpened
// by one Halley step against erfc.
double normal_quantile(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    p = std::clamp(p, 1e-300, 1.0 - 1e-16);
    double x;
    if (p < 0.02425) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - 0.02425) {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double err = normal_cdf(x) - p;
    const double u = err * std::exp(kLogSqrt2Pi + 0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

double oriented(double value, Direction dir) {
    return dir == Direction::Maximize ? -value : value;
}

std::vector<double> orient_point(const std::vector<double>& p,
                                 const std::vector<Direction>& dirs) {
    require(p.size() == dirs.size(), "objective vector length does not match directions");
    std::vector<double> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = oriented(p[i], dirs[i]);
    return out;
}

bool dominates_oriented(const std::vector<double>& p, const std::vector<double>& q) {
    bool strict = false;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > q[i]) return false;
        if (p[i] < q[i]) strict = true;
    }
    return strict;
}

// Staircase sweep for a 2-D minimization front against (rx, ry).
double dominated_area_2d(std::vector<std::pair<double, double>> pts, double rx, double ry) {
    std::sort(pts.begin(), pts.end());
    double area = 0.0, y_prev = ry;
    for (const auto& [x, y] : pts) {
        if (y >= y_prev) continue;
        area += (rx - x) * (y_prev - y);
        y_prev = y;
    }
    return area;
}

double hypervolume_oriented(const std::vector<std::vector<double>>& pts,
                            const std::vector<double>& ref) {
    const std::size_t dim = ref.size();
    if (pts.empty()) return 0.0;
    if (dim == 1) {
        double best = ref[0];
        for (const auto& p : pts) best = std::min(best, p[0]);
        return ref[0] - best;
    }
    if (dim == 2) {
        std::vector<std::pair<double, double>> flat;
        flat.reserve(pts.size());
        for (const auto& p : pts) flat.emplace_back(p[0], p[1]);
        return dominated_area_2d(std::move(flat), ref[0], ref[1]);
    }
    // three objectives: sweep slabs of the third coordinate, each slab
    // weighting the 2-D area of every point already introduced
    std::vector<double> levels;
    levels.reserve(pts.size());
    for (const auto& p : pts) levels.push_back(p[2]);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    double total = 0.0;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const double z0 = levels[i];
        const double z1 = i + 1 < levels.size() ? levels[i + 1] : ref[2];
        if (z1 <= z0) continue;
        std::vector<std::pair<double, double>> slab;
        for (const auto& p : pts)
            if (p[2] <= z0) slab.emplace_back(p[0], p[1]);
        total += dominated_area_2d(std::move(slab), ref[0], ref[1]) * (z1 - z0);
    }
    return total;
}

// ------------------------------------------------------------------- sampling

Assignment uniform_sample(const SearchSpace& space, Rng& rng) {
    Assignment out;
    for (const auto& dim : space.dims) {
        switch (dim.kind) {
            case DimKind::Real:
                if (dim.log_scale)
                    out[dim.name] = std::clamp(
                        std::exp(rng.uniform(std::log(dim.lo), std::log(dim.hi))), dim.lo,
                        dim.hi);
                else
                    out[dim.name] = rng.uniform(dim.lo, dim.hi);
                break;
            case DimKind::Integer: {
                const auto span = static_cast<std::size_t>(dim.hi - dim.lo) + 1;
                out[dim.name] = static_cast<long long>(dim.lo) +
                                static_cast<long long>(rng.index(span));
                break;
            }
            case DimKind::Categorical:
                out[dim.name] = dim.choices[rng.index(dim.choices.size())];
                break;
        }
    }
    return out;
}

// Mixture of per-observation truncated Gaussians over the (possibly
// log-transformed) dimension interval.
struct NumericParzen {
    double lo = 0.0, hi = 0.0;
    std::vector<double> mu;
    double width = 1.0;
    double cdf_lo = 0.0, cdf_hi = 1.0;  // per-component truncation masses

    NumericParzen(std::vector<double> obs, double lo_bound, double hi_bound)
        : lo(lo_bound), hi(hi_bound), mu(std::move(obs)) {
        const double range = hi - lo;
        const auto n = static_cast<double>(mu.size());
        double mean = 0.0;
        for (double v : mu) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : mu) var += (v - mean) * (v - mean);
        var /= n;
        const double silverman = 1.06 * std::sqrt(var) * std::pow(n, -0.2);
        width = std::max({silverman, range / std::max(1.0, n), 0.01 * range});
    }

    double sample(Rng& rng) const {
        const std::size_t c = rng.index(mu.size());
        const double fa = normal_cdf((lo - mu[c]) / width);
        const double fb = normal_cdf((hi - mu[c]) / width);
        const double u = rng.uniform(fa, fb);
        return std::clamp(mu[c] + width * normal_quantile(u), lo, hi);
    }

    double log_pdf(double x) const {
        // log-sum-exp over components, each renormalized to the interval
        double peak = -std::numeric_limits<double>::infinity();
        std::vector<double> terms(mu.size());
        for (std::size_t c = 0; c < mu.size(); ++c) {
            const double z = (x - mu[c]) / width;
            const double mass =
                normal_cdf((hi - mu[c]) / width) - normal_cdf((lo - mu[c]) / width);
            terms[c] = -0.5 * z * z - std::log(width) - kLogSqrt2Pi -
                       std::log(std::max(mass, 1e-300));
            peak = std::max(peak, terms[c]);
        }
        double sum = 0.0;
        for (double t : terms) sum += std::exp(t - peak);
        return peak + std::log(sum) - std::log(static_cast<double>(mu.size()));
    }
};

struct CategoricalParzen {
    std::vector<double> weights;  // add-one smoothed frequencies

    CategoricalParzen(const std::vector<int>& counts, int total) {
        const auto k = static_cast<double>(counts.size());
        weights.resize(counts.size());
        for (std::size_t c = 0; c < counts.size(); ++c)
            weights[c] = (counts[c] + 1.0) / (total + k);
    }

    std::size_t sample(Rng& rng) const {
        const double u = rng.uniform(0.0, 1.0);
        double cumulative = 0.0;
        for (std::size_t c = 0; c < weights.size(); ++c) {
            cumulative += weights[c];
            if (u < cumulative) return c;
        }
        return weights.size() - 1;
    }

    double log_pmf(std::size_t c) const { return std::log(weights[c]); }
};

// Fit-space value of one dimension in an assignment (log dims in log space).
double fit_space_value(const Dimension& dim, const ParamValue& v) {
    if (dim.kind == DimKind::Integer) return static_cast<double>(std::get<long long>(v));
    const double x = std::get<double>(v);
    return dim.log_scale ? std::log(x) : x;
}

struct DimensionModel {
    const Dimension* dim;
    std::optional<NumericParzen> numeric_l, numeric_g;
    std::optional<CategoricalParzen> cat_l, cat_g;
};

}  // namespace

// ---------------------------------------------------------------- dimensions

Dimension Dimension::real(std::string name, double lo, double hi, bool log_scale) {
    Dimension d;
    d.name = std::move(name);
    d.kind = DimKind::Real;
    d.lo = lo;
    d.hi = hi;
    d.log_scale = log_scale;
    return d;
}

Dimension Dimension::integer(std::string name, long long lo, long long hi) {
    Dimension d;
    d.name = std::move(name);
    d.kind = DimKind::Integer;
    d.lo = static_cast<double>(lo);
    d.hi = static_cast<double>(hi);
    return d;
}

Dimension Dimension::categorical(std::string name, std::vector<std::string> choices) {
    Dimension d;
    d.name = std::move(name);
    d.kind = DimKind::Categorical;
    d.choices = std::move(choices);
    return d;
}

void SearchSpace::validate() const {
    require(!dims.empty(), "search space has no dimensions");
    std::set<std::string> seen;
    for (const auto& dim : dims) {
        require(seen.insert(dim.name).second, "duplicate dimension name: " + dim.name);
        switch (dim.kind) {
            case DimKind::Real:
                require(dim.lo < dim.hi, "dimension " + dim.name + " needs lo < hi");
                if (dim.log_scale)
                    require(dim.lo > 0.0,
                            "log dimension " + dim.name + " needs a positive lower bound");
                break;
            case DimKind::Integer:
                require(dim.lo < dim.hi, "dimension " + dim.name + " needs lo < hi");
                break;
            case DimKind::Categorical:
                require(!dim.choices.empty(), "dimension " + dim.name + " has no choices");
                break;
        }
    }
}

const Dimension* SearchSpace::find(const std::string& name) const {
    for (const auto& dim : dims)
        if (dim.name == name) return &dim;
    return nullptr;
}

SearchSpace SearchSpace::pipeline_space(const std::string& reducer, const std::string& clusterer,
                                        bool include_scaler) {
    const std::vector<std::string> metrics{"euclidean", "manhattan", "chebyshev", "cosine"};
    SearchSpace space;
    if (include_scaler)
        space.dims.push_back(
            Dimension::categorical("scaler", {"standard", "minmax", "robust"}));
    if (reducer == "umap") {
        space.dims.push_back(Dimension::integer("umap.n_neighbors", 2, 250));
        space.dims.push_back(Dimension::real("umap.min_dist", 0.0, 0.99));
        space.dims.push_back(Dimension::integer("umap.n_components", 2, 15));
        space.dims.push_back(Dimension::categorical("umap.metric", metrics));
    } else {
        // "none" passes scaled features straight through; "pca" keeps its
        // fixed configuration and contributes no tuned dimensions
        require(reducer == "none" || reducer == "pca", "unknown reducer: " + reducer);
    }
    if (clusterer == "kmeans") {
        space.dims.push_back(Dimension::integer("kmeans.n_clusters", 2, 20));
    } else if (clusterer == "agglomerative") {
        space.dims.push_back(Dimension::integer("agglomerative.n_clusters", 2, 20));
        space.dims.push_back(Dimension::categorical("agglomerative.linkage",
                                                    {"ward", "complete", "average", "single"}));
        space.dims.push_back(Dimension::categorical("agglomerative.metric", metrics));
    } else if (clusterer == "hdbscan") {
        space.dims.push_back(Dimension::integer("hdbscan.min_cluster_size", 5, 200));
        space.dims.push_back(Dimension::integer("hdbscan.min_samples", 1, 50));
        space.dims.push_back(Dimension::real("hdbscan.epsilon", 0.0, 1.0));
        space.dims.push_back(Dimension::categorical("hdbscan.metric", metrics));
    } else {
        require(false, "unknown clusterer: " + clusterer);
    }
    return space;
}

double as_real(const ParamValue& v) {
    if (const auto* d = std::get_if<double>(&v)) return *d;
    if (const auto* i = std::get_if<long long>(&v)) return static_cast<double>(*i);
    require(false, "parameter is not numeric");
    return 0.0;
}

long long as_integer(const ParamValue& v) {
    const auto* i = std::get_if<long long>(&v);
    require(i != nullptr, "parameter is not an integer");
    return *i;
}

const std::string& as_label(const ParamValue& v) {
    const auto* s = std::get_if<std::string>(&v);
    require(s != nullptr, "parameter is not categorical");
    return *s;
}

// --------------------------------------------------------- front computations

std::vector<std::vector<int>> nondominated_sort(
    const std::vector<std::vector<double>>& objectives, const std::vector<Direction>& directions) {
    std::vector<std::vector<double>> pts;
    pts.reserve(objectives.size());
    for (const auto& p : objectives) pts.push_back(orient_point(p, directions));
    const int n = static_cast<int>(pts.size());
    std::vector<int> rank(n, -1);
    std::vector<std::vector<int>> fronts;
    int assigned = 0;
    while (assigned < n) {
        std::vector<int> front;
        for (int i = 0; i < n; ++i) {
            if (rank[i] != -1) continue;
            bool dominated = false;
            for (int j = 0; j < n && !dominated; ++j)
                if (j != i && rank[j] == -1 && dominates_oriented(pts[j], pts[i]))
                    dominated = true;
            if (!dominated) front.push_back(i);
        }
        for (int i : front) rank[i] = static_cast<int>(fronts.size());
        assigned += static_cast<int>(front.size());
        fronts.push_back(std::move(front));
    }
    return fronts;
}

double hypervolume(const std::vector<std::vector<double>>& front,
                   const std::vector<double>& reference,
                   const std::vector<Direction>& directions) {
    require(reference.size() == directions.size(),
            "reference length does not match directions");
    require(directions.size() >= 1 && directions.size() <= 3,
            "hypervolume supports one to three objectives");
    const auto ref = orient_point(reference, directions);
    std::vector<std::vector<double>> pts;
    pts.reserve(front.size());
    for (std::size_t i = 0; i < front.size(); ++i) {
        auto p = orient_point(front[i], directions);
        require(dominates_oriented(p, ref),
                "front point " + std::to_string(i) + " does not dominate the reference");
        pts.push_back(std::move(p));
    }
    return hypervolume_oriented(pts, ref);
}

std::vector<int> hssp_select(const std::vector<std::vector<double>>& front,
                             const std::vector<int>& trial_ids, int k,
                             const std::vector<double>& reference,
                             const std::vector<Direction>& directions) {
    require(front.size() == trial_ids.size(), "front and trial id counts differ");
    require(k >= 0 && static_cast<std::size_t>(k) <= front.size(),
            "subset size exceeds the front");
    const auto ref = orient_point(reference, directions);
    std::vector<std::vector<double>> pts;
    pts.reserve(front.size());
    for (const auto& p : front) pts.push_back(orient_point(p, directions));

    std::vector<int> selected;
    std::vector<std::vector<double>> chosen_pts;
    std::vector<bool> taken(front.size(), false);
    double current = 0.0;
    for (int round = 0; round < k; ++round) {
        int best = -1;
        double best_gain = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < pts.size(); ++c) {
            if (taken[c]) continue;
            chosen_pts.push_back(pts[c]);
            const double gain = hypervolume_oriented(chosen_pts, ref) - current;
            chosen_pts.pop_back();
            if (best < 0 || gain > best_gain ||
                (gain == best_gain && trial_ids[c] < trial_ids[static_cast<std::size_t>(best)])) {
                best_gain = gain;
                best = static_cast<int>(c);
            }
        }
        taken[static_cast<std::size_t>(best)] = true;
        selected.push_back(best);
        chosen_pts.push_back(pts[static_cast<std::size_t>(best)]);
        current += best_gain;
    }
    return selected;
}

std::vector<double> study_reference_point(const std::vector<std::vector<double>>& objectives,
                                          const std::vector<Direction>& directions) {
    require(!objectives.empty(), "reference point needs at least one objective vector");
    const std::size_t dim = directions.size();
    std::vector<double> worst(dim, -std::numeric_limits<double>::infinity());
    std::vector<double> best(dim, std::numeric_limits<double>::infinity());
    for (const auto& p : objectives) {
        const auto q = orient_point(p, directions);
        for (std::size_t d = 0; d < dim; ++d) {
            worst[d] = std::max(worst[d], q[d]);
            best[d] = std::min(best[d], q[d]);
        }
    }
    std::vector<double> ref(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        const double span = worst[d] - best[d];
        // a collapsed span still needs strict clearance for the boundary point
        const double pad =
            span > 0.0 ? 0.1 * span : std::max(1e-9, 0.1 * std::fabs(worst[d]));
        const double oriented_ref = worst[d] + pad;
        ref[d] = directions[d] == Direction::Maximize ? -oriented_ref : oriented_ref;
    }
    return ref;
}

// ----------------------------------------------------------------- suggestion

namespace {

// Completed trials ordered into the "good" quantile: whole nondomination
// fronts first, the boundary front ranked by hypervolume contribution.
std::vector<int> good_trial_indices(const std::vector<const Trial*>& completed,
                                    const OptimizerParams& params) {
    const int n = static_cast<int>(completed.size());
    const int n_good = std::clamp(
        static_cast<int>(std::ceil(params.gamma * static_cast<double>(n))), 1, n - 1);
    std::vector<std::vector<double>> objectives;
    objectives.reserve(completed.size());
    for (const auto* t : completed) objectives.push_back(*t->objectives);
    const auto fronts = nondominated_sort(objectives, params.directions);
    const auto reference = study_reference_point(objectives, params.directions);

    std::vector<int> good;
    for (const auto& front : fronts) {
        if (static_cast<int>(good.size()) == n_good) break;
        if (static_cast<int>(good.size() + front.size()) <= n_good) {
            good.insert(good.end(), front.begin(), front.end());
            continue;
        }
        // boundary rank: order by marginal hypervolume within this front
        std::vector<std::vector<double>> front_objs;
        front_objs.reserve(front.size());
        for (int idx : front) front_objs.push_back(objectives[static_cast<std::size_t>(idx)]);
        const double whole = hypervolume(front_objs, reference, params.directions);
        std::vector<std::pair<double, int>> ranked;  // (-contribution, index)
        for (std::size_t m = 0; m < front.size(); ++m) {
            auto rest = front_objs;
            rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(m));
            const double contribution =
                whole - hypervolume(rest, reference, params.directions);
            ranked.emplace_back(-contribution, front[m]);
        }
        std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first < b.first;
            return completed[static_cast<std::size_t>(a.second)]->trial_id <
                   completed[static_cast<std::size_t>(b.second)]->trial_id;
        });
        for (const auto& [neg, idx] : ranked) {
            if (static_cast<int>(good.size()) == n_good) break;
            good.push_back(idx);
        }
        break;
    }
    return good;
}

DimensionModel fit_dimension(const Dimension& dim, const std::vector<const Trial*>& completed,
                             const std::vector<bool>& is_good) {
    DimensionModel model{&dim, {}, {}, {}, {}};
    if (dim.kind == DimKind::Categorical) {
        std::vector<int> good_counts(dim.choices.size(), 0), bad_counts(dim.choices.size(), 0);
        int n_good = 0, n_bad = 0;
        for (std::size_t t = 0; t < completed.size(); ++t) {
            const auto& label = as_label(completed[t]->params.at(dim.name));
            const auto it = std::find(dim.choices.begin(), dim.choices.end(), label);
            require(it != dim.choices.end(),
                    "history value outside choices for dimension " + dim.name);
            const auto c = static_cast<std::size_t>(it - dim.choices.begin());
            if (is_good[t]) {
                ++good_counts[c];
                ++n_good;
            } else {
                ++bad_counts[c];
                ++n_bad;
            }
        }
        model.cat_l.emplace(good_counts, n_good);
        model.cat_g.emplace(bad_counts, n_bad);
        return model;
    }
    const double lo = dim.log_scale ? std::log(dim.lo) : dim.lo;
    const double hi = dim.log_scale ? std::log(dim.hi) : dim.hi;
    std::vector<double> good_obs, bad_obs;
    for (std::size_t t = 0; t < completed.size(); ++t) {
        const double v = fit_space_value(dim, completed[t]->params.at(dim.name));
        (is_good[t] ? good_obs : bad_obs).push_back(v);
    }
    model.numeric_l.emplace(std::move(good_obs), lo, hi);
    model.numeric_g.emplace(std::move(bad_obs), lo, hi);
    return model;
}

}  // namespace

Assignment suggest(const std::vector<Trial>& history, const SearchSpace& space,
                   const OptimizerParams& params, std::uint64_t seed) {
    space.validate();
    require(params.gamma > 0.0 && params.gamma < 1.0, "gamma must lie in (0, 1)");
    require(params.n_candidates >= 1, "n_candidates must be positive");
    require(params.n_startup >= 1, "n_startup must be positive");
    Rng rng(seed);

    std::vector<const Trial*> completed;
    for (const auto& trial : history)
        if (trial.complete()) completed.push_back(&trial);
    // startup counts completions: failures carry no objectives, so only
    // completed trials advance the sampler past the uniform phase (and the
    // good/bad split needs at least one trial on each side)
    if (static_cast<int>(completed.size()) < std::max(params.n_startup, 2))
        return uniform_sample(space, rng);

    const auto good = good_trial_indices(completed, params);
    std::vector<bool> is_good(completed.size(), false);
    for (int idx : good) is_good[static_cast<std::size_t>(idx)] = true;

    std::vector<DimensionModel> models;
    models.reserve(space.dims.size());
    for (const auto& dim : space.dims) models.push_back(fit_dimension(dim, completed, is_good));

    Assignment best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < params.n_candidates; ++c) {
        Assignment candidate;
        double score = 0.0;
        for (const auto& model : models) {
            const auto& dim = *model.dim;
            if (dim.kind == DimKind::Categorical) {
                const std::size_t choice = model.cat_l->sample(rng);
                candidate[dim.name] = dim.choices[choice];
                score += model.cat_l->log_pmf(choice) - model.cat_g->log_pmf(choice);
                continue;
            }
            double v = model.numeric_l->sample(rng);
            if (dim.kind == DimKind::Integer) {
                const auto rounded = static_cast<long long>(std::llround(v));
                const auto clamped =
                    std::clamp(rounded, static_cast<long long>(dim.lo),
                               static_cast<long long>(dim.hi));
                candidate[dim.name] = clamped;
                v = static_cast<double>(clamped);
            } else if (dim.log_scale) {
                candidate[dim.name] = std::clamp(std::exp(v), dim.lo, dim.hi);
            } else {
                candidate[dim.name] = v;
            }
            score += model.numeric_l->log_pdf(v) - model.numeric_g->log_pdf(v);
        }
        if (std::isnan(score)) continue;
        if (score > best_score) {
            best_score = score;
            best = std::move(candidate);
        }
    }
    if (best.empty()) return uniform_sample(space, rng);  // no scorable candidate
    return best;
}

// -------------------------------------------------------------------- studies

namespace {

ParetoFront build_front(const std::vector<Trial>& trials, const OptimizerParams& params) {
    ParetoFront front;
    std::vector<const Trial*> completed;
    for (const auto& trial : trials)
        if (trial.complete()) completed.push_back(&trial);
    if (completed.empty()) return front;
    std::vector<std::vector<double>> objectives;
    objectives.reserve(completed.size());
    for (const auto* t : completed) objectives.push_back(*t->objectives);
    const auto fronts = nondominated_sort(objectives, params.directions);
    front.reference = study_reference_point(objectives, params.directions);
    std::vector<int> ids = fronts.front();
    std::sort(ids.begin(), ids.end(), [&](int a, int b) {
        return completed[static_cast<std::size_t>(a)]->trial_id <
               completed[static_cast<std::size_t>(b)]->trial_id;
    });
    std::vector<std::vector<double>> member_objs;
    for (int idx : ids) {
        front.members.push_back(*completed[static_cast<std::size_t>(idx)]);
        member_objs.push_back(objectives[static_cast<std::size_t>(idx)]);
    }
    front.hypervolume = hypervolume(member_objs, front.reference, params.directions);
    return front;
}

// Rebuilds snapshots (front state after each trial-id prefix) and the final
// front, then scores every snapshot against the final reference so the series
// is a comparable, nondecreasing record of front growth.
void finalize_study(StudyResult& result, const OptimizerParams& params) {
    std::sort(result.trials.begin(), result.trials.end(),
              [](const Trial& a, const Trial& b) { return a.trial_id < b.trial_id; });
    result.snapshots.clear();
    for (std::size_t k = 1; k <= result.trials.size(); ++k) {
        FrontSnapshot snapshot;
        snapshot.after_trial = static_cast<int>(k);
        std::vector<const Trial*> completed;
        for (std::size_t i = 0; i < k; ++i)
            if (result.trials[i].complete()) completed.push_back(&result.trials[i]);
        if (!completed.empty()) {
            std::vector<std::vector<double>> objectives;
            for (const auto* trial_ptr : completed) objectives.push_back(*trial_ptr->objectives);
            const auto fronts = nondominated_sort(objectives, params.directions);
            for (int idx : fronts.front())
                snapshot.member_ids.push_back(completed[static_cast<std::size_t>(idx)]->trial_id);
            std::sort(snapshot.member_ids.begin(), snapshot.member_ids.end());
        }
        result.snapshots.push_back(std::move(snapshot));
    }
    result.front = build_front(result.trials, params);

    if (!result.front.reference.empty()) {
        std::map<int, const Trial*> by_id;
        for (const auto& trial : result.trials) by_id[trial.trial_id] = &trial;
        for (auto& snapshot : result.snapshots) {
            std::vector<std::vector<double>> objectives;
            for (int id : snapshot.member_ids) objectives.push_back(*by_id[id]->objectives);
            snapshot.hypervolume =
                objectives.empty()
                    ? 0.0
                    : hypervolume(objectives, result.front.reference, params.directions);
        }
    }
}

Trial evaluate_trial(const Evaluator& evaluate, Assignment assignment, int trial_id,
                     const OptimizerParams& params) {
    Trial trial;
    trial.trial_id = trial_id;
    trial.params = std::move(assignment);
    try {
        auto objectives = evaluate(trial.params);
        if (!objectives.empty()) {
            require(objectives.size() == params.directions.size(),
                    "evaluator returned a wrong objective count");
            trial.objectives = std::move(objectives);
        }
    } catch (...) {
        // failed evaluation: the trial stays, its objectives do not
    }
    return trial;
}

}  // namespace

StudyResult run_study(const Evaluator& evaluate, const SearchSpace& space, int n_trials,
                      const OptimizerParams& params, std::uint64_t seed) {
    require(n_trials >= 1, "a study needs at least one trial");
    space.validate();
    StudyResult result;
    for (int t = 0; t < n_trials; ++t) {
        auto assignment = suggest(result.trials, space, params,
                                  derive_seed(seed, static_cast<std::uint64_t>(t)));
        result.trials.push_back(evaluate_trial(evaluate, std::move(assignment), t, params));
    }
    finalize_study(result, params);
    return result;
}

StudyResult run_study_parallel(const Evaluator& evaluate, const SearchSpace& space, int n_trials,
                               const OptimizerParams& params, std::uint64_t seed,
                               int max_in_flight) {
    if (max_in_flight <= 1) return run_study(evaluate, space, n_trials, params, seed);
    require(n_trials >= 1, "a study needs at least one trial");
    space.validate();

    std::mutex guard;
    std::vector<Trial> committed;
    int next_trial = 0;
    const auto worker = [&]() {
        while (true) {
            int trial_id;
            std::vector<Trial> history;
            {
                const std::lock_guard<std::mutex> lock(guard);
                if (next_trial >= n_trials) return;
                trial_id = next_trial++;
                history = committed;  // latest committed results only
            }
            auto assignment = suggest(history, space, params,
                                      derive_seed(seed, static_cast<std::uint64_t>(trial_id)));
            auto trial = evaluate_trial(evaluate, std::move(assignment), trial_id, params);
            const std::lock_guard<std::mutex> lock(guard);
            committed.push_back(std::move(trial));
        }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min(max_in_flight, n_trials);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& thread : pool) thread.join();

    StudyResult result;
    result.trials = std::move(committed);
    finalize_study(result, params);
    return result;
}

const Trial& pick_final(const ParetoFront& front) {
    require(!front.members.empty(), "cannot pick from an empty front");
    const Trial* best = nullptr;
    for (const auto& trial : front.members) {
        if (best == nullptr) {
            best = &trial;
            continue;
        }
        const auto& lhs = *trial.objectives;
        const auto& rhs = *best->objectives;
        if (lhs[0] != rhs[0]) {
            if (lhs[0] > rhs[0]) best = &trial;
            continue;
        }
        if (lhs.size() >= 3 && lhs[2] != rhs[2]) {
            if (lhs[2] > rhs[2]) best = &trial;
            continue;
        }
        if (trial.trial_id < best->trial_id) best = &trial;
    }
    return *best;
}

// ---------------------------------------------------------------- persistence

namespace {

nlohmann::json value_to_json(const ParamValue& v) {
    return std::visit([](const auto& inner) { return nlohmann::json(inner); }, v);
}

ParamValue value_from_json(const nlohmann::json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_integer()) return j.get<long long>();
    return j.get<double>();
}

nlohmann::json trial_to_json(const Trial& trial) {
    nlohmann::json doc;
    doc["trial_id"] = trial.trial_id;
    doc["state"] = trial.complete() ? "complete" : "failed";
    auto& params = doc["params"] = nlohmann::json::object();
    for (const auto& [name, value] : trial.params) params[name] = value_to_json(value);
    if (trial.complete())
        doc["objectives"] = *trial.objectives;
    else
        doc["objectives"] = nullptr;
    return doc;
}

Trial trial_from_json(const nlohmann::json& doc) {
    Trial trial;
    trial.trial_id = doc.at("trial_id").get<int>();
    for (const auto& [name, value] : doc.at("params").items())
        trial.params[name] = value_from_json(value);
    const auto& objectives = doc.at("objectives");
    if (!objectives.is_null()) trial.objectives = objectives.get<std::vector<double>>();
    return trial;
}

}  // namespace

std::string trial_to_json_line(const Trial& trial) { return trial_to_json(trial).dump(); }

Trial trial_from_json_line(const std::string& line) {
    return trial_from_json(nlohmann::json::parse(line));
}

void write_study_jsonl(const std::string& path, const std::vector<Trial>& trials) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open " + path + " for writing");
    for (const auto& trial : trials) out << trial_to_json_line(trial) << '\n';
    require(out.good(), "failed writing " + path);
}

std::vector<Trial> read_study_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open " + path);
    std::vector<Trial> trials;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        trials.push_back(trial_from_json_line(line));
    }
    return trials;
}

std::string front_to_json(const ParetoFront& front) {
    nlohmann::json doc;
    doc["reference"] = front.reference;
    doc["hypervolume"] = front.hypervolume;
    auto& members = doc["members"] = nlohmann::json::array();
    for (const auto& trial : front.members) members.push_back(trial_to_json(trial));
    return doc.dump(2);
}

void write_study_csv(const std::string& path, const std::vector<Trial>& trials,
                     const ParetoFront& front) {
    std::set<int> member_ids;
    for (const auto& trial : front.members) member_ids.insert(trial.trial_id);
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open " + path + " for writing");
    std::size_t n_objectives = 0;
    for (const auto& trial : trials)
        if (trial.complete()) n_objectives = trial.objectives->size();
    if (n_objectives == 3) {
        out << "trial,silhouette,davies_bouldin,calinski_harabasz,front\n";
    } else {
        out << "trial";
        for (std::size_t d = 0; d < n_objectives; ++d) out << ",objective_" << d;
        out << ",front\n";
    }
    for (const auto& trial : trials) {
        if (!trial.complete()) continue;
        out << trial.trial_id;
        for (double v : *trial.objectives) out << ',' << format_double(v);
        out << ',' << (member_ids.count(trial.trial_id) ? 1 : 0) << '\n';
    }
    require(out.good(), "failed writing " + path);
}

}  // namespace rockcluster
