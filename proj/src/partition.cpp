#include "rockcluster/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "rockcluster/common.hpp"
#include "rockcluster/parallel.hpp"
#include "rockcluster/rng.hpp"

namespace rockcluster {

namespace {

// Plain accumulation loops throughout: seeding draws and convergence are
// keyed to these exact values, so they must not depend on vectorization.
double squared_rows(const Matrix& x, Eigen::Index i, const Matrix& c, Eigen::Index r) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double diff = x(i, j) - c(r, j);
        sum += diff * diff;
    }
    return sum;
}

Matrix seed_centers(const Matrix& x, int k, KmeansInit init, Rng& rng) {
    const Eigen::Index n = x.rows();
    Matrix centers(k, x.cols());
    if (init == KmeansInit::Random) {
        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        for (int c = 0; c < k; ++c) {
            const std::size_t pick =
                static_cast<std::size_t>(c) + rng.index(static_cast<std::size_t>(n) - c);
            std::swap(order[static_cast<std::size_t>(c)], order[pick]);
            centers.row(c) = x.row(order[static_cast<std::size_t>(c)]);
        }
        return centers;
    }
    std::vector<char> chosen(static_cast<std::size_t>(n), 0);
    const std::size_t first = rng.index(static_cast<std::size_t>(n));
    chosen[first] = 1;
    centers.row(0) = x.row(static_cast<Eigen::Index>(first));
    std::vector<double> d2(static_cast<std::size_t>(n),
                           std::numeric_limits<double>::infinity());
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            auto& slot = d2[static_cast<std::size_t>(i)];
            slot = std::min(slot, squared_rows(x, i, centers, c - 1));
            total += slot;
        }
        std::size_t pick;
        if (total <= 0.0) {
            pick = 0;
            while (chosen[pick]) ++pick;
        } else {
            pick = rng.weighted_index(d2);
        }
        chosen[pick] = 1;
        centers.row(c) = x.row(static_cast<Eigen::Index>(pick));
    }
    return centers;
}

struct LloydRun {
    std::vector<int> labels;
    Matrix centers;
    double inertia = 0.0;
    int n_iter = 0;
    std::vector<double> history;
};

double assign_points(const Matrix& x, const Matrix& centers, std::vector<int>& labels) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (Eigen::Index c = 0; c < centers.rows(); ++c) {
            const double d = squared_rows(x, i, centers, c);
            if (d < best) {
                best = d;
                arg = static_cast<int>(c);
            }
        }
        labels[static_cast<std::size_t>(i)] = arg;
        total += best;
    }
    return total;
}

LloydRun run_lloyd(const Matrix& x, const KmeansParams& params, std::uint64_t seed) {
    const Eigen::Index n = x.rows();
    const int k = params.n_clusters;
    Rng rng(seed);
    LloydRun run;
    run.centers = seed_centers(x, k, params.init, rng);
    run.labels.assign(static_cast<std::size_t>(n), 0);
    for (int iter = 0; iter < params.max_iter; ++iter) {
        run.history.push_back(assign_points(x, run.centers, run.labels));
        Matrix next = Matrix::Zero(k, x.cols());
        std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            next.row(run.labels[static_cast<std::size_t>(i)]) += x.row(i);
            ++counts[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(i)])];
        }
        for (int c = 0; c < k; ++c)
            if (counts[static_cast<std::size_t>(c)] > 0)
                next.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
        std::vector<char> taken(static_cast<std::size_t>(n), 0);
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) continue;
            double far = -1.0;
            Eigen::Index pick = 0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (taken[static_cast<std::size_t>(i)]) continue;
                const double d =
                    squared_rows(x, i, next, run.labels[static_cast<std::size_t>(i)]);
                if (d > far) {
                    far = d;
                    pick = i;
                }
            }
            taken[static_cast<std::size_t>(pick)] = 1;
            next.row(c) = x.row(pick);
        }
        double movement = 0.0;
        for (int c = 0; c < k; ++c)
            movement = std::max(movement, std::sqrt(squared_rows(next, c, run.centers, c)));
        run.centers = std::move(next);
        run.n_iter = iter + 1;
        if (movement < params.tol) break;
    }
    run.inertia = assign_points(x, run.centers, run.labels);
    run.history.push_back(run.inertia);
    return run;
}

}  // namespace

KmeansInit kmeans_init_from_name(const std::string& name) {
    if (name == "kmeans++") return KmeansInit::PlusPlus;
    if (name == "random") return KmeansInit::Random;
    fail("unknown k-means init \"" + name + "\"; expected kmeans++ or random");
}

const char* kmeans_init_name(KmeansInit init) {
    return init == KmeansInit::PlusPlus ? "kmeans++" : "random";
}

KmeansResult kmeans(const Matrix& x, const KmeansParams& params) {
    const Eigen::Index n = x.rows();
    require(n > 0, "k-means needs at least one sample");
    require(params.n_clusters >= 1, "k-means needs n_clusters >= 1");
    require(params.n_clusters <= n, "k-means needs n_clusters <= n_samples");
    require(params.n_init >= 1, "k-means needs n_init >= 1");
    require(params.max_iter >= 1, "k-means needs max_iter >= 1");

    std::vector<LloydRun> runs(static_cast<std::size_t>(params.n_init));
    parallel_for_chunks(static_cast<std::size_t>(params.n_init), params.threads,
                        [&](std::size_t begin, std::size_t end) {
                            for (std::size_t r = begin; r < end; ++r)
                                runs[r] = run_lloyd(x, params, params.seed + r);
                        });

    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r)
        if (runs[r].inertia < runs[best].inertia) best = r;

    KmeansResult result;
    result.best_restart = static_cast<int>(best);
    result.inertia = runs[best].inertia;
    result.n_iter = runs[best].n_iter;
    result.iteration_inertias = std::move(runs[best].history);
    result.restart_inertias.reserve(runs.size());
    for (const auto& run : runs) result.restart_inertias.push_back(run.inertia);

    // Compact away ids that ended empty (possible with duplicate points).
    const auto& labels = runs[best].labels;
    std::vector<int> remap(static_cast<std::size_t>(params.n_clusters), -1);
    for (const int label : labels) remap[static_cast<std::size_t>(label)] = 0;
    int dense = 0;
    for (auto& slot : remap)
        if (slot == 0) slot = dense++;
    result.n_clusters = dense;
    result.labels.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        result.labels[i] = remap[static_cast<std::size_t>(labels[i])];
    result.centers.resize(dense, x.cols());
    for (int c = 0; c < params.n_clusters; ++c)
        if (remap[static_cast<std::size_t>(c)] >= 0)
            result.centers.row(remap[static_cast<std::size_t>(c)]) = runs[best].centers.row(c);
    return result;
}

Linkage linkage_from_name(const std::string& name) {
    if (name == "ward") return Linkage::Ward;
    if (name == "complete") return Linkage::Complete;
    if (name == "average") return Linkage::Average;
    if (name == "single") return Linkage::Single;
    fail("unknown linkage \"" + name + "\"; expected ward, complete, average, or single");
}

const char* linkage_name(Linkage linkage) {
    switch (linkage) {
        case Linkage::Ward: return "ward";
        case Linkage::Complete: return "complete";
        case Linkage::Average: return "average";
        case Linkage::Single: return "single";
    }
    fail("invalid linkage value");
}

AgglomerativeResult agglomerative(const Matrix& x, const AgglomerativeParams& params) {
    const Eigen::Index n = x.rows();
    require(n > 0, "agglomerative clustering needs at least one sample");
    require(params.n_clusters >= 1, "agglomerative clustering needs n_clusters >= 1");
    require(params.n_clusters <= n, "agglomerative clustering needs n_clusters <= n_samples");
    require(params.linkage != Linkage::Ward || params.metric == Metric::Euclidean,
            "ward linkage requires the euclidean metric");

    const bool ward = params.linkage == Linkage::Ward;
    const std::size_t stride = static_cast<std::size_t>(n);
    // Working values: squared euclidean for ward, metric distance otherwise,
    // stored dense over active slots.
    std::vector<double> work(stride * stride, 0.0);
    auto at = [&](std::size_t a, std::size_t b) -> double& { return work[a * stride + b]; };
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d = ward ? squared_euclidean(x.row(i).data(), x.row(j).data(),
                                                      static_cast<std::size_t>(x.cols()))
                                  : row_distance(x, i, j, params.metric);
            at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = d;
            at(static_cast<std::size_t>(j), static_cast<std::size_t>(i)) = d;
        }
    }

    std::vector<int> slot_id(static_cast<std::size_t>(n));
    std::iota(slot_id.begin(), slot_id.end(), 0);
    std::vector<double> slot_size(static_cast<std::size_t>(n), 1.0);

    AgglomerativeResult result;
    result.dendrogram.reserve(static_cast<std::size_t>(n - 1));
    std::size_t active = static_cast<std::size_t>(n);
    int next_id = static_cast<int>(n);
    while (active > 1) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 1;
        std::pair<int, int> best_pair{0, 0};
        for (std::size_t a = 0; a < active; ++a) {
            for (std::size_t b = a + 1; b < active; ++b) {
                const double value = at(a, b);
                const std::pair<int, int> ids{std::min(slot_id[a], slot_id[b]),
                                              std::max(slot_id[a], slot_id[b])};
                if (value < best || (value == best && ids < best_pair)) {
                    best = value;
                    bi = a;
                    bj = b;
                    best_pair = ids;
                }
            }
        }
        const double na = slot_size[bi], nb = slot_size[bj];
        for (std::size_t c = 0; c < active; ++c) {
            if (c == bi || c == bj) continue;
            const double dac = at(bi, c), dbc = at(bj, c);
            double merged = 0.0;
            switch (params.linkage) {
                case Linkage::Single: merged = std::min(dac, dbc); break;
                case Linkage::Complete: merged = std::max(dac, dbc); break;
                case Linkage::Average: merged = (na * dac + nb * dbc) / (na + nb); break;
                case Linkage::Ward: {
                    const double nc = slot_size[c];
                    merged = ((na + nc) * dac + (nb + nc) * dbc - nc * best) / (na + nb + nc);
                    break;
                }
            }
            at(bi, c) = merged;
            at(c, bi) = merged;
        }
        result.dendrogram.push_back({best_pair.first, best_pair.second,
                                     ward ? std::sqrt(best) : best,
                                     static_cast<int>(na + nb)});
        slot_id[bi] = next_id++;
        slot_size[bi] = na + nb;
        const std::size_t last = active - 1;
        if (bj != last) {
            slot_id[bj] = slot_id[last];
            slot_size[bj] = slot_size[last];
            for (std::size_t c = 0; c < last; ++c) {
                if (c == bj) continue;
                at(bj, c) = at(last, c);
                at(c, bj) = at(c, last);
            }
        }
        --active;
    }

    result.labels = cut_dendrogram(result.dendrogram, static_cast<int>(n), params.n_clusters);
    result.n_clusters = params.n_clusters;
    return result;
}

std::vector<int> cut_dendrogram(const std::vector<DendrogramRow>& dendrogram, int n_samples,
                                int k) {
    require(n_samples >= 1, "cut needs at least one sample");
    require(k >= 1 && k <= n_samples, "cut needs 1 <= k <= n_samples");
    require(static_cast<int>(dendrogram.size()) >= n_samples - k,
            "dendrogram has fewer merges than the requested cut");
    std::vector<int> parent(static_cast<std::size_t>(2 * n_samples - 1));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int v) {
        while (parent[static_cast<std::size_t>(v)] != v)
            v = parent[static_cast<std::size_t>(v)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
        return v;
    };
    for (int m = 0; m < n_samples - k; ++m) {
        parent[static_cast<std::size_t>(find(dendrogram[static_cast<std::size_t>(m)].left))] =
            n_samples + m;
        parent[static_cast<std::size_t>(find(dendrogram[static_cast<std::size_t>(m)].right))] =
            n_samples + m;
    }
    std::vector<int> labels(static_cast<std::size_t>(n_samples));
    std::vector<int> remap(static_cast<std::size_t>(2 * n_samples - 1), -1);
    int dense = 0;
    for (int i = 0; i < n_samples; ++i) {
        const int root = find(i);
        if (remap[static_cast<std::size_t>(root)] < 0) remap[static_cast<std::size_t>(root)] = dense++;
        labels[static_cast<std::size_t>(i)] = remap[static_cast<std::size_t>(root)];
    }
    return labels;
}

}  // namespace rockcluster
