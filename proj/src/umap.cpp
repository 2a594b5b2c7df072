#include "rockcluster/umap.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_set>
#include <utility>

#include "rockcluster/common.hpp"
#include "rockcluster/parallel.hpp"
#include "rockcluster/rng.hpp"

namespace rockcluster {

namespace {

constexpr int kExactLimit = 4096;
constexpr int kForestTrees = 8;
constexpr int kRefineRounds = 2;

// Keep the best k candidates by (distance, index) for one query point.
void select_neighbors(const Matrix& x, int i, std::vector<int>& candidates, int k,
                      Metric metric, std::vector<int>& out_ids,
                      std::vector<double>& out_dists) {
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    std::vector<std::pair<double, int>> scored;
    scored.reserve(candidates.size());
    for (const int j : candidates) {
        if (j == i) continue;
        scored.emplace_back(row_distance(x, i, j, metric), j);
    }
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                      scored.end());
    out_ids.clear();
    out_dists.clear();
    for (std::size_t s = 0; s < keep; ++s) {
        out_dists.push_back(scored[s].first);
        out_ids.push_back(scored[s].second);
    }
}

KnnGraph exact_knn(const Matrix& x, int k, Metric metric, int threads) {
    const int n = static_cast<int>(x.rows());
    KnnGraph graph;
    graph.neighbors.resize(static_cast<std::size_t>(n));
    graph.distances.resize(static_cast<std::size_t>(n));
    parallel_for_chunks(static_cast<std::size_t>(n), threads,
                        [&](std::size_t begin, std::size_t end) {
                            std::vector<std::pair<double, int>> scored(
                                static_cast<std::size_t>(n - 1));
                            for (std::size_t i = begin; i < end; ++i) {
                                std::size_t w = 0;
                                for (int j = 0; j < n; ++j) {
                                    if (j == static_cast<int>(i)) continue;
                                    scored[w++] = {row_distance(x, static_cast<Eigen::Index>(i),
                                                                j, metric),
                                                   j};
                                }
                                std::partial_sort(scored.begin(), scored.begin() + k,
                                                  scored.end());
                                auto& ids = graph.neighbors[i];
                                auto& dists = graph.distances[i];
                                ids.resize(static_cast<std::size_t>(k));
                                dists.resize(static_cast<std::size_t>(k));
                                for (int s = 0; s < k; ++s) {
                                    dists[static_cast<std::size_t>(s)] =
                                        scored[static_cast<std::size_t>(s)].first;
                                    ids[static_cast<std::size_t>(s)] =
                                        scored[static_cast<std::size_t>(s)].second;
                                }
                            }
                        });
    return graph;
}

// Random-projection tree: split by proximity to two sampled pivots until the
// subset fits a leaf, then emit co-membership candidates.
void split_recursive(const Matrix& x, Metric metric, std::vector<int>& ids, std::size_t begin,
                     std::size_t end, std::size_t leaf_limit, Rng& rng,
                     std::vector<std::pair<std::size_t, std::size_t>>& leaves) {
    const std::size_t size = end - begin;
    if (size <= leaf_limit) {
        leaves.emplace_back(begin, end);
        return;
    }
    const std::size_t pa = begin + rng.index(size);
    std::size_t pb = pa;
    for (int attempt = 0; attempt < 8 && pb == pa; ++attempt) pb = begin + rng.index(size);
    if (pb == pa) pb = begin + (pa - begin + 1) % size;
    const int a = ids[pa], b = ids[pb];
    auto mid_iter = std::stable_partition(
        ids.begin() + static_cast<std::ptrdiff_t>(begin),
        ids.begin() + static_cast<std::ptrdiff_t>(end), [&](int p) {
            return row_distance(x, p, a, metric) <= row_distance(x, p, b, metric);
        });
    std::size_t mid = static_cast<std::size_t>(mid_iter - ids.begin());
    if (mid == begin || mid == end) mid = begin + size / 2;  // degenerate pivots
    split_recursive(x, metric, ids, begin, mid, leaf_limit, rng, leaves);
    split_recursive(x, metric, ids, mid, end, leaf_limit, rng, leaves);
}

KnnGraph approximate_knn(const Matrix& x, int k, Metric metric, std::uint64_t seed,
                         int threads) {
    const int n = static_cast<int>(x.rows());
    const std::size_t leaf_limit =
        std::max<std::size_t>(static_cast<std::size_t>(2 * k), 50);
    std::vector<std::vector<int>> candidates(static_cast<std::size_t>(n));
    for (int tree = 0; tree < kForestTrees; ++tree) {
        Rng rng(derive_seed(seed, 0x7000u + static_cast<std::uint64_t>(tree)));
        std::vector<int> ids(static_cast<std::size_t>(n));
        std::iota(ids.begin(), ids.end(), 0);
        std::vector<std::pair<std::size_t, std::size_t>> leaves;
        split_recursive(x, metric, ids, 0, static_cast<std::size_t>(n), leaf_limit, rng,
                        leaves);
        for (const auto& [begin, end] : leaves)
            for (std::size_t p = begin; p < end; ++p)
                for (std::size_t q = begin; q < end; ++q)
                    if (p != q) candidates[static_cast<std::size_t>(ids[p])].push_back(ids[q]);
    }

    KnnGraph graph;
    graph.neighbors.resize(static_cast<std::size_t>(n));
    graph.distances.resize(static_cast<std::size_t>(n));
    parallel_for_chunks(static_cast<std::size_t>(n), threads,
                        [&](std::size_t begin, std::size_t end) {
                            for (std::size_t i = begin; i < end; ++i)
                                select_neighbors(x, static_cast<int>(i), candidates[i], k,
                                                 metric, graph.neighbors[i],
                                                 graph.distances[i]);
                        });

    for (int round = 0; round < kRefineRounds; ++round) {
        KnnGraph next;
        next.neighbors.resize(static_cast<std::size_t>(n));
        next.distances.resize(static_cast<std::size_t>(n));
        parallel_for_chunks(
            static_cast<std::size_t>(n), threads, [&](std::size_t begin, std::size_t end) {
                std::vector<int> pool;
                for (std::size_t i = begin; i < end; ++i) {
                    pool.assign(graph.neighbors[i].begin(), graph.neighbors[i].end());
                    for (const int j : graph.neighbors[i])
                        for (const int j2 : graph.neighbors[static_cast<std::size_t>(j)])
                            pool.push_back(j2);
                    select_neighbors(x, static_cast<int>(i), pool, k, metric,
                                     next.neighbors[i], next.distances[i]);
                }
            });
        graph = std::move(next);
    }
    return graph;
}

}  // namespace

KnnGraph build_knn_graph(const Matrix& x, int n_neighbors, Metric metric, std::uint64_t seed,
                         int threads) {
    const int n = static_cast<int>(x.rows());
    require(n_neighbors >= 1, "n_neighbors must be at least 1");
    require(n_neighbors < n, "n_neighbors must be below n_samples");
    if (n <= kExactLimit) return exact_knn(x, n_neighbors, metric, threads);
    return approximate_knn(x, n_neighbors, metric, seed, threads);
}

FuzzyGraph fuzzy_weights(const KnnGraph& knn) {
    const std::size_t n = knn.neighbors.size();
    require(n >= 2, "fuzzy graph needs at least two points");
    require(knn.distances.size() == n, "neighbor/distance size mismatch");
    FuzzyGraph graph;
    graph.n_points = static_cast<int>(n);
    graph.rho.resize(n);
    graph.sigma.resize(n);
    graph.neighbors = knn.neighbors;
    graph.memberships.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        const auto& dists = knn.distances[i];
        require(!dists.empty(), "every point needs at least one neighbor");
        require(std::is_sorted(dists.begin(), dists.end()), "neighbor distances must ascend");
        const std::size_t k = dists.size();
        graph.rho[i] = dists[0];
        auto& weights = graph.memberships[i];
        weights.assign(k, 1.0);
        if (dists.back() <= 0.0) {
            graph.sigma[i] = 1.0;  // all duplicates: solve skipped, weights stay 1
            continue;
        }
        const double target = std::log2(static_cast<double>(k));
        auto weight_sum = [&](double sigma) {
            double sum = 0.0;
            for (const double d : dists) {
                const double excess = d - graph.rho[i];
                sum += excess <= 0.0 ? 1.0 : std::exp(-excess / sigma);
            }
            return sum;
        };
        double lo = 0.0, hi = 1.0;
        while (weight_sum(hi) < target && hi < 1e18) hi *= 2.0;
        for (int iter = 0; iter < 100; ++iter) {
            const double mid = 0.5 * (lo + hi);
            (weight_sum(mid) >= target ? hi : lo) = mid;
        }
        const double sigma = std::max(0.5 * (lo + hi), 1e-12);
        graph.sigma[i] = sigma;
        for (std::size_t s = 0; s < k; ++s) {
            const double excess = dists[s] - graph.rho[i];
            weights[s] = excess <= 0.0 ? 1.0 : std::exp(-excess / sigma);
        }
    }

    std::map<std::pair<int, int>, std::pair<double, double>> directed;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t s = 0; s < graph.neighbors[i].size(); ++s) {
            const int j = graph.neighbors[i][s];
            const double w = graph.memberships[i][s];
            const bool forward = static_cast<int>(i) < j;
            const std::pair<int, int> key{std::min(static_cast<int>(i), j),
                                          std::max(static_cast<int>(i), j)};
            auto& slot = directed[key];
            (forward ? slot.first : slot.second) = w;
        }
    }
    for (const auto& [key, w] : directed) {
        const double p = w.first + w.second - w.first * w.second;
        if (p > 0.0) graph.edges.push_back({key.first, key.second, p});
    }
    return graph;
}

std::pair<double, double> fit_decay_coefficients(double min_dist) {
    require(min_dist >= 0.0 && std::isfinite(min_dist), "min_dist must be finite and >= 0");
    constexpr int kGrid = 300;
    std::vector<double> xs(kGrid), ys(kGrid);
    for (int g = 0; g < kGrid; ++g) {
        const double d = 3.0 * g / (kGrid - 1);
        xs[static_cast<std::size_t>(g)] = d;
        ys[static_cast<std::size_t>(g)] = d < min_dist ? 1.0 : std::exp(-(d - min_dist));
    }
    double a = 1.0, b = 1.0;
    auto sse = [&](double ca, double cb) {
        double total = 0.0;
        for (int g = 0; g < kGrid; ++g) {
            const double d = xs[static_cast<std::size_t>(g)];
            const double q = 1.0 / (1.0 + ca * std::pow(d, 2.0 * cb));
            const double r = q - ys[static_cast<std::size_t>(g)];
            total += r * r;
        }
        return total;
    };
    double lambda = 1e-3;
    double current = sse(a, b);
    for (int iter = 0; iter < 200; ++iter) {
        double jaa = 0.0, jab = 0.0, jbb = 0.0, ga = 0.0, gb = 0.0;
        for (int g = 1; g < kGrid; ++g) {  // d=0 has zero residual and gradient
            const double d = xs[static_cast<std::size_t>(g)];
            const double t = std::pow(d, 2.0 * b);
            const double denom = 1.0 + a * t;
            const double q = 1.0 / denom;
            const double r = q - ys[static_cast<std::size_t>(g)];
            const double ja = -t / (denom * denom);
            const double jb = -2.0 * a * t * std::log(d) / (denom * denom);
            jaa += ja * ja;
            jab += ja * jb;
            jbb += jb * jb;
            ga += ja * r;
            gb += jb * r;
        }
        const double daa = jaa * (1.0 + lambda), dbb = jbb * (1.0 + lambda);
        const double det = daa * dbb - jab * jab;
        if (std::fabs(det) < 1e-30) break;
        const double step_a = (-ga * dbb + gb * jab) / det;
        const double step_b = (-gb * daa + ga * jab) / det;
        const double na = std::clamp(a + step_a, 1e-6, 1e6);
        const double nb = std::clamp(b + step_b, 1e-6, 1e6);
        const double trial = sse(na, nb);
        if (trial < current) {
            a = na;
            b = nb;
            current = trial;
            lambda = std::max(lambda / 3.0, 1e-12);
            if (std::fabs(step_a) + std::fabs(step_b) < 1e-13) break;
        } else {
            lambda *= 5.0;
            if (lambda > 1e12) break;
        }
    }
    return {a, b};
}

namespace {

Matrix spectral_initialization(const FuzzyGraph& graph, int m, std::uint64_t seed) {
    const int n = graph.n_points;
    std::vector<double> degree(static_cast<std::size_t>(n), 0.0);
    for (const auto& edge : graph.edges) {
        degree[static_cast<std::size_t>(edge.a)] += edge.weight;
        degree[static_cast<std::size_t>(edge.b)] += edge.weight;
    }
    std::vector<double> inv_sqrt(static_cast<std::size_t>(n), 1.0);
    for (int i = 0; i < n; ++i)
        if (degree[static_cast<std::size_t>(i)] > 0.0)
            inv_sqrt[static_cast<std::size_t>(i)] =
                1.0 / std::sqrt(degree[static_cast<std::size_t>(i)]);

    const int cols = std::min(m + 1, n);
    Matrix v = Matrix::Zero(n, cols);
    Rng rng(derive_seed(seed, 101));
    for (int i = 0; i < n; ++i)
        v(i, 0) = std::sqrt(std::max(degree[static_cast<std::size_t>(i)], 1e-12));
    v.col(0).normalize();
    for (int c = 1; c < cols; ++c)
        for (int i = 0; i < n; ++i) v(i, c) = rng.normal();

    auto multiply = [&](const Matrix& in, Matrix& out) {
        out.setZero();
        for (const auto& edge : graph.edges) {
            const double s = edge.weight * inv_sqrt[static_cast<std::size_t>(edge.a)] *
                             inv_sqrt[static_cast<std::size_t>(edge.b)];
            out.row(edge.a) += s * in.row(edge.b);
            out.row(edge.b) += s * in.row(edge.a);
        }
    };
    auto orthonormalize = [&](Matrix& mat) {
        for (int c = 0; c < mat.cols(); ++c) {
            for (int p = 0; p < c; ++p) mat.col(c) -= mat.col(p).dot(mat.col(c)) * mat.col(p);
            const double norm = mat.col(c).norm();
            if (norm > 1e-12) {
                mat.col(c) /= norm;
            } else {
                for (int i = 0; i < n; ++i) mat(i, c) = rng.normal();
                mat.col(c).normalize();
            }
        }
    };

    orthonormalize(v);
    Matrix product(n, cols);
    for (int iter = 0; iter < 100; ++iter) {
        multiply(v, product);
        v.rightCols(cols - 1) = product.rightCols(cols - 1);
        for (int i = 0; i < n; ++i)
            v(i, 0) = std::sqrt(std::max(degree[static_cast<std::size_t>(i)], 1e-12));
        v.col(0).normalize();
        orthonormalize(v);
    }
    multiply(v, product);
    std::vector<std::pair<double, int>> order;
    for (int c = 1; c < cols; ++c)
        order.emplace_back(-v.col(c).dot(product.col(c)), c);  // descending eigenvalue
    std::sort(order.begin(), order.end());

    Matrix y = Matrix::Zero(n, m);
    for (int c = 0; c < m && c < static_cast<int>(order.size()); ++c)
        y.col(c) = v.col(order[static_cast<std::size_t>(c)].second);
    const double span = y.cwiseAbs().maxCoeff();
    if (span > 0.0) y *= 10.0 / span;
    Rng jitter(derive_seed(seed, 102));
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < m; ++c) y(i, c) += jitter.normal(0.0, 1e-4);
    return y;
}

double clip4(double v) { return std::clamp(v, -4.0, 4.0); }

}  // namespace

double cross_entropy_objective(const FuzzyGraph& graph, const Matrix& y,
                               const std::vector<std::pair<int, int>>& negative_pairs,
                               double a, double b) {
    auto similarity = [&](int i, int j) {
        const double d2 = (y.row(i) - y.row(j)).squaredNorm();
        const double q = 1.0 / (1.0 + a * std::pow(d2, b));
        return std::clamp(q, 1e-12, 1.0 - 1e-12);
    };
    double objective = 0.0;
    for (const auto& edge : graph.edges) {
        const double q = similarity(edge.a, edge.b);
        const double p = std::min(edge.weight, 1.0);
        objective += p * (std::log(p) - std::log(q));
        if (p < 1.0) objective += (1.0 - p) * (std::log1p(-p) - std::log1p(-q));
    }
    for (const auto& [i, j] : negative_pairs) objective += -std::log1p(-similarity(i, j));
    return objective;
}

std::vector<std::pair<int, int>> sample_negative_pairs(const FuzzyGraph& graph,
                                                       std::size_t count, std::uint64_t seed) {
    const int n = graph.n_points;
    std::unordered_set<std::uint64_t> edge_keys;
    for (const auto& edge : graph.edges)
        edge_keys.insert(static_cast<std::uint64_t>(edge.a) * static_cast<std::uint64_t>(n) +
                         static_cast<std::uint64_t>(edge.b));
    Rng rng(seed);
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(count);
    std::size_t attempts = 0;
    const std::size_t max_attempts = 20 * count + 100;
    while (pairs.size() < count && attempts < max_attempts) {
        ++attempts;
        const int i = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
        const int j = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
        if (i == j) continue;
        const int lo = std::min(i, j), hi = std::max(i, j);
        if (edge_keys.count(static_cast<std::uint64_t>(lo) * static_cast<std::uint64_t>(n) +
                            static_cast<std::uint64_t>(hi)))
            continue;
        pairs.emplace_back(lo, hi);
    }
    return pairs;
}

UmapResult optimize_embedding(const FuzzyGraph& graph, const UmapParams& params) {
    const int n = graph.n_points;
    require(n >= 2, "embedding needs at least two points");
    require(!graph.edges.empty(), "fuzzy graph has no edges");
    require(params.n_components >= 1, "n_components must be at least 1");
    require(params.learning_rate > 0.0, "learning_rate must be positive");
    require(params.negative_sample_rate >= 1, "negative_sample_rate must be at least 1");
    require(std::isfinite(params.min_dist) && params.min_dist >= 0.0,
            "min_dist must be finite and >= 0");
    const int n_epochs =
        params.n_epochs > 0 ? params.n_epochs : (n <= 10000 ? 200 : 500);
    const int m = params.n_components;

    UmapResult result;
    std::tie(result.a, result.b) = fit_decay_coefficients(params.min_dist);
    result.embedding = spectral_initialization(graph, m, params.seed);
    Matrix& y = result.embedding;

    struct DirectedEdge {
        int head, tail;
        double next_positive, step_positive;
        double next_negative, step_negative;
    };
    double w_max = 0.0;
    for (const auto& edge : graph.edges) w_max = std::max(w_max, edge.weight);
    std::vector<DirectedEdge> edges;
    edges.reserve(graph.edges.size() * 2);
    for (const auto& edge : graph.edges) {
        const double step = w_max / edge.weight;
        const double neg_step = step / params.negative_sample_rate;
        edges.push_back({edge.a, edge.b, step, step, neg_step, neg_step});
        edges.push_back({edge.b, edge.a, step, step, neg_step, neg_step});
    }

    const auto eval_pairs = sample_negative_pairs(
        graph, graph.edges.size() * static_cast<std::size_t>(params.negative_sample_rate),
        derive_seed(params.seed, 3));
    const int mark = std::max(1, n_epochs / 10);
    result.objective_history.push_back(
        cross_entropy_objective(graph, y, eval_pairs, result.a, result.b));
    result.objective_epochs.push_back(0);

    const double a = result.a, b = result.b;
    long long attempted = 0, skipped = 0;
    auto run_edge = [&](DirectedEdge& edge, int epoch, double alpha, Rng& rng) {
        if (edge.next_positive > epoch) return;
        const int head = edge.head, tail = edge.tail;
        const double d2 = (y.row(head) - y.row(tail)).squaredNorm();
        double coef = 0.0;
        if (d2 > 0.0)
            coef = -2.0 * a * b * std::pow(d2, b - 1.0) / (a * std::pow(d2, b) + 1.0);
        ++attempted;
        if (!std::isfinite(coef)) {
            ++skipped;
        } else {
            for (int c = 0; c < m; ++c) {
                const double g = clip4(coef * (y(head, c) - y(tail, c)));
                y(head, c) += alpha * g;
                y(tail, c) -= alpha * g;
            }
        }
        edge.next_positive += edge.step_positive;
        const int n_negative =
            static_cast<int>((epoch - edge.next_negative) / edge.step_negative);
        for (int t = 0; t < n_negative; ++t) {
            const int other = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
            if (other == head) continue;
            const double dn = (y.row(head) - y.row(other)).squaredNorm();
            ++attempted;
            if (dn > 0.0) {
                const double reject =
                    2.0 * b / ((0.001 + dn) * (a * std::pow(dn, b) + 1.0));
                if (!std::isfinite(reject)) {
                    ++skipped;
                    continue;
                }
                for (int c = 0; c < m; ++c)
                    y(head, c) += alpha * clip4(reject * (y(head, c) - y(other, c)));
            } else {
                for (int c = 0; c < m; ++c) y(head, c) += alpha * 4.0;
            }
        }
        if (n_negative > 0) edge.next_negative += n_negative * edge.step_negative;
    };

    Rng rng(derive_seed(params.seed, 7));
    for (int epoch = 0; epoch < n_epochs; ++epoch) {
        const double alpha =
            params.learning_rate * (1.0 - static_cast<double>(epoch) / n_epochs);
        if (params.parallel_sgd && params.threads > 1) {
            parallel_for_chunks(edges.size(), params.threads,
                                [&](std::size_t begin, std::size_t end) {
                                    Rng chunk_rng(derive_seed(
                                        params.seed,
                                        0x5EED0000ull + static_cast<std::uint64_t>(epoch) * 131 +
                                            begin));
                                    for (std::size_t e = begin; e < end; ++e)
                                        run_edge(edges[e], epoch, alpha, chunk_rng);
                                });
        } else {
            for (auto& edge : edges) run_edge(edge, epoch, alpha, rng);
        }
        if ((epoch + 1) % mark == 0 || epoch + 1 == n_epochs) {
            result.objective_history.push_back(
                cross_entropy_objective(graph, y, eval_pairs, a, b));
            result.objective_epochs.push_back(epoch + 1);
        }
    }
    result.skipped_steps = static_cast<int>(skipped);
    result.flagged = attempted > 0 && skipped * 100 > attempted;
    require(y.allFinite(), "embedding diverged to non-finite coordinates");
    return result;
}

UmapResult umap_fit(const Matrix& x, const UmapParams& params) {
    require(x.rows() >= 2, "umap needs at least two samples");
    require(params.n_neighbors >= 2, "n_neighbors must be at least 2");
    require(params.n_neighbors < x.rows(), "n_neighbors must be below n_samples");
    const auto knn = build_knn_graph(x, params.n_neighbors, params.metric,
                                     derive_seed(params.seed, 11), params.threads);
    const auto graph = fuzzy_weights(knn);
    return optimize_embedding(graph, params);
}

}  // namespace rockcluster
