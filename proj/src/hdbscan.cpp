#include "rockcluster/hdbscan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <set>

#include <json.hpp>

#include "rockcluster/common.hpp"
#include "rockcluster/parallel.hpp"

namespace rockcluster {

std::vector<double> core_distances(const Matrix& x, int min_samples, Metric metric,
                                   int threads) {
    const Eigen::Index n = x.rows();
    require(min_samples >= 1, "min_samples must be at least 1");
    require(min_samples <= n - 1, "min_samples must leave at least one other point");
    std::vector<double> core(static_cast<std::size_t>(n), 0.0);
    parallel_for_chunks(static_cast<std::size_t>(n), threads, [&](std::size_t begin,
                                                                  std::size_t end) {
        std::vector<double> dists(static_cast<std::size_t>(n) - 1);
        for (std::size_t i = begin; i < end; ++i) {
            std::size_t w = 0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (static_cast<std::size_t>(j) == i) continue;
                dists[w++] = row_distance(x, static_cast<Eigen::Index>(i), j, metric);
            }
            auto kth = dists.begin() + (min_samples - 1);
            std::nth_element(dists.begin(), kth, dists.end());
            core[i] = *kth;
        }
    });
    return core;
}

std::vector<MstEdge> mutual_reachability_mst(const Matrix& x,
                                             const std::vector<double>& core, Metric metric) {
    const Eigen::Index n = x.rows();
    require(n >= 2, "spanning tree needs at least two points");
    require(core.size() == static_cast<std::size_t>(n), "core distance size mismatch");
    auto reach = [&](Eigen::Index a, Eigen::Index b) {
        const double d = row_distance(x, a, b, metric);
        return std::max({core[static_cast<std::size_t>(a)], core[static_cast<std::size_t>(b)],
                         d});
    };
    std::vector<std::uint8_t> visited(static_cast<std::size_t>(n), 0);
    std::vector<double> best(static_cast<std::size_t>(n),
                             std::numeric_limits<double>::infinity());
    std::vector<int> from(static_cast<std::size_t>(n), 0);
    visited[0] = 1;
    for (Eigen::Index v = 1; v < n; ++v) best[static_cast<std::size_t>(v)] = reach(0, v);
    std::vector<MstEdge> edges;
    edges.reserve(static_cast<std::size_t>(n - 1));
    for (Eigen::Index step = 1; step < n; ++step) {
        Eigen::Index pick = -1;
        double low = std::numeric_limits<double>::infinity();
        for (Eigen::Index v = 0; v < n; ++v) {
            if (visited[static_cast<std::size_t>(v)]) continue;
            if (best[static_cast<std::size_t>(v)] < low) {
                low = best[static_cast<std::size_t>(v)];
                pick = v;
            }
        }
        visited[static_cast<std::size_t>(pick)] = 1;
        edges.push_back({from[static_cast<std::size_t>(pick)], static_cast<int>(pick), low});
        for (Eigen::Index v = 0; v < n; ++v) {
            if (visited[static_cast<std::size_t>(v)]) continue;
            const double d = reach(pick, v);
            if (d < best[static_cast<std::size_t>(v)]) {
                best[static_cast<std::size_t>(v)] = d;
                from[static_cast<std::size_t>(v)] = static_cast<int>(pick);
            }
        }
    }
    return edges;
}

std::vector<DendrogramRow> mst_single_linkage(std::vector<MstEdge> edges, int n_points) {
    require(static_cast<int>(edges.size()) == n_points - 1,
            "spanning tree must have n_points - 1 edges");
    std::sort(edges.begin(), edges.end(), [](const MstEdge& a, const MstEdge& b) {
        if (a.weight != b.weight) return a.weight < b.weight;
        if (a.from != b.from) return a.from < b.from;
        return a.to < b.to;
    });
    std::vector<int> root(static_cast<std::size_t>(2 * n_points - 1));
    std::iota(root.begin(), root.end(), 0);
    std::vector<int> count(root.size(), 1);
    auto find = [&](int v) {
        while (root[static_cast<std::size_t>(v)] != v)
            v = root[static_cast<std::size_t>(v)] =
                root[static_cast<std::size_t>(root[static_cast<std::size_t>(v)])];
        return v;
    };
    std::vector<DendrogramRow> rows;
    rows.reserve(edges.size());
    int next_id = n_points;
    for (const auto& edge : edges) {
        const int ra = find(edge.from);
        const int rb = find(edge.to);
        const int size = count[static_cast<std::size_t>(ra)] + count[static_cast<std::size_t>(rb)];
        rows.push_back({std::min(ra, rb), std::max(ra, rb), edge.weight, size});
        root[static_cast<std::size_t>(ra)] = next_id;
        root[static_cast<std::size_t>(rb)] = next_id;
        count[static_cast<std::size_t>(next_id)] = size;
        ++next_id;
    }
    return rows;
}

namespace {

struct TreeBuild {
    CondensedTree tree;
    std::vector<int> attachment;  // point -> parent cluster of its departure row
};

// Top-down condensation: splits where both sides reach min_cluster_size create
// child clusters; smaller branches fall out as points at the split level.
TreeBuild condense(const std::vector<DendrogramRow>& linkage, int n, int min_cluster_size) {
    const int total = 2 * n - 1;
    std::vector<int> left(static_cast<std::size_t>(total), -1);
    std::vector<int> right(static_cast<std::size_t>(total), -1);
    std::vector<int> count(static_cast<std::size_t>(total), 1);
    std::vector<double> height(static_cast<std::size_t>(total), 0.0);
    for (std::size_t m = 0; m < linkage.size(); ++m) {
        const int id = n + static_cast<int>(m);
        left[static_cast<std::size_t>(id)] = linkage[m].left;
        right[static_cast<std::size_t>(id)] = linkage[m].right;
        count[static_cast<std::size_t>(id)] = linkage[m].size;
        height[static_cast<std::size_t>(id)] = linkage[m].height;
    }
    auto leaves_under = [&](int node, std::vector<int>& out) {
        std::vector<int> stack{node};
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            if (v < n) {
                out.push_back(v);
                continue;
            }
            stack.push_back(left[static_cast<std::size_t>(v)]);
            stack.push_back(right[static_cast<std::size_t>(v)]);
        }
    };

    TreeBuild build;
    build.tree.n_points = n;
    build.attachment.assign(static_cast<std::size_t>(n), n);
    std::vector<double> birth{0.0};   // per cluster, index id - n
    std::vector<double> death{0.0};
    std::vector<int> parent_of{-1};
    std::vector<int> points_of{n};
    int next_cluster = n + 1;

    std::queue<std::pair<int, int>> queue;  // (linkage node, cluster id)
    queue.push({n + static_cast<int>(linkage.size()) - 1, n});
    std::vector<int> dropped;
    while (!queue.empty()) {
        auto [node, cluster] = queue.front();
        queue.pop();
        while (true) {
            const int l = left[static_cast<std::size_t>(node)];
            const int r = right[static_cast<std::size_t>(node)];
            const double lambda = density_level(height[static_cast<std::size_t>(node)]);
            const int cl = count[static_cast<std::size_t>(l)];
            const int cr = count[static_cast<std::size_t>(r)];
            if (cl >= min_cluster_size && cr >= min_cluster_size) {
                for (const int side : {l, r}) {
                    const int child = next_cluster++;
                    birth.push_back(lambda);
                    death.push_back(lambda);
                    parent_of.push_back(cluster);
                    points_of.push_back(count[static_cast<std::size_t>(side)]);
                    build.tree.rows.push_back({cluster, child, true, lambda, lambda,
                                               count[static_cast<std::size_t>(side)]});
                    queue.push({side, child});
                }
                death[static_cast<std::size_t>(cluster - n)] = lambda;
                break;
            }
            if (cl < min_cluster_size && cr < min_cluster_size) {
                dropped.clear();
                leaves_under(node, dropped);
                std::sort(dropped.begin(), dropped.end());
                for (const int p : dropped) {
                    build.tree.rows.push_back(
                        {cluster, p, false, birth[static_cast<std::size_t>(cluster - n)],
                         lambda, 1});
                    build.attachment[static_cast<std::size_t>(p)] = cluster;
                }
                death[static_cast<std::size_t>(cluster - n)] = lambda;
                break;
            }
            const int dying = cl < min_cluster_size ? l : r;
            const int surviving = cl < min_cluster_size ? r : l;
            dropped.clear();
            leaves_under(dying, dropped);
            std::sort(dropped.begin(), dropped.end());
            for (const int p : dropped) {
                build.tree.rows.push_back(
                    {cluster, p, false, birth[static_cast<std::size_t>(cluster - n)], lambda,
                     1});
                build.attachment[static_cast<std::size_t>(p)] = cluster;
            }
            death[static_cast<std::size_t>(cluster - n)] = lambda;
            node = surviving;
        }
    }

    const int n_clusters = next_cluster - n;
    build.tree.clusters.resize(static_cast<std::size_t>(n_clusters));
    for (int c = 0; c < n_clusters; ++c) {
        auto& info = build.tree.clusters[static_cast<std::size_t>(c)];
        info.id = n + c;
        info.parent = parent_of[static_cast<std::size_t>(c)];
        info.lambda_birth = birth[static_cast<std::size_t>(c)];
        info.lambda_death = death[static_cast<std::size_t>(c)];
        info.n_points = points_of[static_cast<std::size_t>(c)];
    }
    // cluster rows carry the child's own death level once it is known
    for (auto& row : build.tree.rows)
        if (row.child_is_cluster)
            row.lambda_death = build.tree.clusters[static_cast<std::size_t>(row.child - n)]
                                   .lambda_death;
    // stability of c accumulates (departure - birth of c) over its rows
    for (const auto& row : build.tree.rows) {
        auto& parent = build.tree.clusters[static_cast<std::size_t>(row.parent - n)];
        const double level = row.child_is_cluster ? row.lambda_birth : row.lambda_death;
        parent.stability += (level - parent.lambda_birth) * row.size;
    }
    return build;
}

}  // namespace

HdbscanResult hdbscan_cluster(const Matrix& x, const HdbscanParams& params) {
    const Eigen::Index n = x.rows();
    require(n >= 1, "clustering needs at least one sample");
    require(params.min_cluster_size >= 2, "min_cluster_size must be at least 2");
    require(n >= params.min_cluster_size,
            "n_samples must be at least min_cluster_size");
    const int min_samples = params.min_samples.value_or(params.min_cluster_size);
    require(params.cluster_selection_epsilon >= 0.0,
            "cluster_selection_epsilon must be non-negative");

    HdbscanResult result;
    const auto core = core_distances(x, min_samples, params.metric, params.threads);
    result.mst = mutual_reachability_mst(x, core, params.metric);
    const auto linkage = mst_single_linkage(result.mst, static_cast<int>(n));
    auto build = condense(linkage, static_cast<int>(n), params.min_cluster_size);
    result.tree = std::move(build.tree);
    auto& clusters = result.tree.clusters;
    const int root = static_cast<int>(n);

    // Excess-of-mass: a cluster beats its children when its own stability is
    // at least the sum of their best subtree values. The root competes only
    // when it is the whole tree.
    std::map<int, std::vector<int>> kids;
    for (const auto& info : clusters)
        if (info.parent >= 0) kids[info.parent].push_back(info.id);
    std::set<int> tentative;
    std::map<int, double> sigma;
    for (auto it = clusters.rbegin(); it != clusters.rend(); ++it) {
        if (it->id == root) continue;
        double subtree = 0.0;
        for (const int k : kids[it->id]) subtree += sigma[k];
        if (kids[it->id].empty() || it->stability >= subtree) {
            tentative.insert(it->id);
            sigma[it->id] = it->stability;
        } else {
            sigma[it->id] = subtree;
        }
    }
    std::set<int> selected;
    if (clusters.size() == 1) {
        selected.insert(root);
    } else {
        auto has_tentative_ancestor = [&](int id) {
            int cur = clusters[static_cast<std::size_t>(id - root)].parent;
            while (cur >= 0) {
                if (tentative.count(cur)) return true;
                cur = clusters[static_cast<std::size_t>(cur - root)].parent;
            }
            return false;
        };
        for (const int id : tentative)
            if (!has_tentative_ancestor(id)) selected.insert(id);
    }

    // Children born closer than epsilon to their parent's split merge upward
    // into the first ancestor born at or beyond epsilon (never the root).
    if (params.cluster_selection_epsilon > 0.0 && !selected.count(root)) {
        const double eps = params.cluster_selection_epsilon;
        auto birth_distance = [&](int id) {
            return 1.0 / clusters[static_cast<std::size_t>(id - root)].lambda_birth;
        };
        std::set<int> merged;
        for (const int id : selected) {
            if (birth_distance(id) >= eps) {
                merged.insert(id);
                continue;
            }
            int cur = id;
            while (true) {
                const int parent = clusters[static_cast<std::size_t>(cur - root)].parent;
                if (parent == root) break;
                cur = parent;
                if (birth_distance(cur) >= eps) break;
            }
            merged.insert(cur);
        }
        auto has_selected_ancestor = [&](int id) {
            int cur = clusters[static_cast<std::size_t>(id - root)].parent;
            while (cur >= 0) {
                if (merged.count(cur)) return true;
                cur = clusters[static_cast<std::size_t>(cur - root)].parent;
            }
            return false;
        };
        selected.clear();
        for (const int id : merged)
            if (!has_selected_ancestor(id)) selected.insert(id);
    }

    for (auto& info : clusters) info.selected = selected.count(info.id) > 0;

    std::map<int, int> dense;
    for (const int id : selected) dense.emplace(id, static_cast<int>(dense.size()));
    result.n_clusters = static_cast<int>(dense.size());
    result.labels.assign(static_cast<std::size_t>(n), -1);
    result.outlier.assign(static_cast<std::size_t>(n), 1);
    for (Eigen::Index p = 0; p < n; ++p) {
        int cur = build.attachment[static_cast<std::size_t>(p)];
        while (cur >= 0) {
            const auto hit = dense.find(cur);
            if (hit != dense.end()) {
                result.labels[static_cast<std::size_t>(p)] = hit->second;
                result.outlier[static_cast<std::size_t>(p)] = 0;
                break;
            }
            cur = clusters[static_cast<std::size_t>(cur - root)].parent;
        }
    }
    return result;
}

std::string condensed_tree_to_json(const CondensedTree& tree) {
    nlohmann::json doc;
    doc["n_points"] = tree.n_points;
    auto& rows = doc["rows"] = nlohmann::json::array();
    for (const auto& row : tree.rows) {
        rows.push_back({{"parent", row.parent},
                        {"child", row.child},
                        {"child_is_cluster", row.child_is_cluster},
                        {"lambda_birth", row.lambda_birth},
                        {"lambda_death", row.lambda_death},
                        {"size", row.size}});
    }
    auto& clusters = doc["clusters"] = nlohmann::json::array();
    for (const auto& info : tree.clusters) {
        clusters.push_back({{"id", info.id},
                            {"parent", info.parent},
                            {"lambda_birth", info.lambda_birth},
                            {"lambda_death", info.lambda_death},
                            {"stability", info.stability},
                            {"n_points", info.n_points},
                            {"selected", info.selected}});
    }
    return doc.dump(2);
}

}  // namespace rockcluster
