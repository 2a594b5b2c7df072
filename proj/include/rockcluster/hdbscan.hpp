#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rockcluster/distance.hpp"
#include "rockcluster/linalg.hpp"
#include "rockcluster/partition.hpp"

namespace rockcluster {

struct HdbscanParams {
    int min_cluster_size = 5;
    std::optional<int> min_samples;  // unset: use min_cluster_size
    double cluster_selection_epsilon = 0.0;
    Metric metric = Metric::Euclidean;
    int threads = 1;
};

struct MstEdge {
    int from = 0;
    int to = 0;
    double weight = 0.0;
};

// One condensed-tree row describing the child entity. Point children (child <
// n_points) exist from their parent's birth and depart at lambda_death;
// cluster children are born at lambda_birth when the parent splits. Densities
// are lambda = 1/distance, capped at 1e15.
struct CondensedRow {
    int parent = 0;
    int child = 0;
    bool child_is_cluster = false;
    double lambda_birth = 0.0;
    double lambda_death = 0.0;
    int size = 1;
};

struct ClusterInfo {
    int id = 0;
    int parent = -1;  // -1 for the root
    double lambda_birth = 0.0;
    double lambda_death = 0.0;
    double stability = 0.0;
    int n_points = 0;
    bool selected = false;
};

struct CondensedTree {
    int n_points = 0;
    std::vector<CondensedRow> rows;
    std::vector<ClusterInfo> clusters;  // ordered by id; clusters[0] is the root
};

struct HdbscanResult {
    std::vector<int> labels;  // -1 marks noise
    int n_clusters = 0;
    std::vector<std::uint8_t> outlier;  // 1 where labels[i] == -1
    std::vector<MstEdge> mst;           // mutual-reachability spanning tree
    CondensedTree tree;
};

// Density level for a mutual-reachability distance.
inline double density_level(double distance) {
    return distance > 1e-15 ? 1.0 / distance : 1e15;
}

// Distance from each point to its min_samples-th nearest other point.
std::vector<double> core_distances(const Matrix& x, int min_samples, Metric metric,
                                   int threads = 1);

// Spanning tree of the implicit mutual-reachability graph (Prim, distances
// evaluated on the fly; ties take the lowest point index).
std::vector<MstEdge> mutual_reachability_mst(const Matrix& x,
                                             const std::vector<double>& core, Metric metric);

// Single-linkage merge tree over the spanning-tree edges, sorted by
// (weight, from, to). Ids follow the dendrogram convention: points 0..n-1,
// merge m creates id n+m.
std::vector<DendrogramRow> mst_single_linkage(std::vector<MstEdge> edges, int n_points);

// Full pipeline: reachability tree, condensation at min_cluster_size,
// excess-of-mass selection (the root is eligible only when the condensed tree
// has no other cluster), epsilon merging, and noise labeling.
HdbscanResult hdbscan_cluster(const Matrix& x, const HdbscanParams& params);

std::string condensed_tree_to_json(const CondensedTree& tree);

}  // namespace rockcluster
