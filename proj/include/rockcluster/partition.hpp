#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rockcluster/distance.hpp"
#include "rockcluster/linalg.hpp"

namespace rockcluster {

// ----------------------------------------------------------------- k-means

enum class KmeansInit { PlusPlus, Random };

KmeansInit kmeans_init_from_name(const std::string& name);
const char* kmeans_init_name(KmeansInit init);

struct KmeansParams {
    int n_clusters = 8;
    KmeansInit init = KmeansInit::PlusPlus;
    int max_iter = 300;
    int n_init = 10;
    double tol = 1e-4;  // convergence when max center movement < tol
    std::uint64_t seed = 0;
    int threads = 1;  // restarts are independent; result identical for any value
};

struct KmeansResult {
    std::vector<int> labels;  // dense ids 0..n_clusters-1; never -1
    Matrix centers;           // one row per realized cluster
    double inertia = 0.0;
    int n_clusters = 0;  // realized count (ids left empty by repair are compacted)
    int n_iter = 0;      // update passes of the winning restart
    int best_restart = 0;
    std::vector<double> restart_inertias;    // final inertia of every restart
    std::vector<double> iteration_inertias;  // winning restart, one per assignment pass
};

// Lloyd iterations with best-of-n_init restarts. Restart r draws from a fresh
// generator seeded with seed+r; ties on inertia keep the earlier restart.
// Seeding draws: k-means++ takes one index draw for the first center and one
// weighted draw per further center (no draw when all remaining distances are
// zero: the lowest unchosen index is taken); random init performs a partial
// Fisher-Yates shuffle consuming one index draw per center. Empty clusters are
// repaired without consuming randomness: each takes the point farthest from
// its assigned center.
KmeansResult kmeans(const Matrix& x, const KmeansParams& params);

// ----------------------------------------------------- agglomerative merging

enum class Linkage { Ward, Complete, Average, Single };

Linkage linkage_from_name(const std::string& name);
const char* linkage_name(Linkage linkage);

struct AgglomerativeParams {
    int n_clusters = 2;
    Linkage linkage = Linkage::Ward;
    Metric metric = Metric::Euclidean;  // ward accepts euclidean only
};

// One merge step. Ids 0..n-1 are the input points; merge m creates id n+m.
struct DendrogramRow {
    int left = 0;
    int right = 0;
    double height = 0.0;
    int size = 0;  // points in the merged cluster
};

struct AgglomerativeResult {
    std::vector<int> labels;  // dense ids ordered by first point occurrence
    int n_clusters = 0;
    std::vector<DendrogramRow> dendrogram;  // all n-1 merges
};

// Greedy pairwise merging. Each step joins the pair with the smallest linkage
// value; exact ties break on the lexicographically smallest (left, right) id
// pair. Ward runs the variance-increase update on squared euclidean distances
// and reports heights on the distance scale, so two singletons merge at their
// euclidean distance.
AgglomerativeResult agglomerative(const Matrix& x, const AgglomerativeParams& params);

// Flat labels from the first n_samples-k merges of a full dendrogram.
std::vector<int> cut_dendrogram(const std::vector<DendrogramRow>& dendrogram, int n_samples,
                                int k);

}  // namespace rockcluster
