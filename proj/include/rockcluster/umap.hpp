#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rockcluster/distance.hpp"
#include "rockcluster/linalg.hpp"

namespace rockcluster {

struct UmapParams {
    int n_neighbors = 15;
    double min_dist = 0.1;
    int n_components = 2;
    Metric metric = Metric::Euclidean;
    int n_epochs = 0;  // 0 picks 200 for N <= 10000, 500 above
    double learning_rate = 1.0;
    int negative_sample_rate = 5;
    std::uint64_t seed = 0;
    int threads = 1;
    bool parallel_sgd = false;  // opt-in; racy updates, not bit-reproducible
};

struct KnnGraph {
    // neighbors[i] holds the n_neighbors nearest other points, ascending by
    // (distance, index); distances[i] aligns with it.
    std::vector<std::vector<int>> neighbors;
    std::vector<std::vector<double>> distances;
};

// Exact all-pairs search up to 4096 points; above that a random-projection
// forest refined by two neighbor-of-neighbor passes (seeded, deterministic).
KnnGraph build_knn_graph(const Matrix& x, int n_neighbors, Metric metric, std::uint64_t seed,
                         int threads = 1);

struct FuzzyEdge {
    int a = 0;  // a < b
    int b = 0;
    double weight = 0.0;  // union weight in (0, 1]
};

struct FuzzyGraph {
    int n_points = 0;
    std::vector<double> rho;    // distance to nearest neighbor
    std::vector<double> sigma;  // local bandwidth from the bisection solve
    std::vector<std::vector<int>> neighbors;
    std::vector<std::vector<double>> memberships;  // directed kernel values
    std::vector<FuzzyEdge> edges;                  // symmetrized, sorted by (a, b)
};

// Directed kernel exp(-max(0, d - rho_i)/sigma_i) with sigma_i solved so the
// row sums to log2(k); rows whose neighbors all sit at distance 0 skip the
// solve and get weight 1. Symmetrization is the probabilistic union
// p + p' - p*p'.
FuzzyGraph fuzzy_weights(const KnnGraph& knn);

// Least-squares fit of (1 + a*d^(2b))^-1 to the curve that is 1 below
// min_dist and exp(-(d - min_dist)) beyond, on d in [0, 3].
std::pair<double, double> fit_decay_coefficients(double min_dist);

struct UmapResult {
    Matrix embedding;  // N x n_components
    std::vector<double> objective_history;
    std::vector<int> objective_epochs;  // epoch checkpoint per history entry
    double a = 0.0;
    double b = 0.0;
    int skipped_steps = 0;
    bool flagged = false;  // more than 1% of steps skipped on non-finite math
};

// Sampled cross-entropy between graph weights and embedding similarities:
// edge terms p*log(p/q) + (1-p)*log((1-p)/(1-q)) plus -log(1-q) over the
// supplied non-edge pairs.
double cross_entropy_objective(const FuzzyGraph& graph, const Matrix& y,
                               const std::vector<std::pair<int, int>>& negative_pairs,
                               double a, double b);

// Seeded unordered pairs that avoid graph edges, for objective estimates.
std::vector<std::pair<int, int>> sample_negative_pairs(const FuzzyGraph& graph,
                                                       std::size_t count, std::uint64_t seed);

// Spectral initialization plus stochastic gradient descent over edge samples
// with negative sampling; learning rate decays linearly to zero.
UmapResult optimize_embedding(const FuzzyGraph& graph, const UmapParams& params);

// build_knn_graph + fuzzy_weights + optimize_embedding.
UmapResult umap_fit(const Matrix& x, const UmapParams& params);

}  // namespace rockcluster
