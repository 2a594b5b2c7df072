#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "rockcluster/common.hpp"
#include "rockcluster/linalg.hpp"

namespace rockcluster {

enum class Metric { Euclidean, Manhattan, Chebyshev, Cosine };

inline const std::string& to_string(Metric m) {
    static const std::string names[] = {"euclidean", "manhattan", "chebyshev", "cosine"};
    return names[static_cast<int>(m)];
}

inline Metric metric_from_string(const std::string& s) {
    if (s == "euclidean") return Metric::Euclidean;
    if (s == "manhattan") return Metric::Manhattan;
    if (s == "chebyshev") return Metric::Chebyshev;
    if (s == "cosine") return Metric::Cosine;
    fail("unknown metric: " + s);
}

inline double squared_euclidean(const double* a, const double* b, std::size_t d) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double diff = a[i] - b[i];
        acc += diff * diff;
    }
    return acc;
}

// Cosine distance is 1 - cosine similarity; a zero vector has similarity 0
// to everything, so its distance is 1 even to another zero vector.
inline double cosine_distance(const double* a, const double* b, std::size_t d) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 1.0;
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double distance(const double* a, const double* b, std::size_t d, Metric metric) {
    switch (metric) {
        case Metric::Euclidean:
            return std::sqrt(squared_euclidean(a, b, d));
        case Metric::Manhattan: {
            double acc = 0.0;
            for (std::size_t i = 0; i < d; ++i) acc += std::fabs(a[i] - b[i]);
            return acc;
        }
        case Metric::Chebyshev: {
            double acc = 0.0;
            for (std::size_t i = 0; i < d; ++i) acc = std::max(acc, std::fabs(a[i] - b[i]));
            return acc;
        }
        case Metric::Cosine:
            return cosine_distance(a, b, d);
    }
    fail("unreachable metric");
}

inline double row_distance(const Matrix& x, Eigen::Index i, Eigen::Index j, Metric metric) {
    return distance(x.data() + i * x.cols(), x.data() + j * x.cols(),
                    static_cast<std::size_t>(x.cols()), metric);
}

}  // namespace rockcluster
