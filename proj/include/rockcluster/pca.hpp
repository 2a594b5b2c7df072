#pragma once

#include "rockcluster/linalg.hpp"

namespace rockcluster {

// Principal component analysis via eigendecomposition of the sample
// covariance matrix (n-1 denominator). Components are returned as rows,
// ordered by non-increasing explained variance, each oriented so that its
// entry of largest absolute value is positive (first such entry on ties).
struct PcaModel {
    Vector mean;                       // d
    Matrix components;                 // n_components x d, orthonormal rows
    Vector explained_variance;         // n_components, non-increasing
    Vector explained_variance_ratio;   // n_components, fractions of total variance

    Eigen::Index n_components() const { return components.rows(); }
};

PcaModel fit_pca(const Matrix& x, int n_components);

// Projects rows onto the components after centering: (x - mean) * components^T.
Matrix transform_pca(const PcaModel& model, const Matrix& x);

// Maps projected rows back into the original space: y * components + mean.
Matrix inverse_transform_pca(const PcaModel& model, const Matrix& y);

}  // namespace rockcluster
