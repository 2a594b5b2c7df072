#include "rockcluster/pca.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "rockcluster/common.hpp"

namespace rockcluster {

PcaModel fit_pca(const Matrix& x, int n_components) {
    require(x.rows() >= 2, "fit_pca: needs at least 2 samples");
    require(n_components >= 1 && n_components <= x.cols(),
            "fit_pca: n_components must be in [1, " + std::to_string(x.cols()) + "]");

    PcaModel model;
    model.mean = x.colwise().mean();
    const Matrix centered = x.rowwise() - model.mean.transpose();
    const Eigen::MatrixXd covariance =
        (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance);
    require(solver.info() == Eigen::Success, "fit_pca: eigendecomposition failed");

    // SelfAdjointEigenSolver sorts eigenvalues ascending; take the top ones.
    const Eigen::Index d = x.cols();
    const Eigen::Index k = n_components;
    double total_variance = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) total_variance += std::max(0.0, solver.eigenvalues()[j]);

    model.components.resize(k, d);
    model.explained_variance.resize(k);
    model.explained_variance_ratio.resize(k);
    for (Eigen::Index c = 0; c < k; ++c) {
        const Eigen::Index source = d - 1 - c;
        Vector component = solver.eigenvectors().col(source);
        Eigen::Index pivot = 0;
        component.cwiseAbs().maxCoeff(&pivot);
        if (component[pivot] < 0.0) component = -component;
        model.components.row(c) = component.transpose();
        // Round tiny negative eigenvalues of rank-deficient covariances up to 0.
        model.explained_variance[c] = std::max(0.0, solver.eigenvalues()[source]);
        model.explained_variance_ratio[c] =
            total_variance > 0.0 ? model.explained_variance[c] / total_variance : 0.0;
    }
    return model;
}

Matrix transform_pca(const PcaModel& model, const Matrix& x) {
    require(x.cols() == model.mean.size(),
            "transform_pca: matrix has " + std::to_string(x.cols()) +
                " columns, model was fitted on " + std::to_string(model.mean.size()));
    return (x.rowwise() - model.mean.transpose()) * model.components.transpose();
}

Matrix inverse_transform_pca(const PcaModel& model, const Matrix& y) {
    require(y.cols() == model.n_components(),
            "inverse_transform_pca: matrix has " + std::to_string(y.cols()) +
                " columns, model keeps " + std::to_string(model.n_components()) + " components");
    return (y * model.components).rowwise() + model.mean.transpose();
}

}  // namespace rockcluster
