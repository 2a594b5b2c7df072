#include "rockcluster/scaling.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "rockcluster/common.hpp"

namespace rockcluster {

namespace {
const std::array<std::string, 3> kScalerNames = {"minmax", "standard", "robust"};
}

const std::string& to_string(ScalerKind kind) { return kScalerNames[static_cast<int>(kind)]; }

ScalerKind scaler_from_string(const std::string& name) {
    for (std::size_t i = 0; i < kScalerNames.size(); ++i)
        if (kScalerNames[i] == name) return static_cast<ScalerKind>(i);
    fail("unknown scaler: " + name);
}

double quantile(std::vector<double> xs, double q) {
    require(!xs.empty(), "quantile: empty series");
    require(q >= 0.0 && q <= 1.0, "quantile: q must be in [0, 1]");
    std::sort(xs.begin(), xs.end());
    const double position = q * static_cast<double>(xs.size() - 1);
    const auto lower = static_cast<std::size_t>(std::floor(position));
    const auto upper = static_cast<std::size_t>(std::ceil(position));
    if (lower == upper) return xs[lower];
    const double t = position - static_cast<double>(lower);
    return xs[lower] + t * (xs[upper] - xs[lower]);
}

ScalerSpec fit_scaler(const Matrix& x, ScalerKind kind) {
    require(x.rows() >= 1 && x.cols() >= 1, "fit_scaler: empty matrix");
    ScalerSpec spec;
    spec.kind = kind;
    spec.offset.resize(x.cols());
    spec.scale.resize(x.cols());
    const auto n = static_cast<double>(x.rows());
    std::vector<double> column(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        switch (kind) {
            case ScalerKind::MinMax: {
                const double lo = x.col(j).minCoeff();
                const double hi = x.col(j).maxCoeff();
                spec.offset[j] = lo;
                spec.scale[j] = hi - lo;
                break;
            }
            case ScalerKind::Standard: {
                const double mu = x.col(j).mean();
                const double var = (x.col(j).array() - mu).square().sum() / n;
                spec.offset[j] = mu;
                spec.scale[j] = std::sqrt(var);
                break;
            }
            case ScalerKind::Robust: {
                for (Eigen::Index i = 0; i < x.rows(); ++i)
                    column[static_cast<std::size_t>(i)] = x(i, j);
                spec.offset[j] = quantile(column, 0.5);
                spec.scale[j] = quantile(column, 0.75) - quantile(column, 0.25);
                break;
            }
        }
        if (spec.scale[j] == 0.0) spec.scale[j] = 1.0;
    }
    return spec;
}

Matrix transform(const ScalerSpec& spec, const Matrix& x) {
    require(x.cols() == spec.dimensions(),
            "transform: matrix has " + std::to_string(x.cols()) + " columns, scaler was fitted on " +
                std::to_string(spec.dimensions()));
    Matrix out = x;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        out.col(j) = (x.col(j).array() - spec.offset[j]) / spec.scale[j];
    return out;
}

}  // namespace rockcluster
