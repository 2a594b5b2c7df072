#pragma once

#include <string>

#include "rockcluster/linalg.hpp"

namespace rockcluster {

enum class ScalerKind { MinMax, Standard, Robust };

const std::string& to_string(ScalerKind kind);
ScalerKind scaler_from_string(const std::string& name);

// Fitted per-column affine map (x - offset) / scale.
//   minmax:   offset = column min,    scale = max - min
//   standard: offset = column mean,   scale = population standard deviation
//   robust:   offset = column median, scale = interquartile range
// Zero-spread columns store scale 1, which maps every value of such a column
// to exactly 0.
struct ScalerSpec {
    ScalerKind kind = ScalerKind::MinMax;
    Vector offset;
    Vector scale;

    Eigen::Index dimensions() const { return offset.size(); }
};

ScalerSpec fit_scaler(const Matrix& x, ScalerKind kind);
Matrix transform(const ScalerSpec& spec, const Matrix& x);

// Quantile with linear interpolation between order statistics, q in [0, 1].
double quantile(std::vector<double> xs, double q);

}  // namespace rockcluster
