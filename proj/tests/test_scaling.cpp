#include <doctest.h>

#include "oracles.hpp"
#include "rockcluster/scaling.hpp"

using namespace rockcluster;

TEST_SUITE("scaling") {

TEST_CASE("scaler names round-trip") {
    for (const auto kind : {ScalerKind::MinMax, ScalerKind::Standard, ScalerKind::Robust})
        CHECK(scaler_from_string(to_string(kind)) == kind);
    CHECK_THROWS_AS(scaler_from_string("maxabs"), Error);
}

TEST_CASE("minmax maps [0,5,10] onto [0,0.5,1]") {
    Matrix x(3, 1);
    x << 0.0, 5.0, 10.0;
    const auto spec = fit_scaler(x, ScalerKind::MinMax);
    CHECK(spec.offset[0] == 0.0);
    CHECK(spec.scale[0] == 10.0);
    const auto y = transform(spec, x);
    CHECK(y(0, 0) == doctest::Approx(0.0));
    CHECK(y(1, 0) == doctest::Approx(0.5));
    CHECK(y(2, 0) == doctest::Approx(1.0));
}

TEST_CASE("standard scaler on [2,4] gives [-1,1]") {
    Matrix x(2, 1);
    x << 2.0, 4.0;
    const auto y = transform(fit_scaler(x, ScalerKind::Standard), x);
    CHECK(y(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(y(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constant column stores unit scale and maps to 0 under every scaler") {
    Matrix x(3, 2);
    x << 1.0, 7.0, 2.0, 7.0, 3.0, 7.0;
    for (const auto kind : {ScalerKind::MinMax, ScalerKind::Standard, ScalerKind::Robust}) {
        const auto spec = fit_scaler(x, kind);
        CHECK(spec.scale[1] == 1.0);
        const auto y = transform(spec, x);
        for (int i = 0; i < 3; ++i) CHECK(y(i, 1) == 0.0);
    }
}

TEST_CASE("robust scaler on [1,2,3,4,100] matches the quantile oracle") {
    Matrix x(5, 1);
    x << 1.0, 2.0, 3.0, 4.0, 100.0;
    const std::vector<double> xs = {1, 2, 3, 4, 100};
    const auto spec = fit_scaler(x, ScalerKind::Robust);
    CHECK(spec.offset[0] == doctest::Approx(oracle::quantile_linear(xs, 0.5)).epsilon(1e-12));
    CHECK(spec.scale[0] == doctest::Approx(oracle::quantile_linear(xs, 0.75) -
                                           oracle::quantile_linear(xs, 0.25))
                               .epsilon(1e-12));
    CHECK(spec.offset[0] == doctest::Approx(3.0));
    CHECK(spec.scale[0] == doctest::Approx(2.0));
    const auto y = transform(spec, x);
    CHECK(y(0, 0) == doctest::Approx(-1.0));
    CHECK(y(1, 0) == doctest::Approx(-0.5));
    CHECK(y(2, 0) == doctest::Approx(0.0));
    CHECK(y(3, 0) == doctest::Approx(0.5));
    CHECK(y(4, 0) == doctest::Approx(48.5));
}

TEST_CASE("quantile interpolation matches the oracle on random series") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + static_cast<int>(rng.index(40));
        std::vector<double> xs(static_cast<std::size_t>(n));
        for (auto& v : xs) v = rng.uniform(-100.0, 100.0);
        const double q = rng.uniform();
        CHECK(quantile(xs, q) == doctest::Approx(oracle::quantile_linear(xs, q)).epsilon(1e-9));
    }
}

TEST_CASE("fitted transforms hit their target moments on random data") {
    Rng rng(402);
    Matrix x(40, 5);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            x(i, j) = rng.normal(static_cast<double>(j) * 3.0, 1.0 + static_cast<double>(j));

    SUBCASE("minmax spans [0,1]") {
        const auto y = transform(fit_scaler(x, ScalerKind::MinMax), x);
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            CHECK(y.col(j).minCoeff() == doctest::Approx(0.0).epsilon(1e-9));
            CHECK(y.col(j).maxCoeff() == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    SUBCASE("standard gives zero mean and unit population std") {
        const auto y = transform(fit_scaler(x, ScalerKind::Standard), x);
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            CHECK(y.col(j).mean() == doctest::Approx(0.0).epsilon(1e-9));
            const double var =
                (y.col(j).array() - y.col(j).mean()).square().sum() / static_cast<double>(y.rows());
            CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    SUBCASE("robust gives zero median and unit IQR") {
        const auto y = transform(fit_scaler(x, ScalerKind::Robust), x);
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            std::vector<double> col(static_cast<std::size_t>(y.rows()));
            for (Eigen::Index i = 0; i < y.rows(); ++i) col[static_cast<std::size_t>(i)] = y(i, j);
            CHECK(oracle::quantile_linear(col, 0.5) == doctest::Approx(0.0).epsilon(1e-9));
            CHECK(oracle::quantile_linear(col, 0.75) - oracle::quantile_linear(col, 0.25) ==
                  doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("transforms are monotone per column") {
    Rng rng(88);
    Matrix x(30, 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = rng.uniform(-5.0, 5.0);
    for (const auto kind : {ScalerKind::MinMax, ScalerKind::Standard, ScalerKind::Robust}) {
        const auto y = transform(fit_scaler(x, kind), x);
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index j = 0; j < x.rows(); ++j)
                if (x(i, 0) < x(j, 0)) CHECK(y(i, 0) < y(j, 0));
    }
}

TEST_CASE("refitting minmax on data spanning [0,1] is the identity") {
    Matrix x(4, 2);
    x << 0.0, 1.0, 0.25, 0.0, 0.75, 0.5, 1.0, 0.125;
    const auto spec = fit_scaler(x, ScalerKind::MinMax);
    const auto y = transform(spec, x);
    const auto spec2 = fit_scaler(y, ScalerKind::MinMax);
    const auto z = transform(spec2, y);
    CHECK((z - y).cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("dimension mismatch and empty input raise errors") {
    Matrix x(3, 2);
    x.setZero();
    const auto spec = fit_scaler(x, ScalerKind::MinMax);
    Matrix wrong(3, 4);
    wrong.setZero();
    CHECK_THROWS_AS(transform(spec, wrong), Error);
    Matrix empty(0, 0);
    CHECK_THROWS_AS(fit_scaler(empty, ScalerKind::MinMax), Error);
}

}  // TEST_SUITE
