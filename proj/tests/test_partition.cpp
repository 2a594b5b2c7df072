#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "rockcluster/metrics.hpp"
#include "rockcluster/partition.hpp"

using namespace rockcluster;

namespace {

Matrix random_matrix(Rng& rng, int n, int d, double lo = -10.0, double hi = 10.0) {
    Matrix x(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = rng.uniform(lo, hi);
    return x;
}

oracle::LinkageKind to_oracle(Linkage linkage) {
    switch (linkage) {
        case Linkage::Ward: return oracle::LinkageKind::Ward;
        case Linkage::Complete: return oracle::LinkageKind::Complete;
        case Linkage::Average: return oracle::LinkageKind::Average;
        case Linkage::Single: return oracle::LinkageKind::Single;
    }
    return oracle::LinkageKind::Single;
}

}  // namespace

TEST_SUITE("partition") {

TEST_CASE("kmeans separates two obvious pairs") {
    Matrix x(4, 2);
    x << 0, 0, 0, 1, 10, 0, 10, 1;
    KmeansParams params;
    params.n_clusters = 2;
    params.seed = 7;
    const auto result = kmeans(x, params);
    CHECK(result.labels[0] == result.labels[1]);
    CHECK(result.labels[2] == result.labels[3]);
    CHECK(result.labels[0] != result.labels[2]);
    CHECK(result.inertia == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(result.n_clusters == 2);
    std::set<std::pair<double, double>> centers;
    for (int c = 0; c < 2; ++c) centers.insert({result.centers(c, 0), result.centers(c, 1)});
    CHECK(centers == std::set<std::pair<double, double>>{{0.0, 0.5}, {10.0, 0.5}});
}

TEST_CASE("kmeans with K equal to N has zero inertia") {
    Rng rng(11);
    const Matrix x = random_matrix(rng, 9, 3);
    KmeansParams params;
    params.n_clusters = 9;
    params.seed = 3;
    const auto result = kmeans(x, params);
    CHECK(result.inertia == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(result.n_clusters == 9);
    std::set<int> distinct(result.labels.begin(), result.labels.end());
    CHECK(distinct.size() == 9);
}

TEST_CASE("kmeans rejects impossible parameters") {
    Matrix x(3, 2);
    x << 0, 0, 1, 1, 2, 2;
    KmeansParams params;
    params.n_clusters = 4;
    CHECK_THROWS_AS(kmeans(x, params), Error);
    params.n_clusters = 0;
    CHECK_THROWS_AS(kmeans(x, params), Error);
}

TEST_CASE("kmeans matches the same-seed reference run for both init modes") {
    Rng rng(40591);
    const Matrix x = random_matrix(rng, 40, 3);
    for (const auto init : {KmeansInit::PlusPlus, KmeansInit::Random}) {
        for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
            KmeansParams params;
            params.n_clusters = 3;
            params.init = init;
            params.seed = seed;
            const auto result = kmeans(x, params);
            const auto ref = oracle::kmeans_reference(x, 3, params.n_init, params.max_iter,
                                                      params.tol, seed,
                                                      init == KmeansInit::PlusPlus);
            CHECK(result.inertia == doctest::Approx(ref.inertia).epsilon(1e-9));
            CHECK(adjusted_rand_index(result.labels, ref.labels) ==
                  doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("kmeans restart inertias are reported and the best one wins") {
    Rng rng(52);
    const Matrix x = random_matrix(rng, 30, 2);
    KmeansParams params;
    params.n_clusters = 4;
    params.seed = 17;
    const auto result = kmeans(x, params);
    REQUIRE(result.restart_inertias.size() == 10);
    const double lowest = *std::min_element(result.restart_inertias.begin(),
                                            result.restart_inertias.end());
    CHECK(result.inertia == doctest::Approx(lowest).epsilon(1e-12));
    CHECK(result.restart_inertias[static_cast<std::size_t>(result.best_restart)] ==
          doctest::Approx(result.inertia).epsilon(1e-12));
}

TEST_CASE("kmeans inertia never increases across Lloyd passes") {
    Rng rng(87);
    const Matrix x = random_matrix(rng, 60, 4);
    KmeansParams params;
    params.n_clusters = 5;
    params.seed = 5;
    const auto result = kmeans(x, params);
    REQUIRE(result.iteration_inertias.size() >= 2);
    for (std::size_t i = 1; i < result.iteration_inertias.size(); ++i)
        CHECK(result.iteration_inertias[i] <= result.iteration_inertias[i - 1] + 1e-9);
}

TEST_CASE("kmeans labels survive an exact rigid rotation") {
    Rng rng(301);
    const Matrix x = random_matrix(rng, 30, 3);
    Matrix rotated(30, 3);
    for (int i = 0; i < 30; ++i) {
        // (x, y, z) -> (y, -x, z): a proper rotation with exact arithmetic
        rotated(i, 0) = x(i, 1);
        rotated(i, 1) = -x(i, 0);
        rotated(i, 2) = x(i, 2);
    }
    KmeansParams params;
    params.n_clusters = 3;
    params.seed = 12;
    const auto plain = kmeans(x, params);
    const auto turned = kmeans(rotated, params);
    CHECK(adjusted_rand_index(plain.labels, turned.labels) == doctest::Approx(1.0));
    CHECK(turned.inertia == doctest::Approx(plain.inertia).epsilon(1e-9));
}

TEST_CASE("kmeans result is identical with parallel restarts") {
    Rng rng(999);
    const Matrix x = random_matrix(rng, 50, 3);
    KmeansParams params;
    params.n_clusters = 4;
    params.seed = 8;
    const auto serial = kmeans(x, params);
    params.threads = 4;
    const auto parallel = kmeans(x, params);
    CHECK(serial.labels == parallel.labels);
    CHECK(serial.inertia == parallel.inertia);
    CHECK(serial.best_restart == parallel.best_restart);
}

TEST_CASE("agglomerative single linkage splits the 1-D gap") {
    Matrix x(4, 1);
    x << 0, 1, 10, 11;
    AgglomerativeParams params;
    params.n_clusters = 2;
    params.linkage = Linkage::Single;
    const auto result = agglomerative(x, params);
    CHECK(result.labels == std::vector<int>{0, 0, 1, 1});
    REQUIRE(result.dendrogram.size() == 3);
    CHECK(result.dendrogram[0].left == 0);  // the tied pair (0,1) merges before (2,3)
    CHECK(result.dendrogram[0].right == 1);
    CHECK(result.dendrogram[0].height == doctest::Approx(1.0));
    CHECK(result.dendrogram[2].size == 4);
}

TEST_CASE("agglomerative with K=1 returns one cluster") {
    Rng rng(5);
    const Matrix x = random_matrix(rng, 8, 2);
    AgglomerativeParams params;
    params.n_clusters = 1;
    params.linkage = Linkage::Average;
    const auto result = agglomerative(x, params);
    CHECK(std::set<int>(result.labels.begin(), result.labels.end()) == std::set<int>{0});
}

TEST_CASE("ward requires euclidean") {
    Matrix x(3, 2);
    x << 0, 0, 1, 0, 0, 1;
    AgglomerativeParams params;
    params.linkage = Linkage::Ward;
    params.metric = Metric::Manhattan;
    CHECK_THROWS_WITH_AS(agglomerative(x, params), doctest::Contains("euclidean"), Error);
}

TEST_CASE("ward heights start at plain euclidean distance for singleton merges") {
    Matrix x(2, 2);
    x << 0, 0, 3, 4;
    AgglomerativeParams params;
    params.n_clusters = 1;
    params.linkage = Linkage::Ward;
    const auto result = agglomerative(x, params);
    CHECK(result.dendrogram[0].height == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("agglomerative matches the exhaustive oracle on random 12-point data") {
    Rng rng(7321);
    for (const auto linkage :
         {Linkage::Ward, Linkage::Complete, Linkage::Average, Linkage::Single}) {
        for (const auto metric : {Metric::Euclidean, Metric::Manhattan, Metric::Cosine}) {
            if (linkage == Linkage::Ward && metric != Metric::Euclidean) continue;
            const Matrix x = random_matrix(rng, 12, 3);
            AgglomerativeParams params;
            params.n_clusters = 3;
            params.linkage = linkage;
            params.metric = metric;
            const auto result = agglomerative(x, params);
            const auto ref = oracle::linkage_direct(x, to_oracle(linkage), metric);
            REQUIRE(result.dendrogram.size() == ref.size());
            for (std::size_t m = 0; m < ref.size(); ++m) {
                CHECK(result.dendrogram[m].left == ref[m].left);
                CHECK(result.dendrogram[m].right == ref[m].right);
                CHECK(result.dendrogram[m].height ==
                      doctest::Approx(ref[m].height).epsilon(1e-8));
            }
            for (int k = 1; k <= 12; k += 3)
                CHECK(cut_dendrogram(result.dendrogram, 12, k) ==
                      oracle::linkage_cut(ref, 12, k));
        }
    }
}

TEST_CASE("dendrogram heights never decrease") {
    Rng rng(414);
    for (const auto linkage :
         {Linkage::Ward, Linkage::Complete, Linkage::Average, Linkage::Single}) {
        const Matrix x = random_matrix(rng, 20, 3);
        AgglomerativeParams params;
        params.n_clusters = 1;
        params.linkage = linkage;
        const auto result = agglomerative(x, params);
        for (std::size_t m = 1; m < result.dendrogram.size(); ++m)
            CHECK(result.dendrogram[m].height >= result.dendrogram[m - 1].height - 1e-12);
    }
}

TEST_CASE("cuts at K and K-1 differ by exactly one join") {
    Rng rng(276);
    const Matrix x = random_matrix(rng, 18, 2);
    AgglomerativeParams params;
    params.n_clusters = 1;
    params.linkage = Linkage::Ward;
    const auto result = agglomerative(x, params);
    for (int k = 2; k <= 6; ++k) {
        const auto fine = cut_dendrogram(result.dendrogram, 18, k);
        const auto coarse = cut_dendrogram(result.dendrogram, 18, k - 1);
        // every fine cluster maps into exactly one coarse cluster
        std::map<int, std::set<int>> children;  // coarse id -> fine ids inside it
        for (std::size_t i = 0; i < fine.size(); ++i)
            children[coarse[i]].insert(fine[i]);
        int pairs = 0;
        for (const auto& [coarse_id, fine_ids] : children) {
            CHECK(fine_ids.size() <= 2);
            if (fine_ids.size() == 2) ++pairs;
        }
        CHECK(pairs == 1);
        CHECK(children.size() == static_cast<std::size_t>(k - 1));
    }
}

TEST_CASE("cosine linkage groups by direction, not magnitude") {
    Matrix x(4, 2);
    x << 1, 0, 5, 0, 0, 1, 0, 7;
    AgglomerativeParams params;
    params.n_clusters = 2;
    params.linkage = Linkage::Average;
    params.metric = Metric::Cosine;
    const auto result = agglomerative(x, params);
    CHECK(result.labels[0] == result.labels[1]);
    CHECK(result.labels[2] == result.labels[3]);
    CHECK(result.labels[0] != result.labels[2]);
}

TEST_CASE("agglomerative never emits noise labels") {
    Rng rng(3111);
    const Matrix x = random_matrix(rng, 15, 3);
    for (const auto linkage : {Linkage::Ward, Linkage::Single}) {
        AgglomerativeParams params;
        params.n_clusters = 4;
        params.linkage = linkage;
        const auto result = agglomerative(x, params);
        std::set<int> seen(result.labels.begin(), result.labels.end());
        CHECK(seen == std::set<int>{0, 1, 2, 3});
    }
}

}  // TEST_SUITE
