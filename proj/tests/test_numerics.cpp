#include <doctest.h>

#include <cmath>

#include "avq/numerics.hpp"
#include "avq/rng.hpp"
#include "test_util.hpp"

using namespace avq;

TEST_CASE("sq_l2 basics") {
    const std::vector<float> x{1.0f, -2.0f, 0.5f};
    CHECK(sq_l2(x, x) == 0.0);

    const std::vector<float> a{0.0f, 3.0f};
    const std::vector<float> b{4.0f, 0.0f};
    CHECK(sq_l2(a, b) == doctest::Approx(25.0));
    CHECK(sq_l2(a, b) == sq_l2(b, a));

    CHECK_THROWS_AS(sq_l2(a, x), std::invalid_argument);
}

TEST_CASE("sq_l2 agrees with the norm expansion") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<float> a(16), b(16);
        for (auto& v : a) v = static_cast<float>(rng.normal());
        for (auto& v : b) v = static_cast<float>(rng.normal());
        const double lhs = sq_l2(a, b);
        const double rhs = sq_norm(a) + sq_norm(b) - 2.0 * dot(a, b);
        CHECK(std::abs(lhs - rhs) <= 1e-4 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("gram of orthonormal rows is the identity") {
    // The PCA basis of any full-rank sample is orthonormal.
    const Rotation rot = pca(testutil::random_dataset(200, 6, 5));
    VectorDataset rows(rot.d, rot.d);
    rows.data.assign(rot.rows.begin(), rot.rows.end());
    const std::vector<double> g = gram(rows, rows);
    for (std::size_t i = 0; i < rot.d; ++i) {
        for (std::size_t j = 0; j < rot.d; ++j) {
            const double expect = i == j ? 1.0 : 0.0;
            CHECK(std::abs(g[i * rot.d + j] - expect) <= 1e-5);
        }
    }
}

TEST_CASE("pca on isotropic data recovers the scaled identity covariance") {
    // N(0, 2 I): every explained variance should be near 2.
    Rng rng(21);
    VectorDataset ds(20000, 6);
    const double std_dev = std::sqrt(2.0);
    for (auto& v : ds.data) v = static_cast<float>(std_dev * rng.normal());

    const Rotation rot = pca(ds);
    REQUIRE(rot.explained_variance.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(rot.explained_variance[i] == doctest::Approx(2.0).epsilon(0.08));
        if (i > 0) CHECK(rot.explained_variance[i] <= rot.explained_variance[i - 1]);
    }
    // Rows orthonormal within 1e-4.
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = i; j < 6; ++j) {
            const double expect = i == j ? 1.0 : 0.0;
            CHECK(std::abs(dot(rot.row(i), rot.row(j)) - expect) <= 1e-4);
        }
    }
}

TEST_CASE("pca on rank-1 data finds the line") {
    Rng rng(31);
    VectorDataset ds(100, 2);
    for (std::size_t i = 0; i < 100; ++i) {
        const float t = static_cast<float>(rng.normal());
        ds.row(i)[0] = t;
        ds.row(i)[1] = t;
    }
    const Rotation rot = pca(ds);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(rot.row(0)[0] == doctest::Approx(inv_sqrt2).epsilon(1e-5));
    CHECK(rot.row(0)[1] == doctest::Approx(inv_sqrt2).epsilon(1e-5));
    CHECK(rot.explained_variance[1] <= 1e-9 * std::max(1.0, rot.explained_variance[0]));

    SUBCASE("project to the first component gives sqrt(2) * t") {
        const VectorDataset coords = project(rot, 1, ds);
        for (std::size_t i = 0; i < ds.n; ++i) {
            const double expect = std::sqrt(2.0) * ds.row(i)[0];
            CHECK(coords.row(i)[0] == doctest::Approx(expect).epsilon(1e-4));
        }
    }
}

TEST_CASE("pca on 1-d data is the unit rotation") {
    const Rotation rot = pca(testutil::random_dataset(50, 1, 4));
    REQUIRE(rot.d == 1);
    CHECK(rot.rows[0] == doctest::Approx(1.0f));
}

TEST_CASE("pca rejects degenerate input") {
    CHECK_THROWS_AS(pca(testutil::random_dataset(1, 3, 0)), std::invalid_argument);
    VectorDataset bad = testutil::random_dataset(5, 2, 0);
    bad.data[1] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(pca(bad), std::invalid_argument);
}

TEST_CASE("project preserves norms at full rank and validates n_dims") {
    const VectorDataset ds = testutil::random_dataset(60, 5, 17);
    const Rotation rot = pca(ds);

    const VectorDataset coords = project(rot, 5, ds);
    for (std::size_t i = 0; i < ds.n; ++i) {
        const double before = sq_norm(ds.row(i));
        const double after = sq_norm(coords.row(i));
        CHECK(std::abs(after - before) <= 1e-4 * std::max(1.0, before));
    }

    CHECK_THROWS_AS(project(rot, 0, ds), std::invalid_argument);
    CHECK_THROWS_AS(project(rot, 6, ds), std::invalid_argument);
}

TEST_CASE("project then back-project is a projector") {
    const VectorDataset ds = testutil::random_dataset(40, 6, 23);
    const Rotation rot = pca(ds);
    const std::size_t n_dims = 3;

    const VectorDataset coords = project(rot, n_dims, ds);
    const VectorDataset lifted = back_project(rot, coords);
    const VectorDataset again = project(rot, n_dims, lifted);
    for (std::size_t i = 0; i < ds.n; ++i) {
        for (std::size_t j = 0; j < n_dims; ++j) {
            CHECK(again.row(i)[j] ==
                  doctest::Approx(coords.row(i)[j]).epsilon(1e-5).scale(1.0));
        }
    }
}

TEST_CASE("full-rank projection reconstructs centered data") {
    VectorDataset ds = testutil::random_dataset(80, 4, 29, 2.0);
    // Center the data; the rotation itself is mean-free.
    std::vector<double> mean(ds.d, 0.0);
    for (std::size_t i = 0; i < ds.n; ++i) {
        for (std::size_t j = 0; j < ds.d; ++j) mean[j] += ds.row(i)[j];
    }
    for (std::size_t j = 0; j < ds.d; ++j) mean[j] /= static_cast<double>(ds.n);
    for (std::size_t i = 0; i < ds.n; ++i) {
        for (std::size_t j = 0; j < ds.d; ++j) {
            ds.row(i)[j] = static_cast<float>(ds.row(i)[j] - mean[j]);
        }
    }

    const Rotation rot = pca(ds);
    const VectorDataset back = back_project(rot, project(rot, ds.d, ds));
    for (std::size_t i = 0; i < ds.n; ++i) {
        for (std::size_t j = 0; j < ds.d; ++j) {
            CHECK(std::abs(back.row(i)[j] - ds.row(i)[j]) <=
                  1e-3 * std::max(1.0f, std::abs(ds.row(i)[j])));
        }
    }
}
