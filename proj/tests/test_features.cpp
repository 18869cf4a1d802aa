#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "fetseg/features.hpp"
#include "helpers.hpp"

using namespace fetseg;
using namespace feta_label;

namespace {

// group feature offsets in the 21-vector
constexpr int kWhole = 0, kWm = 3, kCb = 12;

LabelVolume cube_volume(std::uint16_t label, std::size_t side, std::size_t grid,
                        double spacing) {
    LabelVolume vol({grid, grid, grid}, Affine::scaling(spacing, spacing, spacing));
    std::size_t o = (grid - side) / 2;
    for (std::size_t k = 0; k < side; ++k)
        for (std::size_t j = 0; j < side; ++j)
            for (std::size_t i = 0; i < side; ++i)
                vol.at(o + i, o + j, o + k) = label;
    return vol;
}

}  // namespace

TEST_CASE("2x2x2 WM cube at 0.5 mm") {
    auto vol = cube_volume(wm, 2, 8, 0.5);
    auto cv = extract_features(vol, FeatureConfig::feta_default());
    REQUIRE(cv.values.size() == 21);
    CHECK(cv.values[kWm + 0] == Catch::Approx(1.0));      // 8 voxels * 0.125 mm^3
    CHECK(cv.values[kWm + 1] == Catch::Approx(6.0));      // 24 faces * 0.25 mm^2
    CHECK(cv.values[kWm + 2] == Catch::Approx(1.0));
    // the whole-brain group sees the same voxels
    CHECK(cv.values[kWhole + 0] == Catch::Approx(1.0));
    CHECK(cv.values[kWhole + 1] == Catch::Approx(6.0));
}

TEST_CASE("1x1x10 rod: volume, surface, elongation vs direct eigensolve") {
    LabelVolume vol({3, 3, 12}, Affine::scaling(1, 1, 1));
    for (std::size_t k = 1; k <= 10; ++k) vol.at(1, 1, k) = wm;
    auto cv = extract_features(vol, FeatureConfig::feta_default());
    CHECK(cv.values[kWm + 0] == Catch::Approx(10.0));
    CHECK(cv.values[kWm + 1] == Catch::Approx(42.0));

    // oracle: covariance of world coordinates, eigendecomposition
    Eigen::MatrixXd pts(10, 3);
    for (int k = 0; k < 10; ++k) pts.row(k) << 1.0, 1.0, (double)(k + 1);
    Eigen::RowVector3d mean = pts.colwise().mean();
    Eigen::MatrixXd c = pts.rowwise() - mean;
    Eigen::Matrix3d cov = (c.transpose() * c) / 10.0;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    double lmin = es.eigenvalues()(0), lmax = es.eigenvalues()(2);
    double expected = lmin <= 1e-12 * std::max(1.0, lmax) ? 1.0 : lmax / lmin;
    CHECK(cv.values[kWm + 2] == Catch::Approx(expected));
}

TEST_CASE("bent rod elongation matches eigensolve oracle") {
    LabelVolume vol({16, 16, 16}, Affine::scaling(0.5, 0.8, 1.0));
    std::vector<std::array<std::size_t, 3>> voxels;
    for (std::size_t t = 0; t < 10; ++t) voxels.push_back({2 + t, 3, 4});
    for (std::size_t t = 0; t < 5; ++t) voxels.push_back({11, 4 + t, 4 + t});
    for (auto& v : voxels) vol.at(v[0], v[1], v[2]) = wm;

    Eigen::MatrixXd pts((Eigen::Index)voxels.size(), 3);
    for (std::size_t i = 0; i < voxels.size(); ++i) {
        auto w = vol.affine.voxel_to_world((double)voxels[i][0], (double)voxels[i][1],
                                           (double)voxels[i][2]);
        pts.row((Eigen::Index)i) << w[0], w[1], w[2];
    }
    Eigen::RowVector3d mean = pts.colwise().mean();
    Eigen::MatrixXd c = pts.rowwise() - mean;
    Eigen::Matrix3d cov = (c.transpose() * c) / (double)voxels.size();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    double expected = es.eigenvalues()(2) / es.eigenvalues()(0);

    auto cv = extract_features(vol, FeatureConfig::feta_default());
    CHECK(cv.values[kWm + 2] == Catch::Approx(expected).epsilon(1e-9));
}

TEST_CASE("empty group convention and locality") {
    auto vol = cube_volume(wm, 3, 10, 1.0);
    auto cv = extract_features(vol, FeatureConfig::feta_default());
    CHECK(cv.values[kCb + 0] == 0.0);
    CHECK(cv.values[kCb + 1] == 0.0);
    CHECK(cv.values[kCb + 2] == 1.0);

    // adding CB elsewhere changes only CB and whole-brain features
    auto vol2 = vol;
    vol2.at(1, 1, 1) = cb;
    auto cv2 = extract_features(vol2, FeatureConfig::feta_default());
    for (int f = kWm; f < kWm + 3; ++f) CHECK(cv2.values[(std::size_t)f] == cv.values[(std::size_t)f]);
    CHECK(cv2.values[kCb + 0] == 1.0);
}

TEST_CASE("empty brain is an error") {
    LabelVolume vol({4, 4, 4}, Affine::scaling(1, 1, 1));
    CHECK_THROWS(extract_features(vol, FeatureConfig::feta_default()));
}

TEST_CASE("translation invariance of elongation") {
    LabelVolume a({20, 20, 20}, Affine::scaling(0.7, 1.0, 1.3));
    LabelVolume b = a;
    for (std::size_t t = 0; t < 8; ++t) {
        a.at(2 + t, 3, 4) = wm;
        b.at(7 + t, 9, 11) = wm;  // same shape, shifted by a constant offset
    }
    auto ca = extract_features(a, FeatureConfig::feta_default());
    auto cb_ = extract_features(b, FeatureConfig::feta_default());
    CHECK(std::abs(ca.values[kWm + 2] - cb_.values[kWm + 2]) < 1e-9);
}

TEST_CASE("volume additivity and surface oracle on random volumes") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 10; ++trial) {
        auto vol = testutil::random_label_volume(rng, 8, 7, 0.9);
        bool any = false;
        for (auto l : vol.labels) any |= l != 0;
        if (!any) continue;
        auto cv = extract_features(vol, FeatureConfig::feta_default());

        // whole-brain volume = sum of per-label voxel counts * voxel volume
        std::size_t nonzero = 0;
        for (auto l : vol.labels) nonzero += l != 0;
        CHECK(cv.values[kWhole] ==
              Catch::Approx((double)nonzero * vol.affine.voxel_volume_mm3()));

        // exhaustive 6-neighbor surface scan for the WM group
        double face = 0.9 * 0.9;
        double surf = 0;
        for (long k = 0; k < 8; ++k)
            for (long j = 0; j < 8; ++j)
                for (long i = 0; i < 8; ++i) {
                    if (vol.at(i, j, k) != wm) continue;
                    const long off[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                            {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
                    for (auto& o : off) {
                        long ii = i + o[0], jj = j + o[1], kk = k + o[2];
                        if (!vol.in_bounds(ii, jj, kk) || vol.at(ii, jj, kk) != wm)
                            surf += face;
                    }
                }
        CHECK(cv.values[kWm + 1] == Catch::Approx(surf));

        // extraction is deterministic
        auto cv2 = extract_features(vol, FeatureConfig::feta_default());
        CHECK(cv.values == cv2.values);
    }
}

TEST_CASE("boost mask covers exactly 12 features") {
    auto mask = FeatureConfig::feta_default().boost_mask();
    REQUIRE(mask.size() == 21);
    int boosted = 0;
    for (bool b : mask) boosted += b;
    CHECK(boosted == 12);
}
