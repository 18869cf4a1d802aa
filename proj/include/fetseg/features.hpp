#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fetseg/volume.hpp"

namespace fetseg {

// 7 structure groups x 3 features (volume mm^3, surface area mm^2, elongation)
// = 21 values per template. Whole-brain, WM, GM and VT groups get a 2x boost
// downstream.
struct FeatureConfig {
    struct Group {
        std::string name;
        std::vector<std::uint16_t> labels;
        bool boosted = false;
    };
    std::vector<Group> groups;
    double boost_factor = 2.0;

    static FeatureConfig feta_default() {
        using namespace feta_label;
        FeatureConfig cfg;
        cfg.groups = {
            {"whole_brain", {csf, gm, wm, vt, cb, th, bs}, true},
            {"WM", {wm}, true},
            {"GM", {gm}, true},
            {"VT", {vt}, true},
            {"CB", {cb}, false},
            {"TH", {th}, false},
            {"BS", {bs}, false},
        };
        return cfg;
    }

    std::size_t feature_count() const { return groups.size() * 3; }

    std::vector<bool> boost_mask() const {
        std::vector<bool> mask;
        for (const auto& g : groups)
            for (int f = 0; f < 3; ++f) mask.push_back(g.boosted);
        return mask;
    }
};

struct CharacteristicVector {
    std::string template_id;
    std::vector<double> values;
};

namespace feature_detail {

inline double elongation_from_points(const std::vector<std::array<double, 3>>& pts) {
    if (pts.size() < 4) return 1.0;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& p : pts) mean += Eigen::Vector3d(p[0], p[1], p[2]);
    mean /= (double)pts.size();
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : pts) {
        Eigen::Vector3d d = Eigen::Vector3d(p[0], p[1], p[2]) - mean;
        cov += d * d.transpose();
    }
    cov /= (double)pts.size();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    double lmin = es.eigenvalues()(0);
    double lmax = es.eigenvalues()(2);
    if (lmin <= 1e-12 * std::max(1.0, lmax)) return 1.0;  // degenerate covariance
    return lmax / lmin;
}

}  // namespace feature_detail

inline CharacteristicVector extract_features(const LabelVolume& vol,
                                             const FeatureConfig& cfg,
                                             const std::string& template_id = "") {
    const auto sp = vol.affine.voxel_spacing();
    const double vox_vol = vol.affine.voxel_volume_mm3();
    // face perpendicular to axis a has area spacing[b]*spacing[c]
    const double face_area[3] = {sp[1] * sp[2], sp[0] * sp[2], sp[0] * sp[1]};

    bool any_brain = false;
    for (auto v : vol.labels)
        if (v != 0) {
            any_brain = true;
            break;
        }
    if (!any_brain) throw VolumeError("extract_features: volume has no brain voxels");

    CharacteristicVector cv;
    cv.template_id = template_id;
    const long nx = (long)vol.shape[0], ny = (long)vol.shape[1], nz = (long)vol.shape[2];

    for (const auto& group : cfg.groups) {
        std::array<bool, 65536> in_group{};
        for (auto l : group.labels) in_group[l] = true;

        std::size_t count = 0;
        double surface = 0.0;
        std::vector<std::array<double, 3>> pts;
        for (long k = 0; k < nz; ++k)
            for (long j = 0; j < ny; ++j)
                for (long i = 0; i < nx; ++i) {
                    if (!in_group[vol.at(i, j, k)]) continue;
                    ++count;
                    pts.push_back(vol.affine.voxel_to_world((double)i, (double)j, (double)k));
                    static const long off[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                                   {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
                    for (int n = 0; n < 6; ++n) {
                        long ii = i + off[n][0], jj = j + off[n][1], kk = k + off[n][2];
                        bool outside = !vol.in_bounds(ii, jj, kk) ||
                                       !in_group[vol.at(ii, jj, kk)];
                        if (outside) surface += face_area[n / 2];
                    }
                }
        if (count == 0) {
            cv.values.insert(cv.values.end(), {0.0, 0.0, 1.0});
        } else {
            cv.values.push_back((double)count * vox_vol);
            cv.values.push_back(surface);
            cv.values.push_back(feature_detail::elongation_from_points(pts));
        }
    }
    return cv;
}

}  // namespace fetseg
