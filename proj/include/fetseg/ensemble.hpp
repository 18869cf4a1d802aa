#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "fetseg/volume.hpp"

namespace fetseg {

// Per-voxel class posteriors, voxel-major: posteriors[voxel * C + c].
struct ProbabilityVolume {
    Shape3 shape{};
    std::size_t class_count = 0;
    std::vector<double> posteriors;
    Affine affine;
    bool renormalized = false;  // set when sums drifted past 1e-5

    ProbabilityVolume() = default;
    ProbabilityVolume(Shape3 s, std::size_t c, const Affine& a)
        : shape(s), class_count(c), posteriors(shape_size(s) * c, 0.0), affine(a) {}

    double at(std::size_t voxel, std::size_t c) const {
        return posteriors[voxel * class_count + c];
    }
    double& at(std::size_t voxel, std::size_t c) {
        return posteriors[voxel * class_count + c];
    }

    // brings each voxel's posterior sum to 1; flags when drift exceeded 1e-5
    void normalize() {
        const std::size_t n = shape_size(shape);
        for (std::size_t v = 0; v < n; ++v) {
            double s = 0;
            for (std::size_t c = 0; c < class_count; ++c) s += at(v, c);
            if (s <= 0) throw VolumeError("probability volume: non-positive posterior sum");
            if (std::abs(s - 1.0) > 1e-5) renormalized = true;
            if (s != 1.0)
                for (std::size_t c = 0; c < class_count; ++c) at(v, c) /= s;
        }
    }
};

// Max-posterior fusion: unanimity wins directly, otherwise the single most
// confident network decides. Ties: lowest network index, then lowest class.
inline LabelVolume merge_max_posterior(const std::vector<ProbabilityVolume>& volumes,
                                       Nomenclature nomenclature = Nomenclature::feta()) {
    if (volumes.size() < 2)
        throw VolumeError("merge_max_posterior: need at least two networks");
    const auto& first = volumes.front();
    if (first.class_count < 2)
        throw VolumeError("merge_max_posterior: need at least two classes");
    for (const auto& v : volumes) {
        if (v.shape != first.shape || v.class_count != first.class_count)
            throw VolumeError("merge_max_posterior: shape or class count mismatch");
        if (!v.affine.approx_equal(first.affine))
            throw VolumeError("merge_max_posterior: affine mismatch");
    }
    LabelVolume out(first.shape, first.affine, 0, std::move(nomenclature));
    const std::size_t n = shape_size(first.shape);
    const std::size_t C = first.class_count;
    for (std::size_t vx = 0; vx < n; ++vx) {
        std::size_t win_class = 0;
        double win_conf = -1.0;
        for (const auto& net : volumes) {
            std::size_t best = 0;
            double conf = net.at(vx, 0);
            for (std::size_t c = 1; c < C; ++c)
                if (net.at(vx, c) > conf) {
                    conf = net.at(vx, c);
                    best = c;
                }
            if (conf > win_conf) {
                win_conf = conf;
                win_class = best;
            }
        }
        out.labels[vx] = (std::uint16_t)win_class;
    }
    return out;
}

}  // namespace fetseg
