#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "fetseg/volume.hpp"

namespace fetseg {

struct PreprocessConfig {
    int inference_margin = 5;
    Shape3 training_target_shape{192, 192, 192};
    double upsample_trigger_mm = 1.0;
    double upsample_target_mm = 0.6;
    double direct_apply_mm = 0.5;  // informational
};

enum class ResampleAction { direct, upsample_run_downsample };

struct ResamplePlan {
    ResampleAction action = ResampleAction::direct;
    std::array<double, 3> working_spacing{};
    Affine original_affine;
};

namespace preprocess_detail {

struct Box {
    std::array<long, 3> lo{}, hi{};  // inclusive
    bool empty = true;
};

template <typename Vol, typename Pred>
inline Box bounding_box(const Vol& v, Pred nonzero) {
    Box b;
    b.lo = {(long)v.shape[0], (long)v.shape[1], (long)v.shape[2]};
    b.hi = {-1, -1, -1};
    for (long k = 0; k < (long)v.shape[2]; ++k)
        for (long j = 0; j < (long)v.shape[1]; ++j)
            for (long i = 0; i < (long)v.shape[0]; ++i)
                if (nonzero(v.at(i, j, k))) {
                    b.empty = false;
                    b.lo = {std::min(b.lo[0], i), std::min(b.lo[1], j), std::min(b.lo[2], k)};
                    b.hi = {std::max(b.hi[0], i), std::max(b.hi[1], j), std::max(b.hi[2], k)};
                }
    return b;
}

// new world origin so voxel (src_lo - dst_lo) maps where it used to
inline Affine shift_affine(const Affine& a, const std::array<long, 3>& src_lo,
                           const std::array<long, 3>& dst_lo) {
    Affine out = a;
    double di = (double)(src_lo[0] - dst_lo[0]);
    double dj = (double)(src_lo[1] - dst_lo[1]);
    double dk = (double)(src_lo[2] - dst_lo[2]);
    out.m[3] = a.m[0] * di + a.m[1] * dj + a.m[2] * dk + a.m[3];
    out.m[7] = a.m[4] * di + a.m[5] * dj + a.m[6] * dk + a.m[7];
    out.m[11] = a.m[8] * di + a.m[9] * dj + a.m[10] * dk + a.m[11];
    return out;
}

}  // namespace preprocess_detail

// Crop the brain to its bounding box and center it in the target grid.
// Odd padding puts the extra voxel on the high-index side.
inline LabelVolume center_training_template(const LabelVolume& vol,
                                            const PreprocessConfig& cfg) {
    using namespace preprocess_detail;
    Box b = bounding_box(vol, [](std::uint16_t l) { return l != 0; });
    if (b.empty) throw VolumeError("center_training_template: empty volume");
    const Shape3& tgt = cfg.training_target_shape;
    std::array<long, 3> box_size, start;
    for (int a = 0; a < 3; ++a) {
        box_size[a] = b.hi[a] - b.lo[a] + 1;
        if (box_size[a] > (long)tgt[a])
            throw VolumeError("center_training_template: brain size " +
                              std::to_string(box_size[a]) + " exceeds target " +
                              std::to_string(tgt[a]) + " on axis " + std::to_string(a));
        start[a] = ((long)tgt[a] - box_size[a]) / 2;
    }
    LabelVolume out(tgt, shift_affine(vol.affine, b.lo, start), 0, vol.nomenclature);
    for (long k = 0; k < box_size[2]; ++k)
        for (long j = 0; j < box_size[1]; ++j)
            for (long i = 0; i < box_size[0]; ++i)
                out.at(start[0] + i, start[1] + j, start[2] + k) =
                    vol.at(b.lo[0] + i, b.lo[1] + j, b.lo[2] + k);
    return out;
}

// Minimal bounding box of non-zero intensities plus a zero margin per side.
inline IntensityVolume crop_inference_input(const IntensityVolume& image,
                                            const PreprocessConfig& cfg) {
    using namespace preprocess_detail;
    Box b = bounding_box(image, [](float v) { return v != 0.f; });
    if (b.empty) throw VolumeError("crop_inference_input: all-zero image");
    const long m = cfg.inference_margin;
    Shape3 out_shape;
    std::array<long, 3> dst_lo{m, m, m};
    for (int a = 0; a < 3; ++a)
        out_shape[a] = (std::size_t)(b.hi[a] - b.lo[a] + 1 + 2 * m);
    IntensityVolume out(out_shape, shift_affine(image.affine, b.lo, dst_lo), 0.f);
    for (long k = b.lo[2]; k <= b.hi[2]; ++k)
        for (long j = b.lo[1]; j <= b.hi[1]; ++j)
            for (long i = b.lo[0]; i <= b.hi[0]; ++i)
                out.at(i - b.lo[0] + m, j - b.lo[1] + m, k - b.lo[2] + m) =
                    image.at(i, j, k);
    return out;
}

// Voxel size >= the trigger (1 mm by default, "1 or larger") selects the
// upsample-run-downsample path at 0.6 mm.
inline ResamplePlan plan_resample(const Affine& affine, const PreprocessConfig& cfg) {
    ResamplePlan plan;
    plan.original_affine = affine;
    auto sp = affine.voxel_spacing();
    double max_sp = std::max({sp[0], sp[1], sp[2]});
    if (max_sp >= cfg.upsample_trigger_mm) {
        plan.action = ResampleAction::upsample_run_downsample;
        plan.working_spacing = {cfg.upsample_target_mm, cfg.upsample_target_mm,
                                cfg.upsample_target_mm};
    } else {
        plan.action = ResampleAction::direct;
        plan.working_spacing = sp;
    }
    return plan;
}

// Trilinear resampling onto a new grid with the same orientation covering the
// input field of view. Cells are clamped, fractions are not, so globally
// linear images extrapolate exactly at the rim.
inline IntensityVolume resample_image(const IntensityVolume& image,
                                      const std::array<double, 3>& target_spacing) {
    for (double s : target_spacing)
        if (!(s > 0)) throw VolumeError("resample_image: target spacing must be > 0");
    auto sp = image.affine.voxel_spacing();
    Shape3 out_shape;
    Affine out_affine = image.affine;
    for (int a = 0; a < 3; ++a) {
        double ratio = sp[a] / target_spacing[a];
        out_shape[a] = std::max<std::size_t>(
            1, (std::size_t)std::llround((double)image.shape[a] * ratio));
        // rescale affine column a to the new spacing, keep direction
        double f = target_spacing[a] / sp[a];
        out_affine.m[a] *= f;
        out_affine.m[4 + a] *= f;
        out_affine.m[8 + a] *= f;
    }
    if (out_shape == image.shape && out_affine.approx_equal(image.affine, 1e-12))
        return image;

    Affine inv = image.affine.inverse();
    IntensityVolume out(out_shape, out_affine, 0.f);
    const long nx = (long)image.shape[0], ny = (long)image.shape[1], nz = (long)image.shape[2];
    for (long k = 0; k < (long)out_shape[2]; ++k)
        for (long j = 0; j < (long)out_shape[1]; ++j)
            for (long i = 0; i < (long)out_shape[0]; ++i) {
                auto w = out_affine.voxel_to_world((double)i, (double)j, (double)k);
                double vx = inv.m[0] * w[0] + inv.m[1] * w[1] + inv.m[2] * w[2] + inv.m[3];
                double vy = inv.m[4] * w[0] + inv.m[5] * w[1] + inv.m[6] * w[2] + inv.m[7];
                double vz = inv.m[8] * w[0] + inv.m[9] * w[1] + inv.m[10] * w[2] + inv.m[11];
                long i0 = std::clamp((long)std::floor(vx), 0L, std::max(0L, nx - 2));
                long j0 = std::clamp((long)std::floor(vy), 0L, std::max(0L, ny - 2));
                long k0 = std::clamp((long)std::floor(vz), 0L, std::max(0L, nz - 2));
                double fx = vx - (double)i0, fy = vy - (double)j0, fz = vz - (double)k0;
                auto sample = [&](long a, long b, long c) {
                    a = std::clamp(a, 0L, nx - 1);
                    b = std::clamp(b, 0L, ny - 1);
                    c = std::clamp(c, 0L, nz - 1);
                    return (double)image.at(a, b, c);
                };
                double c00 = sample(i0, j0, k0) * (1 - fx) + sample(i0 + 1, j0, k0) * fx;
                double c10 = sample(i0, j0 + 1, k0) * (1 - fx) + sample(i0 + 1, j0 + 1, k0) * fx;
                double c01 = sample(i0, j0, k0 + 1) * (1 - fx) + sample(i0 + 1, j0, k0 + 1) * fx;
                double c11 = sample(i0, j0 + 1, k0 + 1) * (1 - fx) + sample(i0 + 1, j0 + 1, k0 + 1) * fx;
                double c0 = c00 * (1 - fy) + c10 * fy;
                double c1 = c01 * (1 - fy) + c11 * fy;
                out.at(i, j, k) = (float)(c0 * (1 - fz) + c1 * fz);
            }
    return out;
}

// Nearest-neighbor reassignment onto an explicit target grid.
inline LabelVolume resample_labels_to(const LabelVolume& labels, const Affine& target_affine,
                                      const Shape3& target_shape) {
    for (std::size_t s : target_shape)
        if (s == 0) throw VolumeError("resample_labels_to: zero-sized target");
    LabelVolume out(target_shape, target_affine, 0, labels.nomenclature);
    Affine inv = labels.affine.inverse();
    const long nx = (long)labels.shape[0], ny = (long)labels.shape[1], nz = (long)labels.shape[2];
    for (long k = 0; k < (long)target_shape[2]; ++k)
        for (long j = 0; j < (long)target_shape[1]; ++j)
            for (long i = 0; i < (long)target_shape[0]; ++i) {
                auto w = target_affine.voxel_to_world((double)i, (double)j, (double)k);
                long vi = std::lround(inv.m[0] * w[0] + inv.m[1] * w[1] + inv.m[2] * w[2] + inv.m[3]);
                long vj = std::lround(inv.m[4] * w[0] + inv.m[5] * w[1] + inv.m[6] * w[2] + inv.m[7]);
                long vk = std::lround(inv.m[8] * w[0] + inv.m[9] * w[1] + inv.m[10] * w[2] + inv.m[11]);
                if (vi >= 0 && vj >= 0 && vk >= 0 && vi < nx && vj < ny && vk < nz)
                    out.at(i, j, k) = labels.at(vi, vj, vk);
            }
    return out;
}

}  // namespace fetseg
