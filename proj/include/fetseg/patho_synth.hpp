#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fetseg/rng.hpp"
#include "fetseg/volume.hpp"

namespace fetseg {

struct DilationConfig {
    double wm_coverage_cap = 0.65;
    int min_gap_voxels = 2;
    int smoothing_radius = 1;
    std::uint64_t seed = 0;
};

struct DilationOutcome {
    LabelVolume tmpl;
    int iterations_left = 0;
    int iterations_right = 0;
    double wm_consumed_fraction = 0.0;  // over whole-brain WM
    bool warning = false;               // missing VT or WM
};

namespace patho_detail {

enum class Hemi { left, right };

// Left/right split: plane orthogonal to the world x axis through the
// whole-brain centroid; voxels on the plane count as left.
struct HemiMask {
    std::vector<std::uint8_t> left;  // 1 when voxel is on the left side

    static HemiMask build(const LabelVolume& vol) {
        const long nx = (long)vol.shape[0], ny = (long)vol.shape[1], nz = (long)vol.shape[2];
        double cx = 0.0;
        std::size_t n = 0;
        for (long k = 0; k < nz; ++k)
            for (long j = 0; j < ny; ++j)
                for (long i = 0; i < nx; ++i)
                    if (vol.at(i, j, k) != 0) {
                        cx += vol.affine.voxel_to_world((double)i, (double)j, (double)k)[0];
                        ++n;
                    }
        if (n > 0) cx /= (double)n;
        HemiMask hm;
        hm.left.resize(shape_size(vol.shape));
        for (long k = 0; k < nz; ++k)
            for (long j = 0; j < ny; ++j)
                for (long i = 0; i < nx; ++i)
                    hm.left[vol.index(i, j, k)] =
                        vol.affine.voxel_to_world((double)i, (double)j, (double)k)[0] <= cx;
        return hm;
    }

    bool in(Hemi h, std::size_t idx) const {
        return h == Hemi::left ? left[idx] != 0 : left[idx] == 0;
    }
};

// Voxels within Euclidean distance < min_gap (index space) of any label other
// than WM/VT/background are off limits for conversion.
inline std::vector<std::uint8_t> forbidden_mask(const LabelVolume& vol, int min_gap) {
    using namespace feta_label;
    std::vector<std::uint8_t> forbidden(shape_size(vol.shape), 0);
    if (min_gap <= 0) return forbidden;
    const long nx = (long)vol.shape[0], ny = (long)vol.shape[1], nz = (long)vol.shape[2];
    const long r = min_gap - 1 >= 0 ? min_gap : 0;  // offsets with |o| < min_gap
    std::vector<std::array<long, 3>> offsets;
    for (long dz = -r; dz <= r; ++dz)
        for (long dy = -r; dy <= r; ++dy)
            for (long dx = -r; dx <= r; ++dx)
                if (dx * dx + dy * dy + dz * dz < (long)min_gap * min_gap)
                    offsets.push_back({dx, dy, dz});
    for (long k = 0; k < nz; ++k)
        for (long j = 0; j < ny; ++j)
            for (long i = 0; i < nx; ++i) {
                std::uint16_t l = vol.at(i, j, k);
                if (l == background || l == wm || l == vt) continue;
                for (const auto& o : offsets) {
                    long ii = i + o[0], jj = j + o[1], kk = k + o[2];
                    if (vol.in_bounds(ii, jj, kk)) forbidden[vol.index(ii, jj, kk)] = 1;
                }
            }
    return forbidden;
}

struct StepResult {
    int steps_run = 0;
    std::size_t converted = 0;
    bool stalled = false;
    bool reached_cap = false;
};

// Up to max_steps synchronous constrained dilation steps of VT into WM within
// one hemisphere. cap_count: when enforce_cap, conversions stop before the
// cumulative count would exceed it; otherwise the run stops once it is reached.
inline StepResult dilate_steps(LabelVolume& vol, Hemi hemi, const HemiMask& hm,
                               const std::vector<std::uint8_t>& forbidden,
                               std::size_t cap_count, bool enforce_cap, int max_steps) {
    using namespace feta_label;
    const long nx = (long)vol.shape[0], ny = (long)vol.shape[1], nz = (long)vol.shape[2];
    static const long off[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                   {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
    StepResult res;
    while (res.steps_run < max_steps) {
        std::vector<std::size_t> to_convert;
        for (long k = 0; k < nz; ++k)
            for (long j = 0; j < ny; ++j)
                for (long i = 0; i < nx; ++i) {
                    std::size_t idx = vol.index(i, j, k);
                    if (vol.labels[idx] != wm || !hm.in(hemi, idx) || forbidden[idx])
                        continue;
                    bool adj = false;
                    for (int n = 0; n < 6 && !adj; ++n) {
                        long ii = i + off[n][0], jj = j + off[n][1], kk = k + off[n][2];
                        adj = vol.in_bounds(ii, jj, kk) && vol.at(ii, jj, kk) == vt;
                    }
                    if (adj) to_convert.push_back(idx);
                }
        if (to_convert.empty()) {
            res.stalled = true;
            break;
        }
        for (std::size_t idx : to_convert) {
            if (enforce_cap && res.converted + 1 > cap_count) break;
            vol.labels[idx] = vt;
            ++res.converted;
        }
        ++res.steps_run;
        if (res.converted >= cap_count) {
            res.reached_cap = true;
            break;
        }
        if (enforce_cap && res.converted == cap_count) break;
    }
    return res;
}

inline std::size_t count_label_in_hemi(const LabelVolume& vol, std::uint16_t label,
                                       Hemi hemi, const HemiMask& hm) {
    std::size_t n = 0;
    for (std::size_t idx = 0; idx < vol.labels.size(); ++idx)
        if (vol.labels[idx] == label && hm.in(hemi, idx)) ++n;
    return n;
}

// Majority smoothing of the VT mask, constrained: original VT voxels are never
// removed, only WM voxels may be claimed, and the min-gap rule still holds.
inline void smooth_vt(LabelVolume& vol, const LabelVolume& original,
                      const std::vector<std::uint8_t>& forbidden, int radius) {
    using namespace feta_label;
    if (radius <= 0) return;
    const long nx = (long)vol.shape[0], ny = (long)vol.shape[1], nz = (long)vol.shape[2];
    LabelVolume before = vol;
    for (long k = 0; k < nz; ++k)
        for (long j = 0; j < ny; ++j)
            for (long i = 0; i < nx; ++i) {
                std::size_t idx = vol.index(i, j, k);
                std::uint16_t cur = before.labels[idx];
                if (cur != wm && cur != vt) continue;
                int total = 0, vt_count = 0;
                for (long dz = -radius; dz <= radius; ++dz)
                    for (long dy = -radius; dy <= radius; ++dy)
                        for (long dx = -radius; dx <= radius; ++dx) {
                            long ii = i + dx, jj = j + dy, kk = k + dz;
                            if (!vol.in_bounds(ii, jj, kk)) continue;
                            ++total;
                            if (before.at(ii, jj, kk) == vt) ++vt_count;
                        }
                bool majority_vt = 2 * vt_count > total;
                if (cur == vt && !majority_vt) {
                    if (original.labels[idx] != vt) vol.labels[idx] = wm;
                } else if (cur == wm && majority_vt) {
                    if (!forbidden[idx]) vol.labels[idx] = vt;
                }
            }
}

}  // namespace patho_detail

// Smallest step count at which the cumulative converted-WM count in the
// hemisphere reaches cap * (original hemisphere WM count); 0 when VT or WM is
// absent, the stall point when the cap is unreachable.
inline std::array<int, 2> max_dilations(const LabelVolume& vol, const DilationConfig& cfg) {
    using namespace patho_detail;
    using namespace feta_label;
    HemiMask hm = HemiMask::build(vol);
    auto forbidden = forbidden_mask(vol, cfg.min_gap_voxels);
    std::array<int, 2> result{0, 0};
    for (int h = 0; h < 2; ++h) {
        Hemi hemi = h == 0 ? Hemi::left : Hemi::right;
        std::size_t wm_count = count_label_in_hemi(vol, wm, hemi, hm);
        std::size_t vt_count = count_label_in_hemi(vol, vt, hemi, hm);
        if (wm_count == 0 || vt_count == 0) continue;
        std::size_t cap_count =
            (std::size_t)std::ceil(cfg.wm_coverage_cap * (double)wm_count);
        LabelVolume work = vol;
        StepResult sr = dilate_steps(work, hemi, hm, forbidden, cap_count,
                                     /*enforce_cap=*/false, 1 << 20);
        result[(std::size_t)h] = sr.steps_run;
        if (sr.stalled && !sr.reached_cap && sr.converted < cap_count) {
            // cap unreachable; the stall step count is the usable maximum
            result[(std::size_t)h] = sr.steps_run;
        }
    }
    return result;
}

inline DilationOutcome dilate_ventricles(const LabelVolume& vol, const DilationConfig& cfg,
                                         const std::string& template_id = "") {
    using namespace patho_detail;
    using namespace feta_label;
    DilationOutcome out;
    out.tmpl = vol;

    bool has_wm = false, has_vt = false;
    for (auto l : vol.labels) {
        has_wm |= l == wm;
        has_vt |= l == vt;
    }
    if (!has_wm || !has_vt) {
        out.warning = true;
        return out;
    }

    HemiMask hm = HemiMask::build(vol);
    auto forbidden = forbidden_mask(vol, cfg.min_gap_voxels);
    auto dmax = max_dilations(vol, cfg);
    Rng rng(derive_seed(cfg.seed, template_id));

    std::size_t wm_total = 0;
    for (auto l : vol.labels) wm_total += l == wm;

    for (int h = 0; h < 2; ++h) {
        Hemi hemi = h == 0 ? Hemi::left : Hemi::right;
        int d_max = dmax[(std::size_t)h];
        int d = 0;
        if (d_max > 1) d = (int)rng.uniform_int(1, d_max - 1);
        (h == 0 ? out.iterations_left : out.iterations_right) = d;
        if (d == 0) continue;
        std::size_t wm_count = count_label_in_hemi(vol, wm, hemi, hm);
        std::size_t cap_count =
            (std::size_t)std::floor(cfg.wm_coverage_cap * (double)wm_count);
        dilate_steps(out.tmpl, hemi, hm, forbidden, cap_count,
                     /*enforce_cap=*/true, d);
    }
    smooth_vt(out.tmpl, vol, forbidden, cfg.smoothing_radius);

    std::size_t converted = 0;
    for (std::size_t i = 0; i < vol.labels.size(); ++i)
        converted += vol.labels[i] == wm && out.tmpl.labels[i] == vt;
    out.wm_consumed_fraction = wm_total ? (double)converted / (double)wm_total : 0.0;
    return out;
}

struct SyntheticTemplate {
    std::string template_id;  // source id + "_synthvm"
    DilationOutcome outcome;
};

inline std::vector<SyntheticTemplate> generate_pathological_set(
    const std::vector<std::pair<std::string, const LabelVolume*>>& templates,
    const DilationConfig& cfg) {
    if (templates.empty())
        throw VolumeError("generate_pathological_set: empty input list");
    std::vector<SyntheticTemplate> out(templates.size());
    for (std::size_t i = 0; i < templates.size(); ++i) {
        out[i].template_id = templates[i].first + "_synthvm";
        out[i].outcome = dilate_ventricles(*templates[i].second, cfg, templates[i].first);
    }
    return out;
}

}  // namespace fetseg
