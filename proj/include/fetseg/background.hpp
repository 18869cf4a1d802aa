#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "fetseg/volume.hpp"

namespace fetseg {

// Exact weighted 1-D k-means on distinct values via dynamic programming
// (clusters of an optimal 1-D solution are contiguous in sorted order).
// Returns cluster centers ascending plus the first-index breakpoints.
struct KMeans1D {
    std::vector<double> centers;      // ascending
    std::vector<std::size_t> starts;  // starts[c] = first distinct-value index of cluster c
};

inline KMeans1D kmeans_1d(const std::vector<double>& values_sorted_distinct,
                          const std::vector<double>& weights, int k) {
    const std::size_t m = values_sorted_distinct.size();
    KMeans1D result;
    if (m == 0) return result;
    if ((std::size_t)k > m) k = (int)m;

    std::vector<double> pw(m + 1, 0), pwx(m + 1, 0), pwx2(m + 1, 0);
    for (std::size_t i = 0; i < m; ++i) {
        double w = weights[i], x = values_sorted_distinct[i];
        pw[i + 1] = pw[i] + w;
        pwx[i + 1] = pwx[i] + w * x;
        pwx2[i + 1] = pwx2[i] + w * x * x;
    }
    auto cost = [&](std::size_t a, std::size_t b) {  // [a, b)
        double w = pw[b] - pw[a];
        if (w <= 0) return 0.0;
        double s = pwx[b] - pwx[a];
        return (pwx2[b] - pwx2[a]) - s * s / w;
    };

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> dp((std::size_t)k + 1,
                                        std::vector<double>(m + 1, inf));
    std::vector<std::vector<std::size_t>> arg((std::size_t)k + 1,
                                              std::vector<std::size_t>(m + 1, 0));
    dp[0][0] = 0;
    for (int c = 1; c <= k; ++c)
        for (std::size_t j = (std::size_t)c; j <= m; ++j)
            for (std::size_t a = (std::size_t)c - 1; a < j; ++a) {
                double v = dp[(std::size_t)c - 1][a] + cost(a, j);
                if (v < dp[(std::size_t)c][j]) {
                    dp[(std::size_t)c][j] = v;
                    arg[(std::size_t)c][j] = a;
                }
            }

    std::vector<std::size_t> bounds((std::size_t)k + 1);
    bounds[(std::size_t)k] = m;
    for (int c = k; c >= 1; --c)
        bounds[(std::size_t)c - 1] = arg[(std::size_t)c][bounds[(std::size_t)c]];
    for (int c = 0; c < k; ++c) {
        std::size_t a = bounds[(std::size_t)c], b = bounds[(std::size_t)c + 1];
        double w = pw[b] - pw[a];
        result.centers.push_back(w > 0 ? (pwx[b] - pwx[a]) / w : 0.0);
        result.starts.push_back(a);
    }
    return result;
}

struct BackgroundSplit {
    LabelVolume generation_map;
    std::map<int, int> gt_mapping;  // auxiliary id -> 0
    int k = 0;                      // effective cluster count
    std::vector<double> cluster_centers;  // ascending, in [0, 1]
};

constexpr std::uint16_t kFirstAuxiliaryLabel = 8;

// Artifact voxels (template == 0 and image > 0) get labels bg_artifact_1..k by
// ascending intensity-cluster center; brain labels 1..7 are untouched.
inline BackgroundSplit subdivide_background(const LabelVolume& tmpl,
                                            const IntensityVolume& image, int k,
                                            std::uint64_t /*seed*/ = 0) {
    if (tmpl.shape != image.shape)
        throw VolumeError("subdivide_background: shape mismatch");
    if (!tmpl.affine.approx_equal(image.affine))
        throw VolumeError("subdivide_background: affine mismatch");
    if (k < 1) throw VolumeError("subdivide_background: k must be >= 1");

    BackgroundSplit split;
    split.generation_map = tmpl;

    std::vector<std::size_t> artifact;
    for (std::size_t i = 0; i < tmpl.labels.size(); ++i)
        if (tmpl.labels[i] == 0 && image.values[i] > 0.f) artifact.push_back(i);
    if (artifact.empty()) {
        split.k = 0;
        return split;
    }

    double lo = std::numeric_limits<double>::max(), hi = std::numeric_limits<double>::lowest();
    for (std::size_t i : artifact) {
        lo = std::min(lo, (double)image.values[i]);
        hi = std::max(hi, (double)image.values[i]);
    }
    std::vector<double> scaled(artifact.size());
    for (std::size_t a = 0; a < artifact.size(); ++a)
        scaled[a] = hi > lo ? ((double)image.values[artifact[a]] - lo) / (hi - lo) : 0.0;

    std::vector<int> cluster_of(artifact.size(), 0);
    if (k == 1) {
        double mean = 0;
        for (double v : scaled) mean += v;
        split.cluster_centers = {mean / (double)scaled.size()};
        split.k = 1;
    } else {
        // distinct values with multiplicities
        std::vector<double> sorted = scaled;
        std::sort(sorted.begin(), sorted.end());
        std::vector<double> distinct, weight;
        for (double v : sorted) {
            if (distinct.empty() || v != distinct.back()) {
                distinct.push_back(v);
                weight.push_back(1.0);
            } else {
                weight.back() += 1.0;
            }
        }
        KMeans1D km = kmeans_1d(distinct, weight, k);
        split.cluster_centers = km.centers;
        split.k = (int)km.centers.size();
        // assign each scaled value by its distinct-value cluster range
        std::vector<double> cut;  // first value of each cluster after the first
        for (std::size_t c = 1; c < km.starts.size(); ++c)
            cut.push_back(distinct[km.starts[c]]);
        for (std::size_t a = 0; a < scaled.size(); ++a) {
            int c = (int)(std::upper_bound(cut.begin(), cut.end(), scaled[a]) - cut.begin());
            cluster_of[a] = std::min(c, split.k - 1);
        }
    }

    for (int c = 0; c < split.k; ++c) {
        int aux = kFirstAuxiliaryLabel + c;
        split.generation_map.nomenclature.names[aux] =
            "bg_artifact_" + std::to_string(c + 1);
        split.gt_mapping[aux] = 0;
    }
    for (std::size_t a = 0; a < artifact.size(); ++a)
        split.generation_map.labels[artifact[a]] =
            (std::uint16_t)(kFirstAuxiliaryLabel + cluster_of[a]);
    return split;
}

inline LabelVolume collapse_to_gt(const BackgroundSplit& split) {
    LabelVolume out = split.generation_map;
    for (auto& l : out.labels)
        if (l >= kFirstAuxiliaryLabel) l = 0;
    for (int c = 0; c < split.k; ++c)
        out.nomenclature.names.erase(kFirstAuxiliaryLabel + c);
    return out;
}

}  // namespace fetseg
