#pragma once

#include <map>
#include <string>
#include <vector>

#include "fetseg/sampler.hpp"

namespace fetseg {

// The eight experiment configurations: which training pools participate,
// whether synthetic ventriculomegaly templates join the FeTA pool, and the
// per-pool cluster counts for data-driven sampling.
struct ExperimentPreset {
    int id = 1;
    bool use_dhcp = false;
    bool use_synthetic = false;
    bool data_driven = false;
    int feta_k = 0;  // clusters for the FeTA (+synthetic) pool when data-driven
    int dhcp_k = 0;

    double dhcp_fraction() const { return use_dhcp ? 0.5 : 0.0; }

    static ExperimentPreset get(int id) {
        if (id < 1 || id > 8)
            throw SamplerError("experiment preset id must be 1..8");
        ExperimentPreset p;
        p.id = id;
        p.use_dhcp = id == 3 || id == 4 || id == 7 || id == 8;
        p.use_synthetic = id >= 5;
        p.data_driven = id % 2 == 0;
        if (p.data_driven) {
            p.feta_k = p.use_synthetic ? 6 : 4;
            p.dhcp_k = p.use_dhcp ? 8 : 0;
        }
        return p;
    }
};

// One pool's weights: Eq.-1 weights over GMM subgroups when data-driven,
// uniform otherwise. Weights sum to 1 within the pool.
inline PoolWeights compute_pool_weights(const std::string& pool_id,
                                        const std::vector<CharacteristicVector>& vectors,
                                        const FeatureConfig& cfg, bool data_driven, int k,
                                        std::uint64_t seed) {
    PoolWeights pw;
    pw.pool_id = pool_id;
    if (vectors.empty()) throw SamplerError("pool '" + pool_id + "' is empty");
    if (!data_driven) {
        double w = 1.0 / (double)vectors.size();
        for (const auto& v : vectors) {
            pw.weights[v.template_id] = w;
            pw.subgroups[v.template_id] = 0;
        }
        return pw;
    }
    if (k > (int)vectors.size())
        throw SamplerError("pool '" + pool_id + "': K exceeds pool size");
    ScaledFeatureMatrix scaled = scale_and_boost(vectors, cfg);
    PcaBasis basis = fit_pca(scaled);
    Eigen::MatrixXd pts = project(scaled, basis);
    GmmModel model = fit_gmm(pts, k, seed);
    std::vector<int> assign = assign_subgroups(model, pts);
    std::map<std::string, int> by_id;
    for (std::size_t i = 0; i < scaled.template_ids.size(); ++i)
        by_id[scaled.template_ids[i]] = assign[i];
    pw.subgroups = by_id;
    pw.weights = eq1_weights(by_id, k);
    return pw;
}

// feta_vectors must already contain the synthetic templates for presets 5-8.
inline SamplingTable build_sampling_table(
    const ExperimentPreset& preset, const std::vector<CharacteristicVector>& feta_vectors,
    const std::vector<CharacteristicVector>& dhcp_vectors, const FeatureConfig& cfg,
    std::uint64_t seed) {
    std::vector<PoolWeights> pools;
    PoolWeights feta = compute_pool_weights("feta", feta_vectors, cfg, preset.data_driven,
                                            preset.feta_k, seed);
    if (preset.use_dhcp) {
        PoolWeights dhcp = compute_pool_weights("dhcp", dhcp_vectors, cfg,
                                                preset.data_driven, preset.dhcp_k, seed + 1);
        feta.fraction = 0.5;
        dhcp.fraction = 0.5;
        pools = {feta, dhcp};
    } else {
        feta.fraction = 1.0;
        pools = {feta};
    }
    return combine_pools(pools);
}

}  // namespace fetseg
