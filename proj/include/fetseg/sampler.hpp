#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fetseg/features.hpp"
#include "fetseg/rng.hpp"

namespace fetseg {

class SamplerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ScaledFeatureMatrix {
    std::vector<std::string> template_ids;
    Eigen::MatrixXd matrix;  // N x d, min-max scaled then boosted
    std::vector<std::pair<double, double>> scaler;  // per-column (min, max)
    std::vector<bool> boost_mask;
};

// column j -> (x - min)/(max - min), constant columns -> 0, boosted columns x2
inline ScaledFeatureMatrix scale_and_boost(const std::vector<CharacteristicVector>& vectors,
                                           const FeatureConfig& cfg) {
    if (vectors.size() < 2)
        throw SamplerError("scale_and_boost: cannot scale a single template");
    const std::size_t d = cfg.feature_count();
    for (const auto& v : vectors)
        if (v.values.size() != d)
            throw SamplerError("scale_and_boost: vector '" + v.template_id +
                               "' has wrong length");
    ScaledFeatureMatrix out;
    out.boost_mask = cfg.boost_mask();
    out.matrix.resize((Eigen::Index)vectors.size(), (Eigen::Index)d);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        out.template_ids.push_back(vectors[i].template_id);
        for (std::size_t j = 0; j < d; ++j) out.matrix((Eigen::Index)i, (Eigen::Index)j) = vectors[i].values[j];
    }
    out.scaler.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        double lo = out.matrix.col((Eigen::Index)j).minCoeff();
        double hi = out.matrix.col((Eigen::Index)j).maxCoeff();
        out.scaler[j] = {lo, hi};
        double boost = out.boost_mask[j] ? cfg.boost_factor : 1.0;
        if (hi == lo) {
            out.matrix.col((Eigen::Index)j).setZero();
        } else {
            out.matrix.col((Eigen::Index)j) =
                (out.matrix.col((Eigen::Index)j).array() - lo) / (hi - lo) * boost;
        }
    }
    return out;
}

struct PcaBasis {
    Eigen::VectorXd mean;        // d
    Eigen::MatrixXd components;  // 3 x d, orthonormal rows
    Eigen::Vector3d explained_variance;  // descending
};

// Top-3 eigenvectors of the sample covariance. Sign convention: the entry of
// largest magnitude in each component is made positive.
inline PcaBasis fit_pca(const ScaledFeatureMatrix& scaled) {
    const Eigen::Index n = scaled.matrix.rows();
    const Eigen::Index d = scaled.matrix.cols();
    if (n < 4) throw SamplerError("fit_pca: need at least 4 templates");
    PcaBasis basis;
    basis.mean = scaled.matrix.colwise().mean();
    Eigen::MatrixXd centered = scaled.matrix.rowwise() - basis.mean.transpose();
    Eigen::MatrixXd cov = centered.transpose() * centered / double(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    basis.components.resize(3, d);
    for (int c = 0; c < 3; ++c) {
        Eigen::VectorXd v = es.eigenvectors().col(d - 1 - c);
        Eigen::Index imax;
        v.cwiseAbs().maxCoeff(&imax);
        if (v(imax) < 0) v = -v;
        basis.components.row(c) = v.transpose();
        basis.explained_variance(c) = std::max(0.0, es.eigenvalues()(d - 1 - c));
    }
    return basis;
}

inline Eigen::MatrixXd project(const ScaledFeatureMatrix& scaled, const PcaBasis& basis) {
    if (scaled.matrix.cols() != basis.components.cols())
        throw SamplerError("project: column count mismatch");
    return (scaled.matrix.rowwise() - basis.mean.transpose()) * basis.components.transpose();
}

struct GmmModel {
    int K = 0;
    Eigen::VectorXd weights;
    Eigen::MatrixXd means;  // K x 3
    std::vector<Eigen::Matrix3d> covariances;
    std::uint64_t seed = 0;
    double log_likelihood = -std::numeric_limits<double>::infinity();
    std::vector<double> log_likelihood_trace;
    bool converged = false;
};

namespace gmm_detail {

constexpr double kCovReg = 1e-6;
constexpr double kTol = 1e-4;
constexpr int kMaxIter = 200;

// log N(x; mu, cov) for a 3x3 SPD covariance
inline double log_gaussian(const Eigen::Vector3d& x, const Eigen::Vector3d& mu,
                           const Eigen::Matrix3d& cov) {
    Eigen::LLT<Eigen::Matrix3d> llt(cov);
    Eigen::Vector3d d = x - mu;
    Eigen::Vector3d y = llt.matrixL().solve(d);
    double logdet = 2.0 * std::log(llt.matrixL()(0, 0) * llt.matrixL()(1, 1) *
                                   llt.matrixL()(2, 2));
    return -0.5 * (3.0 * std::log(2.0 * M_PI) + logdet + y.squaredNorm());
}

inline std::vector<int> kmeanspp_init(const Eigen::MatrixXd& pts, int K, Rng& rng) {
    const Eigen::Index n = pts.rows();
    std::vector<Eigen::Vector3d> centers;
    centers.push_back(pts.row((Eigen::Index)rng.uniform_below((std::uint64_t)n)).transpose());
    std::vector<double> d2((std::size_t)n, 0.0);
    while ((int)centers.size() < K) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            for (const auto& c : centers)
                best = std::min(best, (pts.row(i).transpose() - c).squaredNorm());
            d2[(std::size_t)i] = best;
            total += best;
        }
        Eigen::Index pick = 0;
        if (total > 0) {
            double r = rng.uniform() * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2[(std::size_t)i];
                if (acc >= r) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = (Eigen::Index)rng.uniform_below((std::uint64_t)n);
        }
        centers.push_back(pts.row(pick).transpose());
    }
    // Lloyd refinement
    std::vector<int> assign((std::size_t)n, 0);
    for (int iter = 0; iter < 50; ++iter) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double bd = std::numeric_limits<double>::max();
            for (int k = 0; k < K; ++k) {
                double dd = (pts.row(i).transpose() - centers[(std::size_t)k]).squaredNorm();
                if (dd < bd) {
                    bd = dd;
                    best = k;
                }
            }
            if (assign[(std::size_t)i] != best) {
                assign[(std::size_t)i] = best;
                changed = true;
            }
        }
        if (!changed && iter > 0) break;
        for (int k = 0; k < K; ++k) {
            Eigen::Vector3d sum = Eigen::Vector3d::Zero();
            std::size_t cnt = 0;
            for (Eigen::Index i = 0; i < n; ++i)
                if (assign[(std::size_t)i] == k) {
                    sum += pts.row(i).transpose();
                    ++cnt;
                }
            if (cnt > 0) centers[(std::size_t)k] = sum / (double)cnt;
        }
    }
    return assign;
}

}  // namespace gmm_detail

// EM fit of a K-component full-covariance GMM; deterministic for fixed
// (points, K, seed). k-means++ initialization, +1e-6*I regularization,
// |d loglik| < 1e-4 convergence, max 200 iterations.
inline GmmModel fit_gmm(const Eigen::MatrixXd& points, int K, std::uint64_t seed) {
    using namespace gmm_detail;
    const Eigen::Index n = points.rows();
    if (points.cols() != 3) throw SamplerError("fit_gmm: points must be N x 3");
    if (K < 1) throw SamplerError("fit_gmm: K must be positive");
    if (n < K) throw SamplerError("fit_gmm: fewer points than components");

    GmmModel model;
    model.K = K;
    model.seed = seed;
    Rng rng(seed);
    std::vector<int> init = kmeanspp_init(points, K, rng);

    model.weights.resize(K);
    model.means.resize(K, 3);
    model.covariances.assign((std::size_t)K, Eigen::Matrix3d::Identity());
    Eigen::MatrixXd resp(n, K);
    resp.setZero();
    for (Eigen::Index i = 0; i < n; ++i) resp(i, init[(std::size_t)i]) = 1.0;

    auto m_step = [&]() {
        for (int k = 0; k < K; ++k) {
            double nk = resp.col(k).sum();
            if (nk < 1e-12) {
                // collapsed component: keep previous parameters, tiny weight
                model.weights(k) = 1e-12;
                continue;
            }
            model.weights(k) = nk / (double)n;
            Eigen::Vector3d mu = (resp.col(k).transpose() * points).transpose() / nk;
            model.means.row(k) = mu.transpose();
            Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
            for (Eigen::Index i = 0; i < n; ++i) {
                Eigen::Vector3d d = points.row(i).transpose() - mu;
                cov += resp(i, k) * d * d.transpose();
            }
            cov /= nk;
            cov += kCovReg * Eigen::Matrix3d::Identity();
            model.covariances[(std::size_t)k] = cov;
        }
        model.weights /= model.weights.sum();
    };

    m_step();
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < kMaxIter; ++iter) {
        // E-step with log-sum-exp
        double ll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd logp(K);
            for (int k = 0; k < K; ++k)
                logp(k) = std::log(model.weights(k)) +
                          log_gaussian(points.row(i).transpose(),
                                       model.means.row(k).transpose(),
                                       model.covariances[(std::size_t)k]);
            double mx = logp.maxCoeff();
            double lse = mx + std::log((logp.array() - mx).exp().sum());
            ll += lse;
            for (int k = 0; k < K; ++k) resp(i, k) = std::exp(logp(k) - lse);
        }
        model.log_likelihood = ll;
        model.log_likelihood_trace.push_back(ll);
        if (std::abs(ll - prev_ll) < kTol) {
            model.converged = true;
            break;
        }
        prev_ll = ll;
        m_step();
    }
    return model;
}

// argmax responsibility per point; ties broken by lowest component index
inline std::vector<int> assign_subgroups(const GmmModel& model, const Eigen::MatrixXd& points) {
    using namespace gmm_detail;
    std::vector<int> out((std::size_t)points.rows());
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        int best = 0;
        double bv = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < model.K; ++k) {
            double lp = std::log(model.weights(k)) +
                        log_gaussian(points.row(i).transpose(),
                                     model.means.row(k).transpose(),
                                     model.covariances[(std::size_t)k]);
            if (lp > bv) {
                bv = lp;
                best = k;
            }
        }
        out[(std::size_t)i] = best;
    }
    return out;
}

// weight(t in G) = 1 / (K_occupied * |G|)
inline std::map<std::string, double> eq1_weights(
    const std::map<std::string, int>& assignments, int K) {
    if (assignments.empty()) throw SamplerError("eq1_weights: empty assignment map");
    std::map<int, std::size_t> group_size;
    for (const auto& [id, g] : assignments) {
        if (g < 0 || g >= K)
            throw SamplerError("eq1_weights: subgroup id out of range for '" + id + "'");
        ++group_size[g];
    }
    const double k_occ = (double)group_size.size();
    std::map<std::string, double> weights;
    for (const auto& [id, g] : assignments)
        weights[id] = 1.0 / (k_occ * (double)group_size[g]);
    return weights;
}

struct SamplingEntry {
    std::string pool_id;
    int subgroup = 0;
    double weight = 0.0;
};

struct SamplingTable {
    std::map<std::string, SamplingEntry> entries;  // template_id -> entry
    std::map<std::string, double> pool_fractions;
};

struct PoolWeights {
    std::string pool_id;
    std::map<std::string, double> weights;       // sum to 1 within the pool
    std::map<std::string, int> subgroups;        // optional subgroup ids
    double fraction = 1.0;
};

inline SamplingTable combine_pools(const std::vector<PoolWeights>& pools) {
    double frac_sum = 0.0;
    for (const auto& p : pools) {
        if (p.fraction <= 0) throw SamplerError("combine_pools: non-positive fraction");
        frac_sum += p.fraction;
        double s = 0.0;
        for (const auto& [id, w] : p.weights) s += w;
        if (std::abs(s - 1.0) > 1e-9)
            throw SamplerError("combine_pools: pool '" + p.pool_id +
                               "' weights do not sum to 1");
    }
    if (std::abs(frac_sum - 1.0) > 1e-9)
        throw SamplerError("combine_pools: pool fractions do not sum to 1");
    SamplingTable table;
    for (const auto& p : pools) {
        table.pool_fractions[p.pool_id] = p.fraction;
        for (const auto& [id, w] : p.weights) {
            SamplingEntry e;
            e.pool_id = p.pool_id;
            auto it = p.subgroups.find(id);
            e.subgroup = it == p.subgroups.end() ? 0 : it->second;
            e.weight = w * p.fraction;
            table.entries[id] = e;
        }
    }
    return table;
}

}  // namespace fetseg
