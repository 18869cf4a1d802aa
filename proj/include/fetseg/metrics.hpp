#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "fetseg/volume.hpp"

namespace fetseg {

class MetricsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Binary mask on the volume grid with its spacing kept for mm distances.
struct Mask {
    Shape3 shape{};
    std::vector<std::uint8_t> data;
    std::array<double, 3> spacing_mm{1, 1, 1};

    static Mask from_label(const LabelVolume& vol, std::uint16_t label) {
        Mask m;
        m.shape = vol.shape;
        m.spacing_mm = vol.affine.voxel_spacing();
        m.data.resize(vol.labels.size());
        for (std::size_t i = 0; i < vol.labels.size(); ++i)
            m.data[i] = vol.labels[i] == label;
        return m;
    }

    std::size_t index(long i, long j, long k) const {
        return (std::size_t)i + shape[0] * ((std::size_t)j + shape[1] * (std::size_t)k);
    }
    bool at(long i, long j, long k) const { return data[index(i, j, k)] != 0; }
    std::size_t count() const {
        std::size_t n = 0;
        for (auto v : data) n += v;
        return n;
    }
};

inline std::optional<double> dice(const Mask& a, const Mask& b) {
    if (a.shape != b.shape) throw MetricsError("dice: grid mismatch");
    std::size_t na = 0, nb = 0, ni = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        na += a.data[i];
        nb += b.data[i];
        ni += a.data[i] & b.data[i];
    }
    if (na + nb == 0) return std::nullopt;
    return 2.0 * (double)ni / (double)(na + nb);
}

inline std::optional<double> volume_similarity(const Mask& a, const Mask& b) {
    if (a.shape != b.shape) throw MetricsError("volume_similarity: grid mismatch");
    double va = (double)a.count(), vb = (double)b.count();
    if (va + vb == 0) return std::nullopt;
    return 1.0 - std::abs(va - vb) / (va + vb);
}

namespace metrics_detail {

// mask voxels with any 6-neighbor outside the mask (or out of bounds)
inline std::vector<std::array<long, 3>> boundary_voxels(const Mask& m) {
    std::vector<std::array<long, 3>> out;
    const long nx = (long)m.shape[0], ny = (long)m.shape[1], nz = (long)m.shape[2];
    static const long off[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                   {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
    for (long k = 0; k < nz; ++k)
        for (long j = 0; j < ny; ++j)
            for (long i = 0; i < nx; ++i) {
                if (!m.at(i, j, k)) continue;
                for (int n = 0; n < 6; ++n) {
                    long ii = i + off[n][0], jj = j + off[n][1], kk = k + off[n][2];
                    bool outside = ii < 0 || jj < 0 || kk < 0 || ii >= nx || jj >= ny ||
                                   kk >= nz || !m.at(ii, jj, kk);
                    if (outside) {
                        out.push_back({i, j, k});
                        break;
                    }
                }
            }
    return out;
}

inline void directed_distances(const std::vector<std::array<long, 3>>& from,
                               const std::vector<std::array<long, 3>>& to,
                               const std::array<double, 3>& sp,
                               std::vector<double>& out) {
    for (const auto& p : from) {
        double best = std::numeric_limits<double>::max();
        for (const auto& q : to) {
            double dx = (double)(p[0] - q[0]) * sp[0];
            double dy = (double)(p[1] - q[1]) * sp[1];
            double dz = (double)(p[2] - q[2]) * sp[2];
            double d2 = dx * dx + dy * dy + dz * dz;
            if (d2 < best) best = d2;
        }
        out.push_back(std::sqrt(best));
    }
}

// linear interpolation between order statistics
inline double percentile(std::vector<double>& v, double p) {
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    double rank = p * (double)(v.size() - 1);
    std::size_t lo = (std::size_t)std::floor(rank);
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    double f = rank - (double)lo;
    return v[lo] * (1.0 - f) + v[hi] * f;
}

}  // namespace metrics_detail

// 95th percentile of the pooled union of both directed surface-distance sets.
inline std::optional<double> hd95(const Mask& pred, const Mask& gt) {
    using namespace metrics_detail;
    if (pred.shape != gt.shape) throw MetricsError("hd95: grid mismatch");
    if (pred.count() == 0 || gt.count() == 0) return std::nullopt;
    auto bp = boundary_voxels(pred);
    auto bg = boundary_voxels(gt);
    std::vector<double> pooled;
    pooled.reserve(bp.size() + bg.size());
    directed_distances(bp, bg, pred.spacing_mm, pooled);
    directed_distances(bg, bp, pred.spacing_mm, pooled);
    return percentile(pooled, 0.95);
}

struct MetricTriple {
    std::optional<double> dice, hd95, vs;
};

struct StructureScores {
    std::string subject_id;
    std::map<std::string, MetricTriple> per_structure;  // structure name -> metrics
};

// Scores every FeTA structure (labels 1..7) of a predicted vs ground-truth map.
inline StructureScores score_subject(const std::string& subject_id,
                                     const LabelVolume& pred, const LabelVolume& gt) {
    if (pred.shape != gt.shape) throw MetricsError("score_subject: grid mismatch");
    StructureScores out;
    out.subject_id = subject_id;
    for (const auto& [id, name] : gt.nomenclature.names) {
        if (id == 0) continue;
        Mask mp = Mask::from_label(pred, (std::uint16_t)id);
        Mask mg = Mask::from_label(gt, (std::uint16_t)id);
        MetricTriple t;
        t.dice = dice(mp, mg);
        t.hd95 = hd95(mp, mg);
        t.vs = volume_similarity(mp, mg);
        out.per_structure[name] = t;
    }
    return out;
}

// Mean over structures, skipping undefined entries; background is never in the map.
inline double subject_mean(const std::vector<std::optional<double>>& values) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& v : values)
        if (v) {
            sum += *v;
            ++n;
        }
    if (n == 0) throw MetricsError("subject_mean: no defined structure scores");
    return sum / (double)n;
}

inline double subject_mean_dice(const StructureScores& s) {
    std::vector<std::optional<double>> v;
    for (const auto& [name, t] : s.per_structure) v.push_back(t.dice);
    return subject_mean(v);
}

namespace tdist_detail {

// regularized incomplete beta I_x(a, b) via Lentz continued fraction
inline double betacf(double a, double b, double x) {
    const int max_iter = 500;
    const double eps = 1e-14, fpmin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

inline double incbeta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                a * std::log(x) + b * std::log(1.0 - x);
    double front = std::exp(ln);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(b) - std::lgamma(a) +
                          b * std::log(1.0 - x) + a * std::log(x)) *
                     betacf(b, a, 1.0 - x) / b;
}

}  // namespace tdist_detail

// two-sided p-value for Student's t with df degrees of freedom
inline double t_two_sided_p(double t, double df) {
    double x = df / (df + t * t);
    return tdist_detail::incbeta(df / 2.0, 0.5, x);
}

struct TTestResult {
    double t = 0;
    double df = 0;
    double p = 1;
};

inline TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw MetricsError("paired_t_test: length mismatch");
    std::size_t n = a.size();
    if (n < 2) throw MetricsError("paired_t_test: need at least 2 pairs");
    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= (double)n;
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = a[i] - b[i] - mean;
        ss += d * d;
    }
    double sd = std::sqrt(ss / (double)(n - 1));
    TTestResult r;
    r.df = (double)(n - 1);
    if (sd == 0.0) {
        r.t = mean == 0.0 ? 0.0 : (mean > 0 ? std::numeric_limits<double>::infinity()
                                            : -std::numeric_limits<double>::infinity());
        r.p = mean == 0.0 ? 1.0 : 0.0;
        return r;
    }
    r.t = mean / (sd / std::sqrt((double)n));
    r.p = t_two_sided_p(r.t, r.df);
    return r;
}

struct DomainStats {
    std::string domain;
    std::string experiment;
    std::size_t n = 0;
    double mean = 0;
    double sd = 0;  // 0 when n == 1
};

struct PairwiseComparison {
    std::string domain, experiment_a, experiment_b;
    std::size_t n = 0;
    TTestResult test;
};

struct DomainReport {
    std::vector<DomainStats> stats;
    std::vector<PairwiseComparison> comparisons;
};

inline const std::set<std::string>& known_domains() {
    static const std::set<std::string> d{"in", "similar", "out", "most-pathological"};
    return d;
}

// experiment -> subject -> per-subject mean score; domain tags per subject
inline DomainReport build_domain_report(
    const std::map<std::string, std::map<std::string, double>>& experiment_scores,
    const std::map<std::string, std::string>& subject_domain,
    const std::vector<std::pair<std::string, std::string>>& experiment_pairs) {
    for (const auto& [subj, dom] : subject_domain)
        if (!known_domains().count(dom))
            throw MetricsError("build_domain_report: unknown domain tag '" + dom +
                               "' for subject '" + subj + "'");
    DomainReport report;
    for (const auto& dom : known_domains()) {
        for (const auto& [exp, scores] : experiment_scores) {
            std::vector<double> vals;
            for (const auto& [subj, score] : scores) {
                auto it = subject_domain.find(subj);
                if (it != subject_domain.end() && it->second == dom) vals.push_back(score);
            }
            if (vals.empty()) continue;
            DomainStats st;
            st.domain = dom;
            st.experiment = exp;
            st.n = vals.size();
            for (double v : vals) st.mean += v;
            st.mean /= (double)vals.size();
            if (vals.size() > 1) {
                double ss = 0;
                for (double v : vals) ss += (v - st.mean) * (v - st.mean);
                st.sd = std::sqrt(ss / (double)(vals.size() - 1));
            }
            report.stats.push_back(st);
        }
        for (const auto& [ea, eb] : experiment_pairs) {
            auto ia = experiment_scores.find(ea);
            auto ib = experiment_scores.find(eb);
            if (ia == experiment_scores.end() || ib == experiment_scores.end())
                throw MetricsError("build_domain_report: unknown experiment in pair");
            std::vector<double> va, vb;
            for (const auto& [subj, score] : ia->second) {
                auto itb = ib->second.find(subj);
                auto itd = subject_domain.find(subj);
                if (itb == ib->second.end() || itd == subject_domain.end() ||
                    itd->second != dom)
                    continue;
                va.push_back(score);
                vb.push_back(itb->second);
            }
            if (va.size() < 2) continue;  // t-test needs n >= 2
            PairwiseComparison cmp;
            cmp.domain = dom;
            cmp.experiment_a = ea;
            cmp.experiment_b = eb;
            cmp.n = va.size();
            cmp.test = paired_t_test(va, vb);
            report.comparisons.push_back(cmp);
        }
    }
    return report;
}

}  // namespace fetseg
