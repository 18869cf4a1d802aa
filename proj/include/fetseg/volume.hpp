#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fetseg {

class VolumeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// 4x4 voxel-to-world transform in mm, row-major.
struct Affine {
    std::array<double, 16> m{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};

    static Affine scaling(double sx, double sy, double sz,
                          double tx = 0, double ty = 0, double tz = 0) {
        Affine a;
        a.m = {sx, 0, 0, tx, 0, sy, 0, ty, 0, 0, sz, tz, 0, 0, 0, 1};
        return a;
    }

    double operator()(int r, int c) const { return m[4 * r + c]; }
    double& operator()(int r, int c) { return m[4 * r + c]; }

    std::array<double, 3> voxel_to_world(double i, double j, double k) const {
        return {m[0] * i + m[1] * j + m[2] * k + m[3],
                m[4] * i + m[5] * j + m[6] * k + m[7],
                m[8] * i + m[9] * j + m[10] * k + m[11]};
    }

    // column norms of the upper 3x3
    std::array<double, 3> voxel_spacing() const {
        std::array<double, 3> s{};
        for (int c = 0; c < 3; ++c)
            s[c] = std::sqrt(m[c] * m[c] + m[4 + c] * m[4 + c] + m[8 + c] * m[8 + c]);
        return s;
    }

    double det3() const {
        return m[0] * (m[5] * m[10] - m[6] * m[9]) -
               m[1] * (m[4] * m[10] - m[6] * m[8]) +
               m[2] * (m[4] * m[9] - m[5] * m[8]);
    }

    double voxel_volume_mm3() const { return std::abs(det3()); }

    // inverse of the full 4x4 (upper 3x3 assumed invertible)
    Affine inverse() const {
        double d = det3();
        if (std::abs(d) < 1e-300)
            throw VolumeError("affine: singular upper 3x3");
        Affine r;
        double inv = 1.0 / d;
        r.m[0] = (m[5] * m[10] - m[6] * m[9]) * inv;
        r.m[1] = (m[2] * m[9] - m[1] * m[10]) * inv;
        r.m[2] = (m[1] * m[6] - m[2] * m[5]) * inv;
        r.m[4] = (m[6] * m[8] - m[4] * m[10]) * inv;
        r.m[5] = (m[0] * m[10] - m[2] * m[8]) * inv;
        r.m[6] = (m[2] * m[4] - m[0] * m[6]) * inv;
        r.m[8] = (m[4] * m[9] - m[5] * m[8]) * inv;
        r.m[9] = (m[1] * m[8] - m[0] * m[9]) * inv;
        r.m[10] = (m[0] * m[5] - m[1] * m[4]) * inv;
        r.m[3] = -(r.m[0] * m[3] + r.m[1] * m[7] + r.m[2] * m[11]);
        r.m[7] = -(r.m[4] * m[3] + r.m[5] * m[7] + r.m[6] * m[11]);
        r.m[11] = -(r.m[8] * m[3] + r.m[9] * m[7] + r.m[10] * m[11]);
        r.m[12] = r.m[13] = r.m[14] = 0;
        r.m[15] = 1;
        return r;
    }

    bool approx_equal(const Affine& o, double tol = 1e-6) const {
        for (int i = 0; i < 16; ++i)
            if (std::abs(m[i] - o.m[i]) > tol) return false;
        return true;
    }
};

using Shape3 = std::array<std::size_t, 3>;

inline std::size_t shape_size(const Shape3& s) { return s[0] * s[1] * s[2]; }

struct Nomenclature {
    std::map<int, std::string> names;

    bool contains(int id) const { return names.count(id) != 0; }

    static Nomenclature feta() {
        Nomenclature n;
        n.names = {{0, "background"}, {1, "CSF"}, {2, "GM"}, {3, "WM"},
                   {4, "LV"},         {5, "CB"},  {6, "TH"}, {7, "BS"}};
        return n;
    }
};

// FeTA label ids
namespace feta_label {
constexpr std::uint16_t background = 0;
constexpr std::uint16_t csf = 1;
constexpr std::uint16_t gm = 2;
constexpr std::uint16_t wm = 3;
constexpr std::uint16_t vt = 4;
constexpr std::uint16_t cb = 5;
constexpr std::uint16_t th = 6;
constexpr std::uint16_t bs = 7;
}  // namespace feta_label

struct LabelVolume {
    Shape3 shape{};
    std::vector<std::uint16_t> labels;
    Affine affine;
    Nomenclature nomenclature = Nomenclature::feta();

    LabelVolume() = default;
    LabelVolume(Shape3 s, const Affine& a, std::uint16_t fill = 0,
                Nomenclature n = Nomenclature::feta())
        : shape(s), labels(shape_size(s), fill), affine(a), nomenclature(std::move(n)) {}

    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
        return i + shape[0] * (j + shape[1] * k);
    }
    std::uint16_t at(std::size_t i, std::size_t j, std::size_t k) const {
        return labels[index(i, j, k)];
    }
    std::uint16_t& at(std::size_t i, std::size_t j, std::size_t k) {
        return labels[index(i, j, k)];
    }
    bool in_bounds(long i, long j, long k) const {
        return i >= 0 && j >= 0 && k >= 0 && i < (long)shape[0] &&
               j < (long)shape[1] && k < (long)shape[2];
    }
};

struct IntensityVolume {
    Shape3 shape{};
    std::vector<float> values;
    Affine affine;

    IntensityVolume() = default;
    IntensityVolume(Shape3 s, const Affine& a, float fill = 0.f)
        : shape(s), values(shape_size(s), fill), affine(a) {}

    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
        return i + shape[0] * (j + shape[1] * k);
    }
    float at(std::size_t i, std::size_t j, std::size_t k) const {
        return values[index(i, j, k)];
    }
    float& at(std::size_t i, std::size_t j, std::size_t k) {
        return values[index(i, j, k)];
    }
};

// Voxelwise label substitution; shape and affine unchanged.
inline LabelVolume remap_labels(const LabelVolume& vol,
                                const std::map<int, int>& mapping,
                                Nomenclature target_nomenclature = Nomenclature::feta()) {
    std::vector<int> unmapped;
    LabelVolume out = vol;
    out.nomenclature = std::move(target_nomenclature);
    std::map<int, int>::const_iterator it;
    for (auto& v : out.labels) {
        it = mapping.find(v);
        if (it == mapping.end()) {
            if (unmapped.empty() || unmapped.back() != v) unmapped.push_back(v);
            continue;
        }
        v = static_cast<std::uint16_t>(it->second);
    }
    if (!unmapped.empty()) {
        std::sort(unmapped.begin(), unmapped.end());
        unmapped.erase(std::unique(unmapped.begin(), unmapped.end()), unmapped.end());
        std::ostringstream oss;
        oss << "remap_labels: unmapped label ids:";
        for (int id : unmapped) oss << ' ' << id;
        throw VolumeError(oss.str());
    }
    return out;
}

}  // namespace fetseg
