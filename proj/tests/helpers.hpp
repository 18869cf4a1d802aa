#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "fetseg/volume.hpp"

namespace testutil {

inline fetseg::LabelVolume random_label_volume(std::mt19937_64& rng, std::size_t n,
                                               int max_label = 7,
                                               double spacing = 1.0) {
    fetseg::LabelVolume vol({n, n, n}, fetseg::Affine::scaling(spacing, spacing, spacing));
    for (auto& l : vol.labels)
        l = (std::uint16_t)(rng() % (std::uint64_t)(max_label + 1));
    return vol;
}

inline fetseg::IntensityVolume random_intensity_volume(std::mt19937_64& rng, std::size_t n,
                                                       double spacing = 1.0) {
    fetseg::IntensityVolume vol({n, n, n},
                                fetseg::Affine::scaling(spacing, spacing, spacing));
    for (auto& v : vol.values)
        v = (float)((rng() >> 11) * 0x1.0p-53) * 100.f;
    return vol;
}

// unique scratch path under the build tree
inline std::string tmp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "fetseg_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

}  // namespace testutil
