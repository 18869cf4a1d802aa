#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fetseg/patho_synth.hpp"
#include "fetseg/preprocess.hpp"

namespace fetseg {

// Tool-wide configuration with documented defaults. Loaded from JSON; every
// field is optional and validation errors are aggregated.
struct ToolConfig {
    std::uint64_t seed = 0;
    int threads = 1;
    DilationConfig dilation;
    PreprocessConfig preprocess;
    std::map<std::string, double> pool_fractions;  // empty -> preset defaults

    nlohmann::json to_json() const {
        // thread count is deliberately excluded: outputs never depend on it
        nlohmann::json j;
        j["seed"] = seed;
        j["wm_coverage_cap"] = dilation.wm_coverage_cap;
        j["min_gap_voxels"] = dilation.min_gap_voxels;
        j["smoothing_radius"] = dilation.smoothing_radius;
        j["inference_margin"] = preprocess.inference_margin;
        j["training_target_shape"] = preprocess.training_target_shape;
        j["upsample_trigger_mm"] = preprocess.upsample_trigger_mm;
        j["upsample_target_mm"] = preprocess.upsample_target_mm;
        if (!pool_fractions.empty()) j["pool_fractions"] = pool_fractions;
        return j;
    }
};

struct ConfigResult {
    ToolConfig config;
    std::vector<std::string> errors;
    bool ok() const { return errors.empty(); }
};

inline ConfigResult validate_config_json(const nlohmann::json& j) {
    ConfigResult res;
    ToolConfig& c = res.config;
    auto& errs = res.errors;

    auto get_num = [&](const char* key, auto& dst, auto check, const char* what) {
        if (!j.contains(key)) return;
        if (!j[key].is_number()) {
            errs.push_back(std::string(key) + ": expected a number");
            return;
        }
        auto v = j[key].get<std::remove_reference_t<decltype(dst)>>();
        if (!check(v))
            errs.push_back(std::string(key) + ": " + what);
        else
            dst = v;
    };

    get_num("seed", c.seed, [](std::uint64_t) { return true; }, "");
    get_num("threads", c.threads, [](int v) { return v >= 1; }, "must be >= 1");
    get_num("wm_coverage_cap", c.dilation.wm_coverage_cap,
            [](double v) { return v > 0.0 && v < 1.0; }, "must be in (0, 1)");
    get_num("min_gap_voxels", c.dilation.min_gap_voxels,
            [](int v) { return v >= 0; }, "must be >= 0");
    get_num("smoothing_radius", c.dilation.smoothing_radius,
            [](int v) { return v >= 0; }, "must be >= 0");
    get_num("inference_margin", c.preprocess.inference_margin,
            [](int v) { return v >= 0; }, "must be >= 0");
    get_num("upsample_trigger_mm", c.preprocess.upsample_trigger_mm,
            [](double v) { return v > 0; }, "must be > 0");
    get_num("upsample_target_mm", c.preprocess.upsample_target_mm,
            [](double v) { return v > 0; }, "must be > 0");
    if (c.preprocess.upsample_target_mm >= c.preprocess.upsample_trigger_mm)
        errs.push_back("upsample_target_mm: must be below upsample_trigger_mm");
    c.dilation.seed = c.seed;

    if (j.contains("training_target_shape")) {
        const auto& s = j["training_target_shape"];
        if (!s.is_array() || s.size() != 3)
            errs.push_back("training_target_shape: expected 3 integers");
        else
            for (int a = 0; a < 3; ++a) {
                long v = s[(std::size_t)a].get<long>();
                if (v <= 0)
                    errs.push_back("training_target_shape[" + std::to_string(a) +
                                   "]: must be positive");
                else
                    c.preprocess.training_target_shape[(std::size_t)a] = (std::size_t)v;
            }
    }

    if (j.contains("pool_fractions")) {
        double sum = 0;
        std::vector<std::string> names;
        for (const auto& [pool, frac] : j["pool_fractions"].items()) {
            double f = frac.get<double>();
            c.pool_fractions[pool] = f;
            names.push_back("pool_fractions." + pool);
            if (f <= 0) errs.push_back("pool_fractions." + pool + ": must be > 0");
            sum += f;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            std::string msg = "pool fractions do not sum to 1:";
            for (const auto& n : names) msg += ' ' + n;
            errs.push_back(msg);
        }
    }
    return res;
}

inline ConfigResult validate_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        ConfigResult res;
        res.errors.push_back("cannot open config file '" + path + "'");
        return res;
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        ConfigResult res;
        res.errors.push_back("config parse error: " + std::string(e.what()));
        return res;
    }
    return validate_config_json(j);
}

// Remap tables: JSON object, key = source label id, value = target label id.
inline std::map<int, int> load_remap_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw VolumeError("cannot open remap table '" + path + "'");
    nlohmann::json j;
    in >> j;
    std::map<int, int> mapping;
    for (const auto& [key, val] : j.items())
        mapping[std::stoi(key)] = val.get<int>();
    return mapping;
}

}  // namespace fetseg
