// fetseg: training-template curation and evaluation toolkit for fetal brain
// MRI segmentation. Subcommands cover shape-feature extraction, data-driven
// sampling, synthetic ventriculomegaly templates, background subdivision,
// preprocessing, posterior ensembling, metrics and reporting.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fetseg/background.hpp"
#include "fetseg/config.hpp"
#include "fetseg/ensemble.hpp"
#include "fetseg/experiments.hpp"
#include "fetseg/features.hpp"
#include "fetseg/metrics.hpp"
#include "fetseg/nifti.hpp"
#include "fetseg/patho_synth.hpp"
#include "fetseg/preprocess.hpp"
#include "fetseg/sampler.hpp"
#include "fetseg/util.hpp"
#include "fetseg/volume.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string strip_nii_ext(std::string name) {
    auto cut = [&](const char* ext) {
        std::size_t n = std::strlen(ext);
        if (name.size() > n && name.compare(name.size() - n, n, ext) == 0)
            name.resize(name.size() - n);
    };
    cut(".gz");
    cut(".nii");
    return name;
}

std::vector<fs::path> list_volumes(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: '" + dir + "'");
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::string n = e.path().filename().string();
        if (n.size() > 4 && (n.ends_with(".nii") || n.ends_with(".nii.gz")))
            out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw IoError("no NIfTI volumes in '" + dir + "'");
    return out;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write '" + path + "'");
    return f;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open '" + path + "'");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

// ---------------------------------------------------------------- features

std::vector<fetseg::CharacteristicVector> extract_dir_features(const std::string& dir,
                                                               int threads) {
    auto paths = list_volumes(dir);
    std::vector<fetseg::CharacteristicVector> vectors(paths.size());
    fetseg::FeatureConfig cfg = fetseg::FeatureConfig::feta_default();
    fetseg::parallel_for(paths.size(), threads, [&](std::size_t i) {
        fetseg::LabelVolume vol = fetseg::load_label_volume(paths[i].string());
        vectors[i] = fetseg::extract_features(
            vol, cfg, strip_nii_ext(paths[i].filename().string()));
    });
    return vectors;
}

void write_features_csv(const std::vector<fetseg::CharacteristicVector>& vectors,
                        const std::string& path) {
    auto f = open_out(path);
    f << "template_id";
    for (int i = 1; i <= 21; ++i)
        f << ",f" << (i < 10 ? "0" : "") << i;
    f << "\n";
    for (const auto& v : vectors) {
        f << v.template_id;
        for (double x : v.values) f << ',' << fetseg::format_number(x);
        f << "\n";
    }
}

std::vector<fetseg::CharacteristicVector> read_features_csv(const std::string& path) {
    auto rows = read_csv(path);
    if (rows.empty() || rows[0].empty() || rows[0][0] != "template_id")
        throw IoError("bad features CSV header in '" + path + "'");
    std::vector<fetseg::CharacteristicVector> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != 22)
            throw IoError("features CSV row with wrong column count in '" + path + "'");
        fetseg::CharacteristicVector v;
        v.template_id = rows[r][0];
        for (std::size_t c = 1; c < rows[r].size(); ++c)
            v.values.push_back(std::stod(rows[r][c]));
        out.push_back(std::move(v));
    }
    return out;
}

int cmd_features(const std::string& input, const std::string& output, int threads) {
    auto vectors = extract_dir_features(input, threads);
    write_features_csv(vectors, output);
    std::cerr << "features: " << vectors.size() << " templates -> " << output << "\n";
    return 0;
}

// ----------------------------------------------------------------- cluster

int cmd_cluster(const std::string& features_csv, int k, std::uint64_t seed,
                const std::string& assignments_out, const std::string& model_out) {
    auto vectors = read_features_csv(features_csv);
    fetseg::FeatureConfig cfg = fetseg::FeatureConfig::feta_default();
    auto scaled = fetseg::scale_and_boost(vectors, cfg);
    auto basis = fetseg::fit_pca(scaled);
    Eigen::MatrixXd pts = fetseg::project(scaled, basis);
    auto model = fetseg::fit_gmm(pts, k, seed);
    auto assign = fetseg::assign_subgroups(model, pts);

    auto f = open_out(assignments_out);
    f << "template_id,subgroup\n";
    for (std::size_t i = 0; i < scaled.template_ids.size(); ++i)
        f << scaled.template_ids[i] << ',' << assign[i] << "\n";

    json jm;
    jm["K"] = model.K;
    jm["seed"] = model.seed;
    jm["log_likelihood"] = model.log_likelihood;
    jm["converged"] = model.converged;
    for (int c = 0; c < model.K; ++c) {
        json comp;
        comp["weight"] = model.weights(c);
        comp["mean"] = {model.means(c, 0), model.means(c, 1), model.means(c, 2)};
        json cov = json::array();
        for (int r = 0; r < 3; ++r)
            cov.push_back({model.covariances[(std::size_t)c](r, 0),
                           model.covariances[(std::size_t)c](r, 1),
                           model.covariances[(std::size_t)c](r, 2)});
        comp["covariance"] = cov;
        jm["components"].push_back(comp);
    }
    json pca;
    pca["explained_variance"] = {basis.explained_variance(0), basis.explained_variance(1),
                                 basis.explained_variance(2)};
    jm["pca"] = pca;
    open_out(model_out) << jm.dump(2) << "\n";
    if (!model.converged)
        std::cerr << "cluster: warning: EM did not converge within iteration limit\n";
    return 0;
}

// ----------------------------------------------------------------- weights

void write_sampling_csv(const fetseg::SamplingTable& table, const std::string& path) {
    auto f = open_out(path);
    f << "template_id,pool,subgroup,weight\n";
    for (const auto& [id, e] : table.entries)
        f << id << ',' << e.pool_id << ',' << e.subgroup << ','
          << fetseg::format_number(e.weight) << "\n";
}

int cmd_weights(const std::vector<std::string>& pool_specs, const std::string& output) {
    // each spec: NAME:ASSIGNMENTS_CSV:FRACTION
    std::vector<fetseg::PoolWeights> pools;
    for (const auto& spec : pool_specs) {
        auto p1 = spec.find(':');
        auto p2 = spec.rfind(':');
        if (p1 == std::string::npos || p2 == p1)
            throw CLI::ValidationError("--pool", "expected NAME:CSV:FRACTION");
        fetseg::PoolWeights pw;
        pw.pool_id = spec.substr(0, p1);
        std::string csv = spec.substr(p1 + 1, p2 - p1 - 1);
        pw.fraction = std::stod(spec.substr(p2 + 1));
        auto rows = read_csv(csv);
        std::map<std::string, int> assign;
        int max_sub = 0;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            assign[rows[r][0]] = std::stoi(rows[r][1]);
            max_sub = std::max(max_sub, std::stoi(rows[r][1]));
        }
        pw.subgroups = assign;
        pw.weights = fetseg::eq1_weights(assign, max_sub + 1);
        pools.push_back(std::move(pw));
    }
    write_sampling_csv(fetseg::combine_pools(pools), output);
    return 0;
}

// ---------------------------------------------------------------- synth-vm

int cmd_synth_vm(const std::string& input, const std::string& output,
                 const std::string& log_csv, const fetseg::DilationConfig& cfg,
                 int threads) {
    auto paths = list_volumes(input);
    fs::create_directories(output);
    struct Row {
        std::string id;
        int d_left = 0, d_right = 0;
        double frac = 0;
        bool ok = false;
        std::string error;
    };
    std::vector<Row> rows(paths.size());
    fetseg::parallel_for(paths.size(), threads, [&](std::size_t i) {
        Row& row = rows[i];
        row.id = strip_nii_ext(paths[i].filename().string());
        try {
            fetseg::LabelVolume vol = fetseg::load_label_volume(paths[i].string());
            auto outcome = fetseg::dilate_ventricles(vol, cfg, row.id);
            std::string out_path = (fs::path(output) / (row.id + "_synthvm.nii.gz")).string();
            fetseg::save_label_volume(outcome.tmpl, out_path);
            row.d_left = outcome.iterations_left;
            row.d_right = outcome.iterations_right;
            row.frac = outcome.wm_consumed_fraction;
            row.ok = true;
            if (outcome.warning)
                row.error = "missing VT or WM, template copied unchanged";
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    });
    auto f = open_out(log_csv);
    f << "template_id,d_left,d_right,wm_fraction_consumed\n";
    std::size_t failures = 0;
    for (const auto& r : rows) {
        if (!r.ok) {
            ++failures;
            std::cerr << "synth-vm: " << r.id << " failed: " << r.error << "\n";
            continue;
        }
        if (!r.error.empty()) std::cerr << "synth-vm: " << r.id << ": " << r.error << "\n";
        f << r.id << ',' << r.d_left << ',' << r.d_right << ','
          << fetseg::format_number(r.frac) << "\n";
    }
    std::cerr << "synth-vm: " << rows.size() - failures << "/" << rows.size()
              << " templates written to " << output << "\n";
    return failures == rows.size() ? 1 : 0;
}

// ------------------------------------------------------------ bg-subdivide

int cmd_bg_subdivide(const std::string& tmpl_path, const std::string& image_path, int k,
                     std::uint64_t seed, const std::string& output,
                     const std::string& mapping_out) {
    auto tmpl = fetseg::load_label_volume(tmpl_path);
    auto image = fetseg::load_intensity_volume(image_path);
    auto split = fetseg::subdivide_background(tmpl, image, k, seed);
    fetseg::save_label_volume(split.generation_map, output);
    json jm;
    jm["k"] = split.k;
    for (const auto& [aux, tgt] : split.gt_mapping)
        jm["gt_mapping"][std::to_string(aux)] = tgt;
    jm["cluster_centers"] = split.cluster_centers;
    open_out(mapping_out) << jm.dump(2) << "\n";
    return 0;
}

// -------------------------------------------------------------- preprocess

int cmd_preprocess(const std::string& mode, const std::string& input,
                   const std::string& output, bool plan_only,
                   const fetseg::PreprocessConfig& cfg) {
    if (mode == "train") {
        auto vol = fetseg::load_label_volume(input);
        auto out = fetseg::center_training_template(vol, cfg);
        fetseg::save_label_volume(out, output);
        return 0;
    }
    auto image = fetseg::load_intensity_volume(input);
    auto plan = fetseg::plan_resample(image.affine, cfg);
    if (plan_only) {
        json jp;
        jp["action"] = plan.action == fetseg::ResampleAction::direct
                           ? "direct"
                           : "upsample-run-downsample";
        jp["working_spacing"] = plan.working_spacing;
        std::cout << jp.dump(2) << "\n";
        return 0;
    }
    auto cropped = fetseg::crop_inference_input(image, cfg);
    if (plan.action == fetseg::ResampleAction::upsample_run_downsample)
        cropped = fetseg::resample_image(cropped, plan.working_spacing);
    fetseg::save_intensity_volume(cropped, output);
    return 0;
}

// ---------------------------------------------------------------- ensemble

int cmd_ensemble(const std::vector<std::string>& inputs, const std::string& output) {
    std::vector<fetseg::ProbabilityVolume> vols;
    for (const auto& path : inputs) {
        auto stack = fetseg::load_probability_stack(path);
        fetseg::ProbabilityVolume pv(stack.shape, stack.class_count, stack.affine);
        const std::size_t n = fetseg::shape_size(stack.shape);
        for (std::size_t c = 0; c < stack.class_count; ++c)
            for (std::size_t v = 0; v < n; ++v)
                pv.at(v, c) = stack.data[c * n + v];  // class-major on disk
        pv.normalize();
        if (pv.renormalized)
            std::cerr << "ensemble: warning: posteriors in '" << path
                      << "' renormalized\n";
        vols.push_back(std::move(pv));
    }
    fetseg::save_label_volume(fetseg::merge_max_posterior(vols), output);
    return 0;
}

// ---------------------------------------------------------------- evaluate

int cmd_evaluate(const std::string& pred_dir, const std::string& gt_dir,
                 const std::string& output, int threads) {
    auto gt_paths = list_volumes(gt_dir);
    std::vector<fetseg::StructureScores> scores(gt_paths.size());
    fetseg::parallel_for(gt_paths.size(), threads, [&](std::size_t i) {
        std::string id = strip_nii_ext(gt_paths[i].filename().string());
        fs::path pred = fs::path(pred_dir) / gt_paths[i].filename();
        if (!fs::exists(pred))
            throw IoError("missing prediction for subject '" + id + "'");
        auto gv = fetseg::load_label_volume(gt_paths[i].string());
        auto pv = fetseg::load_label_volume(pred.string());
        scores[i] = fetseg::score_subject(id, pv, gv);
    });
    auto f = open_out(output);
    f << "subject,structure,dice,hd95,vs\n";
    auto cell = [](const std::optional<double>& v) {
        return v ? fetseg::format_number(*v) : std::string("n/a");
    };
    for (const auto& s : scores)
        for (const auto& [name, t] : s.per_structure)
            f << s.subject_id << ',' << name << ',' << cell(t.dice) << ','
              << cell(t.hd95) << ',' << cell(t.vs) << "\n";
    return 0;
}

// ------------------------------------------------------------------ report

int cmd_report(const std::vector<std::string>& score_specs, const std::string& domains_csv,
               const std::vector<std::string>& pair_specs, const std::string& json_out,
               const std::string& csv_out) {
    // score spec: EXPERIMENT=per-subject-scores.csv (subject,structure,dice,...)
    std::map<std::string, std::map<std::string, double>> experiment_scores;
    for (const auto& spec : score_specs) {
        auto eq = spec.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError("--scores", "expected EXPERIMENT=CSV");
        std::string exp = spec.substr(0, eq);
        auto rows = read_csv(spec.substr(eq + 1));
        std::map<std::string, std::vector<std::optional<double>>> per_subject;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const auto& row = rows[r];
            if (row.size() < 3) continue;
            per_subject[row[0]].push_back(
                row[2] == "n/a" ? std::nullopt : std::optional<double>(std::stod(row[2])));
        }
        for (const auto& [subj, vals] : per_subject)
            experiment_scores[exp][subj] = fetseg::subject_mean(vals);
    }
    std::map<std::string, std::string> subject_domain;
    for (const auto& row : read_csv(domains_csv)) {
        if (row.size() < 2 || row[0] == "subject") continue;
        subject_domain[row[0]] = row[1];
    }
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& spec : pair_specs) {
        auto c = spec.find(':');
        if (c == std::string::npos)
            throw CLI::ValidationError("--pair", "expected EXP_A:EXP_B");
        pairs.emplace_back(spec.substr(0, c), spec.substr(c + 1));
    }
    auto report = fetseg::build_domain_report(experiment_scores, subject_domain, pairs);

    json jr;
    for (const auto& st : report.stats)
        jr["stats"].push_back({{"domain", st.domain},
                               {"experiment", st.experiment},
                               {"n", st.n},
                               {"mean", st.mean},
                               {"sd", st.sd}});
    for (const auto& c : report.comparisons)
        jr["comparisons"].push_back({{"domain", c.domain},
                                     {"experiment_a", c.experiment_a},
                                     {"experiment_b", c.experiment_b},
                                     {"n", c.n},
                                     {"t", c.test.t},
                                     {"df", c.test.df},
                                     {"p", c.test.p}});
    open_out(json_out) << jr.dump(2) << "\n";

    auto f = open_out(csv_out);
    f << "domain,experiment,n,mean,sd\n";
    for (const auto& st : report.stats)
        f << st.domain << ',' << st.experiment << ',' << st.n << ','
          << fetseg::format_number(st.mean) << ',' << fetseg::format_number(st.sd) << "\n";
    return 0;
}

// -------------------------------------------------------------- run-preset

int cmd_run_preset(int preset_id, const std::string& feta_dir, const std::string& dhcp_dir,
                   const std::string& output, std::uint64_t seed,
                   const fetseg::ToolConfig& config, int threads) {
    auto preset = fetseg::ExperimentPreset::get(preset_id);
    if (preset.use_dhcp && dhcp_dir.empty())
        throw CLI::ValidationError("--dhcp", "preset requires the dHCP dataset");
    fs::create_directories(output);

    auto feta_vectors = extract_dir_features(feta_dir, threads);
    if (preset.use_synthetic) {
        fetseg::DilationConfig dcfg = config.dilation;
        dcfg.seed = seed;
        std::string synth_dir = (fs::path(output) / "synth_templates").string();
        int rc = cmd_synth_vm(feta_dir, synth_dir,
                              (fs::path(output) / "synth_log.csv").string(), dcfg, threads);
        if (rc != 0) return rc;
        auto synth_vectors = extract_dir_features(synth_dir, threads);
        feta_vectors.insert(feta_vectors.end(), synth_vectors.begin(), synth_vectors.end());
    }
    std::vector<fetseg::CharacteristicVector> dhcp_vectors;
    if (preset.use_dhcp) dhcp_vectors = extract_dir_features(dhcp_dir, threads);

    fetseg::FeatureConfig fcfg = fetseg::FeatureConfig::feta_default();
    auto table = fetseg::build_sampling_table(preset, feta_vectors, dhcp_vectors, fcfg, seed);
    std::string table_path = (fs::path(output) / "sampling_table.csv").string();
    write_sampling_csv(table, table_path);

    json manifest;
    manifest["preset"] = preset_id;
    manifest["seed"] = seed;
    manifest["tool_version"] = kVersion;
    manifest["inputs"] = {{"feta", feta_dir}, {"dhcp", dhcp_dir}};
    manifest["outputs"] = {{"sampling_table", table_path}};
    manifest["config_hash"] =
        fetseg::fnv1a(config.to_json().dump());
    open_out((fs::path(output) / "manifest.json").string()) << manifest.dump(2) << "\n";
    std::cerr << "run-preset: experiment " << preset_id << " -> " << table_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fetal brain MRI training-template curation and evaluation toolkit"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    int threads = 1;
    std::string config_path;
    app.add_option("--seed", seed, "global RNG seed");
    app.add_option("--threads", threads, "worker thread count")->check(CLI::PositiveNumber);
    app.add_option("--config", config_path, "JSON config file");

    std::string in_dir, out_path, out_dir, log_csv, gt_dir, mode = "infer";
    std::string tmpl_path, image_path, model_out, assignments_out, domains_csv;
    std::string json_out, csv_out, feta_dir, dhcp_dir;
    std::vector<std::string> inputs, pool_specs, score_specs, pair_specs;
    int k = 4, preset_id = 1;
    bool plan_only = false;

    auto* c_feat = app.add_subcommand("features", "extract 21-value shape vectors");
    c_feat->add_option("--input", in_dir, "directory of label volumes")->required();
    c_feat->add_option("--output", out_path, "features CSV")->required();

    auto* c_clus = app.add_subcommand("cluster", "PCA + GMM subgroup assignment");
    c_clus->add_option("--features", in_dir, "features CSV")->required();
    c_clus->add_option("--k", k, "number of subgroups")->required();
    c_clus->add_option("--assignments", assignments_out, "assignments CSV")->required();
    c_clus->add_option("--model", model_out, "model JSON")->required();

    auto* c_wts = app.add_subcommand("weights", "subgroup weights and pool combination");
    c_wts->add_option("--pool", pool_specs, "NAME:ASSIGNMENTS_CSV:FRACTION")->required();
    c_wts->add_option("--output", out_path, "sampling table CSV")->required();

    auto* c_synth = app.add_subcommand("synth-vm", "synthetic ventriculomegaly templates");
    c_synth->add_option("--input", in_dir, "directory of FeTA label volumes")->required();
    c_synth->add_option("--output", out_dir, "output directory")->required();
    c_synth->add_option("--log", log_csv, "CSV log path")->required();

    auto* c_bg = app.add_subcommand("bg-subdivide", "background artifact subdivision");
    c_bg->add_option("--template", tmpl_path, "label volume")->required();
    c_bg->add_option("--image", image_path, "intensity volume")->required();
    c_bg->add_option("--k", k, "cluster count")->required();
    c_bg->add_option("--output", out_path, "generation-map NIfTI")->required();
    c_bg->add_option("--mapping", model_out, "mapping JSON")->required();

    auto* c_pre = app.add_subcommand("preprocess", "training centering / inference crop");
    c_pre->add_option("--mode", mode, "train|infer")
        ->check(CLI::IsMember({"train", "infer"}));
    c_pre->add_option("--input", in_dir, "input volume")->required();
    c_pre->add_option("--output", out_path, "output volume");
    c_pre->add_flag("--plan-only", plan_only, "print the resample plan as JSON");

    auto* c_ens = app.add_subcommand("ensemble", "max-posterior fusion");
    c_ens->add_option("--input", inputs, "posterior 4-D NIfTI volumes")->required();
    c_ens->add_option("--output", out_path, "label NIfTI")->required();

    auto* c_eval = app.add_subcommand("evaluate", "Dice/HD95/VS per subject");
    c_eval->add_option("--pred", in_dir, "predictions directory")->required();
    c_eval->add_option("--gt", gt_dir, "ground-truth directory")->required();
    c_eval->add_option("--output", out_path, "scores CSV")->required();

    auto* c_rep = app.add_subcommand("report", "domain aggregation and paired t-tests");
    c_rep->add_option("--scores", score_specs, "EXPERIMENT=scores.csv")->required();
    c_rep->add_option("--domains", domains_csv, "subject,domain CSV")->required();
    c_rep->add_option("--pair", pair_specs, "EXP_A:EXP_B comparisons");
    c_rep->add_option("--json", json_out, "report JSON")->required();
    c_rep->add_option("--csv", csv_out, "report CSV")->required();

    auto* c_run = app.add_subcommand("run-preset", "one of the eight experiment presets");
    c_run->add_option("--preset", preset_id, "preset id 1..8")->required();
    c_run->add_option("--feta", feta_dir, "FeTA template directory")->required();
    c_run->add_option("--dhcp", dhcp_dir, "dHCP template directory");
    c_run->add_option("--output", out_dir, "output directory")->required();

    auto* c_cfg = app.add_subcommand("validate-config", "check a config file");
    c_cfg->add_option("--config", config_path, "JSON config file")->required();

    CLI11_PARSE(app, argc, argv);

    fetseg::ToolConfig config;
    if (!config_path.empty()) {
        auto res = fetseg::validate_config(config_path);
        if (!res.ok()) {
            for (const auto& e : res.errors) std::cerr << "config: " << e << "\n";
            return 1;
        }
        config = res.config;
        if (!app.count("--seed")) seed = config.seed;
        if (!app.count("--threads")) threads = config.threads;
    }
    config.seed = seed;
    config.dilation.seed = seed;

    try {
        if (c_feat->parsed()) return cmd_features(in_dir, out_path, threads);
        if (c_clus->parsed())
            return cmd_cluster(in_dir, k, seed, assignments_out, model_out);
        if (c_wts->parsed()) return cmd_weights(pool_specs, out_path);
        if (c_synth->parsed())
            return cmd_synth_vm(in_dir, out_dir, log_csv, config.dilation, threads);
        if (c_bg->parsed())
            return cmd_bg_subdivide(tmpl_path, image_path, k, seed, out_path, model_out);
        if (c_pre->parsed()) {
            if (!plan_only && out_path.empty()) {
                std::cerr << "preprocess: --output required unless --plan-only\n";
                return 1;
            }
            return cmd_preprocess(mode, in_dir, out_path, plan_only, config.preprocess);
        }
        if (c_ens->parsed()) return cmd_ensemble(inputs, out_path);
        if (c_eval->parsed()) return cmd_evaluate(in_dir, gt_dir, out_path, threads);
        if (c_rep->parsed())
            return cmd_report(score_specs, domains_csv, pair_specs, json_out, csv_out);
        if (c_run->parsed())
            return cmd_run_preset(preset_id, feta_dir, dhcp_dir, out_dir, seed, config,
                                  threads);
        if (c_cfg->parsed()) {
            auto res = fetseg::validate_config(config_path);
            for (const auto& e : res.errors) std::cerr << "config: " << e << "\n";
            if (res.ok()) std::cout << res.config.to_json().dump(2) << "\n";
            return res.ok() ? 0 : 1;
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const fetseg::VolumeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
