#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "iscat/experiment.hpp"

namespace iscat {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError("config: " + where + " must be an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key))
            throw ConfigError("config: unknown key \"" + key + "\" in " + where);
}

template <class T>
void read_into(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: bad value for \"") + key + "\": " + e.what());
    }
}

void apply_paper_preset(ExperimentConfig& c) {
    c.scene = SceneConfig{64, 64, 5.6, 5.6, 0.075, 36, 36, 10.0};
    c.dataset.count_train = 1000;
    c.dataset.count_test = 2000;
    c.train.lr0 = 5e-6;
    c.train.epochs = 150;
    c.train.depth = 4;
    c.train.base_channels = 16;
}

}  // namespace

ExperimentConfig parse_config_json(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    require_keys(root, "top level", {"preset", "scene", "dataset", "train", "eval", "report"});

    ExperimentConfig c;
    if (root.contains("preset")) {
        const std::string preset = root.at("preset").get<std::string>();
        if (preset == "paper")
            apply_paper_preset(c);
        else if (preset != "desk")
            throw ConfigError("config: unknown preset \"" + preset + "\"");
    }

    if (root.contains("scene")) {
        const json& s = root.at("scene");
        require_keys(s, "scene",
                     {"nx", "ny", "side_x_lambda0", "side_y_lambda0", "lambda0_m", "n_tx", "n_rx",
                      "ring_radius_lambda0"});
        read_into(s, "nx", c.scene.nx);
        read_into(s, "ny", c.scene.ny);
        read_into(s, "side_x_lambda0", c.scene.side_x_lambda);
        read_into(s, "side_y_lambda0", c.scene.side_y_lambda);
        read_into(s, "lambda0_m", c.scene.lambda0_m);
        read_into(s, "n_tx", c.scene.n_tx);
        read_into(s, "n_rx", c.scene.n_rx);
        read_into(s, "ring_radius_lambda0", c.scene.ring_radius_lambda);
    }
    if (root.contains("dataset")) {
        const json& d = root.at("dataset");
        require_keys(d, "dataset",
                     {"kind", "count_train", "count_test", "eps_lo", "eps_hi", "master_seed",
                      "snr_list", "idx_images", "min_polygons", "max_polygons", "disk_eps",
                      "disk_radius_lambda0", "solver"});
        read_into(d, "kind", c.dataset.kind);
        read_into(d, "count_train", c.dataset.count_train);
        read_into(d, "count_test", c.dataset.count_test);
        read_into(d, "eps_lo", c.dataset.eps_lo);
        read_into(d, "eps_hi", c.dataset.eps_hi);
        read_into(d, "master_seed", c.dataset.master_seed);
        read_into(d, "snr_list", c.dataset.snr_list);
        read_into(d, "idx_images", c.dataset.idx_images);
        read_into(d, "min_polygons", c.dataset.min_polygons);
        read_into(d, "max_polygons", c.dataset.max_polygons);
        read_into(d, "disk_eps", c.dataset.disk_eps);
        read_into(d, "disk_radius_lambda0", c.dataset.disk_radius_lambda);
        read_into(d, "solver", c.dataset.solver);
    }
    if (root.contains("train")) {
        const json& t = root.at("train");
        require_keys(t, "train",
                     {"loss", "lr0", "momentum", "epochs", "lr_halving_period", "batch_size",
                      "snr_train", "seed", "val_fraction", "depth", "base_channels",
                      "use_batchnorm"});
        read_into(t, "loss", c.train.loss);
        read_into(t, "lr0", c.train.lr0);
        read_into(t, "momentum", c.train.momentum);
        read_into(t, "epochs", c.train.epochs);
        read_into(t, "lr_halving_period", c.train.lr_halving_period);
        read_into(t, "batch_size", c.train.batch_size);
        read_into(t, "snr_train", c.train.snr_train);
        read_into(t, "seed", c.train.seed);
        read_into(t, "val_fraction", c.train.val_fraction);
        read_into(t, "depth", c.train.depth);
        read_into(t, "base_channels", c.train.base_channels);
        read_into(t, "use_batchnorm", c.train.use_batchnorm);
    }
    if (root.contains("eval")) {
        const json& e = root.at("eval");
        require_keys(e, "eval", {"snr_test", "panels", "include_bim", "bim_max_samples"});
        read_into(e, "snr_test", c.eval.snr_test);
        read_into(e, "panels", c.eval.panels);
        read_into(e, "include_bim", c.eval.include_bim);
        read_into(e, "bim_max_samples", c.eval.bim_max_samples);
    }
    if (root.contains("report")) {
        const json& r = root.at("report");
        require_keys(r, "report",
                     {"train_snrs", "test_snrs", "losses", "austria_enabled", "austria_eps",
                      "austria_snr"});
        read_into(r, "train_snrs", c.report.train_snrs);
        read_into(r, "test_snrs", c.report.test_snrs);
        read_into(r, "losses", c.report.losses);
        read_into(r, "austria_enabled", c.report.austria_enabled);
        read_into(r, "austria_eps", c.report.austria_eps);
        read_into(r, "austria_snr", c.report.austria_snr);
    }

    // structural validation beyond per-field types
    if (c.scene.nx < 4 || c.scene.ny < 4) throw ConfigError("config: scene nx/ny must be >= 4");
    if (c.scene.lambda0_m <= 0 || c.scene.side_x_lambda <= 0 || c.scene.side_y_lambda <= 0)
        throw ConfigError("config: scene dimensions must be positive");
    if (c.scene.ring_radius_lambda * 2.0 <=
        std::max(c.scene.side_x_lambda, c.scene.side_y_lambda))
        throw ConfigError("config: transceiver ring must clear the DOI");
    if (c.dataset.kind != "digit" && c.dataset.kind != "polygon" && c.dataset.kind != "austria" &&
        c.dataset.kind != "disk")
        throw ConfigError("config: unknown dataset kind \"" + c.dataset.kind + "\"");
    if (c.dataset.count_train < 0 || c.dataset.count_test < 0)
        throw ConfigError("config: dataset counts must be >= 0");
    if (c.dataset.eps_lo < 1.0 || c.dataset.eps_hi < c.dataset.eps_lo)
        throw ConfigError("config: eps range must satisfy 1 <= lo <= hi");
    if (c.dataset.solver != "krylov" && c.dataset.solver != "dense")
        throw ConfigError("config: solver must be krylov or dense");
    for (double s : c.dataset.snr_list)
        if (!std::isfinite(s)) throw ConfigError("config: snr_list entries must be finite");
    parse_loss_variant(c.train.loss);
    if (c.train.epochs < 1) throw ConfigError("config: train.epochs must be >= 1");
    if (c.train.batch_size < 1) throw ConfigError("config: train.batch_size must be >= 1");
    if (!(c.train.momentum >= 0.0 && c.train.momentum < 1.0))
        throw ConfigError("config: train.momentum must be in [0,1)");
    if (!(c.train.lr0 > 0.0)) throw ConfigError("config: train.lr0 must be > 0");
    if (c.train.depth < 1) throw ConfigError("config: train.depth must be >= 1");
    const int div = 1 << c.train.depth;
    if (c.scene.nx % div != 0 || c.scene.ny % div != 0)
        throw ConfigError("config: grid must be divisible by 2^depth");
    for (const std::string& l : c.report.losses) parse_loss_variant(l);
    return c;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_json(ss.str());
}

std::string resolved_config_json(const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    j["scene"] = {{"nx", c.scene.nx},
                  {"ny", c.scene.ny},
                  {"side_x_lambda0", c.scene.side_x_lambda},
                  {"side_y_lambda0", c.scene.side_y_lambda},
                  {"lambda0_m", c.scene.lambda0_m},
                  {"n_tx", c.scene.n_tx},
                  {"n_rx", c.scene.n_rx},
                  {"ring_radius_lambda0", c.scene.ring_radius_lambda}};
    j["dataset"] = {{"kind", c.dataset.kind},
                    {"count_train", c.dataset.count_train},
                    {"count_test", c.dataset.count_test},
                    {"eps_lo", c.dataset.eps_lo},
                    {"eps_hi", c.dataset.eps_hi},
                    {"master_seed", c.dataset.master_seed},
                    {"snr_list", c.dataset.snr_list},
                    {"idx_images", c.dataset.idx_images},
                    {"min_polygons", c.dataset.min_polygons},
                    {"max_polygons", c.dataset.max_polygons},
                    {"disk_eps", c.dataset.disk_eps},
                    {"disk_radius_lambda0", c.dataset.disk_radius_lambda},
                    {"solver", c.dataset.solver}};
    j["train"] = {{"loss", c.train.loss},
                  {"lr0", c.train.lr0},
                  {"momentum", c.train.momentum},
                  {"epochs", c.train.epochs},
                  {"lr_halving_period", c.train.lr_halving_period},
                  {"batch_size", c.train.batch_size},
                  {"snr_train", c.train.snr_train},
                  {"seed", c.train.seed},
                  {"val_fraction", c.train.val_fraction},
                  {"depth", c.train.depth},
                  {"base_channels", c.train.base_channels},
                  {"use_batchnorm", c.train.use_batchnorm}};
    j["eval"] = {{"snr_test", c.eval.snr_test},
                 {"panels", c.eval.panels},
                 {"include_bim", c.eval.include_bim},
                 {"bim_max_samples", c.eval.bim_max_samples}};
    j["report"] = {{"train_snrs", c.report.train_snrs},
                   {"test_snrs", c.report.test_snrs},
                   {"losses", c.report.losses},
                   {"austria_enabled", c.report.austria_enabled},
                   {"austria_eps", c.report.austria_eps},
                   {"austria_snr", c.report.austria_snr}};
    return j.dump(2) + "\n";
}

GridSpec grid_from_config(const SceneConfig& cfg) {
    return make_grid(cfg.nx, cfg.ny, cfg.side_x_lambda * cfg.lambda0_m,
                     cfg.side_y_lambda * cfg.lambda0_m, cfg.lambda0_m);
}

Scene scene_from_config(const SceneConfig& cfg) {
    return make_scene(grid_from_config(cfg), cfg.n_tx, cfg.n_rx,
                      cfg.ring_radius_lambda * cfg.lambda0_m);
}

LossVariant parse_loss_variant(const std::string& name) {
    LossVariant v;
    v.name = name;
    if (name == "contrast-clean") {
        v.kind = LossKind::contrast;
        v.noisy_input = false;
    } else if (name == "contrast-noisy") {
        v.kind = LossKind::contrast;
        v.noisy_input = true;
    } else if (name == "current") {
        v.kind = LossKind::current;
        v.noisy_input = false;
    } else if (name == "field") {
        v.kind = LossKind::field;
        v.noisy_input = true;
    } else {
        throw ConfigError("config: unknown loss \"" + name + "\"");
    }
    return v;
}

std::string snr_label(double snr_db) {
    if (std::isinf(snr_db) && snr_db > 0.0) return "clean";
    std::ostringstream ss;
    ss << snr_db;
    std::string s = ss.str();
    for (char& ch : s)
        if (ch == '-') ch = 'm';
        else if (ch == '.') ch = 'p';
    return s;
}

}  // namespace iscat
