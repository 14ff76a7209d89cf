#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "iscat/classic.hpp"
#include "iscat/experiment.hpp"
#include "iscat/metrics.hpp"
#include "iscat/parallel.hpp"
#include "iscat/rng.hpp"
#include "iscat/store.hpp"

namespace iscat {

namespace {

namespace fs = std::filesystem;

constexpr double kInf = std::numeric_limits<double>::infinity();

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << text;
}

void write_resolved_config(const ExperimentConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    write_text((fs::path(out_dir) / "config.resolved.json").string(), resolved_config_json(cfg));
}

std::string csv_num(double v) {
    std::ostringstream ss;
    ss << std::setprecision(12) << v;
    return ss.str();
}

// per-sample rows plus mean/median/std aggregate rows
std::string metrics_csv(const MetricReport& rep) {
    std::string csv = "sample,mse,ssim\n";
    for (std::size_t i = 0; i < rep.mse.size(); ++i)
        csv += std::to_string(i) + "," + csv_num(rep.mse[i]) + "," + csv_num(rep.ssim[i]) + "\n";
    csv += "mean," + csv_num(rep.mse_stats.mean) + "," + csv_num(rep.ssim_stats.mean) + "\n";
    csv += "median," + csv_num(rep.mse_stats.median) + "," + csv_num(rep.ssim_stats.median) + "\n";
    csv += "std," + csv_num(rep.mse_stats.stddev) + "," + csv_num(rep.ssim_stats.stddev) + "\n";
    return csv;
}

double ssim_or_nan(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const GridSpec& g) {
    if (g.nx < 11 || g.ny < 11) return std::numeric_limits<double>::quiet_NaN();
    return ssim(a, b, g.nx, g.ny, 4.0);
}

void export_panel(const Eigen::VectorXcd& chi, const GridSpec& g, const std::string& path) {
    export_image(chi.real(), g.nx, g.ny, path, 0.0, 4.0);
}

NetConfig net_config_from(const TrainBlockConfig& t) {
    NetConfig nc;
    nc.depth = t.depth;
    nc.base_channels = t.base_channels;
    nc.use_batchnorm = t.use_batchnorm;
    nc.rng_seed = t.seed;
    return nc;
}

TrainConfig train_config_from(const TrainBlockConfig& t, const LossVariant& variant,
                              std::uint64_t seed) {
    TrainConfig tc;
    tc.lr0 = t.lr0;
    tc.momentum = t.momentum;
    tc.epochs_max = t.epochs;
    tc.lr_halving_period = t.lr_halving_period;
    tc.batch_size = t.batch_size;
    tc.loss_kind = variant.kind;
    tc.snr_train = t.snr_train;
    tc.rng_seed = seed;
    tc.val_fraction = t.val_fraction;
    return tc;
}

std::string training_log_csv(const std::vector<EpochLogRow>& log) {
    std::string csv = "epoch,lr,train_loss,val_mse,val_ssim\n";
    for (const EpochLogRow& r : log)
        csv += std::to_string(r.epoch) + "," + csv_num(r.lr) + "," + csv_num(r.train_loss) + "," +
               csv_num(r.val_mse) + "," + csv_num(r.val_ssim) + "\n";
    return csv;
}

struct TrainedModel {
    Checkpoint ck;
    std::vector<EpochLogRow> log;
};

TrainedModel train_variant(const ExperimentConfig& cfg, const DatasetOnDisk& ds,
                           const LossVariant& variant, double snr_train, std::uint64_t seed,
                           const GreensOperators* ops) {
    const std::string input_variant = variant.noisy_input ? snr_label(snr_train) : "clean";
    const std::string target_variant =
        variant.kind == LossKind::field ? snr_label(snr_train) : "clean";
    const std::vector<TrainingSample> samples = load_samples(ds, input_variant, target_variant);

    const NetConfig nc = net_config_from(cfg.train);
    TrainConfig tc = train_config_from(cfg.train, variant, seed);
    tc.snr_train = snr_train;
    const TrainResult tr = train(samples, nc, tc, ops);
    if (tr.aborted) throw NumericError("training diverged for loss " + variant.name);

    TrainedModel m;
    m.ck.net_cfg = nc;
    m.ck.train_cfg = tc;
    m.ck.params = tr.params;
    m.ck.opt = tr.opt;
    m.ck.extra_json = resolved_config_json(cfg);
    m.log = tr.log;
    return m;
}

MetricReport eval_model(NetParams& params, const DatasetOnDisk& ds,
                        const std::string& input_variant) {
    const std::vector<TrainingSample> samples = load_samples(ds, input_variant, "clean");
    std::vector<double> mses(samples.size()), ssims(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Eigen::VectorXcd pred = predict(params, samples[i].chi_bp);
        mses[i] = mse(pred, samples[i].chi_true.chi);
        ssims[i] = ssim_or_nan(samples[i].chi_true.chi.real(), pred.real(), ds.scene.grid);
    }
    return make_report(std::move(mses), std::move(ssims));
}

}  // namespace

void cmd_gen(const ExperimentConfig& cfg, const std::string& out_dir,
             std::optional<std::uint64_t> seed_override) {
    write_resolved_config(cfg, out_dir);
    const std::uint64_t master = seed_override.value_or(cfg.dataset.master_seed);
    generate_dataset(cfg, cfg.dataset.count_train, master, (fs::path(out_dir) / "train").string());
    if (cfg.dataset.count_test > 0)
        generate_dataset(cfg, cfg.dataset.count_test, derive_seed(master, 999983),
                         (fs::path(out_dir) / "test").string());
}

void cmd_train(const ExperimentConfig& cfg, const std::string& dataset_dir,
               const std::string& out_dir, std::optional<std::uint64_t> seed_override,
               const std::string& resume_checkpoint) {
    write_resolved_config(cfg, out_dir);
    const DatasetOnDisk ds = open_dataset(dataset_dir);
    const LossVariant variant = parse_loss_variant(cfg.train.loss);

    std::unique_ptr<GreensOperators> ops;
    if (variant.kind == LossKind::field) ops = std::make_unique<GreensOperators>(ds.scene);

    const std::string ck_path = (fs::path(out_dir) / "checkpoint.isck").string();
    const std::string log_path = (fs::path(out_dir) / "training_log.csv").string();

    if (!resume_checkpoint.empty()) {
        Checkpoint prev = read_checkpoint(resume_checkpoint);
        const std::string input_variant =
            variant.noisy_input ? snr_label(prev.train_cfg.snr_train) : "clean";
        const std::string target_variant =
            variant.kind == LossKind::field ? snr_label(prev.train_cfg.snr_train) : "clean";
        const std::vector<TrainingSample> samples = load_samples(ds, input_variant, target_variant);
        const TrainResult tr =
            train(samples, prev.net_cfg, prev.train_cfg, ops.get(), &prev.params, &prev.opt);
        if (tr.aborted) throw NumericError("training diverged after resume");
        Checkpoint ck = prev;
        ck.params = tr.params;
        ck.opt = tr.opt;
        write_checkpoint(ck_path, ck);
        write_text(log_path, training_log_csv(tr.log));
        return;
    }

    const std::uint64_t seed = seed_override.value_or(cfg.train.seed);
    const TrainedModel m = train_variant(cfg, ds, variant, cfg.train.snr_train, seed, ops.get());
    write_checkpoint(ck_path, m.ck);
    write_text(log_path, training_log_csv(m.log));
}

void cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint_path,
              const std::string& dataset_dir, const std::string& out_dir) {
    write_resolved_config(cfg, out_dir);
    Checkpoint ck = read_checkpoint(checkpoint_path);
    const DatasetOnDisk ds = open_dataset(dataset_dir);
    const GridSpec& g = ds.scene.grid;

    std::vector<std::string> variants;
    for (double snr : cfg.eval.snr_test) variants.push_back(snr_label(snr));
    if (variants.empty()) variants.push_back("clean");

    for (const std::string& variant : variants) {
        const MetricReport rep = eval_model(ck.params, ds, variant);
        write_text((fs::path(out_dir) / ("metrics_snr_" + variant + ".csv")).string(),
                   metrics_csv(rep));
    }

    // side-by-side panels for the first variant
    const std::string panel_variant = variants.front();
    const std::vector<TrainingSample> samples = load_samples(ds, panel_variant, "clean");
    const int n_panels = std::min<int>(cfg.eval.panels, static_cast<int>(samples.size()));
    std::unique_ptr<GreensOperators> ops;
    if (cfg.eval.include_bim) ops = std::make_unique<GreensOperators>(ds.scene);
    for (int i = 0; i < n_panels; ++i) {
        const std::string stem = (fs::path(out_dir) / ("panel_" + std::to_string(i))).string();
        export_panel(samples[i].chi_true.chi, g, stem + "_truth.pgm");
        export_panel(samples[i].chi_bp.chi, g, stem + "_bp.pgm");
        export_panel(predict(ck.params, samples[i].chi_bp), g, stem + "_prediction.pgm");
        if (cfg.eval.include_bim) {
            std::size_t pvi = 0;
            for (std::size_t vi = 0; vi < ds.variants.size(); ++vi)
                if (ds.variants[vi] == panel_variant) pvi = vi;
            const SampleRecord rec =
                read_sample((fs::path(ds.dir) / ds.files[pvi][i]).string());
            const FieldSet mea{FieldRole::EscaMea, panel_variant == "clean"
                                                       ? rec.esca_mea_clean
                                                       : rec.esca_mea_noisy};
            const FieldSet einc = incident_field(ds.scene);
            const BimResult bim = bim_reconstruct(mea, *ops, einc, IstaConfig{});
            export_panel(bim.chi.chi, g, stem + "_bim.pgm");
        }
    }
}

void cmd_bp(const ExperimentConfig& cfg, const std::string& dataset_dir,
            const std::string& out_dir) {
    write_resolved_config(cfg, out_dir);
    const DatasetOnDisk ds = open_dataset(dataset_dir);
    const GreensOperators ops(ds.scene);
    const FieldSet einc = incident_field(ds.scene);
    const GridSpec& g = ds.scene.grid;

    for (std::size_t vi = 0; vi < ds.variants.size(); ++vi) {
        const std::string& variant = ds.variants[vi];
        std::vector<double> mses(ds.sample_count), ssims(ds.sample_count);
        for (int i = 0; i < ds.sample_count; ++i) {
            const SampleRecord rec =
                read_sample((fs::path(ds.dir) / ds.files[vi][i]).string());
            const FieldSet mea{FieldRole::EscaMea,
                               variant == "clean" ? rec.esca_mea_clean : rec.esca_mea_noisy};
            const ContrastMap bp = back_projection(mea, ops, einc);
            mses[i] = mse(bp.chi, Eigen::VectorXcd(rec.chi_true));
            ssims[i] = ssim_or_nan(Eigen::VectorXd(rec.chi_true.real()),
                                   Eigen::VectorXd(bp.chi.real()), g);
            if (i < cfg.eval.panels && vi == 0) {
                const std::string stem =
                    (fs::path(out_dir) / ("bp_panel_" + std::to_string(i))).string();
                export_panel(rec.chi_true, g, stem + "_truth.pgm");
                export_panel(bp.chi, g, stem + "_bp.pgm");
            }
        }
        write_text((fs::path(out_dir) / ("bp_metrics_" + variant + ".csv")).string(),
                   metrics_csv(make_report(std::move(mses), std::move(ssims))));
    }
}

void cmd_bim(const ExperimentConfig& cfg, const std::string& dataset_dir,
             const std::string& out_dir) {
    write_resolved_config(cfg, out_dir);
    const DatasetOnDisk ds = open_dataset(dataset_dir);
    const GreensOperators ops(ds.scene);
    const FieldSet einc = incident_field(ds.scene);
    const GridSpec& g = ds.scene.grid;

    const int count = cfg.eval.bim_max_samples > 0
                          ? std::min(cfg.eval.bim_max_samples, ds.sample_count)
                          : ds.sample_count;
    std::vector<std::string> variants;
    for (double snr : cfg.eval.snr_test) variants.push_back(snr_label(snr));
    if (variants.empty()) variants.push_back("clean");

    for (const std::string& variant : variants) {
        std::size_t vi = 0;
        for (; vi < ds.variants.size(); ++vi)
            if (ds.variants[vi] == variant) break;
        if (vi == ds.variants.size())
            throw ConfigError("cmd_bim: variant " + variant + " not in dataset");

        std::string csv = "sample,mse_bim,mse_bp,ssim_bim,residual_first,residual_last\n";
        std::vector<double> mses(count), ssims(count);
        for (int i = 0; i < count; ++i) {
            const SampleRecord rec =
                read_sample((fs::path(ds.dir) / ds.files[vi][i]).string());
            const FieldSet mea{FieldRole::EscaMea,
                               variant == "clean" ? rec.esca_mea_clean : rec.esca_mea_noisy};
            const BimResult bim = bim_reconstruct(mea, ops, einc, IstaConfig{});
            const ContrastMap bp = back_projection(mea, ops, einc);
            mses[i] = mse(bim.chi.chi, Eigen::VectorXcd(rec.chi_true));
            ssims[i] = ssim_or_nan(Eigen::VectorXd(rec.chi_true.real()),
                                   Eigen::VectorXd(bim.chi.chi.real()), g);
            csv += std::to_string(i) + "," + csv_num(mses[i]) + "," +
                   csv_num(mse(bp.chi, Eigen::VectorXcd(rec.chi_true))) + "," +
                   csv_num(ssims[i]) + "," + csv_num(bim.residuals.front()) + "," +
                   csv_num(bim.residuals.back()) + "\n";
            if (i < cfg.eval.panels && variant == variants.front()) {
                const std::string stem =
                    (fs::path(out_dir) / ("bim_panel_" + std::to_string(i))).string();
                export_panel(rec.chi_true, g, stem + "_truth.pgm");
                export_panel(bim.chi.chi, g, stem + "_bim.pgm");
            }
        }
        const SummaryStats ms = summarize(mses);
        const SummaryStats ss = summarize(ssims);
        csv += "mean," + csv_num(ms.mean) + ",,," + csv_num(ss.mean) + ",\n";
        csv += "median," + csv_num(ms.median) + ",,," + csv_num(ss.median) + ",\n";
        csv += "std," + csv_num(ms.stddev) + ",,," + csv_num(ss.stddev) + ",\n";
        write_text((fs::path(out_dir) / ("bim_metrics_" + variant + ".csv")).string(), csv);
    }
}

void cmd_report(const ExperimentConfig& cfg, const std::string& out_dir,
                std::optional<std::uint64_t> seed_override) {
    write_resolved_config(cfg, out_dir);
    const std::uint64_t master = seed_override.value_or(cfg.dataset.master_seed);

    const std::string train_dir = (fs::path(out_dir) / "datasets" / "train").string();
    const std::string test_dir = (fs::path(out_dir) / "datasets" / "test").string();
    generate_dataset(cfg, cfg.dataset.count_train, master, train_dir);
    generate_dataset(cfg, cfg.dataset.count_test, derive_seed(master, 999983), test_dir);
    const DatasetOnDisk train_ds = open_dataset(train_dir);
    const DatasetOnDisk test_ds = open_dataset(test_dir);

    std::unique_ptr<GreensOperators> field_ops;
    auto ops_for = [&](const LossVariant& v) -> const GreensOperators* {
        if (v.kind != LossKind::field) return nullptr;
        if (!field_ops) field_ops = std::make_unique<GreensOperators>(train_ds.scene);
        return field_ops.get();
    };

    // (loss, train_snr) -> model; snr-independent variants share one entry
    std::map<std::string, TrainedModel> models;
    auto model_key = [](const LossVariant& v, double snr) {
        const bool snr_dependent = v.noisy_input || v.kind == LossKind::field;
        return v.name + "@" + (snr_dependent ? snr_label(snr) : "any");
    };
    auto get_model = [&](const LossVariant& v, double snr) -> TrainedModel& {
        const std::string key = model_key(v, snr);
        auto it = models.find(key);
        if (it == models.end()) {
            TrainedModel m = train_variant(cfg, train_ds, v, snr,
                                           derive_seed(cfg.train.seed, models.size()), ops_for(v));
            write_checkpoint((fs::path(out_dir) / ("model_" + key + ".isck")).string(), m.ck);
            write_text((fs::path(out_dir) / ("training_log_" + key + ".csv")).string(),
                       training_log_csv(m.log));
            it = models.emplace(key, std::move(m)).first;
        }
        return it->second;
    };

    std::string csv =
        "loss,train_snr,test_snr,mse_mean,mse_median,mse_std,ssim_mean,ssim_median,ssim_std\n";
    std::map<std::string, double> mse_mean_at;  // "loss@test_snr" -> mean MSE
    for (const std::string& loss_name : cfg.report.losses) {
        const LossVariant v = parse_loss_variant(loss_name);
        const bool snr_dependent = v.noisy_input || v.kind == LossKind::field;
        std::vector<double> train_snrs =
            snr_dependent ? cfg.report.train_snrs : std::vector<double>{kInf};
        for (double tr_snr : train_snrs) {
            TrainedModel& m = get_model(v, tr_snr);
            for (double te_snr : cfg.report.test_snrs) {
                const MetricReport rep = eval_model(m.ck.params, test_ds, snr_label(te_snr));
                csv += loss_name + "," + (snr_dependent ? snr_label(tr_snr) : "any") + "," +
                       snr_label(te_snr) + "," + csv_num(rep.mse_stats.mean) + "," +
                       csv_num(rep.mse_stats.median) + "," + csv_num(rep.mse_stats.stddev) + "," +
                       csv_num(rep.ssim_stats.mean) + "," + csv_num(rep.ssim_stats.median) + "," +
                       csv_num(rep.ssim_stats.stddev) + "\n";
                // trend bookkeeping: snr-free losses always recorded; field at
                // the training snr matching the paper default (5 dB) wins
                const std::string at = loss_name + "@" + snr_label(te_snr);
                if (!snr_dependent || tr_snr == 5.0 || !mse_mean_at.count(at))
                    mse_mean_at[at] = rep.mse_stats.mean;
            }
        }
    }
    write_text((fs::path(out_dir) / "snr_study.csv").string(), csv);

    // trend flags mirroring the bold-entry pattern of the summary table
    std::string trend = "comparison,test_snr,mse_lhs,mse_rhs,holds\n";
    auto add_trend = [&](const std::string& lhs, const std::string& rhs, double snr) {
        const std::string a = lhs + "@" + snr_label(snr);
        const std::string b = rhs + "@" + snr_label(snr);
        if (!mse_mean_at.count(a) || !mse_mean_at.count(b)) return;
        const double va = mse_mean_at[a], vb = mse_mean_at[b];
        trend += lhs + "<=" + rhs + "," + snr_label(snr) + "," + csv_num(va) + "," + csv_num(vb) +
                 "," + (va <= vb ? "yes" : "NO") + "\n";
    };
    add_trend("current", "contrast-clean", 20.0);
    add_trend("field", "contrast-clean", 5.0);
    write_text((fs::path(out_dir) / "trend_summary.csv").string(), trend);

    if (cfg.report.austria_enabled) {
        if (cfg.scene.side_x_lambda < 3.92 || cfg.scene.side_y_lambda < 3.92)
            throw ConfigError("cmd_report: austria profile needs a DOI of at least 3.92 lambda0");
        const Scene scene = train_ds.scene;
        const GreensOperators ops(scene);
        const FieldSet einc = incident_field(scene);
        const double snr = cfg.report.austria_snr;

        std::vector<LossVariant> variants{parse_loss_variant("current"),
                                          parse_loss_variant("field")};
        for (char set : {'a', 'b', 'c'}) {
            std::string austria_csv = "set,eps,loss,mse,ssim\n";
            int case_idx = 0;
            for (double eps : cfg.report.austria_eps) {
                const double el = set == 'b' ? 2.0 : eps;  // a: all, c: left disk
                const double er = set == 'a' ? eps : 2.0;
                const double ering = set == 'c' ? 2.0 : eps;
                const ContrastMap truth = austria_phantom(el, er, ering, scene.grid);
                const SolveResult sol = solve_total_field(ops, truth, einc);
                FieldSet mea = scattered_at_receivers(ops, sol.current);
                mea = add_awgn(mea, snr, derive_seed(master, 777000 + case_idx));
                const ContrastMap bp = back_projection(mea, ops, einc);

                for (const LossVariant& v : variants) {
                    TrainedModel& m = get_model(v, snr);
                    const Eigen::VectorXcd pred = predict(m.ck.params, bp);
                    austria_csv += std::string(1, set) + "," + csv_num(eps) + "," + v.name + "," +
                                   csv_num(mse(pred, truth.chi)) + "," +
                                   csv_num(ssim_or_nan(truth.chi.real(), pred.real(),
                                                       scene.grid)) +
                                   "\n";
                    if (case_idx == 0)
                        export_panel(pred, scene.grid,
                                     (fs::path(out_dir) /
                                      ("austria_" + std::string(1, set) + "_" + v.name + ".pgm"))
                                         .string());
                }
                if (case_idx == 0)
                    export_panel(truth.chi, scene.grid,
                                 (fs::path(out_dir) /
                                  ("austria_" + std::string(1, set) + "_truth.pgm"))
                                     .string());
                ++case_idx;
            }
            write_text(
                (fs::path(out_dir) / ("austria_" + std::string(1, set) + ".csv")).string(),
                austria_csv);
        }
    }
}

double cmd_mie_check(const ExperimentConfig* cfg, const std::string& out_dir, std::ostream* log) {
    SceneConfig sc;
    double eps = 2.0, radius_lambda = 0.5;
    if (cfg) {
        sc = cfg->scene;
        eps = cfg->dataset.disk_eps;
        radius_lambda = cfg->dataset.disk_radius_lambda;
    } else {
        // >= 15 cells per in-medium wavelength for eps 2 at 32 cells / 1.4 lambda0
        sc = SceneConfig{32, 32, 1.4, 1.4, 0.075, 16, 16, 4.0};
    }
    const Scene scene = scene_from_config(sc);
    const GreensOperators ops(scene);
    const FieldSet einc = incident_field(scene);
    const ContrastMap disk = disk_phantom(eps, radius_lambda * scene.grid.lambda0,
                                          scene.grid.center_x, scene.grid.center_y, scene.grid);
    const SolveResult sol = solve_total_field(ops, disk, einc);
    const FieldSet mom = scattered_at_receivers(ops, sol.current);
    const FieldSet mie = mie_reference(eps, radius_lambda * scene.grid.lambda0, scene);

    std::string csv = "tx,rel_l2\n";
    double worst = 0.0;
    for (int v = 0; v < scene.n_tx(); ++v) {
        const double rel =
            (mom.values.col(v) - mie.values.col(v)).norm() / mie.values.col(v).norm();
        worst = std::max(worst, rel);
        csv += std::to_string(v) + "," + csv_num(rel) + "\n";
        if (log) *log << "tx " << v << ": relative L2 " << rel << "\n";
    }
    if (log) *log << "max relative L2: " << worst << "\n";
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_text((fs::path(out_dir) / "mie_check.csv").string(), csv);
    }
    if (!(worst <= 0.03))
        throw NumericError("mie check failed: max relative L2 " + csv_num(worst) + " > 0.03");
    return worst;
}

}  // namespace iscat
