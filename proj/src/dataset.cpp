#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "iscat/classic.hpp"
#include "iscat/experiment.hpp"
#include "iscat/parallel.hpp"
#include "iscat/rng.hpp"
#include "iscat/store.hpp"

namespace iscat {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string sample_file_name(int index, const std::string& variant) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "sample_%05d_%s.isct", index, variant.c_str());
    return buf;
}

PhantomRecipe recipe_for(const DatasetConfig& d, std::uint64_t seed) {
    PhantomRecipe r;
    r.eps_lo = d.eps_lo;
    r.eps_hi = d.eps_hi;
    r.rng_seed = seed;
    r.min_polygons = d.min_polygons;
    r.max_polygons = d.max_polygons;
    r.disk_eps = d.disk_eps;
    r.disk_radius_lambda = d.disk_radius_lambda;
    if (d.kind == "digit")
        r.kind = PhantomRecipe::Kind::digit;
    else if (d.kind == "polygon")
        r.kind = PhantomRecipe::Kind::polygon;
    else if (d.kind == "austria")
        r.kind = PhantomRecipe::Kind::austria;
    else
        r.kind = PhantomRecipe::Kind::disk;
    return r;
}

ContrastMap phantom_for_sample(const DatasetConfig& d, const GridSpec& grid, std::uint64_t seed,
                               const std::vector<GlyphRaster>* idx_glyphs) {
    if (d.kind == "digit" && idx_glyphs && !idx_glyphs->empty()) {
        Rng rng(seed);
        const auto& glyph = (*idx_glyphs)[rng.below(idx_glyphs->size())];
        const double eps = rng.uniform(d.eps_lo, d.eps_hi);
        return digit_phantom(glyph, eps, grid);
    }
    PhantomRecipe r = recipe_for(d, seed);
    if (d.kind == "austria") {
        Rng rng(seed);
        r.eps_disk_left = rng.uniform(d.eps_lo, d.eps_hi);
        r.eps_disk_right = rng.uniform(d.eps_lo, d.eps_hi);
        r.eps_ring = rng.uniform(d.eps_lo, d.eps_hi);
    }
    return generate_phantom(r, grid);
}

}  // namespace

std::string generate_dataset(const ExperimentConfig& cfg, int count, std::uint64_t master_seed,
                             const std::string& out_dir) {
    if (count < 1) throw ConfigError("generate_dataset: count must be >= 1");
    fs::create_directories(out_dir);

    const Scene scene = scene_from_config(cfg.scene);
    const GreensOperators ops(scene);
    const FieldSet einc = incident_field(scene);

    std::vector<GlyphRaster> idx_glyphs;
    if (cfg.dataset.kind == "digit" && !cfg.dataset.idx_images.empty())
        idx_glyphs = load_idx_images(cfg.dataset.idx_images);

    std::vector<std::string> variants{"clean"};
    for (double snr : cfg.dataset.snr_list) variants.push_back(snr_label(snr));

    SolveOptions solve_opt;
    solve_opt.backend = cfg.dataset.solver == "dense" ? SolveOptions::Backend::dense
                                                      : SolveOptions::Backend::krylov;
    solve_opt.dense_fallback = solve_opt.backend == SolveOptions::Backend::krylov;

    std::vector<std::string> errors(count);
    parallel_for(count, [&](int i) {
        try {
            const std::uint64_t sample_seed = derive_seed(master_seed, i);
            const ContrastMap chi = phantom_for_sample(
                cfg.dataset, scene.grid, sample_seed, idx_glyphs.empty() ? nullptr : &idx_glyphs);

            const SolveResult sol = solve_total_field(ops, chi, einc, solve_opt);
            const FieldSet esca_doi = scattered_in_doi(sol.etot, einc);
            const FieldSet esca_mea = scattered_at_receivers(ops, sol.current);
            const ContrastMap chi_bp_clean = back_projection(esca_mea, ops, einc);

            SampleRecord base;
            base.nx = scene.grid.nx;
            base.ny = scene.grid.ny;
            base.n_tx = scene.n_tx();
            base.n_rx = scene.n_rx();
            base.chi_true = chi.chi;
            base.chi_bp_clean = chi_bp_clean.chi;
            base.j_true = sol.current.values;
            base.etot_true = sol.etot.values;
            base.esca_mea_clean = esca_mea.values;

            for (std::size_t vi = 0; vi < variants.size(); ++vi) {
                SampleRecord rec = base;
                if (variants[vi] == "clean") {
                    rec.snr_db = kInf;
                    rec.chi_bp_noisy = base.chi_bp_clean;
                    rec.esca_mea_noisy = base.esca_mea_clean;
                    rec.esca_doi_noisy = esca_doi.values;
                } else {
                    const double snr = cfg.dataset.snr_list[vi - 1];
                    rec.snr_db = snr;
                    const std::uint64_t noise_seed = derive_seed(sample_seed, vi);
                    const FieldSet mea_noisy = add_awgn(esca_mea, snr, noise_seed);
                    const FieldSet doi_noisy =
                        add_awgn(esca_doi, snr, derive_seed(sample_seed, vi + 1000));
                    rec.esca_mea_noisy = mea_noisy.values;
                    rec.esca_doi_noisy = doi_noisy.values;
                    rec.chi_bp_noisy = back_projection(mea_noisy, ops, einc).chi;
                }
                write_sample((fs::path(out_dir) / sample_file_name(i, variants[vi])).string(),
                             rec);
            }
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (int i = 0; i < count; ++i)
        if (!errors[i].empty())
            throw NumericError("generate_dataset: sample " + std::to_string(i) + ": " + errors[i]);

    nlohmann::ordered_json manifest;
    manifest["format_version"] = 1;
    manifest["tool_version"] = kVersion;
    manifest["scene"] = json::parse(resolved_config_json(cfg)).at("scene");
    manifest["dataset"] = json::parse(resolved_config_json(cfg)).at("dataset");
    manifest["sample_count"] = count;
    manifest["master_seed"] = master_seed;
    manifest["snr_variants"] = variants;
    nlohmann::ordered_json samples = nlohmann::ordered_json::array();
    for (int i = 0; i < count; ++i) {
        nlohmann::ordered_json files;
        for (const std::string& v : variants) {
            const std::string name = sample_file_name(i, v);
            char digest[32];
            std::snprintf(digest, sizeof(digest), "%016llx",
                          static_cast<unsigned long long>(
                              fnv1a64_file((fs::path(out_dir) / name).string())));
            files[v] = {{"name", name}, {"fnv1a64", digest}};
        }
        samples.push_back({{"index", i}, {"files", files}});
    }
    manifest["samples"] = std::move(samples);

    const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw IoError("generate_dataset: cannot write " + manifest_path);
    out << manifest.dump(2) << "\n";
    return manifest_path;
}

DatasetOnDisk open_dataset(const std::string& dir) {
    const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
    std::ifstream in(manifest_path);
    if (!in) throw IoError("open_dataset: cannot open " + manifest_path);
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw IoError("open_dataset: bad manifest: " + std::string(e.what()));
    }

    DatasetOnDisk ds;
    ds.dir = dir;
    SceneConfig sc;
    const json& s = manifest.at("scene");
    sc.nx = s.at("nx").get<int>();
    sc.ny = s.at("ny").get<int>();
    sc.side_x_lambda = s.at("side_x_lambda0").get<double>();
    sc.side_y_lambda = s.at("side_y_lambda0").get<double>();
    sc.lambda0_m = s.at("lambda0_m").get<double>();
    sc.n_tx = s.at("n_tx").get<int>();
    sc.n_rx = s.at("n_rx").get<int>();
    sc.ring_radius_lambda = s.at("ring_radius_lambda0").get<double>();
    ds.scene = scene_from_config(sc);
    ds.sample_count = manifest.at("sample_count").get<int>();
    for (const auto& v : manifest.at("snr_variants")) ds.variants.push_back(v.get<std::string>());

    ds.files.assign(ds.variants.size(), std::vector<std::string>(ds.sample_count));
    const auto& samples = manifest.at("samples");
    if (static_cast<int>(samples.size()) != ds.sample_count)
        throw IoError("open_dataset: manifest sample list length mismatch");
    for (const auto& entry : samples) {
        const int idx = entry.at("index").get<int>();
        for (std::size_t vi = 0; vi < ds.variants.size(); ++vi) {
            const auto& f = entry.at("files").at(ds.variants[vi]);
            const std::string name = f.at("name").get<std::string>();
            const std::string path = (fs::path(dir) / name).string();
            char digest[32];
            std::snprintf(digest, sizeof(digest), "%016llx",
                          static_cast<unsigned long long>(fnv1a64_file(path)));
            if (f.at("fnv1a64").get<std::string>() != digest)
                throw IoError("open_dataset: checksum mismatch for " + name);
            ds.files[vi][idx] = name;
        }
    }
    return ds;
}

namespace {

int variant_index(const DatasetOnDisk& ds, const std::string& variant) {
    for (std::size_t i = 0; i < ds.variants.size(); ++i)
        if (ds.variants[i] == variant) return static_cast<int>(i);
    throw ConfigError("dataset: variant \"" + variant + "\" not present (have: " +
                      [&] {
                          std::string all;
                          for (const auto& v : ds.variants) all += v + " ";
                          return all;
                      }() +
                      ")");
}

}  // namespace

std::vector<TrainingSample> load_samples(const DatasetOnDisk& ds, const std::string& input_variant,
                                         const std::string& target_variant) {
    const int in_vi = variant_index(ds, input_variant);
    const int tg_vi = variant_index(ds, target_variant);

    std::vector<TrainingSample> out(ds.sample_count);
    parallel_for(ds.sample_count, [&](int i) {
        const SampleRecord tgt =
            read_sample((std::filesystem::path(ds.dir) / ds.files[tg_vi][i]).string());
        TrainingSample& s = out[i];
        s.chi_true = ContrastMap{ds.scene.grid, tgt.chi_true};
        s.j_true = tgt.j_true;
        s.etot_true = tgt.etot_true;
        s.esca_doi_noisy = tgt.esca_doi_noisy;
        s.scene_ref = ds.dir;
        if (in_vi == tg_vi) {
            s.chi_bp = ContrastMap{ds.scene.grid,
                                   input_variant == "clean" ? tgt.chi_bp_clean : tgt.chi_bp_noisy};
        } else {
            const SampleRecord in_rec =
                read_sample((std::filesystem::path(ds.dir) / ds.files[in_vi][i]).string());
            s.chi_bp = ContrastMap{ds.scene.grid, input_variant == "clean" ? in_rec.chi_bp_clean
                                                                           : in_rec.chi_bp_noisy};
        }
    });
    return out;
}

}  // namespace iscat
