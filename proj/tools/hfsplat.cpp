// Copyright Contributors to the hfsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: gen-scene, maps, train, eval, render.
#include "hfsplat/config.hpp"
#include "hfsplat/demand.hpp"
#include "hfsplat/io.hpp"
#include "hfsplat/reliability.hpp"
#include "hfsplat/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

using namespace hfs;

int gen_scene_cmd(const std::string &spec_path, const std::string &out) {
    const SceneFile sf = scene_file_from_json(read_json(spec_path));
    const Scene scene = gen_scene(sf.scene);
    const Dataset ds = make_dataset(scene, sf.scene.factor, sf.sr);
    const auto init = init_points(scene, sf.init_fraction, sf.init_jitter, sf.scene.seed);
    write_scene_dir(out, sf, ds, init);
    std::cout << "wrote " << ds.train.size() << " training views, " << ds.test.size() << " test views, "
              << init.size() << " initial Gaussians (ground truth has " << scene.model.size() << ") to " << out
              << "\n";
    return 0;
}

TrainConfig load_config(const std::string &path) {
    return path.empty() ? TrainConfig{} : train_config_from_json(read_json(path));
}

int maps_cmd(const std::string &model_path, const std::string &data, const std::string &out,
             const std::string &config_path) {
    const TrainConfig cfg = load_config(config_path);
    const Dataset ds = read_scene_dir(data);
    std::vector<Gaussian> model = read_checkpoint(model_path);
    std::vector<Camera> cams;
    std::vector<ImagePlane> sr;
    for (const ViewData &v : ds.train) {
        cams.push_back(v.camera);
        sr.push_back(v.sr);
    }
    std::vector<double> d;
    for (const GaussianDemand &g : compute_demand(model, cams, cfg.demand, cfg.render.cov_floor)) d.push_back(g.d);
    const ReliabilityAssessor assessor(cams, sr, cfg.reliability);
    fs::create_directories(out);
    for (std::size_t t = 0; t < cams.size(); ++t) {
        const RasterPlan plan(model, cams[t], cfg.render);
        const ViewMaps maps = assessor.assess(t, render(plan), rasterize_scalar(plan, d));
        const std::string stem = view_name(t).substr(0, 3);
        const std::pair<const char *, const ImagePlane *> named[] = {
            {"D", &maps.D}, {"E", &maps.E}, {"G", &maps.G}, {"X", &maps.X}, {"C_rel", &maps.C_rel}, {"M", &maps.M}};
        for (const auto &[name, img] : named) {
            write_pfm(fs::path(out) / (stem + "_" + name + ".pfm"), *img);
            write_png(fs::path(out) / (stem + "_" + name + ".png"), *img);
        }
        std::cout << "view " << t << ": neighbor coverage " << maps.neighbor_coverage << "\n";
    }
    return 0;
}

int train_cmd(const std::string &config_path, const std::string &data, const std::string &out) {
    const TrainConfig cfg = load_config(config_path);
    const Dataset ds = read_scene_dir(data);
    const auto init = read_checkpoint(fs::path(data) / "init.ckpt");
    fs::create_directories(out);
    write_json(fs::path(out) / "config.json", to_json(cfg));

    std::ofstream metrics(fs::path(out) / "metrics.csv");
    std::ofstream events(fs::path(out) / "densify.jsonl");
    if (!metrics || !events) throw IoError("cannot create logs in '" + out + "'");
    metrics << metrics_csv_header() << "\n";

    Trainer trainer(ds, init, cfg);
    TrainHooks hooks;
    hooks.on_metrics = [&](const MetricsRow &r) {
        metrics << to_csv(r) << "\n";
        metrics.flush();
        if (r.iteration % 1000 == 0) {
            std::cout << "iter " << r.iteration << "  L_lr " << r.l_lr << "  population " << r.population
                      << "  PSNR_train " << r.psnr_train << std::endl;
        }
    };
    hooks.on_densify = [&](const DensifyEvent &e) { events << to_json(e).dump() << "\n"; };
    hooks.on_checkpoint = [&](int it, const std::vector<Gaussian> &m) {
        char name[32];
        std::snprintf(name, sizeof name, "ckpt_%06d.bin", it);
        write_checkpoint(fs::path(out) / name, m);
    };
    trainer.set_hooks(hooks);
    trainer.run();
    write_checkpoint(fs::path(out) / "final.bin", trainer.model());
    if (!ds.test.empty()) {
        std::cout << "test PSNR " << mean_psnr(evaluate_views(trainer.model(), ds.test, cfg.render)) << "\n";
    }
    return 0;
}

int eval_cmd(const std::string &model_path, const std::string &data, const std::string &split) {
    const Dataset ds = read_scene_dir(data);
    const auto model = read_checkpoint(model_path);
    const std::vector<ViewData> &views = split == "train" ? ds.train : ds.test;
    for (const ViewData &v : views) {
        if (v.gt.data.empty()) throw IoError("scene has no ground truth for the " + split + " split");
    }
    const auto scores = evaluate_views(model, views);
    std::cout << "view,psnr,ssim\n";
    double p = 0.0, s = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        std::cout << i << "," << scores[i].psnr << "," << scores[i].ssim << "\n";
        p += scores[i].psnr;
        s += scores[i].ssim;
    }
    if (!scores.empty()) std::cout << "mean," << p / scores.size() << "," << s / scores.size() << "\n";
    return 0;
}

int render_cmd(const std::string &model_path, const std::string &camera_path, const std::string &out) {
    const auto model = read_checkpoint(model_path);
    const Camera cam = camera_from_json(read_json(camera_path));
    write_png(out, render(model, cam).color);
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Gaussian splatting with reliability-aware detail injection"};
    app.require_subcommand(1);

    std::string spec, out, model, data, config, camera, split = "test";

    auto *gen = app.add_subcommand("gen-scene", "Generate a synthetic scene directory");
    gen->add_option("--spec", spec, "Scene spec JSON")->required()->check(CLI::ExistingFile);
    gen->add_option("--out", out, "Output scene directory")->required();

    auto *maps = app.add_subcommand("maps", "Write the six per-view maps for a model");
    maps->add_option("--model", model, "Checkpoint")->required()->check(CLI::ExistingFile);
    maps->add_option("--data", data, "Scene directory")->required()->check(CLI::ExistingDirectory);
    maps->add_option("--out", out, "Output directory")->required();
    maps->add_option("--config", config, "Training config JSON for map parameters")->check(CLI::ExistingFile);

    auto *train = app.add_subcommand("train", "Train from a scene directory");
    train->add_option("--config", config, "Training config JSON (defaults when omitted)")->check(CLI::ExistingFile);
    train->add_option("--data", data, "Scene directory")->required()->check(CLI::ExistingDirectory);
    train->add_option("--out", out, "Run directory")->required();

    auto *eval = app.add_subcommand("eval", "PSNR/SSIM per view as CSV");
    eval->add_option("--model", model, "Checkpoint")->required()->check(CLI::ExistingFile);
    eval->add_option("--data", data, "Scene directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--split", split, "Views to score")->check(CLI::IsMember({"train", "test"}));

    auto *rend = app.add_subcommand("render", "Render a checkpoint from one camera");
    rend->add_option("--model", model, "Checkpoint")->required()->check(CLI::ExistingFile);
    rend->add_option("--camera", camera, "Camera JSON")->required()->check(CLI::ExistingFile);
    rend->add_option("--out", out, "Output PNG")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*gen) return gen_scene_cmd(spec, out);
        if (*maps) return maps_cmd(model, data, out, config);
        if (*train) return train_cmd(config, data, out);
        if (*eval) return eval_cmd(model, data, split);
        if (*rend) return render_cmd(model, camera, out);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
