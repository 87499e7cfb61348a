// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include "dgs/depth_prior.hpp"
#include "dgs/errors.hpp"
#include "dgs/eval_harness.hpp"
#include "dgs/scene_io.hpp"

#include <json.hpp>
#include <omp.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace dgs::cli {

namespace {

FitWeighting parse_weighting(const std::string& name) {
    if (name == "scaled_target") return FitWeighting::scaled_target;
    if (name == "residual") return FitWeighting::residual;
    throw InputError("unknown fit weighting '" + name + "' (expected scaled_target or residual)");
}

std::string depth_path(const std::string& depth_dir, const std::string& image_name) {
    return (fs::path(depth_dir) / (fs::path(image_name).stem().string() + ".pfm")).string();
}

// One view's fitted prior, loading the raw estimate from disk.
DepthPrior fit_view_prior(const SceneManifest& manifest, const SfmModel& model,
                          const std::vector<SfmPoint>& points, const Camera& cam,
                          FitWeighting weighting, bool& used_fallback) {
    if (manifest.depth_dir.empty())
        throw InputError("scene manifest has no depth_dir but a depth prior is required");
    const std::string name = model.image_name(cam.id);
    const std::string path = depth_path(manifest.depth_dir, name);
    if (!fs::exists(path))
        throw InputError("missing raw depth for view '" + name + "': " + path);
    RawDepthMap raw;
    raw.view_id = cam.id;
    raw.values = read_pfm(path);
    raw.source_tag = path;
    if (raw.values.width() != cam.width || raw.values.height() != cam.height)
        throw InputError("raw depth for view '" + name + "' does not match the camera size");

    SparseDepthMap sparse = project_sparse_depth(points, cam);
    ScaleOffsetFit fit = fit_scale_offset_with_fallback(raw, sparse, weighting, used_fallback);
    DepthPrior prior = align_depth(raw, fit);
    prior.view_id = cam.id;
    return prior;
}

json config_to_json(const TrainConfig& c) {
    return json{{"max_iterations", c.max_iterations},
                {"lr_position_init", c.lr_position_init},
                {"lr_position_final", c.lr_position_final},
                {"lr_scale", c.lr_scale},
                {"lr_rotation", c.lr_rotation},
                {"lr_opacity", c.lr_opacity},
                {"lr_sh", c.lr_sh},
                {"densify_interval", c.densify_interval},
                {"densify_start", c.densify_start},
                {"densify_end", c.densify_end},
                {"densify_grad_threshold", c.densify_grad_threshold},
                {"densify_size_fraction", c.densify_size_fraction},
                {"prune_opacity", c.prune_opacity},
                {"scene_extent", c.scene_extent},
                {"use_early_stop", c.use_early_stop},
                {"early_stop_window", c.early_stop_window},
                {"early_stop_patience", c.early_stop_patience},
                {"early_stop_min_delta", c.early_stop_min_delta},
                {"use_depth_loss", c.use_depth_loss},
                {"use_smoothness", c.use_smoothness},
                {"lambda_ssim", c.loss_weights.ssim},
                {"lambda_depth", c.loss_weights.depth},
                {"lambda_smooth", c.loss_weights.smooth},
                {"opacity_reset", c.opacity_reset},
                {"opacity_reset_interval", c.opacity_reset_interval},
                {"seed", c.seed},
                {"background", {c.background.x(), c.background.y(), c.background.z()}}};
}

std::vector<EvalRecord> read_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open metrics file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw CorruptFileError("empty metrics file: " + path);
    std::vector<EvalRecord> records;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        EvalRecord r;
        std::string field;
        try {
            std::getline(ss, r.scene, ',');
            std::getline(ss, field, ',');
            r.k = std::stoi(field);
            std::getline(ss, field, ',');
            r.seed = std::stoull(field);
            std::getline(ss, field, ',');
            r.view = std::stoi(field);
            std::getline(ss, field, ',');
            r.psnr = std::stod(field);
            std::getline(ss, field, ',');
            r.ssim = std::stod(field);
        } catch (const std::exception&) {
            throw CorruptFileError("bad row in " + path + " line " + std::to_string(line_no));
        }
        records.push_back(r);
    }
    return records;
}

} // namespace

void build_app(CLI::App& app, CliState& state) {
    app.description("Depth-regularized Gaussian splatting trainer");
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(0, 1);
    app.add_option("--threads", state.threads,
                   "Worker thread cap (0 = library default)")
        ->envname("DGS_THREADS");

    auto* fit = app.add_subcommand("fit-depth",
                                   "Align raw depth maps to SfM sparse depth per view");
    fit->add_option("--scene", state.fit.scene_manifest, "Scene manifest file")->required();
    fit->add_option("--out", state.fit.out_dir, "Output directory for aligned priors");
    fit->add_option("--weighting", state.fit.weighting,
                    "Fit objective: scaled_target or residual");
    fit->add_option("--views", state.fit.views, "Camera ids to fit (default: all)");
    fit->set_config("--config");

    auto* train = app.add_subcommand("train", "Run the k-shot training workflow");
    auto& t = state.train;
    auto& c = state.train.config;
    train->add_option("--scene", t.scene_manifest, "Scene manifest file")->required();
    train->add_option("--out", t.out_dir, "Run output directory");
    train->add_option("--k", t.k, "Number of training views sampled from the hull pool");
    train->add_option("--seed", c.seed, "Random seed for view sampling and densification");
    train->add_option("--init", t.init, "Splat initialization: points or unproject");
    train->add_option("--unproject-stride", t.unproject_stride,
                      "Pixel stride when initializing from unprojected prior depth");
    train->add_option("--weighting", t.weighting, "Fit objective: scaled_target or residual");
    train->add_option("--checkpoint-interval", t.checkpoint_interval,
                      "Write a checkpoint every N iterations (0 = off)");
    train->add_flag("--no-depth", t.no_depth, "Disable the depth-prior loss term");
    train->add_flag("--no-smooth", t.no_smooth, "Disable the smoothness loss term");
    train->add_flag("--no-early-stop", t.no_early_stop, "Disable depth-loss early stopping");
    train->add_option("--iterations", c.max_iterations, "Maximum training iterations");
    train->add_option("--lr-position-init", c.lr_position_init, "Initial position learning rate");
    train->add_option("--lr-position-final", c.lr_position_final, "Final position learning rate");
    train->add_option("--lr-scale", c.lr_scale, "Scale learning rate");
    train->add_option("--lr-rotation", c.lr_rotation, "Rotation learning rate");
    train->add_option("--lr-opacity", c.lr_opacity, "Opacity learning rate");
    train->add_option("--lr-sh", c.lr_sh, "Spherical-harmonics learning rate");
    train->add_option("--densify-interval", c.densify_interval, "Densify every N iterations");
    train->add_option("--densify-start", c.densify_start, "First densification iteration");
    train->add_option("--densify-end", c.densify_end, "Last densification iteration");
    train->add_option("--densify-grad-threshold", c.densify_grad_threshold,
                      "Mean screen-gradient norm that triggers densification");
    train->add_option("--densify-size-fraction", c.densify_size_fraction,
                      "Clone/split size threshold as a fraction of scene extent");
    train->add_option("--prune-opacity", c.prune_opacity, "Prune splats below this opacity");
    train->add_option("--scene-extent", c.scene_extent,
                      "Scene extent override (0 = derive from the initial splats)");
    train->add_option("--early-stop-start", c.early_stop_start,
                      "Iteration at which depth-loss monitoring begins");
    train->add_option("--early-stop-window", c.early_stop_window,
                      "Moving-average window of the early stop");
    train->add_option("--early-stop-patience", c.early_stop_patience,
                      "Evaluations without improvement before halting");
    train->add_option("--early-stop-min-delta", c.early_stop_min_delta,
                      "Minimum moving-average improvement that resets patience");
    train->add_option("--lambda-ssim", c.loss_weights.ssim, "D-SSIM mixing weight");
    train->add_option("--lambda-depth", c.loss_weights.depth, "Depth loss weight");
    train->add_option("--lambda-smooth", c.loss_weights.smooth, "Smoothness loss weight");
    train->add_flag("--opacity-reset", c.opacity_reset,
                    "Enable the periodic opacity reset (off by default)");
    train->add_option("--opacity-reset-interval", c.opacity_reset_interval,
                      "Iterations between opacity resets when enabled");
    train->set_config("--config");

    auto* render = app.add_subcommand("render", "Render checkpoint views to PNG + PFM depth");
    render->add_option("--checkpoint", state.render.checkpoint, "Splat checkpoint PLY")
        ->required();
    render->add_option("--model", state.render.model_dir, "COLMAP model directory for cameras")
        ->required();
    render->add_option("--out", state.render.out_dir, "Output directory");
    render->add_option("--views", state.render.views, "Camera ids to render (default: all)");
    render->set_config("--config");

    auto* eval = app.add_subcommand("eval", "Aggregate metrics from train runs");
    eval->add_option("--inputs", state.eval.inputs, "metrics.csv files from train runs")
        ->required();
    eval->add_option("--out", state.eval.out_csv, "Merged results.csv path");
    eval->add_option("--expected-seeds", state.eval.expected_seeds,
                     "Seeds expected per (scene, k); fewer flags the row incomplete");
    eval->set_config("--config");
}

void run_fit_depth(const FitDepthOptions& opts) {
    SceneManifest manifest = parse_scene_manifest(opts.scene_manifest);
    SfmModel model = parse_colmap(manifest.model_dir);
    FitWeighting weighting = parse_weighting(opts.weighting);

    std::vector<int> views = opts.views;
    if (views.empty())
        for (const auto& cam : model.cameras) views.push_back(cam.id);

    fs::create_directories(opts.out_dir);
    std::ofstream report((fs::path(opts.out_dir) / "fit_report.csv").string());
    report << "view,image,scale,offset,residual,fallback\n";

    for (int id : views) {
        const Camera* cam = model.find_camera(id);
        if (!cam) throw InputError("camera id " + std::to_string(id) + " not in the model");
        bool used_fallback = false;
        DepthPrior prior =
            fit_view_prior(manifest, model, model.points, *cam, weighting, used_fallback);
        const std::string stem = fs::path(model.image_name(id)).stem().string();
        write_prior(prior, (fs::path(opts.out_dir) / (stem + ".pfm")).string());
        std::cout << "view " << id << " (" << model.image_name(id) << "): scale=" << prior.scale
                  << " offset=" << prior.offset << " residual=" << prior.fit_residual
                  << (used_fallback ? " (offset-only fallback)" : "") << "\n";
        report << id << ',' << model.image_name(id) << ',' << prior.scale << ',' << prior.offset
               << ',' << prior.fit_residual << ',' << (used_fallback ? 1 : 0) << "\n";
    }
}

void run_train(const TrainOptions& opts) {
    SceneManifest manifest = parse_scene_manifest(opts.scene_manifest);
    SfmModel model = parse_colmap(manifest.model_dir);
    FitWeighting weighting = parse_weighting(opts.weighting);
    if (opts.init != "points" && opts.init != "unproject")
        throw InputError("unknown --init '" + opts.init + "' (expected points or unproject)");

    TrainConfig config = opts.config;
    config.use_depth_loss = !opts.no_depth;
    config.use_smoothness = !opts.no_smooth;
    config.use_early_stop = !opts.no_early_stop;

    SplitSpec split = convex_hull_split(model.cameras);
    split.scene_id = manifest.scene_id;
    std::vector<int> selection = sample_kshot(split.train_pool, opts.k, config.seed);
    std::sort(selection.begin(), selection.end());

    // The protocol's >= 3-view track filter cannot hold for k < 3; relax to k.
    const int min_views = std::min(3, opts.k);
    std::set<int> selected(selection.begin(), selection.end());
    std::vector<SfmPoint> points = filter_points(model.points, selected, min_views);
    if (min_views < 3)
        std::cerr << "note: k=" << opts.k << " selected views; point filter relaxed to "
                  << min_views << " views\n";
    if (points.empty())
        throw DegenerateError("no SfM points survive the selected-view track filter");

    fs::create_directories(opts.out_dir);

    // Per-view data for the selected training cameras.
    const bool need_priors = config.use_depth_loss || opts.init == "unproject";
    std::vector<TrainView> views;
    std::vector<DepthPrior> priors;
    std::vector<Camera> cams;
    std::vector<Image> images;
    for (int id : selection) {
        const Camera* cam = model.find_camera(id);
        TrainView view;
        view.camera = *cam;
        const std::string name = model.image_name(id);
        const std::string img_path = (fs::path(manifest.image_dir) / name).string();
        if (!fs::exists(img_path))
            throw InputError("missing training image for view '" + name + "': " + img_path);
        view.image = load_image(img_path);
        if (view.image.width() != cam->width || view.image.height() != cam->height)
            throw InputError("image size of view '" + name + "' does not match the camera");
        if (need_priors) {
            bool used_fallback = false;
            DepthPrior prior =
                fit_view_prior(manifest, model, points, *cam, weighting, used_fallback);
            if (config.use_depth_loss) view.prior_depth = prior.aligned;
            priors.push_back(std::move(prior));
        }
        if (config.use_smoothness) view.edge_mask = canny_edges(view.image).mask;
        cams.push_back(*cam);
        images.push_back(view.image);
        views.push_back(std::move(view));
    }

    // The manifest is written before training so a crashed run stays reproducible.
    json run_manifest{
        {"tool", "dgs"},
        {"version", kVersion},
        {"written_at",
         std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
             .count()},
        {"scene_manifest", opts.scene_manifest},
        {"scene_id", manifest.scene_id},
        {"image_dir", manifest.image_dir},
        {"model_dir", manifest.model_dir},
        {"depth_dir", manifest.depth_dir},
        {"out_dir", opts.out_dir},
        {"k", opts.k},
        {"init", opts.init},
        {"unproject_stride", opts.unproject_stride},
        {"weighting", opts.weighting},
        {"checkpoint_interval", opts.checkpoint_interval},
        {"train_pool", split.train_pool},
        {"test_set", split.test_set},
        {"selected_views", selection},
        {"config", config_to_json(config)},
    };
    std::ofstream((fs::path(opts.out_dir) / "run_manifest.json").string())
        << run_manifest.dump(2) << "\n";

    SplatSet init = opts.init == "points" ? init_from_points(points)
                                          : init_from_depth(priors, cams, images,
                                                            opts.unproject_stride);

    std::function<void(int, const SplatSet&)> callback;
    if (opts.checkpoint_interval > 0) {
        const fs::path ckpt_dir = fs::path(opts.out_dir) / "checkpoints";
        fs::create_directories(ckpt_dir);
        callback = [&, ckpt_dir](int iter, const SplatSet& set) {
            if (iter == 0 || iter % opts.checkpoint_interval != 0) return;
            char name[32];
            std::snprintf(name, sizeof(name), "iter_%06d", iter);
            export_ply(set, (ckpt_dir / (std::string(name) + ".ply")).string());
            std::ofstream((ckpt_dir / (std::string(name) + ".json")).string())
                << json{{"iteration", iter}, {"config", config_to_json(config)}}.dump(2) << "\n";
        };
    }

    TrainResult result = train(views, init, config, callback);
    export_ply(result.splats, (fs::path(opts.out_dir) / "point_cloud.ply").string());
    write_loss_log(result.log, (fs::path(opts.out_dir) / "loss_log.csv").string());
    std::cout << "trained " << result.iterations_run << " iterations ("
              << (result.early_stopped ? "early stopped" : "completed") << "), "
              << result.splats.size() << " splats\n";

    // Held-out evaluation on every test camera with an image on disk.
    std::vector<EvalRecord> records;
    for (int id : split.test_set) {
        const Camera* cam = model.find_camera(id);
        const std::string name = model.image_name(id);
        const std::string img_path = (fs::path(manifest.image_dir) / name).string();
        if (!fs::exists(img_path)) {
            std::cerr << "warning: no image for test view '" << name << "', skipping\n";
            continue;
        }
        Image target = load_image(img_path);
        RenderOutput out = render(result.splats, *cam, config.background, config.render, false);
        records.push_back({manifest.scene_id, opts.k, config.seed, id, psnr(out.color, target),
                           ssim(out.color, target)});
    }
    if (!records.empty()) {
        write_results_csv(records, (fs::path(opts.out_dir) / "metrics.csv").string());
        double mean = 0;
        for (const auto& r : records) mean += r.psnr;
        std::cout << "test PSNR mean over " << records.size() << " views: "
                  << mean / records.size() << " dB\n";
    }
}

void run_render(const RenderOptions& opts) {
    std::string warning;
    SplatSet splats = import_ply(opts.checkpoint, &warning);
    if (!warning.empty()) std::cerr << "warning: " << warning << "\n";
    if (splats.size() == 0)
        std::cerr << "warning: empty checkpoint; rendering background only\n";
    SfmModel model = parse_colmap(opts.model_dir);

    std::vector<int> views = opts.views;
    if (views.empty())
        for (const auto& cam : model.cameras) views.push_back(cam.id);
    fs::create_directories(opts.out_dir);

    for (int id : views) {
        const Camera* cam = model.find_camera(id);
        if (!cam) throw InputError("camera id " + std::to_string(id) + " not in the model");
        RenderOutput out = render(splats, *cam, Eigen::Vector3d::Zero(), {}, false);
        const std::string stem = fs::path(model.image_name(id)).stem().string();
        save_png(out.color, (fs::path(opts.out_dir) / (stem + ".png")).string());
        write_pfm(out.depth, (fs::path(opts.out_dir) / (stem + "_depth.pfm")).string());
    }
}

void run_eval(const EvalOptions& opts) {
    std::vector<EvalRecord> records;
    for (const auto& path : opts.inputs) {
        auto part = read_results_csv(path);
        records.insert(records.end(), part.begin(), part.end());
    }
    write_results_csv(records, opts.out_csv);
    auto rows = aggregate(records, opts.expected_seeds);
    for (const auto& row : rows)
        if (!row.complete)
            std::cerr << "warning: " << row.scene << " k=" << row.k << " has only "
                      << row.seed_count << " of " << opts.expected_seeds << " seeds\n";
    std::cout << format_table(rows);
}

int run(int argc, const char* const* argv) {
    CLI::App app{"dgs"};
    CliState state;
    build_app(app, state);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    return run_guarded([&] {
        if (state.threads > 0) omp_set_num_threads(state.threads);
        if (app.got_subcommand("fit-depth")) run_fit_depth(state.fit);
        else if (app.got_subcommand("train")) run_train(state.train);
        else if (app.got_subcommand("render")) run_render(state.render);
        else if (app.got_subcommand("eval")) run_eval(state.eval);
        else std::cout << app.help();
    });
}

int run_guarded(const std::function<void()>& body) {
    try {
        body();
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const DegenerateError& e) {
        std::cerr << "degenerate geometry: " << e.what() << "\n";
        return kExitDegenerate;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}

} // namespace dgs::cli
