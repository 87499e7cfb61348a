// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dgs/camera.hpp"
#include "dgs/image.hpp"
#include "dgs/losses.hpp"
#include "dgs/rasterizer.hpp"
#include "dgs/splats.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace dgs {

struct TrainConfig {
    int max_iterations = 5000;

    // Learning rates. The position rate decays exponentially from init to
    // final over max_iterations; the others are constant.
    double lr_position_init = 1.6e-4;
    double lr_position_final = 1.6e-6;
    double lr_scale = 5e-3;
    double lr_rotation = 1e-3;
    double lr_opacity = 0.05;
    double lr_sh = 2.5e-3;

    // Densification and pruning.
    int densify_interval = 100;
    int densify_start = 500;
    int densify_end = 15000;
    double densify_grad_threshold = 2e-4; // mean screen-space positional gradient norm
    double densify_size_fraction = 0.01;  // of scene extent; larger splats split, smaller clone
    double prune_opacity = 0.005;
    double scene_extent = 0.0; // 0 = derive from the initial splat bounding sphere

    // Early stop on the moving-averaged depth loss. Monitoring begins at
    // early_stop_start: the depth loss typically rises before it falls while
    // the geometry reorganizes, and a fresh moving average would flag that
    // startup hump as a regression.
    bool use_early_stop = true;
    int early_stop_start = 0;
    int early_stop_window = 100;
    int early_stop_patience = 5;
    double early_stop_min_delta = 1e-6;

    // Loss toggles and weights.
    bool use_depth_loss = true;
    bool use_smoothness = true;
    LossWeights loss_weights;

    // Opacity reset is off by default; when enabled, every
    // opacity_reset_interval iterations opacity is lowered to at most 0.01.
    bool opacity_reset = false;
    int opacity_reset_interval = 3000;

    uint64_t seed = 0;
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
    RenderSettings render;
};

// One training view: a posed ground-truth image plus its (optional) aligned
// depth prior and edge mask.
struct TrainView {
    Camera camera;
    Image image;       // H x W x 3 ground truth
    Image prior_depth; // aligned dense prior, empty disables the depth term for this view
    Mask edge_mask;    // empty disables the smoothness term for this view
};

struct IterationRecord {
    int iteration = 0;
    double color = 0, dssim = 0, depth = 0, smooth = 0, total = 0;
    size_t splat_count = 0;
};

struct TrainResult {
    SplatSet splats;
    std::vector<IterationRecord> log;
    int iterations_run = 0;
    bool early_stopped = false;
};

// Halts when the moving average over the last `window` depth losses has not
// improved on the best seen by at least `min_delta` for `patience`
// consecutive evaluations.
class EarlyStopState {
  public:
    EarlyStopState(int window, int patience, double min_delta);

    // Pushes one depth-loss value; returns true when training should halt.
    bool push(double depth_loss);

    double best_average() const { return best_; }

  private:
    int window_;
    int patience_;
    double min_delta_;
    std::deque<double> buffer_;
    double buffer_sum_ = 0.0;
    double best_;
    int since_best_ = 0;
};

// Clones small high-gradient splats, splits large ones into two children with
// scales reduced by 1.6 and positions sampled inside the parent, and prunes
// splats with opacity below the threshold. `mean_grad` is the per-splat mean
// screen-space positional gradient norm since the previous call. Returns the
// keep-mask over the original splats (for optimizer-state bookkeeping) via
// `kept`, with new splats appended at the end of `set`.
void densify_and_prune(SplatSet& set, const std::vector<double>& mean_grad,
                       const TrainConfig& config, std::mt19937_64& rng, std::vector<bool>* kept);

// Runs the optimization loop. `views` is mutable so that a per-iteration
// callback may modify priors mid-run; the callback (if any) is invoked at the
// start of every iteration with the current splats.
TrainResult train(std::vector<TrainView>& views, const SplatSet& init, const TrainConfig& config,
                  const std::function<void(int, const SplatSet&)>& callback = {});

// Writes the training log as CSV: iteration, color, dssim, depth, smooth,
// total, splat_count.
void write_loss_log(const std::vector<IterationRecord>& log, const std::string& path);

} // namespace dgs
