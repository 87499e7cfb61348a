// SPDX-License-Identifier: Apache-2.0
#include "dgs/trainer.hpp"

#include "dgs/errors.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <limits>

namespace dgs {

namespace {

// Adam hyperparameters (baseline convention).
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-15;
constexpr double kSplitScaleDivisor = 1.6;

// Every splat flattens to 23 parameters:
// [0..2] position, [3..5] log scale, [6..9] rotation, [10] opacity logit,
// [11..22] SH coefficients (row-major over the 3x4 block).
constexpr int kParamsPerSplat = 23;
using ParamBlock = std::array<double, kParamsPerSplat>;

struct AdamState {
    std::vector<ParamBlock> m, v;
    std::vector<long> steps;

    explicit AdamState(size_t n) { resize_zero(n); }
    void resize_zero(size_t n) {
        m.assign(n, ParamBlock{});
        v.assign(n, ParamBlock{});
        steps.assign(n, 0);
    }
};

ParamBlock pack_gradient(const SplatGradients& g, size_t i) {
    ParamBlock out{};
    for (int c = 0; c < 3; ++c) out[c] = g.positions[i][c];
    for (int c = 0; c < 3; ++c) out[3 + c] = g.log_scales[i][c];
    for (int c = 0; c < 4; ++c) out[6 + c] = g.rotations[i][c];
    out[10] = g.opacity_logits[i];
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) out[11 + r * 4 + c] = g.sh[i](r, c);
    return out;
}

void adam_step(SplatSet& set, const SplatGradients& grads, AdamState& opt, double lr_position,
               const TrainConfig& cfg) {
    const size_t n = set.size();
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(n); ++i) {
        ParamBlock g = pack_gradient(grads, i);
        ParamBlock lr;
        for (int c = 0; c < 3; ++c) lr[c] = lr_position;
        for (int c = 0; c < 3; ++c) lr[3 + c] = cfg.lr_scale;
        for (int c = 0; c < 4; ++c) lr[6 + c] = cfg.lr_rotation;
        lr[10] = cfg.lr_opacity;
        for (int c = 11; c < kParamsPerSplat; ++c) lr[c] = cfg.lr_sh;

        const long t = ++opt.steps[i];
        const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));

        ParamBlock update{};
        for (int c = 0; c < kParamsPerSplat; ++c) {
            double& m = opt.m[i][c];
            double& v = opt.v[i][c];
            m = kBeta1 * m + (1.0 - kBeta1) * g[c];
            v = kBeta2 * v + (1.0 - kBeta2) * g[c] * g[c];
            update[c] = lr[c] * (m / bc1) / (std::sqrt(v / bc2) + kAdamEps);
        }
        for (int c = 0; c < 3; ++c) set.positions[i][c] -= update[c];
        for (int c = 0; c < 3; ++c) set.log_scales[i][c] -= update[3 + c];
        for (int c = 0; c < 4; ++c) set.rotations[i][c] -= update[6 + c];
        set.opacity_logits[i] -= update[10];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 4; ++c) set.sh[i](r, c) -= update[11 + r * 4 + c];
    }
}

void check_finite(double value, const char* term, int iteration) {
    if (!std::isfinite(value))
        throw NumericalError(std::string(term) + " loss is not finite at iteration " +
                             std::to_string(iteration));
}

} // namespace

EarlyStopState::EarlyStopState(int window, int patience, double min_delta)
    : window_(window), patience_(patience), min_delta_(min_delta),
      best_(std::numeric_limits<double>::infinity()) {
    if (window < 1) throw ContractError("early stop window must be >= 1");
    if (patience < 1) throw ContractError("early stop patience must be >= 1");
}

bool EarlyStopState::push(double depth_loss) {
    buffer_.push_back(depth_loss);
    buffer_sum_ += depth_loss;
    if (static_cast<int>(buffer_.size()) > window_) {
        buffer_sum_ -= buffer_.front();
        buffer_.pop_front();
    }
    if (static_cast<int>(buffer_.size()) < window_) return false;

    const double average = buffer_sum_ / window_;
    if (average < best_ - min_delta_) {
        best_ = average;
        since_best_ = 0;
        return false;
    }
    return ++since_best_ >= patience_;
}

void densify_and_prune(SplatSet& set, const std::vector<double>& mean_grad,
                       const TrainConfig& config, std::mt19937_64& rng,
                       std::vector<bool>* kept) {
    const size_t n = set.size();
    if (mean_grad.size() != n)
        throw ContractError("densify_and_prune: gradient vector size mismatch");
    const double size_threshold = config.densify_size_fraction * config.scene_extent;

    std::vector<bool> keep(n, true);
    SplatSet additions;
    std::normal_distribution<double> normal(0.0, 1.0);

    for (size_t i = 0; i < n; ++i) {
        if (sigmoid(set.opacity_logits[i]) < config.prune_opacity) {
            keep[i] = false;
            continue;
        }
        if (mean_grad[i] <= config.densify_grad_threshold) continue;

        const Eigen::Vector3d scales = set.log_scales[i].array().exp();
        if (scales.maxCoeff() <= size_threshold) {
            // Clone: duplicate in place; the two copies drift apart under
            // their own gradients.
            additions.positions.push_back(set.positions[i]);
            additions.log_scales.push_back(set.log_scales[i]);
            additions.rotations.push_back(set.rotations[i]);
            additions.opacity_logits.push_back(set.opacity_logits[i]);
            additions.sh.push_back(set.sh[i]);
        } else {
            // Split: two children sampled inside the parent, scales shrunk.
            Eigen::Matrix3d rot = quat_to_rotation(set.rotations[i].normalized());
            Eigen::Vector3d child_log_scale =
                set.log_scales[i].array() - std::log(kSplitScaleDivisor);
            for (int child = 0; child < 2; ++child) {
                Eigen::Vector3d sample(normal(rng), normal(rng), normal(rng));
                additions.positions.push_back(set.positions[i] +
                                              rot * scales.cwiseProduct(sample));
                additions.log_scales.push_back(child_log_scale);
                additions.rotations.push_back(set.rotations[i]);
                additions.opacity_logits.push_back(set.opacity_logits[i]);
                additions.sh.push_back(set.sh[i]);
            }
            keep[i] = false;
        }
    }

    set.keep(keep);
    set.append(additions);
    if (kept) *kept = keep;
}

TrainResult train(std::vector<TrainView>& views, const SplatSet& init, const TrainConfig& config,
                  const std::function<void(int, const SplatSet&)>& callback) {
    if (views.empty()) throw ContractError("train: at least one view is required");
    if (config.max_iterations < 0) throw ContractError("train: max_iterations must be >= 0");
    if (config.lr_position_init <= 0 || config.lr_position_final <= 0 || config.lr_scale <= 0 ||
        config.lr_rotation <= 0 || config.lr_opacity <= 0 || config.lr_sh <= 0)
        throw ContractError("train: learning rates must be positive");
    if (config.densify_interval < 1) throw ContractError("train: densify interval must be >= 1");
    for (const auto& view : views) {
        if (config.use_depth_loss && !view.prior_depth.empty() &&
            (view.prior_depth.width() != view.camera.width ||
             view.prior_depth.height() != view.camera.height))
            throw ContractError("train: prior depth shape does not match its camera");
    }

    TrainResult result;
    result.splats = init;
    if (config.max_iterations == 0) return result;
    if (init.size() == 0) throw ContractError("train: initial splat set is empty");

    TrainConfig cfg = config;
    if (cfg.scene_extent <= 0) {
        Eigen::Vector3d center = Eigen::Vector3d::Zero();
        for (const auto& p : init.positions) center += p;
        center /= static_cast<double>(init.size());
        double radius = 0;
        for (const auto& p : init.positions) radius = std::max(radius, (p - center).norm());
        cfg.scene_extent = radius > 0 ? radius : 1.0;
    }

    SplatSet& splats = result.splats;
    AdamState opt(splats.size());
    std::mt19937_64 rng(cfg.seed);
    EarlyStopState early(cfg.early_stop_window, cfg.early_stop_patience,
                         cfg.early_stop_min_delta);

    std::vector<double> grad_accum(splats.size(), 0.0);
    int accum_iters = 0;

    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        if (callback) callback(iter, splats);
        const TrainView& view = views[iter % views.size()];

        RenderOutput out = render(splats, view.camera, cfg.background, cfg.render, true);

        LossTerm color = color_l1(out.color, view.image);
        LossTerm structural = dssim(out.color, view.image);
        LossTerm depth, smooth;
        bool depth_active = cfg.use_depth_loss && !view.prior_depth.empty();
        if (depth_active) depth = depth_l1(out.depth, view.prior_depth, out.transmittance);
        if (cfg.use_smoothness && view.edge_mask.width() > 0)
            smooth = smoothness(out.depth, view.edge_mask);
        LossReport report = combine(color, structural, depth, smooth, cfg.loss_weights);

        check_finite(report.color, "color", iter);
        check_finite(report.dssim, "dssim", iter);
        check_finite(report.depth, "depth", iter);
        check_finite(report.smooth, "smoothness", iter);

        if (report.grad_depth.empty())
            report.grad_depth = Image(view.camera.width, view.camera.height, 1);
        SplatGradients grads = render_backward(splats, out, report.grad_color, report.grad_depth);

        const double lr_position =
            cfg.lr_position_init *
            std::pow(cfg.lr_position_final / cfg.lr_position_init,
                     static_cast<double>(iter) / cfg.max_iterations);
        adam_step(splats, grads, opt, lr_position, cfg);

        result.log.push_back({iter, report.color, report.dssim, report.depth, report.smooth,
                              report.total, splats.size()});
        result.iterations_run = iter + 1;

        if (cfg.use_early_stop && depth_active && iter >= cfg.early_stop_start &&
            early.push(report.depth)) {
            result.early_stopped = true;
            break;
        }

        for (size_t i = 0; i < grad_accum.size(); ++i) grad_accum[i] += grads.screen_grad_norm[i];
        ++accum_iters;

        const int step = iter + 1;
        if (step >= cfg.densify_start && step <= cfg.densify_end &&
            step % cfg.densify_interval == 0) {
            std::vector<double> mean_grad(grad_accum.size());
            for (size_t i = 0; i < grad_accum.size(); ++i)
                mean_grad[i] = grad_accum[i] / accum_iters;
            std::vector<bool> kept;
            const size_t before = splats.size();
            densify_and_prune(splats, mean_grad, cfg, rng, &kept);

            // Carry optimizer state for surviving splats; newcomers start fresh.
            AdamState next(splats.size());
            size_t out_idx = 0;
            for (size_t i = 0; i < before; ++i) {
                if (!kept[i]) continue;
                next.m[out_idx] = opt.m[i];
                next.v[out_idx] = opt.v[i];
                next.steps[out_idx] = opt.steps[i];
                ++out_idx;
            }
            opt = std::move(next);
            grad_accum.assign(splats.size(), 0.0);
            accum_iters = 0;
        } else if (splats.size() != grad_accum.size()) {
            grad_accum.resize(splats.size(), 0.0);
        }

        if (cfg.opacity_reset && step % cfg.opacity_reset_interval == 0) {
            const double cap = logit(0.01);
            for (auto& o : splats.opacity_logits) o = std::min(o, cap);
        }
    }
    return result;
}

void write_loss_log(const std::vector<IterationRecord>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open file for writing: " + path);
    out << "iteration,color,dssim,depth,smooth,total,splat_count\n";
    for (const auto& rec : log)
        out << rec.iteration << ',' << rec.color << ',' << rec.dssim << ',' << rec.depth << ','
            << rec.smooth << ',' << rec.total << ',' << rec.splat_count << '\n';
}

} // namespace dgs
