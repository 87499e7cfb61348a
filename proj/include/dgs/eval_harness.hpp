// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dgs/camera.hpp"
#include "dgs/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dgs {

// Train/test camera partition for one scene.
struct SplitSpec {
    std::string scene_id;
    std::vector<int> train_pool; // convex-hull member camera ids
    std::vector<int> test_set;   // interior camera ids
};

// One evaluated (scene, k, seed, view) cell.
struct EvalRecord {
    std::string scene;
    int k = 0;
    uint64_t seed = 0;
    int view = 0;
    double psnr = 0.0;
    double ssim = 0.0;
};

// Cross-seed aggregate for one (scene, k) cell.
struct AggregateRow {
    std::string scene;
    int k = 0;
    int seed_count = 0;
    double psnr_mean = 0.0, psnr_std = 0.0;
    double ssim_mean = 0.0, ssim_std = 0.0;
    bool complete = true; // false when fewer seeds than expected were found
};

// Splits cameras by projecting their centers onto the best-fit (principal
// component) plane and computing the 2D convex hull: hull vertices are the
// train pool, interior cameras the test set. Fewer than 4 cameras or a
// collinear rig is a degenerate split.
SplitSpec convex_hull_split(const std::vector<Camera>& cameras);

// Deterministic k-shot selection without replacement. The generator is
// splitmix64 seeded directly with `seed`; selection is a partial Fisher-Yates
// shuffle taking j = i + next() % (n - i) at each step i < k.
std::vector<int> sample_kshot(const std::vector<int>& pool, int k, uint64_t seed);

// One splitmix64 step (exposed so tests can regenerate selection traces).
uint64_t splitmix64_next(uint64_t& state);

// 10 * log10(1 / MSE) for range-1 images; identical images give +infinity.
double psnr(const Image& a, const Image& b);

// Mean SSIM (11x11 Gaussian window, sigma 1.5, range 1), shared with the
// D-SSIM loss kernel.
double ssim(const Image& a, const Image& b);

// Per-(scene, k) cross-seed aggregation of per-seed mean metrics. When
// `expected_seeds` > 0, rows with fewer seeds are flagged incomplete.
std::vector<AggregateRow> aggregate(const std::vector<EvalRecord>& records,
                                    int expected_seeds = 0);

// results.csv with columns scene,k,seed,view,psnr,ssim.
void write_results_csv(const std::vector<EvalRecord>& records, const std::string& path);

// Aligned text table of aggregate rows.
std::string format_table(const std::vector<AggregateRow>& rows);

// Flat key=value scene description: scene_id, image_dir, model_dir, depth_dir.
struct SceneManifest {
    std::string scene_id;
    std::string image_dir;
    std::string model_dir;
    std::string depth_dir;
};

SceneManifest parse_scene_manifest(const std::string& path);

} // namespace dgs
