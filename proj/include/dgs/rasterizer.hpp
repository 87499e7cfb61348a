// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dgs/camera.hpp"
#include "dgs/image.hpp"
#include "dgs/splats.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace dgs {

struct RenderSettings {
    int tile_size = 16;
    double alpha_clamp = 0.99;       // per-splat alpha ceiling
    double transmittance_min = 1e-4; // stop compositing below this
    double near_plane = 0.01;
    double lowpass_floor = 0.3; // px^2 added to the 2D covariance diagonal
    double bbox_sigma = 3.0;    // screen-space extent used for tile binning
};

// A frustum-surviving splat after EWA projection to the image plane.
struct ProjectedSplat {
    int splat_index = 0;
    Eigen::Vector2d mean2d = Eigen::Vector2d::Zero();
    double cov_xx = 0, cov_xy = 0, cov_yy = 0; // after lowpass floor
    double conic_a = 0, conic_b = 0, conic_c = 0;
    double depth = 0;                            // camera-space z of the center
    Eigen::Vector3d color = Eigen::Vector3d::Zero(); // SH-evaluated, clamped to [0,1]
    uint8_t color_clamped = 0;                   // bit c set when channel c hit the clamp
    double opacity = 0;                          // sigmoid(opacity_logit)
    double radius = 0;                           // bbox_sigma * sqrt(max eigenvalue)
};

// Depth-ordered per-tile index lists into a projected-splat array.
struct TileBins {
    int tiles_x = 0, tiles_y = 0, tile_size = 16;
    std::vector<std::vector<int>> bins;

    int tile_of(int px, int py) const {
        return (py / tile_size) * tiles_x + (px / tile_size);
    }
};

// One recorded compositing step: which bin slot contributed and its Gaussian
// weight (alpha is opacity * weight, re-clamped during backward).
struct PixelContrib {
    int32_t slot = 0;
    double weight = 0;
};

struct RenderOutput {
    Image color;         // H x W x 3, background blended with residual transmittance
    Image depth;         // H x W, no background contribution
    Image transmittance; // H x W, final transmittance per pixel

    // Backward-pass records (present when the render kept them).
    bool has_records = false;
    std::vector<ProjectedSplat> projected; // depth-sorted
    TileBins bins;
    std::vector<uint32_t> contrib_offset; // H*W + 1 prefix sums
    std::vector<PixelContrib> contribs;

    Camera camera;
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
    RenderSettings settings;
};

// Gradients for every splat parameter, plus the screen-space positional
// gradient norms the densification heuristic consumes.
struct SplatGradients {
    std::vector<Eigen::Vector3d> positions;
    std::vector<Eigen::Vector3d> log_scales;
    std::vector<Eigen::Vector4d> rotations;
    std::vector<double> opacity_logits;
    std::vector<Eigen::Matrix<double, 3, 4>> sh;
    std::vector<double> screen_grad_norm;

    void resize_zero(size_t n);
};

// Culls, projects and SH-shades every splat for one camera.
std::vector<ProjectedSplat> project_splats(const SplatSet& set, const Camera& camera,
                                           const RenderSettings& settings = {});

// Sorts front-to-back by center depth (stable: ties keep splat-index order)
// and bins each splat into every tile its screen bounding box overlaps.
// `projected` is reordered in place.
TileBins sort_and_bin(std::vector<ProjectedSplat>& projected, int width, int height,
                      int tile_size);

// Tile-parallel forward render of color, depth and transmittance. Bit-identical
// across thread counts: compositing is sequential per tile.
RenderOutput render(const SplatSet& set, const Camera& camera, const Eigen::Vector3d& background,
                    const RenderSettings& settings = {}, bool keep_records = true);

// Serial reference renderer: no tiling parallelism, one pixel at a time over
// the globally sorted splats. Produces bit-identical images to render().
RenderOutput render_reference(const SplatSet& set, const Camera& camera,
                              const Eigen::Vector3d& background,
                              const RenderSettings& settings = {});

// Analytic gradients of sum(grad_color . color) + sum(grad_depth . depth) with
// respect to every splat parameter. Requires records from render().
SplatGradients render_backward(const SplatSet& set, const RenderOutput& output,
                               const Image& grad_color, const Image& grad_depth);

} // namespace dgs
