// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dgs/camera.hpp"
#include "dgs/depth_prior.hpp"
#include "dgs/image.hpp"
#include "dgs/scene_io.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace dgs {

// Real spherical harmonics basis, degree <= 1 (4 coefficients per channel).
inline constexpr double kSh0 = 0.28209479177387814;
inline constexpr double kSh1 = 0.4886025119029199;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

// The optimizable scene: struct-of-arrays over anisotropic 3D Gaussians.
// Scales live in log domain and rotations as quaternions (w,x,y,z) so every
// optimizer step is unconstrained; constraints are re-imposed by construction.
struct SplatSet {
    std::vector<Eigen::Vector3d> positions;
    std::vector<Eigen::Vector3d> log_scales;
    std::vector<Eigen::Vector4d> rotations;
    std::vector<double> opacity_logits;
    std::vector<Eigen::Matrix<double, 3, 4>> sh; // rows = RGB, cols = degree-0..1 coeffs

    size_t size() const { return positions.size(); }
    bool consistent() const {
        return log_scales.size() == size() && rotations.size() == size() &&
               opacity_logits.size() == size() && sh.size() == size();
    }
    bool finite() const;

    void append(const SplatSet& other);
    void keep(const std::vector<bool>& mask);
    void normalize_rotations();
};

// Evaluates degree-1 SH color for one splat along a unit view direction.
// Rotation matrix of a unit quaternion (w, x, y, z).
Eigen::Matrix3d quat_to_rotation(const Eigen::Vector4d& q);

Eigen::Vector3d eval_sh(const Eigen::Matrix<double, 3, 4>& coeffs, const Eigen::Vector3d& dir);

// One splat per SfM point. Initial scale is the log of the mean distance to
// the 3 nearest neighbors (fewer when fewer exist); identity rotation; opacity
// 0.1; SH degree 0 from the point color (mid-gray when absent).
SplatSet init_from_points(const std::vector<SfmPoint>& points);

// Unprojects every stride-th pixel of each aligned prior through its camera,
// colored from the matching training image.
SplatSet init_from_depth(const std::vector<DepthPrior>& priors, const std::vector<Camera>& cameras,
                         const std::vector<Image>& images, int stride);

// Binary little-endian PLY with the de-facto splat field naming (x,y,z,
// nx,ny,nz, f_dc_*, f_rest_*, opacity, scale_*, rot_*). Import truncates SH
// degrees above 1 and appends a note to `warning` when it does.
void export_ply(const SplatSet& set, const std::string& path);
SplatSet import_ply(const std::string& path, std::string* warning = nullptr);

} // namespace dgs
