// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dgs/camera.hpp"
#include "dgs/scene_io.hpp"
#include "dgs/splats.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace dgs::test {

// Self-deleting unique temporary directory.
class TempDir {
  public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

  private:
    std::filesystem::path path_;
};

// Pinhole camera at the origin looking down +z, principal point centered.
Camera make_camera(int id, int width, int height, double focal);

// Camera at `position` looking at `target` (x right, y down, z forward).
Camera make_lookat_camera(int id, int width, int height, double focal,
                          const Eigen::Vector3d& position, const Eigen::Vector3d& target);

// Uniformly random rotation matrix via a normalized quaternion.
Eigen::Matrix3d random_rotation(std::mt19937_64& rng);

struct RandomSplatOptions {
    int count = 12;
    double min_depth = 2.0, max_depth = 6.0;
    double lateral = 0.8;          // splat centers in [-lateral, lateral] x/y
    double min_scale = 0.05, max_scale = 0.25;
    double min_opacity = 0.05, max_opacity = 0.3;
    bool color_inside_range = true; // keep SH colors away from the [0,1] clamp
};

// Random splats in front of a canonical camera; parameters stay away from
// clamp boundaries so finite differences are valid.
SplatSet random_splats(std::mt19937_64& rng, const RandomSplatOptions& opts = {});

// Random COLMAP-style model: cameras with random poses plus points whose
// tracks reference >= 2 existing cameras.
SfmModel random_model(std::mt19937_64& rng, int num_cameras, int num_points);

} // namespace dgs::test
