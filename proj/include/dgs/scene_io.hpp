// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dgs/camera.hpp"
#include "dgs/errors.hpp"

#include <Eigen/Dense>

#include <set>
#include <string>
#include <utility>
#include <vector>

namespace dgs {

// One SfM feature observation: which view saw the point and where.
struct TrackEntry {
    int camera_id = 0;
    Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
};

struct SfmPoint {
    long long id = 0;
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    double reprojection_error = 0.0;
    Eigen::Matrix<unsigned char, 3, 1> color{128, 128, 128};
    bool has_color = false;
    std::vector<TrackEntry> track;
};

// Per-view depths of SfM points at their observed pixel locations, with
// reliability weights derived from reprojection error.
struct SparseDepthSample {
    Eigen::Vector2i pixel = Eigen::Vector2i::Zero();
    double depth = 0.0;
    double weight = 0.0;
};

struct SparseDepthMap {
    int view_id = 0;
    std::vector<SparseDepthSample> samples;
};

struct SfmModel {
    std::vector<Camera> cameras;
    std::vector<SfmPoint> points;
    // Original image file name per camera id, as recorded by COLMAP.
    std::vector<std::pair<int, std::string>> image_names;

    const Camera* find_camera(int id) const {
        for (const auto& c : cameras)
            if (c.id == id) return &c;
        return nullptr;
    }
    std::string image_name(int id) const {
        for (const auto& [cid, name] : image_names)
            if (cid == id) return name;
        return {};
    }
};

// Parses a COLMAP sparse model directory containing cameras/images/points3D in
// either text or binary layout. Each COLMAP image becomes one Camera (the
// intrinsics of its camera entry are folded in). Only PINHOLE and
// SIMPLE_PINHOLE camera models are accepted.
SfmModel parse_colmap(const std::string& model_dir);

// Writes a model in COLMAP text layout (cameras.txt, images.txt, points3D.txt).
void write_colmap_text(const SfmModel& model, const std::string& model_dir);

// Writes a model in COLMAP binary layout (cameras.bin, images.bin, points3D.bin).
void write_colmap_binary(const SfmModel& model, const std::string& model_dir);

// Keeps points whose track intersects `selected_cameras` in at least
// `min_views` entries; order preserved.
std::vector<SfmPoint> filter_points(const std::vector<SfmPoint>& points,
                                    const std::set<int>& selected_cameras, int min_views);

// Projects every point observed by `camera` to its sparse depth sample. Points
// behind the camera or projecting outside the image are dropped. Weights are
// reciprocal reprojection errors normalized so the per-view maximum is 1; zero
// reprojection error maps to the maximum weight.
SparseDepthMap project_sparse_depth(const std::vector<SfmPoint>& points, const Camera& camera);

} // namespace dgs
