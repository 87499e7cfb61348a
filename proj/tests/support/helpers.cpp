// SPDX-License-Identifier: Apache-2.0
#include "helpers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unistd.h>

namespace dgs::test {

namespace fs = std::filesystem;

TempDir::TempDir() {
    static std::atomic<uint64_t> counter{0};
    path_ = fs::temp_directory_path() /
            ("dgs_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

Camera make_camera(int id, int width, int height, double focal) {
    Camera cam;
    cam.id = id;
    cam.width = width;
    cam.height = height;
    cam.intrinsics << focal, 0, width / 2.0, 0, focal, height / 2.0, 0, 0, 1;
    return cam;
}

Camera make_lookat_camera(int id, int width, int height, double focal,
                          const Eigen::Vector3d& position, const Eigen::Vector3d& target) {
    Camera cam = make_camera(id, width, height, focal);
    Eigen::Vector3d forward = (target - position).normalized();
    Eigen::Vector3d right = Eigen::Vector3d(0, 1, 0).cross(forward).normalized();
    Eigen::Vector3d down = forward.cross(right);
    cam.rotation.row(0) = right;
    cam.rotation.row(1) = down;
    cam.rotation.row(2) = forward;
    cam.translation = -cam.rotation * position;
    return cam;
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::Vector4d q(normal(rng), normal(rng), normal(rng), normal(rng));
    return quat_to_rotation(q.normalized());
}

SplatSet random_splats(std::mt19937_64& rng, const RandomSplatOptions& opts) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    SplatSet set;
    for (int i = 0; i < opts.count; ++i) {
        set.positions.emplace_back(opts.lateral * (2 * uni(rng) - 1),
                                   opts.lateral * (2 * uni(rng) - 1),
                                   opts.min_depth + (opts.max_depth - opts.min_depth) * uni(rng));
        double scale = opts.min_scale + (opts.max_scale - opts.min_scale) * uni(rng);
        Eigen::Vector3d ls = Eigen::Vector3d::Constant(std::log(scale));
        ls += 0.3 * Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
        set.log_scales.push_back(ls);
        Eigen::Vector4d q(normal(rng), normal(rng), normal(rng), normal(rng));
        set.rotations.push_back(q.normalized());
        double opacity =
            opts.min_opacity + (opts.max_opacity - opts.min_opacity) * uni(rng);
        set.opacity_logits.push_back(logit(opacity));
        Eigen::Matrix<double, 3, 4> sh;
        if (opts.color_inside_range) {
            sh.setZero();
            for (int c = 0; c < 3; ++c) sh(c, 0) = (0.3 + 0.4 * uni(rng)) / kSh0;
            for (int c = 0; c < 3; ++c)
                for (int j = 1; j < 4; ++j) sh(c, j) = 0.05 * (2 * uni(rng) - 1) / kSh1;
        } else {
            for (int c = 0; c < 3; ++c)
                for (int j = 0; j < 4; ++j) sh(c, j) = normal(rng);
        }
        set.sh.push_back(sh);
    }
    return set;
}

SfmModel random_model(std::mt19937_64& rng, int num_cameras, int num_points) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::uniform_int_distribution<int> pick_cam(0, num_cameras - 1);
    SfmModel model;
    for (int i = 0; i < num_cameras; ++i) {
        Camera cam = make_camera(i + 1, 640, 480, 500.0 + 100.0 * uni(rng));
        cam.rotation = random_rotation(rng);
        cam.translation = Eigen::Vector3d(uni(rng), uni(rng), uni(rng));
        model.cameras.push_back(cam);
        model.image_names.emplace_back(i + 1, "img_" + std::to_string(i + 1) + ".png");
    }
    for (int i = 0; i < num_points; ++i) {
        SfmPoint pt;
        pt.id = i + 1;
        pt.position = Eigen::Vector3d(4 * uni(rng) - 2, 4 * uni(rng) - 2, 4 * uni(rng) - 2);
        pt.reprojection_error = 2.0 * uni(rng);
        pt.color << static_cast<unsigned char>(255 * uni(rng)),
            static_cast<unsigned char>(255 * uni(rng)),
            static_cast<unsigned char>(255 * uni(rng));
        pt.has_color = true;
        int track_len = 2 + static_cast<int>(uni(rng) * (num_cameras - 1));
        std::vector<int> cams;
        while (static_cast<int>(cams.size()) < std::min(track_len, num_cameras)) {
            int c = pick_cam(rng) + 1;
            if (std::find(cams.begin(), cams.end(), c) == cams.end()) cams.push_back(c);
        }
        for (int c : cams)
            pt.track.push_back({c, Eigen::Vector2d(640 * uni(rng), 480 * uni(rng))});
        model.points.push_back(pt);
    }
    return model;
}

} // namespace dgs::test
