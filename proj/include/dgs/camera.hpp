// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

namespace dgs {

// One calibrated view: world-to-camera rigid transform plus pinhole intrinsics.
struct Camera {
    int id = 0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity(); // world -> camera
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    Eigen::Matrix3d intrinsics = Eigen::Matrix3d::Identity();
    int width = 0;
    int height = 0;

    Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const {
        return rotation * world + translation;
    }

    Eigen::Vector3d center() const { return -rotation.transpose() * translation; }

    double fx() const { return intrinsics(0, 0); }
    double fy() const { return intrinsics(1, 1); }
    double cx() const { return intrinsics(0, 2); }
    double cy() const { return intrinsics(1, 2); }

    // Projects a camera-space point to pixel coordinates (z > 0 assumed).
    Eigen::Vector2d project(const Eigen::Vector3d& cam) const {
        return {fx() * cam.x() / cam.z() + cx(), fy() * cam.y() / cam.z() + cy()};
    }

    bool orthonormal(double tol = 1e-6) const {
        Eigen::Matrix3d err = rotation * rotation.transpose() - Eigen::Matrix3d::Identity();
        return err.cwiseAbs().maxCoeff() < tol;
    }

    bool well_formed() const {
        return orthonormal() && fx() > 0 && fy() > 0 && intrinsics(1, 0) == 0 &&
               intrinsics(2, 0) == 0 && intrinsics(2, 1) == 0 && width > 0 && height > 0;
    }
};

} // namespace dgs
