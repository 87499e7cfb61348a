// SPDX-License-Identifier: Apache-2.0
// Benchmark comparing the tile-parallel renderer against the serial reference
// on randomly generated scenes, and verifying they agree bit for bit.
#include "dgs/rasterizer.hpp"

#include <omp.h>

#include <chrono>
#include <cstring>
#include <iostream>
#include <random>

namespace {

dgs::SplatSet random_scene(int count, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    dgs::SplatSet set;
    for (int i = 0; i < count; ++i) {
        set.positions.emplace_back(2.0 * uni(rng) - 1.0, 2.0 * uni(rng) - 1.0,
                                   2.0 + 4.0 * uni(rng));
        set.log_scales.push_back(Eigen::Vector3d::Constant(std::log(0.02 + 0.1 * uni(rng))));
        Eigen::Vector4d q(normal(rng), normal(rng), normal(rng), normal(rng));
        set.rotations.push_back(q.normalized());
        set.opacity_logits.push_back(dgs::logit(0.1 + 0.8 * uni(rng)));
        Eigen::Matrix<double, 3, 4> sh = Eigen::Matrix<double, 3, 4>::Zero();
        sh.col(0) = Eigen::Vector3d(uni(rng), uni(rng), uni(rng)) / dgs::kSh0;
        set.sh.push_back(sh);
    }
    return set;
}

dgs::Camera make_camera(int width, int height) {
    dgs::Camera cam;
    cam.width = width;
    cam.height = height;
    cam.intrinsics << 0.8 * width, 0, width / 2.0, 0, 0.8 * width, height / 2.0, 0, 0, 1;
    return cam;
}

double run_timed(const std::function<void()>& fn, int repeats) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        auto start = std::chrono::steady_clock::now();
        fn();
        std::chrono::duration<double, std::milli> elapsed =
            std::chrono::steady_clock::now() - start;
        best = std::min(best, elapsed.count());
    }
    return best;
}

} // namespace

int main(int argc, char** argv) {
    const int repeats = argc > 1 ? std::atoi(argv[1]) : 3;
    std::mt19937_64 rng(7);
    const dgs::Camera cam = make_camera(640, 480);
    const Eigen::Vector3d bg(0.1, 0.1, 0.1);

    std::cout << "threads available: " << omp_get_max_threads() << "\n";
    std::cout << "splats  serial_ms  tiled_ms  speedup  identical\n";
    for (int count : {500, 2000, 8000, 32000}) {
        dgs::SplatSet set = random_scene(count, rng);
        dgs::RenderOutput tiled, serial;
        double t_tiled =
            run_timed([&] { tiled = dgs::render(set, cam, bg, {}, false); }, repeats);
        double t_serial =
            run_timed([&] { serial = dgs::render_reference(set, cam, bg, {}); }, repeats);
        bool identical =
            std::memcmp(tiled.color.data(), serial.color.data(),
                        tiled.color.size() * sizeof(double)) == 0 &&
            std::memcmp(tiled.depth.data(), serial.depth.data(),
                        tiled.depth.size() * sizeof(double)) == 0;
        std::printf("%6d  %9.2f  %8.2f  %7.2fx  %s\n", count, t_serial, t_tiled,
                    t_serial / t_tiled, identical ? "yes" : "NO");
    }
    return 0;
}
