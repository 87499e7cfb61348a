// SPDX-License-Identifier: Apache-2.0
#include "dgs/splats.hpp"

#include "dgs/errors.hpp"
#include "support/helpers.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

using namespace dgs;
using test::TempDir;

namespace {

SfmPoint point_at(double x, double y, double z) {
    SfmPoint pt;
    pt.position = {x, y, z};
    return pt;
}

} // namespace

TEST_CASE("quat_to_rotation matches Eigen and is orthonormal") {
    std::mt19937_64 rng(61);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::Vector4d q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
        q.normalize();
        Eigen::Matrix3d r = quat_to_rotation(q);
        Eigen::Matrix3d expected =
            Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
        CHECK((r - expected).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((r * r.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("eval_sh") {
    SUBCASE("degree-0 only is direction independent") {
        Eigen::Matrix<double, 3, 4> coeffs = Eigen::Matrix<double, 3, 4>::Zero();
        coeffs.col(0) << 0.4 / kSh0, 0.6 / kSh0, 0.8 / kSh0;
        for (auto dir : {Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(1, 0, 0).normalized(),
                         Eigen::Vector3d(1, 1, 1).normalized()}) {
            Eigen::Vector3d c = eval_sh(coeffs, dir);
            CHECK(c[0] == doctest::Approx(0.4).epsilon(1e-12));
            CHECK(c[1] == doctest::Approx(0.6).epsilon(1e-12));
            CHECK(c[2] == doctest::Approx(0.8).epsilon(1e-12));
        }
    }
    SUBCASE("degree-1 basis signs along the axes") {
        // Coefficient order is (Y_1^-1, Y_1^0, Y_1^1) = (-y, z, -x) bands.
        Eigen::Matrix<double, 3, 4> coeffs = Eigen::Matrix<double, 3, 4>::Zero();
        coeffs(0, 1) = 1.0; // red reacts to the -y band
        coeffs(1, 2) = 1.0; // green reacts to the z band
        coeffs(2, 3) = 1.0; // blue reacts to the -x band
        Eigen::Vector3d along_y = eval_sh(coeffs, {0, 1, 0});
        CHECK(along_y[0] == doctest::Approx(-kSh1).epsilon(1e-12));
        CHECK(along_y[1] == doctest::Approx(0.0).epsilon(1e-12));
        Eigen::Vector3d along_z = eval_sh(coeffs, {0, 0, 1});
        CHECK(along_z[1] == doctest::Approx(kSh1).epsilon(1e-12));
        Eigen::Vector3d along_x = eval_sh(coeffs, {1, 0, 0});
        CHECK(along_x[2] == doctest::Approx(-kSh1).epsilon(1e-12));
    }
}

TEST_CASE("init_from_points scale from nearest neighbors") {
    SUBCASE("three collinear points, unit spacing") {
        std::vector<SfmPoint> pts = {point_at(0, 0, 4), point_at(1, 0, 4), point_at(2, 0, 4)};
        SplatSet set = init_from_points(pts);
        REQUIRE(set.size() == 3);
        // End points: neighbors at distance 1 and 2, mean 1.5. Middle: 1 and 1.
        CHECK(set.log_scales[0][0] == doctest::Approx(std::log(1.5)).epsilon(1e-12));
        CHECK(set.log_scales[1][0] == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(set.log_scales[2][0] == doctest::Approx(std::log(1.5)).epsilon(1e-12));
        for (size_t i = 0; i < set.size(); ++i) {
            CHECK(set.log_scales[i][1] == set.log_scales[i][0]); // isotropic init
            CHECK(set.log_scales[i][2] == set.log_scales[i][0]);
            CHECK(set.rotations[i] == Eigen::Vector4d(1, 0, 0, 0));
            CHECK(sigmoid(set.opacity_logits[i]) == doctest::Approx(0.1).epsilon(1e-12));
        }
    }
    SUBCASE("a lone point gets the fixed fallback scale") {
        SplatSet set = init_from_points({point_at(0, 0, 4)});
        CHECK(set.log_scales[0][0] == doctest::Approx(std::log(0.1)).epsilon(1e-12));
    }
    SUBCASE("four points use the mean of 3 neighbor distances") {
        // Distances from the origin point: 1, 2, 4 -> mean 7/3.
        std::vector<SfmPoint> pts = {point_at(0, 0, 0), point_at(1, 0, 0), point_at(0, 2, 0),
                                     point_at(0, 0, 4)};
        SplatSet set = init_from_points(pts);
        CHECK(set.log_scales[0][0] == doctest::Approx(std::log(7.0 / 3.0)).epsilon(1e-12));
    }
    SUBCASE("colors map to the degree-0 coefficient; gray fallback") {
        SfmPoint colored = point_at(0, 0, 4);
        colored.has_color = true;
        colored.color << 255, 0, 51;
        SfmPoint gray = point_at(1, 0, 4);
        SplatSet set = init_from_points({colored, gray});
        CHECK(set.sh[0](0, 0) == doctest::Approx(1.0 / kSh0).epsilon(1e-12));
        CHECK(set.sh[0](1, 0) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(set.sh[0](2, 0) == doctest::Approx(51.0 / 255.0 / kSh0).epsilon(1e-12));
        for (int c = 0; c < 3; ++c)
            CHECK(set.sh[1](c, 0) == doctest::Approx(0.5 / kSh0).epsilon(1e-12));
        CHECK(set.sh[0].rightCols<3>().isZero());
    }
    SUBCASE("scales are permutation equivariant") {
        std::mt19937_64 rng(67);
        std::uniform_real_distribution<double> uni(-2.0, 2.0);
        std::vector<SfmPoint> pts;
        for (int i = 0; i < 15; ++i) pts.push_back(point_at(uni(rng), uni(rng), 4 + uni(rng)));
        SplatSet a = init_from_points(pts);
        std::vector<size_t> perm(pts.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<SfmPoint> shuffled;
        for (size_t i : perm) shuffled.push_back(pts[i]);
        SplatSet b = init_from_points(shuffled);
        for (size_t i = 0; i < perm.size(); ++i)
            CHECK(b.log_scales[i][0] == doctest::Approx(a.log_scales[perm[i]][0]).epsilon(1e-12));
    }
    SUBCASE("empty input is degenerate") {
        CHECK_THROWS_AS(init_from_points({}), DegenerateError);
    }
}

TEST_CASE("init_from_depth") {
    const int w = 8, h = 8;
    Camera cam = test::make_camera(1, w, h, 10.0);
    DepthPrior prior;
    prior.aligned = Image(w, h, 1, 3.0);
    Image img(w, h, 3, 0.25);

    SUBCASE("unprojected points land back on their pixels at the prior depth") {
        SplatSet set = init_from_depth({prior}, {cam}, {img}, 1);
        REQUIRE(set.size() == static_cast<size_t>(w * h));
        size_t i = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x, ++i) {
                Eigen::Vector3d in_cam = cam.to_camera(set.positions[i]);
                CHECK(in_cam.z() == doctest::Approx(3.0).epsilon(1e-12));
                Eigen::Vector2d pix = cam.project(in_cam);
                CHECK(pix.x() == doctest::Approx(x + 0.5).epsilon(1e-12));
                CHECK(pix.y() == doctest::Approx(y + 0.5).epsilon(1e-12));
                for (int c = 0; c < 3; ++c)
                    CHECK(set.sh[i](c, 0) == doctest::Approx(0.25 / kSh0).epsilon(1e-12));
            }
    }
    SUBCASE("doubling the stride quarters the splat count") {
        size_t full = init_from_depth({prior}, {cam}, {img}, 1).size();
        size_t half = init_from_depth({prior}, {cam}, {img}, 2).size();
        CHECK(full == 4 * half);
    }
    SUBCASE("nonpositive depths are skipped") {
        DepthPrior holed = prior;
        holed.aligned.at(3, 3) = 0.0;
        holed.aligned.at(4, 4) = -1.0;
        CHECK(init_from_depth({holed}, {cam}, {img}, 1).size() ==
              static_cast<size_t>(w * h - 2));
    }
    SUBCASE("contract checks") {
        CHECK_THROWS_AS(init_from_depth({prior}, {cam}, {img}, 0), ContractError);
        CHECK_THROWS_AS(init_from_depth({prior, prior}, {cam}, {img}, 1), ContractError);
        DepthPrior empty;
        empty.aligned = Image(w, h, 1, -1.0);
        CHECK_THROWS_AS(init_from_depth({empty}, {cam}, {img}, 1), DegenerateError);
    }
}

TEST_CASE("SplatSet keep/append/normalize") {
    std::mt19937_64 rng(71);
    SplatSet set = test::random_splats(rng);
    const size_t n = set.size();
    SUBCASE("keep retains exactly the masked splats in order") {
        std::vector<bool> mask(n, false);
        mask[1] = mask[4] = mask[n - 1] = true;
        SplatSet copy = set;
        copy.keep(mask);
        REQUIRE(copy.size() == 3);
        CHECK(copy.positions[0] == set.positions[1]);
        CHECK(copy.positions[1] == set.positions[4]);
        CHECK(copy.positions[2] == set.positions[n - 1]);
        CHECK(copy.opacity_logits[2] == set.opacity_logits[n - 1]);
        CHECK(copy.consistent());
    }
    SUBCASE("append concatenates") {
        SplatSet copy = set;
        copy.append(set);
        REQUIRE(copy.size() == 2 * n);
        CHECK(copy.positions[n] == set.positions[0]);
        CHECK(copy.sh[2 * n - 1] == set.sh[n - 1]);
        CHECK(copy.consistent());
    }
    SUBCASE("normalize_rotations produces unit quaternions, fixed direction") {
        SplatSet copy = set;
        copy.rotations[0] = Eigen::Vector4d(2, 0, 0, 0);
        copy.rotations[1] = Eigen::Vector4d(1, 1, 1, 1);
        copy.normalize_rotations();
        CHECK(copy.rotations[0] == Eigen::Vector4d(1, 0, 0, 0));
        CHECK(copy.rotations[1].norm() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(copy.rotations[1][0] == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("finite flags NaN anywhere") {
        CHECK(set.finite());
        SplatSet bad = set;
        bad.sh[2](1, 3) = std::nan("");
        CHECK_FALSE(bad.finite());
    }
}

TEST_CASE("PLY export/import round-trip") {
    std::mt19937_64 rng(73);
    SplatSet set = test::random_splats(rng);
    // Round every field to float precision so the round-trip is bit-exact.
    auto to_float = [](double v) { return static_cast<double>(static_cast<float>(v)); };
    for (size_t i = 0; i < set.size(); ++i) {
        for (int c = 0; c < 3; ++c) {
            set.positions[i][c] = to_float(set.positions[i][c]);
            set.log_scales[i][c] = to_float(set.log_scales[i][c]);
        }
        for (int c = 0; c < 4; ++c) set.rotations[i][c] = to_float(set.rotations[i][c]);
        set.opacity_logits[i] = to_float(set.opacity_logits[i]);
        for (int c = 0; c < 12; ++c) set.sh[i](c % 3, c / 3) = to_float(set.sh[i](c % 3, c / 3));
    }
    TempDir dir;
    export_ply(set, dir.file("s.ply"));
    std::string warning;
    SplatSet back = import_ply(dir.file("s.ply"), &warning);
    CHECK(warning.empty());
    REQUIRE(back.size() == set.size());
    for (size_t i = 0; i < set.size(); ++i) {
        CHECK(back.positions[i] == set.positions[i]);
        CHECK(back.log_scales[i] == set.log_scales[i]);
        CHECK(back.rotations[i] == set.rotations[i]);
        CHECK(back.opacity_logits[i] == set.opacity_logits[i]);
        CHECK(back.sh[i] == set.sh[i]);
    }
}

namespace {

// Handcrafted single-splat PLY with `rest_per_channel` f_rest coefficients per
// color channel, channel-major, values 100*c + j for channel c coefficient j.
void write_ply_with_rest(const std::string& path, int rest_per_channel, bool with_opacity = true) {
    std::ofstream out(path, std::ios::binary);
    out << "ply\nformat binary_little_endian 1.0\nelement vertex 1\n";
    const char* base[] = {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2"};
    for (const char* n : base) out << "property float " << n << "\n";
    for (int i = 0; i < 3 * rest_per_channel; ++i) out << "property float f_rest_" << i << "\n";
    if (with_opacity) out << "property float opacity\n";
    for (int i = 0; i < 3; ++i) out << "property float scale_" << i << "\n";
    for (int i = 0; i < 4; ++i) out << "property float rot_" << i << "\n";
    out << "end_header\n";
    std::vector<float> row;
    for (float v : {1.f, 2.f, 3.f}) row.push_back(v);       // position
    for (float v : {0.1f, 0.2f, 0.3f}) row.push_back(v);    // f_dc
    for (int c = 0; c < 3; ++c)
        for (int j = 0; j < rest_per_channel; ++j) row.push_back(100.f * c + j);
    if (with_opacity) row.push_back(-2.f);
    for (float v : {0.f, 0.f, 0.f}) row.push_back(v);        // scales
    for (float v : {1.f, 0.f, 0.f, 0.f}) row.push_back(v);   // rotation
    out.write(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
}

} // namespace

TEST_CASE("PLY import edge cases") {
    TempDir dir;
    SUBCASE("higher-order harmonics are truncated with a warning") {
        write_ply_with_rest(dir.file("deg3.ply"), 15);
        std::string warning;
        SplatSet set = import_ply(dir.file("deg3.ply"), &warning);
        REQUIRE(set.size() == 1);
        CHECK_FALSE(warning.empty());
        for (int c = 0; c < 3; ++c)
            for (int j = 0; j < 3; ++j)
                CHECK(set.sh[0](c, 1 + j) == doctest::Approx(100.0 * c + j));
    }
    SUBCASE("exactly degree 1 imports without warning") {
        write_ply_with_rest(dir.file("deg1.ply"), 3);
        std::string warning;
        SplatSet set = import_ply(dir.file("deg1.ply"), &warning);
        CHECK(warning.empty());
        CHECK(set.sh[0](2, 3) == doctest::Approx(202.0));
    }
    SUBCASE("a missing required property is named in the error") {
        write_ply_with_rest(dir.file("noop.ply"), 3, /*with_opacity=*/false);
        try {
            import_ply(dir.file("noop.ply"));
            FAIL("expected UnsupportedFormatError");
        } catch (const UnsupportedFormatError& e) {
            CHECK(std::string(e.what()).find("opacity") != std::string::npos);
        }
    }
    SUBCASE("big-endian PLY is unsupported") {
        std::ofstream(dir.file("be.ply"), std::ios::binary)
            << "ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n";
        CHECK_THROWS_AS(import_ply(dir.file("be.ply")), UnsupportedFormatError);
    }
    SUBCASE("truncated payload is corrupt") {
        SplatSet set;
        set.positions.push_back({0, 0, 1});
        set.log_scales.push_back({0, 0, 0});
        set.rotations.push_back({1, 0, 0, 0});
        set.opacity_logits.push_back(0.0);
        set.sh.push_back(Eigen::Matrix<double, 3, 4>::Zero());
        export_ply(set, dir.file("t.ply"));
        auto size = std::filesystem::file_size(dir.file("t.ply"));
        std::filesystem::resize_file(dir.file("t.ply"), size - 8);
        CHECK_THROWS_AS(import_ply(dir.file("t.ply")), CorruptFileError);
    }
}
