// SPDX-License-Identifier: Apache-2.0
#include "dgs/losses.hpp"

#include "dgs/errors.hpp"
#include "support/helpers.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <random>

using namespace dgs;

namespace {

Image random_image(std::mt19937_64& rng, int w, int h, int c, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> uni(lo, hi);
    Image img(w, h, c);
    for (size_t i = 0; i < img.size(); ++i) img.data()[i] = uni(rng);
    return img;
}

// Direct (non-separable) SSIM mean, written independently of the production
// code: explicit 11x11 window loop with zero padding outside the image.
double ssim_oracle(const Image& x, const Image& y) {
    constexpr int kHalf = 5;
    std::array<double, 11> g{};
    double gsum = 0;
    for (int i = 0; i < 11; ++i) {
        g[i] = std::exp(-(i - 5.0) * (i - 5.0) / (2.0 * 1.5 * 1.5));
        gsum += g[i];
    }
    for (auto& v : g) v /= gsum;
    const double c1 = 1e-4, c2 = 9e-4;

    double total = 0;
    for (int c = 0; c < x.channels(); ++c)
        for (int py = 0; py < x.height(); ++py)
            for (int px = 0; px < x.width(); ++px) {
                double mux = 0, muy = 0, mxx = 0, myy = 0, mxy = 0;
                for (int dy = -kHalf; dy <= kHalf; ++dy)
                    for (int dx = -kHalf; dx <= kHalf; ++dx) {
                        int ix = px + dx, iy = py + dy;
                        if (ix < 0 || ix >= x.width() || iy < 0 || iy >= x.height()) continue;
                        double w = g[dx + kHalf] * g[dy + kHalf];
                        double xv = x.at(ix, iy, c), yv = y.at(ix, iy, c);
                        mux += w * xv;
                        muy += w * yv;
                        mxx += w * xv * xv;
                        myy += w * yv * yv;
                        mxy += w * xv * yv;
                    }
                double sx = mxx - mux * mux, sy = myy - muy * muy, sxy = mxy - mux * muy;
                total += (2 * mux * muy + c1) * (2 * sxy + c2) /
                         ((mux * mux + muy * muy + c1) * (sx + sy + c2));
            }
    return total / (x.channels() * x.width() * x.height());
}

// Central finite difference of a loss term's value with respect to one entry
// of its first argument.
template <typename Fn>
void check_grad_fd(Image& input, const Image& grad, Fn loss_value, double tol) {
    const double eps = 1e-6;
    for (size_t i = 0; i < input.size(); ++i) {
        double saved = input.data()[i];
        input.data()[i] = saved + eps;
        double plus = loss_value();
        input.data()[i] = saved - eps;
        double minus = loss_value();
        input.data()[i] = saved;
        double numeric = (plus - minus) / (2 * eps);
        double analytic = grad.data()[i];
        CHECK(std::abs(analytic - numeric) <=
              tol * std::max({1.0, std::abs(analytic), std::abs(numeric)}));
    }
}

} // namespace

TEST_CASE("color_l1") {
    SUBCASE("uniform difference gives the difference and a constant gradient") {
        Image rendered(2, 2, 3, 0.5), target(2, 2, 3, 0.25);
        LossTerm term = color_l1(rendered, target);
        CHECK(term.value == doctest::Approx(0.25).epsilon(1e-12));
        for (size_t i = 0; i < term.grad.size(); ++i)
            CHECK(term.grad.data()[i] == doctest::Approx(1.0 / 12.0).epsilon(1e-12));
    }
    SUBCASE("identical images give zero") {
        Image img(3, 3, 3, 0.7);
        LossTerm term = color_l1(img, img);
        CHECK(term.value == 0.0);
    }
    SUBCASE("gradient matches finite differences") {
        std::mt19937_64 rng(103);
        Image rendered = random_image(rng, 6, 5, 3);
        Image target = random_image(rng, 6, 5, 3);
        LossTerm term = color_l1(rendered, target);
        check_grad_fd(rendered, term.grad,
                      [&] { return color_l1(rendered, target).value; }, 1e-6);
    }
    SUBCASE("shape mismatch is a contract violation") {
        Image a(4, 4, 3, 0.0), b(4, 3, 3, 0.0);
        CHECK_THROWS_AS(color_l1(a, b), ContractError);
    }
}

TEST_CASE("dssim") {
    std::mt19937_64 rng(107);
    SUBCASE("identical images score zero with zero gradient") {
        Image img = random_image(rng, 16, 12, 3);
        LossTerm term = dssim(img, img);
        CHECK(term.value == doctest::Approx(0.0).epsilon(1e-12));
        for (size_t i = 0; i < term.grad.size(); ++i)
            CHECK(std::abs(term.grad.data()[i]) < 1e-10);
    }
    SUBCASE("value matches the direct windowed implementation") {
        for (int trial = 0; trial < 3; ++trial) {
            Image x = random_image(rng, 14, 11, 3);
            Image y = random_image(rng, 14, 11, 3);
            LossTerm term = dssim(x, y);
            double expected = (1.0 - ssim_oracle(x, y)) / 2.0;
            CHECK(term.value == doctest::Approx(expected).epsilon(1e-10));
        }
    }
    SUBCASE("smooth and noisy approximations of a target are ordered") {
        Image target = random_image(rng, 16, 16, 3, 0.3, 0.7);
        Image noisy = target;
        std::normal_distribution<double> gauss(0.0, 0.1);
        for (size_t i = 0; i < noisy.size(); ++i) noisy.data()[i] += gauss(rng);
        CHECK(dssim(target, target).value < dssim(noisy, target).value);
    }
    SUBCASE("gradient matches finite differences") {
        Image rendered = random_image(rng, 8, 8, 3);
        Image target = random_image(rng, 8, 8, 3);
        LossTerm term = dssim(rendered, target);
        check_grad_fd(rendered, term.grad,
                      [&] { return dssim(rendered, target).value; }, 1e-4);
    }
}

TEST_CASE("depth_l1") {
    SUBCASE("fully covered pixels give the mean absolute difference") {
        Image rendered(3, 2, 1, 3.0), prior(3, 2, 1, 5.0), trans(3, 2, 1, 0.0);
        LossTerm term = depth_l1(rendered, prior, trans);
        CHECK(term.value == doctest::Approx(2.0).epsilon(1e-12));
        for (size_t i = 0; i < term.grad.size(); ++i)
            CHECK(term.grad.data()[i] == doctest::Approx(-1.0 / 6.0).epsilon(1e-12));
    }
    SUBCASE("pixels with accumulated alpha at most 0.5 are excluded") {
        Image rendered(2, 1, 1), prior(2, 1, 1), trans(2, 1, 1);
        rendered.at(0, 0) = 3.0;
        prior.at(0, 0) = 5.0;
        trans.at(0, 0) = 0.4; // alpha 0.6, included
        rendered.at(1, 0) = 0.0;
        prior.at(1, 0) = 100.0;
        trans.at(1, 0) = 0.6; // alpha 0.4, excluded
        LossTerm term = depth_l1(rendered, prior, trans);
        CHECK(term.value == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(term.grad.at(1, 0) == 0.0);
    }
    SUBCASE("an empty mask yields zero loss and zero gradient") {
        Image rendered(4, 4, 1, 1.0), prior(4, 4, 1, 9.0), trans(4, 4, 1, 1.0);
        LossTerm term = depth_l1(rendered, prior, trans);
        CHECK(term.value == 0.0);
        for (size_t i = 0; i < term.grad.size(); ++i) CHECK(term.grad.data()[i] == 0.0);
    }
    SUBCASE("gradient matches finite differences") {
        std::mt19937_64 rng(109);
        Image rendered = random_image(rng, 5, 4, 1, 1.0, 5.0);
        Image prior = random_image(rng, 5, 4, 1, 1.0, 5.0);
        Image trans = random_image(rng, 5, 4, 1, 0.0, 1.0);
        LossTerm term = depth_l1(rendered, prior, trans);
        check_grad_fd(rendered, term.grad,
                      [&] { return depth_l1(rendered, prior, trans).value; }, 1e-6);
    }
}

TEST_CASE("smoothness") {
    SUBCASE("2x2 example, no edges") {
        Image depth(2, 2, 1);
        depth.at(0, 0) = 0;
        depth.at(1, 0) = 3;
        depth.at(0, 1) = 2;
        depth.at(1, 1) = 3;
        Mask edges(2, 2, false);
        // Right pairs: (0-3)^2, (2-3)^2. Down pairs: (0-2)^2, (3-3)^2.
        LossTerm term = smoothness(depth, edges);
        CHECK(term.value == doctest::Approx((9 + 1 + 4 + 0) / 4.0).epsilon(1e-12));
    }
    SUBCASE("pairs touching an edge pixel are excluded") {
        Image depth(2, 2, 1);
        depth.at(0, 0) = 0;
        depth.at(1, 0) = 3;
        depth.at(0, 1) = 2;
        depth.at(1, 1) = 3;
        Mask edges(2, 2, false);
        edges.set(0, 0, true); // removes both pairs containing (0,0)
        LossTerm term = smoothness(depth, edges);
        CHECK(term.value == doctest::Approx((1 + 0) / 2.0).epsilon(1e-12));
        CHECK(term.grad.at(0, 0) == 0.0);
    }
    SUBCASE("an all-edge mask yields zero") {
        Image depth(3, 3, 1, 2.0);
        depth.at(1, 1) = 9.0;
        Mask edges(3, 3, true);
        CHECK(smoothness(depth, edges).value == 0.0);
    }
    SUBCASE("constant depth is already smooth") {
        Image depth(5, 5, 1, 4.0);
        Mask edges(5, 5, false);
        LossTerm term = smoothness(depth, edges);
        CHECK(term.value == 0.0);
        for (size_t i = 0; i < term.grad.size(); ++i) CHECK(term.grad.data()[i] == 0.0);
    }
    SUBCASE("gradient matches finite differences") {
        std::mt19937_64 rng(113);
        Image depth = random_image(rng, 6, 5, 1, 1.0, 5.0);
        Mask edges(6, 5, false);
        edges.set(2, 2, true);
        edges.set(4, 1, true);
        LossTerm term = smoothness(depth, edges);
        check_grad_fd(depth, term.grad, [&] { return smoothness(depth, edges).value; }, 1e-6);
    }
}

TEST_CASE("combine") {
    std::mt19937_64 rng(127);
    Image rendered = random_image(rng, 8, 6, 3);
    Image target = random_image(rng, 8, 6, 3);
    Image depth_r = random_image(rng, 8, 6, 1, 1.0, 5.0);
    Image depth_p = random_image(rng, 8, 6, 1, 1.0, 5.0);
    Image trans(8, 6, 1, 0.0);
    Mask edges(8, 6, false);
    LossTerm lc = color_l1(rendered, target);
    LossTerm ld = dssim(rendered, target);
    LossTerm lz = depth_l1(depth_r, depth_p, trans);
    LossTerm ls = smoothness(depth_r, edges);

    SUBCASE("unit component values combine to 1.11 under the defaults") {
        LossTerm unit;
        unit.value = 1.0;
        LossReport report = combine(unit, unit, unit, unit, {});
        CHECK(report.total == doctest::Approx(1.11).epsilon(1e-12));
    }
    SUBCASE("total and gradients are the weighted sums of the terms") {
        LossWeights weights{0.3, 0.25, 0.05};
        LossReport report = combine(lc, ld, lz, ls, weights);
        CHECK(report.color == lc.value);
        CHECK(report.dssim == ld.value);
        CHECK(report.depth == lz.value);
        CHECK(report.smooth == ls.value);
        CHECK(report.total == doctest::Approx(0.7 * lc.value + 0.3 * ld.value +
                                              0.25 * lz.value + 0.05 * ls.value)
                                  .epsilon(1e-12));
        for (size_t i = 0; i < report.grad_color.size(); ++i)
            CHECK(report.grad_color.data()[i] ==
                  doctest::Approx(0.7 * lc.grad.data()[i] + 0.3 * ld.grad.data()[i])
                      .epsilon(1e-12));
        for (size_t i = 0; i < report.grad_depth.size(); ++i)
            CHECK(report.grad_depth.data()[i] ==
                  doctest::Approx(0.25 * lz.grad.data()[i] + 0.05 * ls.grad.data()[i])
                      .epsilon(1e-12));
    }
    SUBCASE("a disabled depth term leaves the smoothness gradient intact") {
        LossTerm empty_depth; // no gradient image: term disabled
        LossReport report = combine(lc, ld, empty_depth, ls, {});
        REQUIRE(report.grad_depth.size() == ls.grad.size());
        for (size_t i = 0; i < report.grad_depth.size(); ++i)
            CHECK(report.grad_depth.data()[i] ==
                  doctest::Approx(0.01 * ls.grad.data()[i]).epsilon(1e-12));
    }
    SUBCASE("weights are validated") {
        CHECK_THROWS_AS(combine(lc, ld, lz, ls, {-0.1, 0.1, 0.01}), ContractError);
        CHECK_THROWS_AS(combine(lc, ld, lz, ls, {1.1, 0.1, 0.01}), ContractError);
        CHECK_THROWS_AS(combine(lc, ld, lz, ls, {0.2, -0.1, 0.01}), ContractError);
        CHECK_THROWS_AS(combine(lc, ld, lz, ls, {0.2, 0.1, -0.01}), ContractError);
    }
}
