// SPDX-License-Identifier: Apache-2.0
#include "dgs/losses.hpp"

#include "dgs/errors.hpp"

#include <array>
#include <cmath>

namespace dgs {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01; // (K1 * L)^2 with L = 1
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWindow> gaussian_window() {
    std::array<double, kWindow> w{};
    const int half = kWindow / 2;
    double sum = 0;
    for (int i = 0; i < kWindow; ++i) {
        double d = i - half;
        w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
}

// Separable zero-padded convolution of one channel with the symmetric window.
// Being symmetric, the operation is its own adjoint.
Image conv_window(const Image& src, int channel) {
    static const std::array<double, kWindow> win = gaussian_window();
    const int w = src.width(), h = src.height(), half = kWindow / 2;
    Image tmp(w, h, 1);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int k = -half; k <= half; ++k) {
                int xx = x + k;
                if (xx < 0 || xx >= w) continue;
                acc += win[k + half] * src.at(xx, y, channel);
            }
            tmp.at(x, y) = acc;
        }
    }
    Image out(w, h, 1);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int k = -half; k <= half; ++k) {
                int yy = y + k;
                if (yy < 0 || yy >= h) continue;
                acc += win[k + half] * tmp.at(x, yy);
            }
            out.at(x, y) = acc;
        }
    }
    return out;
}

void require_same_shape(const Image& a, const Image& b, const char* who) {
    if (!a.same_shape(b)) throw ContractError(std::string(who) + ": image shape mismatch");
}

} // namespace

LossTerm color_l1(const Image& rendered, const Image& target) {
    require_same_shape(rendered, target, "color_l1");
    LossTerm term;
    term.grad = Image(rendered.width(), rendered.height(), rendered.channels());
    const size_t n = rendered.size();
    if (n == 0) return term;
    const double* r = rendered.data();
    const double* t = target.data();
    double* g = term.grad.data();
    double sum = 0;
    for (size_t i = 0; i < n; ++i) {
        double d = r[i] - t[i];
        sum += std::abs(d);
        g[i] = (d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) / static_cast<double>(n);
    }
    term.value = sum / static_cast<double>(n);
    return term;
}

LossTerm dssim(const Image& rendered, const Image& target) {
    require_same_shape(rendered, target, "dssim");
    const int w = rendered.width(), h = rendered.height(), ch = rendered.channels();
    LossTerm term;
    term.grad = Image(w, h, ch);
    const size_t n = static_cast<size_t>(w) * h * ch;
    if (n == 0) return term;

    double ssim_sum = 0;
    for (int c = 0; c < ch; ++c) {
        // Local moments of x (rendered), y (target) and their products.
        Image xx(w, h, 1), yy(w, h, 1), xy(w, h, 1);
        for (int py = 0; py < h; ++py) {
            for (int px = 0; px < w; ++px) {
                double xv = rendered.at(px, py, c), yv = target.at(px, py, c);
                xx.at(px, py) = xv * xv;
                yy.at(px, py) = yv * yv;
                xy.at(px, py) = xv * yv;
            }
        }
        Image mu_x = conv_window(rendered, c);
        Image mu_y = conv_window(target, c);
        Image m_xx = conv_window(xx, 0);
        Image m_yy = conv_window(yy, 0);
        Image m_xy = conv_window(xy, 0);

        // Per-pixel SSIM and the partials of S with respect to the raw moments
        // (mu_x, m_xx, m_xy); m_yy and mu_y belong to the fixed target.
        Image g_mu(w, h, 1), g_mxx(w, h, 1), g_mxy(w, h, 1);
        for (int py = 0; py < h; ++py) {
            for (int px = 0; px < w; ++px) {
                double mx = mu_x.at(px, py), my = mu_y.at(px, py);
                double sxx = m_xx.at(px, py) - mx * mx;
                double syy = m_yy.at(px, py) - my * my;
                double sxy = m_xy.at(px, py) - mx * my;
                double a1 = 2 * mx * my + kC1, a2 = 2 * sxy + kC2;
                double b1 = mx * mx + my * my + kC1, b2 = sxx + syy + kC2;
                double s = (a1 * a2) / (b1 * b2);
                ssim_sum += s;

                double g_sxy = 2 * a1 / (b1 * b2);
                g_mu.at(px, py) = 2 * my * a2 / (b1 * b2) - 2 * mx * s / b1 + 2 * mx * s / b2 -
                                  my * g_sxy;
                g_mxx.at(px, py) = -s / b2;
                g_mxy.at(px, py) = g_sxy;
            }
        }

        // Adjoint of the moment computation: dL/dx = conv(g_mu) +
        // conv(g_mxx) * 2x + conv(g_mxy) * y, scaled by the mean factor.
        Image c_mu = conv_window(g_mu, 0);
        Image c_mxx = conv_window(g_mxx, 0);
        Image c_mxy = conv_window(g_mxy, 0);
        // D-SSIM = (1 - mean S) / 2, hence the -0.5 on the SSIM gradient.
        const double scale = -0.5 / static_cast<double>(n);
        for (int py = 0; py < h; ++py)
            for (int px = 0; px < w; ++px)
                term.grad.at(px, py, c) =
                    scale * (c_mu.at(px, py) +
                             c_mxx.at(px, py) * 2.0 * rendered.at(px, py, c) +
                             c_mxy.at(px, py) * target.at(px, py, c));
    }

    term.value = 0.5 * (1.0 - ssim_sum / static_cast<double>(n));
    return term;
}

LossTerm depth_l1(const Image& rendered_depth, const Image& aligned_prior,
                  const Image& transmittance) {
    require_same_shape(rendered_depth, aligned_prior, "depth_l1");
    if (rendered_depth.width() != transmittance.width() ||
        rendered_depth.height() != transmittance.height())
        throw ContractError("depth_l1: transmittance shape mismatch");

    const int w = rendered_depth.width(), h = rendered_depth.height();
    LossTerm term;
    term.grad = Image(w, h, 1);
    double sum = 0;
    long count = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (1.0 - transmittance.at(x, y) <= 0.5) continue;
            ++count;
            double d = rendered_depth.at(x, y) - aligned_prior.at(x, y);
            sum += std::abs(d);
            term.grad.at(x, y) = d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0;
        }
    }
    if (count == 0) return term; // empty mask: loss 0, gradient 0
    term.value = sum / count;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) term.grad.at(x, y) /= count;
    return term;
}

LossTerm smoothness(const Image& rendered_depth, const Mask& edge_mask) {
    if (rendered_depth.width() != edge_mask.width() ||
        rendered_depth.height() != edge_mask.height())
        throw ContractError("smoothness: mask shape mismatch");

    const int w = rendered_depth.width(), h = rendered_depth.height();
    LossTerm term;
    term.grad = Image(w, h, 1);

    // First pass counts contributing pairs so the gradient can be normalized
    // in the same sweep order.
    long pairs = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (edge_mask.at(x, y)) continue;
            if (x + 1 < w && !edge_mask.at(x + 1, y)) ++pairs;
            if (y + 1 < h && !edge_mask.at(x, y + 1)) ++pairs;
        }
    if (pairs == 0) return term;

    double sum = 0;
    const double inv = 1.0 / pairs;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (edge_mask.at(x, y)) continue;
            double d0 = rendered_depth.at(x, y);
            if (x + 1 < w && !edge_mask.at(x + 1, y)) {
                double diff = d0 - rendered_depth.at(x + 1, y);
                sum += diff * diff;
                term.grad.at(x, y) += 2.0 * diff * inv;
                term.grad.at(x + 1, y) -= 2.0 * diff * inv;
            }
            if (y + 1 < h && !edge_mask.at(x, y + 1)) {
                double diff = d0 - rendered_depth.at(x, y + 1);
                sum += diff * diff;
                term.grad.at(x, y) += 2.0 * diff * inv;
                term.grad.at(x, y + 1) -= 2.0 * diff * inv;
            }
        }
    }
    term.value = sum * inv;
    return term;
}

LossReport combine(const LossTerm& color, const LossTerm& dssim_term, const LossTerm& depth,
                   const LossTerm& smooth, const LossWeights& weights) {
    if (weights.ssim < 0 || weights.ssim > 1)
        throw ContractError("combine: ssim weight must be in [0,1]");
    if (weights.depth < 0 || weights.smooth < 0)
        throw ContractError("combine: loss weights must be nonnegative");

    LossReport report;
    report.color = color.value;
    report.dssim = dssim_term.value;
    report.depth = depth.value;
    report.smooth = smooth.value;
    report.total = (1.0 - weights.ssim) * color.value + weights.ssim * dssim_term.value +
                   weights.depth * depth.value + weights.smooth * smooth.value;

    report.grad_color = Image(color.grad.width(), color.grad.height(), color.grad.channels());
    for (size_t i = 0; i < report.grad_color.size(); ++i)
        report.grad_color.data()[i] = (1.0 - weights.ssim) * color.grad.data()[i] +
                                      weights.ssim * dssim_term.grad.data()[i];

    // Either depth term may be absent (empty gradient) when its input is
    // disabled; size the combined gradient from whichever is present.
    const Image& shape_src = depth.grad.empty() ? smooth.grad : depth.grad;
    report.grad_depth = Image(shape_src.width(), shape_src.height(), 1);
    if (!depth.grad.empty())
        for (size_t i = 0; i < report.grad_depth.size(); ++i)
            report.grad_depth.data()[i] += weights.depth * depth.grad.data()[i];
    if (!smooth.grad.empty())
        for (size_t i = 0; i < report.grad_depth.size(); ++i)
            report.grad_depth.data()[i] += weights.smooth * smooth.grad.data()[i];
    return report;
}

} // namespace dgs
