// SPDX-License-Identifier: Apache-2.0
#include "dgs/rasterizer.hpp"

#include "dgs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dgs {

namespace {

// Contributions below this alpha are not composited or recorded.
// Contributions below this alpha are dropped in forward and backward alike.
// Kept far below any numerically meaningful value so the induced
// discontinuity is invisible to finite-difference checks of the gradients.
constexpr double kAlphaSkip = 1e-30;
// Alpha is always kept strictly below 1 so the backward rear-term division
// stays finite.
constexpr double kAlphaMax = 1.0 - 1e-12;

// dR/dq for a unit quaternion (w,x,y,z), one 3x3 slab per component.
void quat_rotmat_jacobian(const Eigen::Vector4d& q, Eigen::Matrix3d dr[4]) {
    double w = q[0], x = q[1], y = q[2], z = q[3];
    dr[0] << 0, -z, y, z, 0, -x, -y, x, 0;
    dr[1] << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
    dr[2] << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
    dr[3] << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
    for (int k = 0; k < 4; ++k) dr[k] *= 2.0;
}

struct TileRect {
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1; // inclusive tile range, empty if x1 < x0
    bool empty() const { return x1 < x0 || y1 < y0; }
};

TileRect tile_rect(const ProjectedSplat& p, int tiles_x, int tiles_y, int tile_size) {
    TileRect r;
    double lo_x = p.mean2d.x() - p.radius, hi_x = p.mean2d.x() + p.radius;
    double lo_y = p.mean2d.y() - p.radius, hi_y = p.mean2d.y() + p.radius;
    if (hi_x < 0 || hi_y < 0 || lo_x > tiles_x * tile_size || lo_y > tiles_y * tile_size) return r;
    r.x0 = std::clamp(static_cast<int>(std::floor(lo_x / tile_size)), 0, tiles_x - 1);
    r.x1 = std::clamp(static_cast<int>(std::floor(hi_x / tile_size)), 0, tiles_x - 1);
    r.y0 = std::clamp(static_cast<int>(std::floor(lo_y / tile_size)), 0, tiles_y - 1);
    r.y1 = std::clamp(static_cast<int>(std::floor(hi_y / tile_size)), 0, tiles_y - 1);
    return r;
}

struct JacobianParts {
    double x, y, z;
    double tx, ty; // clamped x/z, y/z used in the EWA Jacobian
    bool tx_clamped, ty_clamped;
    Eigen::Matrix<double, 2, 3> j;
};

JacobianParts ewa_jacobian(const Camera& cam, const Eigen::Vector3d& p_cam) {
    JacobianParts out;
    out.x = p_cam.x();
    out.y = p_cam.y();
    out.z = p_cam.z();
    const double lim_x = 1.3 * (cam.width / (2.0 * cam.fx()));
    const double lim_y = 1.3 * (cam.height / (2.0 * cam.fy()));
    double rx = out.x / out.z, ry = out.y / out.z;
    out.tx = std::clamp(rx, -lim_x, lim_x);
    out.ty = std::clamp(ry, -lim_y, lim_y);
    out.tx_clamped = out.tx != rx;
    out.ty_clamped = out.ty != ry;
    out.j.setZero();
    out.j(0, 0) = cam.fx() / out.z;
    out.j(0, 2) = -cam.fx() * out.tx / out.z;
    out.j(1, 1) = cam.fy() / out.z;
    out.j(1, 2) = -cam.fy() * out.ty / out.z;
    return out;
}

Eigen::Matrix3d covariance3d(const Eigen::Vector4d& q_unit, const Eigen::Vector3d& log_scale) {
    Eigen::Matrix3d r = quat_to_rotation(q_unit);
    Eigen::Vector3d d = (2.0 * log_scale).array().exp();
    return r * d.asDiagonal() * r.transpose();
}

} // namespace

void SplatGradients::resize_zero(size_t n) {
    positions.assign(n, Eigen::Vector3d::Zero());
    log_scales.assign(n, Eigen::Vector3d::Zero());
    rotations.assign(n, Eigen::Vector4d::Zero());
    opacity_logits.assign(n, 0.0);
    sh.assign(n, Eigen::Matrix<double, 3, 4>::Zero());
    screen_grad_norm.assign(n, 0.0);
}

std::vector<ProjectedSplat> project_splats(const SplatSet& set, const Camera& camera,
                                           const RenderSettings& settings) {
    if (!camera.well_formed()) throw ContractError("render: camera is not well-formed");
    std::vector<ProjectedSplat> out;
    out.reserve(set.size());
    const Eigen::Vector3d cam_center = camera.center();

    for (size_t i = 0; i < set.size(); ++i) {
        Eigen::Vector3d p_cam = camera.to_camera(set.positions[i]);
        if (p_cam.z() <= settings.near_plane) continue;

        JacobianParts jac = ewa_jacobian(camera, p_cam);
        Eigen::Vector4d q = set.rotations[i].normalized();
        Eigen::Matrix3d sigma3 = covariance3d(q, set.log_scales[i]);
        Eigen::Matrix<double, 2, 3> m = jac.j * camera.rotation;
        Eigen::Matrix2d cov = m * sigma3 * m.transpose();
        cov(0, 0) += settings.lowpass_floor;
        cov(1, 1) += settings.lowpass_floor;

        double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
        if (det <= 0) continue;

        ProjectedSplat ps;
        ps.splat_index = static_cast<int>(i);
        ps.cov_xx = cov(0, 0);
        ps.cov_xy = cov(0, 1);
        ps.cov_yy = cov(1, 1);
        ps.conic_a = cov(1, 1) / det;
        ps.conic_b = -cov(0, 1) / det;
        ps.conic_c = cov(0, 0) / det;
        ps.depth = p_cam.z();
        ps.mean2d = camera.project(p_cam);
        ps.opacity = sigmoid(set.opacity_logits[i]);

        double mid = 0.5 * (cov(0, 0) + cov(1, 1));
        double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
        ps.radius = settings.bbox_sigma * std::sqrt(lambda_max);

        // Cull splats whose screen bounding box misses the image entirely.
        if (ps.mean2d.x() + ps.radius < 0 || ps.mean2d.x() - ps.radius > camera.width ||
            ps.mean2d.y() + ps.radius < 0 || ps.mean2d.y() - ps.radius > camera.height)
            continue;

        Eigen::Vector3d v = set.positions[i] - cam_center;
        double len = v.norm();
        Eigen::Vector3d dir = len > 1e-12 ? Eigen::Vector3d(v / len) : Eigen::Vector3d(0, 0, 1);
        Eigen::Vector3d c = eval_sh(set.sh[i], dir);
        for (int ch = 0; ch < 3; ++ch) {
            if (c[ch] <= 0.0) {
                c[ch] = 0.0;
                ps.color_clamped |= uint8_t(1) << ch;
            } else if (c[ch] >= 1.0) {
                c[ch] = 1.0;
                ps.color_clamped |= uint8_t(1) << ch;
            }
        }
        ps.color = c;
        out.push_back(ps);
    }
    return out;
}

TileBins sort_and_bin(std::vector<ProjectedSplat>& projected, int width, int height,
                      int tile_size) {
    std::sort(projected.begin(), projected.end(), [](const ProjectedSplat& a,
                                                     const ProjectedSplat& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.splat_index < b.splat_index;
    });

    TileBins bins;
    bins.tile_size = tile_size;
    bins.tiles_x = (width + tile_size - 1) / tile_size;
    bins.tiles_y = (height + tile_size - 1) / tile_size;
    bins.bins.assign(static_cast<size_t>(bins.tiles_x) * bins.tiles_y, {});

    for (size_t p = 0; p < projected.size(); ++p) {
        TileRect r = tile_rect(projected[p], bins.tiles_x, bins.tiles_y, tile_size);
        for (int ty = r.y0; ty <= r.y1; ++ty)
            for (int tx = r.x0; tx <= r.x1; ++tx)
                bins.bins[static_cast<size_t>(ty) * bins.tiles_x + tx].push_back(
                    static_cast<int>(p));
    }
    return bins;
}

RenderOutput render(const SplatSet& set, const Camera& camera, const Eigen::Vector3d& background,
                    const RenderSettings& settings, bool keep_records) {
    const int w = camera.width, h = camera.height;
    RenderOutput out;
    out.camera = camera;
    out.background = background;
    out.settings = settings;
    out.color = Image(w, h, 3);
    out.depth = Image(w, h, 1);
    out.transmittance = Image(w, h, 1, 1.0);
    out.projected = project_splats(set, camera, settings);
    out.bins = sort_and_bin(out.projected, w, h, settings.tile_size);
    out.has_records = keep_records;

    const double eff_clamp = std::min(settings.alpha_clamp, kAlphaMax);
    const int num_tiles = out.bins.tiles_x * out.bins.tiles_y;
    const int ts = settings.tile_size;

    std::vector<uint32_t> counts(static_cast<size_t>(w) * h, 0);
    std::vector<std::vector<PixelContrib>> tile_contribs(keep_records ? num_tiles : 0);

#pragma omp parallel for schedule(dynamic)
    for (int tile = 0; tile < num_tiles; ++tile) {
        const auto& bin = out.bins.bins[tile];
        const int tx = tile % out.bins.tiles_x, ty = tile / out.bins.tiles_x;
        const int x0 = tx * ts, y0 = ty * ts;
        const int x1 = std::min(x0 + ts, w), y1 = std::min(y0 + ts, h);
        std::vector<PixelContrib>* record = keep_records ? &tile_contribs[tile] : nullptr;

        for (int py = y0; py < y1; ++py) {
            for (int px = x0; px < x1; ++px) {
                double transmittance = 1.0;
                Eigen::Vector3d color = Eigen::Vector3d::Zero();
                double depth = 0.0;
                uint32_t contrib_count = 0;
                const double cx = px + 0.5, cy = py + 0.5;

                for (size_t s = 0; s < bin.size(); ++s) {
                    const ProjectedSplat& p = out.projected[bin[s]];
                    const double dx = cx - p.mean2d.x(), dy = cy - p.mean2d.y();
                    const double power = 0.5 * (p.conic_a * dx * dx + p.conic_c * dy * dy) +
                                         p.conic_b * dx * dy;
                    if (power < 0) continue; // non-SPD numerical edge
                    const double weight = std::exp(-power);
                    const double alpha = std::min(p.opacity * weight, eff_clamp);
                    if (alpha < kAlphaSkip) continue;

                    color += p.color * (alpha * transmittance);
                    depth += p.depth * (alpha * transmittance);
                    if (record) {
                        record->push_back({static_cast<int32_t>(s), weight});
                        ++contrib_count;
                    }
                    transmittance *= 1.0 - alpha;
                    if (transmittance < settings.transmittance_min) break;
                }

                color += background * transmittance;
                for (int ch = 0; ch < 3; ++ch) out.color.at(px, py, ch) = color[ch];
                out.depth.at(px, py) = depth;
                out.transmittance.at(px, py) = transmittance;
                counts[static_cast<size_t>(py) * w + px] = contrib_count;
            }
        }
    }

    if (keep_records) {
        out.contrib_offset.resize(static_cast<size_t>(w) * h + 1);
        out.contrib_offset[0] = 0;
        for (size_t i = 0; i < counts.size(); ++i)
            out.contrib_offset[i + 1] = out.contrib_offset[i] + counts[i];
        out.contribs.resize(out.contrib_offset.back());

#pragma omp parallel for schedule(dynamic)
        for (int tile = 0; tile < num_tiles; ++tile) {
            const int tx = tile % out.bins.tiles_x, ty = tile / out.bins.tiles_x;
            const int x0 = tx * ts, y0 = ty * ts;
            const int x1 = std::min(x0 + ts, w), y1 = std::min(y0 + ts, h);
            size_t src = 0;
            for (int py = y0; py < y1; ++py) {
                for (int px = x0; px < x1; ++px) {
                    const size_t pix = static_cast<size_t>(py) * w + px;
                    uint32_t n = counts[pix];
                    std::copy_n(tile_contribs[tile].begin() + src, n,
                                out.contribs.begin() + out.contrib_offset[pix]);
                    src += n;
                }
            }
        }
    }
    return out;
}

RenderOutput render_reference(const SplatSet& set, const Camera& camera,
                              const Eigen::Vector3d& background, const RenderSettings& settings) {
    const int w = camera.width, h = camera.height;
    RenderOutput out;
    out.camera = camera;
    out.background = background;
    out.settings = settings;
    out.color = Image(w, h, 3);
    out.depth = Image(w, h, 1);
    out.transmittance = Image(w, h, 1, 1.0);

    auto projected = project_splats(set, camera, settings);
    std::sort(projected.begin(), projected.end(), [](const ProjectedSplat& a,
                                                     const ProjectedSplat& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.splat_index < b.splat_index;
    });

    const double eff_clamp = std::min(settings.alpha_clamp, kAlphaMax);
    const int ts = settings.tile_size;
    const int tiles_x = (w + ts - 1) / ts, tiles_y = (h + ts - 1) / ts;
    std::vector<TileRect> rects(projected.size());
    for (size_t p = 0; p < projected.size(); ++p)
        rects[p] = tile_rect(projected[p], tiles_x, tiles_y, ts);

    for (int py = 0; py < h; ++py) {
        for (int px = 0; px < w; ++px) {
            const int tx = px / ts, ty = py / ts;
            double transmittance = 1.0;
            Eigen::Vector3d color = Eigen::Vector3d::Zero();
            double depth = 0.0;
            const double cx = px + 0.5, cy = py + 0.5;

            for (size_t s = 0; s < projected.size(); ++s) {
                const TileRect& r = rects[s];
                if (tx < r.x0 || tx > r.x1 || ty < r.y0 || ty > r.y1) continue;
                const ProjectedSplat& p = projected[s];
                const double dx = cx - p.mean2d.x(), dy = cy - p.mean2d.y();
                const double power =
                    0.5 * (p.conic_a * dx * dx + p.conic_c * dy * dy) + p.conic_b * dx * dy;
                if (power < 0) continue;
                const double weight = std::exp(-power);
                const double alpha = std::min(p.opacity * weight, eff_clamp);
                if (alpha < kAlphaSkip) continue;

                color += p.color * (alpha * transmittance);
                depth += p.depth * (alpha * transmittance);
                transmittance *= 1.0 - alpha;
                if (transmittance < settings.transmittance_min) break;
            }

            color += background * transmittance;
            for (int ch = 0; ch < 3; ++ch) out.color.at(px, py, ch) = color[ch];
            out.depth.at(px, py) = depth;
            out.transmittance.at(px, py) = transmittance;
        }
    }
    return out;
}

namespace {

// Screen-space gradient accumulator per projected splat.
struct ScreenGrad {
    Eigen::Vector3d color = Eigen::Vector3d::Zero();
    Eigen::Vector2d mean2d = Eigen::Vector2d::Zero();
    double conic[3] = {0, 0, 0};
    double depth = 0;
    double opacity = 0;
};

} // namespace

SplatGradients render_backward(const SplatSet& set, const RenderOutput& output,
                               const Image& grad_color, const Image& grad_depth) {
    if (!output.has_records)
        throw ContractError("render_backward requires records kept by render()");
    const int w = output.camera.width, h = output.camera.height;
    if (grad_color.width() != w || grad_color.height() != h || grad_color.channels() != 3 ||
        grad_depth.width() != w || grad_depth.height() != h || grad_depth.channels() != 1)
        throw ContractError("render_backward: gradient image shape mismatch");

    const Camera& cam = output.camera;
    const RenderSettings& settings = output.settings;
    const double eff_clamp = std::min(settings.alpha_clamp, kAlphaMax);
    const int ts = settings.tile_size;
    const int num_tiles = output.bins.tiles_x * output.bins.tiles_y;

    // Stage 1: per-tile sequential accumulation of screen-space gradients,
    // then a serial tile-ordered reduction. This keeps the result independent
    // of the thread count.
    std::vector<std::vector<ScreenGrad>> tile_grads(num_tiles);

#pragma omp parallel for schedule(dynamic)
    for (int tile = 0; tile < num_tiles; ++tile) {
        const auto& bin = output.bins.bins[tile];
        if (bin.empty()) continue;
        auto& local = tile_grads[tile];
        local.assign(bin.size(), ScreenGrad{});

        const int tx = tile % output.bins.tiles_x, ty = tile / output.bins.tiles_x;
        const int x0 = tx * ts, y0 = ty * ts;
        const int x1 = std::min(x0 + ts, w), y1 = std::min(y0 + ts, h);

        std::vector<double> alphas, trans;
        for (int py = y0; py < y1; ++py) {
            for (int px = x0; px < x1; ++px) {
                const size_t pix = static_cast<size_t>(py) * w + px;
                const uint32_t off = output.contrib_offset[pix];
                const uint32_t n = output.contrib_offset[pix + 1] - off;
                if (n == 0) continue;

                // Replay compositing to recover alpha_i and T_i.
                alphas.resize(n);
                trans.resize(n);
                double t_run = 1.0;
                for (uint32_t k = 0; k < n; ++k) {
                    const PixelContrib& c = output.contribs[off + k];
                    const ProjectedSplat& p = output.projected[bin[c.slot]];
                    alphas[k] = std::min(p.opacity * c.weight, eff_clamp);
                    trans[k] = t_run;
                    t_run *= 1.0 - alphas[k];
                }

                const Eigen::Vector3d gc(grad_color.at(px, py, 0), grad_color.at(px, py, 1),
                                         grad_color.at(px, py, 2));
                const double gd = grad_depth.at(px, py);
                Eigen::Vector3d rear_color = output.background * t_run;
                double rear_depth = 0.0;
                const double cx = px + 0.5, cy = py + 0.5;

                for (int k = static_cast<int>(n) - 1; k >= 0; --k) {
                    const PixelContrib& c = output.contribs[off + k];
                    const ProjectedSplat& p = output.projected[bin[c.slot]];
                    ScreenGrad& sg = local[c.slot];
                    const double a = alphas[k], tk = trans[k], wgt = a * tk;
                    const double one_minus = 1.0 - a;

                    sg.color += gc * wgt;
                    sg.depth += gd * wgt;

                    double dalpha = gd * (p.depth * tk - rear_depth / one_minus);
                    for (int ch = 0; ch < 3; ++ch)
                        dalpha += gc[ch] * (p.color[ch] * tk - rear_color[ch] / one_minus);

                    if (a < eff_clamp) { // alpha not clamped: flows into G and opacity
                        const double g_weight = dalpha * p.opacity;
                        sg.opacity += dalpha * c.weight;
                        const double common = g_weight * c.weight; // dG/dpower = -G
                        const double dx = cx - p.mean2d.x(), dy = cy - p.mean2d.y();
                        sg.conic[0] += -0.5 * dx * dx * common;
                        sg.conic[1] += -dx * dy * common;
                        sg.conic[2] += -0.5 * dy * dy * common;
                        sg.mean2d.x() += common * (p.conic_a * dx + p.conic_b * dy);
                        sg.mean2d.y() += common * (p.conic_b * dx + p.conic_c * dy);
                    }

                    rear_color += p.color * wgt;
                    rear_depth += p.depth * wgt;
                }
            }
        }
    }

    // Serial reduction in tile order.
    std::vector<ScreenGrad> accum(output.projected.size());
    for (int tile = 0; tile < num_tiles; ++tile) {
        const auto& bin = output.bins.bins[tile];
        const auto& local = tile_grads[tile];
        for (size_t s = 0; s < local.size(); ++s) {
            ScreenGrad& dst = accum[bin[s]];
            dst.color += local[s].color;
            dst.mean2d += local[s].mean2d;
            dst.conic[0] += local[s].conic[0];
            dst.conic[1] += local[s].conic[1];
            dst.conic[2] += local[s].conic[2];
            dst.depth += local[s].depth;
            dst.opacity += local[s].opacity;
        }
    }

    // Stage 2: chain screen-space gradients back to splat parameters. Each
    // projected splat maps to a unique splat index, so this loop is race-free.
    SplatGradients grads;
    grads.resize_zero(set.size());
    const Eigen::Vector3d cam_center = cam.center();

#pragma omp parallel for schedule(static)
    for (long pi = 0; pi < static_cast<long>(output.projected.size()); ++pi) {
        const ProjectedSplat& p = output.projected[pi];
        const ScreenGrad& sg = accum[pi];
        const int si = p.splat_index;

        // Opacity through the sigmoid.
        grads.opacity_logits[si] = sg.opacity * p.opacity * (1.0 - p.opacity);
        grads.screen_grad_norm[si] = sg.mean2d.norm();

        // Color: clamped channels are flat.
        Eigen::Vector3d gcol = sg.color;
        for (int ch = 0; ch < 3; ++ch)
            if (p.color_clamped & (uint8_t(1) << ch)) gcol[ch] = 0.0;

        // SH coefficients and view direction.
        Eigen::Vector3d v = set.positions[si] - cam_center;
        double len = v.norm();
        Eigen::Vector3d gpos = Eigen::Vector3d::Zero();
        if (len > 1e-12) {
            Eigen::Vector3d dir = v / len;
            Eigen::Vector4d basis(kSh0, -kSh1 * dir.y(), kSh1 * dir.z(), -kSh1 * dir.x());
            grads.sh[si] = gcol * basis.transpose();
            Eigen::Vector4d gbasis = set.sh[si].transpose() * gcol;
            Eigen::Vector3d gdir(-kSh1 * gbasis[3], -kSh1 * gbasis[1], kSh1 * gbasis[2]);
            gpos += (Eigen::Matrix3d::Identity() - dir * dir.transpose()) * gdir / len;
        }

        // Conic -> 2D covariance.
        Eigen::Matrix2d conic;
        conic << p.conic_a, p.conic_b, p.conic_b, p.conic_c;
        Eigen::Matrix2d ghat;
        ghat << sg.conic[0], 0.5 * sg.conic[1], 0.5 * sg.conic[1], sg.conic[2];
        Eigen::Matrix2d gcov_m = -conic * ghat * conic; // symmetric

        // 2D covariance -> 3D covariance and Jacobian.
        Eigen::Vector3d p_cam = cam.to_camera(set.positions[si]);
        JacobianParts jac = ewa_jacobian(cam, p_cam);
        Eigen::Vector4d q = set.rotations[si].normalized();
        Eigen::Matrix3d rot3 = quat_to_rotation(q);
        Eigen::Vector3d diag = (2.0 * set.log_scales[si]).array().exp();
        Eigen::Matrix3d sigma3 = rot3 * diag.asDiagonal() * rot3.transpose();
        Eigen::Matrix<double, 2, 3> m = jac.j * cam.rotation;

        Eigen::Matrix3d g_sigma3 = m.transpose() * gcov_m * m;
        Eigen::Matrix<double, 2, 3> gm = 2.0 * gcov_m * m * sigma3;
        Eigen::Matrix<double, 2, 3> gj = gm * cam.rotation.transpose();

        // Log scales.
        Eigen::Matrix3d rtgr = rot3.transpose() * g_sigma3 * rot3;
        for (int k = 0; k < 3; ++k) grads.log_scales[si][k] = 2.0 * diag[k] * rtgr(k, k);

        // Rotation through the quaternion normalization.
        Eigen::Matrix3d grot = 2.0 * g_sigma3 * rot3 * diag.asDiagonal();
        Eigen::Matrix3d dr[4];
        quat_rotmat_jacobian(q, dr);
        Eigen::Vector4d gq_unit;
        for (int k = 0; k < 4; ++k) gq_unit[k] = (grot.cwiseProduct(dr[k])).sum();
        double qnorm = set.rotations[si].norm();
        if (qnorm > 1e-12)
            grads.rotations[si] =
                (Eigen::Matrix4d::Identity() - q * q.transpose()) * gq_unit / qnorm;

        // Position: projection, center depth and the EWA Jacobian entries.
        const double fx = cam.fx(), fy = cam.fy();
        const double x = jac.x, y = jac.y, z = jac.z;
        Eigen::Vector3d gpcam = Eigen::Vector3d::Zero();
        gpcam.x() += sg.mean2d.x() * fx / z;
        gpcam.y() += sg.mean2d.y() * fy / z;
        gpcam.z() += sg.mean2d.x() * (-fx * x / (z * z)) + sg.mean2d.y() * (-fy * y / (z * z));
        gpcam.z() += sg.depth;
        gpcam.z() += gj(0, 0) * (-fx / (z * z)) + gj(1, 1) * (-fy / (z * z));
        gpcam.z() += gj(0, 2) * (fx * jac.tx / (z * z)) + gj(1, 2) * (fy * jac.ty / (z * z));
        double gtx = gj(0, 2) * (-fx / z);
        double gty = gj(1, 2) * (-fy / z);
        if (!jac.tx_clamped) {
            gpcam.x() += gtx / z;
            gpcam.z() += gtx * (-x / (z * z));
        }
        if (!jac.ty_clamped) {
            gpcam.y() += gty / z;
            gpcam.z() += gty * (-y / (z * z));
        }
        gpos += cam.rotation.transpose() * gpcam;
        grads.positions[si] = gpos;
    }
    return grads;
}

} // namespace dgs
