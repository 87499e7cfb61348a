// SPDX-License-Identifier: Apache-2.0
#include "dgs/depth_prior.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <fstream>
#include <set>
#include <vector>

namespace dgs {

namespace {

struct FitSample {
    double raw = 0.0;
    double target = 0.0;
    double weight = 1.0;
};

std::vector<FitSample> gather_samples(const RawDepthMap& raw, const SparseDepthMap& sparse) {
    std::vector<FitSample> out;
    out.reserve(sparse.samples.size());
    for (const auto& s : sparse.samples) {
        if (s.pixel.x() < 0 || s.pixel.x() >= raw.values.width() || s.pixel.y() < 0 ||
            s.pixel.y() >= raw.values.height())
            throw ContractError("sparse sample outside raw depth map bounds");
        FitSample fs;
        fs.raw = raw.values.at(s.pixel.x(), s.pixel.y());
        fs.target = s.depth;
        fs.weight = s.weight;
        out.push_back(fs);
    }
    return out;
}

ScaleOffsetFit solve_fit(const std::vector<FitSample>& samples, FitWeighting weighting) {
    // 2x2 normal equations for min sum q_p (y_p - (s r_p + t))^2 where
    // scaled_target uses q=1, y=w*target and residual uses q=w, y=target.
    double sq = 0, sqr = 0, sqrr = 0, sqy = 0, sqry = 0;
    for (const auto& s : samples) {
        double q = weighting == FitWeighting::residual ? s.weight : 1.0;
        double y = weighting == FitWeighting::residual ? s.target : s.weight * s.target;
        sq += q;
        sqr += q * s.raw;
        sqrr += q * s.raw * s.raw;
        sqy += q * y;
        sqry += q * s.raw * y;
    }
    double det = sqrr * sq - sqr * sqr;
    if (det <= 0 || !std::isfinite(det))
        throw DegenerateError("scale/offset fit is degenerate (raw depth values not distinct)");

    ScaleOffsetFit fit;
    fit.scale = (sqry * sq - sqr * sqy) / det;
    fit.offset = (sqrr * sqy - sqr * sqry) / det;

    double obj = 0;
    for (const auto& s : samples) {
        double q = weighting == FitWeighting::residual ? s.weight : 1.0;
        double y = weighting == FitWeighting::residual ? s.target : s.weight * s.target;
        double r = y - (fit.scale * s.raw + fit.offset);
        obj += q * r * r;
    }
    fit.residual = sq > 0 ? std::sqrt(obj / sq) : 0.0;
    return fit;
}

} // namespace

ScaleOffsetFit fit_scale_offset(const RawDepthMap& raw, const SparseDepthMap& sparse,
                                FitWeighting weighting) {
    auto samples = gather_samples(raw, sparse);
    if (samples.size() < 2)
        throw DegenerateError("scale/offset fit needs at least 2 sparse samples, got " +
                              std::to_string(samples.size()));
    std::set<double> distinct;
    for (const auto& s : samples) distinct.insert(s.raw);
    if (distinct.size() < 2)
        throw DegenerateError("scale/offset fit needs >= 2 distinct raw depth values");
    return solve_fit(samples, weighting);
}

ScaleOffsetFit fit_scale_offset_with_fallback(const RawDepthMap& raw, const SparseDepthMap& sparse,
                                              FitWeighting weighting, bool& used_fallback) {
    used_fallback = false;
    auto samples = gather_samples(raw, sparse);
    if (samples.empty()) throw DegenerateError("no sparse samples available for depth alignment");
    try {
        return fit_scale_offset(raw, sparse, weighting);
    } catch (const DegenerateError&) {
        // Offset-only fallback: scale fixed at 1.
        used_fallback = true;
        double sq = 0, sum = 0;
        for (const auto& s : samples) {
            double q = weighting == FitWeighting::residual ? s.weight : 1.0;
            double y = weighting == FitWeighting::residual ? s.target : s.weight * s.target;
            sq += q;
            sum += q * (y - s.raw);
        }
        ScaleOffsetFit fit;
        fit.scale = 1.0;
        fit.offset = sum / sq;
        double obj = 0;
        for (const auto& s : samples) {
            double q = weighting == FitWeighting::residual ? s.weight : 1.0;
            double y = weighting == FitWeighting::residual ? s.target : s.weight * s.target;
            double r = y - (s.raw + fit.offset);
            obj += q * r * r;
        }
        fit.residual = std::sqrt(obj / sq);
        return fit;
    }
}

DepthPrior align_depth(const RawDepthMap& raw, const ScaleOffsetFit& fit) {
    DepthPrior prior;
    prior.view_id = raw.view_id;
    prior.scale = fit.scale;
    prior.offset = fit.offset;
    prior.fit_residual = fit.residual;
    prior.aligned = Image(raw.values.width(), raw.values.height(), 1);
    for (int y = 0; y < raw.values.height(); ++y)
        for (int x = 0; x < raw.values.width(); ++x)
            prior.aligned.at(x, y) = fit.scale * raw.values.at(x, y) + fit.offset;
    return prior;
}

// ---------------------------------------------------------------------------
// Canny
// ---------------------------------------------------------------------------

namespace {

std::vector<double> gaussian_kernel(double sigma, int& radius) {
    radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) v /= sum;
    return k;
}

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

} // namespace

EdgeMask canny_edges(const Image& image, const CannyParams& params) {
    const int w = image.width(), h = image.height();
    EdgeMask out;
    out.mask = Mask(w, h, false);

    // Grayscale (Rec. 601 weights).
    std::vector<double> gray(static_cast<size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            gray[y * w + x] = image.channels() >= 3
                                  ? 0.299 * image.at(x, y, 0) + 0.587 * image.at(x, y, 1) +
                                        0.114 * image.at(x, y, 2)
                                  : image.at(x, y, 0);

    // Separable Gaussian blur with replicated borders.
    int radius = 0;
    auto kernel = gaussian_kernel(params.sigma, radius);
    std::vector<double> tmp(gray.size()), blur(gray.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * gray[y * w + clampi(x + i, 0, w - 1)];
            tmp[y * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * tmp[clampi(y + i, 0, h - 1) * w + x];
            blur[y * w + x] = acc;
        }

    // Sobel gradients.
    std::vector<double> mag(gray.size(), 0.0), gx(gray.size()), gy(gray.size());
    double max_mag = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            auto v = [&](int dx, int dy) {
                return blur[clampi(y + dy, 0, h - 1) * w + clampi(x + dx, 0, w - 1)];
            };
            double dx = (v(1, -1) + 2 * v(1, 0) + v(1, 1)) - (v(-1, -1) + 2 * v(-1, 0) + v(-1, 1));
            double dy = (v(-1, 1) + 2 * v(0, 1) + v(1, 1)) - (v(-1, -1) + 2 * v(0, -1) + v(1, -1));
            gx[y * w + x] = dx;
            gy[y * w + x] = dy;
            mag[y * w + x] = std::hypot(dx, dy);
            max_mag = std::max(max_mag, mag[y * w + x]);
        }
    }
    if (max_mag <= 0) return out; // constant image

    const double low = params.low_fraction * max_mag;
    const double high = params.high_fraction * max_mag;

    // Non-maximum suppression with 4-way direction quantization.
    // 0 = strong (>= high after NMS), 1 = weak (>= low), 2 = suppressed.
    std::vector<unsigned char> state(gray.size(), 2);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double m = mag[y * w + x];
            if (!(m >= low)) continue; // also rejects low = inf
            double angle = std::atan2(gy[y * w + x], gx[y * w + x]) * 180.0 / M_PI;
            if (angle < 0) angle += 180.0;
            int dx1, dy1;
            if (angle < 22.5 || angle >= 157.5) {
                dx1 = 1, dy1 = 0;
            } else if (angle < 67.5) {
                dx1 = 1, dy1 = 1;
            } else if (angle < 112.5) {
                dx1 = 0, dy1 = 1;
            } else {
                dx1 = -1, dy1 = 1;
            }
            auto neighbor = [&](int dx, int dy) -> double {
                int nx = x + dx, ny = y + dy;
                if (nx < 0 || nx >= w || ny < 0 || ny >= h) return 0.0;
                return mag[ny * w + nx];
            };
            if (m >= neighbor(dx1, dy1) && m >= neighbor(-dx1, -dy1))
                state[y * w + x] = (m >= high) ? 0 : 1;
        }
    }

    // Hysteresis: weak pixels survive only when 8-connected to a strong one.
    std::deque<std::pair<int, int>> frontier;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (state[y * w + x] == 0) {
                out.mask.set(x, y, true);
                frontier.emplace_back(x, y);
            }
    while (!frontier.empty()) {
        auto [x, y] = frontier.front();
        frontier.pop_front();
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                int nx = x + dx, ny = y + dy;
                if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                if (state[ny * w + nx] == 1 && !out.mask.at(nx, ny)) {
                    out.mask.set(nx, ny, true);
                    frontier.emplace_back(nx, ny);
                }
            }
    }
    return out;
}

// ---------------------------------------------------------------------------
// PFM
// ---------------------------------------------------------------------------

Image read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path);

    std::string magic;
    in >> magic;
    if (magic == "PF")
        throw UnsupportedFormatError("color PFM ('PF') not supported, expected grayscale 'Pf': " +
                                     path);
    if (magic != "Pf") throw CorruptFileError("malformed PFM header magic in " + path);

    int width = 0, height = 0;
    double scale = 0;
    in >> width >> height >> scale;
    if (!in || width <= 0 || height <= 0 || scale == 0)
        throw CorruptFileError("malformed PFM header in " + path);
    in.get(); // single whitespace separating header and data

    const bool file_little_endian = scale < 0;
    const bool host_little_endian = std::endian::native == std::endian::little;

    std::vector<float> row(width);
    Image out(width, height, 1);
    // PFM stores rows bottom-to-top.
    for (int y = height - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()), width * sizeof(float));
        if (!in) throw CorruptFileError("truncated PFM data in " + path);
        for (int x = 0; x < width; ++x) {
            float v = row[x];
            if (file_little_endian != host_little_endian) {
                uint32_t bits;
                std::memcpy(&bits, &v, 4);
                bits = __builtin_bswap32(bits);
                std::memcpy(&v, &bits, 4);
            }
            out.at(x, y) = v;
        }
    }
    return out;
}

void write_pfm(const Image& values, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open file for writing: " + path);
    out << "Pf\n" << values.width() << " " << values.height() << "\n-1.0\n";
    std::vector<float> row(values.width());
    for (int y = values.height() - 1; y >= 0; --y) {
        for (int x = 0; x < values.width(); ++x) row[x] = static_cast<float>(values.at(x, y));
        out.write(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
    }
}

void write_prior(const DepthPrior& prior, const std::string& pfm_path) {
    write_pfm(prior.aligned, pfm_path);
    nlohmann::json meta;
    meta["view_id"] = prior.view_id;
    meta["scale"] = prior.scale;
    meta["offset"] = prior.offset;
    meta["fit_residual"] = prior.fit_residual;
    std::ofstream out(pfm_path + ".json");
    if (!out) throw InputError("cannot open file for writing: " + pfm_path + ".json");
    out << meta.dump(2) << "\n";
}

DepthPrior read_prior(const std::string& pfm_path) {
    DepthPrior prior;
    prior.aligned = read_pfm(pfm_path);
    std::ifstream in(pfm_path + ".json");
    if (!in) throw InputError("missing prior sidecar: " + pfm_path + ".json");
    nlohmann::json meta;
    try {
        in >> meta;
        prior.view_id = meta.at("view_id").get<int>();
        prior.scale = meta.at("scale").get<double>();
        prior.offset = meta.at("offset").get<double>();
        prior.fit_residual = meta.at("fit_residual").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError("malformed prior sidecar " + pfm_path + ".json: " + e.what());
    }
    return prior;
}

} // namespace dgs
