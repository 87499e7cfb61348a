// SPDX-License-Identifier: Apache-2.0
#include "dgs/splats.hpp"

#include "dgs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace dgs {

namespace {

constexpr double kInitialOpacity = 0.1;
// Isotropic scale assigned to a lone point with no neighbors.
constexpr double kLoneScale = 0.1;

} // namespace

bool SplatSet::finite() const {
    for (size_t i = 0; i < size(); ++i) {
        if (!positions[i].allFinite() || !log_scales[i].allFinite() ||
            !rotations[i].allFinite() || !std::isfinite(opacity_logits[i]) ||
            !sh[i].allFinite())
            return false;
    }
    return true;
}

void SplatSet::append(const SplatSet& other) {
    positions.insert(positions.end(), other.positions.begin(), other.positions.end());
    log_scales.insert(log_scales.end(), other.log_scales.begin(), other.log_scales.end());
    rotations.insert(rotations.end(), other.rotations.begin(), other.rotations.end());
    opacity_logits.insert(opacity_logits.end(), other.opacity_logits.begin(),
                          other.opacity_logits.end());
    sh.insert(sh.end(), other.sh.begin(), other.sh.end());
}

void SplatSet::keep(const std::vector<bool>& mask) {
    size_t out = 0;
    for (size_t i = 0; i < size(); ++i) {
        if (!mask[i]) continue;
        positions[out] = positions[i];
        log_scales[out] = log_scales[i];
        rotations[out] = rotations[i];
        opacity_logits[out] = opacity_logits[i];
        sh[out] = sh[i];
        ++out;
    }
    positions.resize(out);
    log_scales.resize(out);
    rotations.resize(out);
    opacity_logits.resize(out);
    sh.resize(out);
}

void SplatSet::normalize_rotations() {
    for (auto& q : rotations) {
        double n = q.norm();
        if (n > 0) q /= n;
    }
}

Eigen::Matrix3d quat_to_rotation(const Eigen::Vector4d& q) {
    double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Matrix3d r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
        2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
        2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
    return r;
}

Eigen::Vector3d eval_sh(const Eigen::Matrix<double, 3, 4>& coeffs, const Eigen::Vector3d& dir) {
    Eigen::Vector4d basis(kSh0, -kSh1 * dir.y(), kSh1 * dir.z(), -kSh1 * dir.x());
    return coeffs * basis;
}

namespace {

// Mean distance to the (up to) 3 nearest neighbors, brute force. Desk-scale
// point counts keep this comfortably fast.
std::vector<double> mean_knn_distances(const std::vector<Eigen::Vector3d>& pts) {
    const size_t n = pts.size();
    std::vector<double> out(n, kLoneScale);
    if (n < 2) return out;
    std::vector<double> d2(n);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) d2[j] = (pts[i] - pts[j]).squaredNorm();
        d2[i] = std::numeric_limits<double>::infinity();
        size_t k = std::min<size_t>(3, n - 1);
        std::nth_element(d2.begin(), d2.begin() + (k - 1), d2.end());
        double sum = 0;
        for (size_t j = 0; j < k; ++j) sum += std::sqrt(d2[j]);
        out[i] = std::max(sum / k, 1e-7);
    }
    return out;
}

SplatSet make_splats(const std::vector<Eigen::Vector3d>& positions,
                     const std::vector<Eigen::Vector3d>& colors) {
    SplatSet set;
    auto knn = mean_knn_distances(positions);
    const double opacity_logit = logit(kInitialOpacity);
    for (size_t i = 0; i < positions.size(); ++i) {
        set.positions.push_back(positions[i]);
        set.log_scales.push_back(Eigen::Vector3d::Constant(std::log(knn[i])));
        set.rotations.push_back(Eigen::Vector4d(1, 0, 0, 0));
        set.opacity_logits.push_back(opacity_logit);
        Eigen::Matrix<double, 3, 4> coeffs = Eigen::Matrix<double, 3, 4>::Zero();
        coeffs.col(0) = colors[i] / kSh0;
        set.sh.push_back(coeffs);
    }
    return set;
}

} // namespace

SplatSet init_from_points(const std::vector<SfmPoint>& points) {
    if (points.empty()) throw DegenerateError("cannot initialize splats from an empty point list");
    std::vector<Eigen::Vector3d> positions, colors;
    positions.reserve(points.size());
    colors.reserve(points.size());
    for (const auto& pt : points) {
        positions.push_back(pt.position);
        if (pt.has_color)
            colors.emplace_back(pt.color[0] / 255.0, pt.color[1] / 255.0, pt.color[2] / 255.0);
        else
            colors.emplace_back(0.5, 0.5, 0.5);
    }
    return make_splats(positions, colors);
}

SplatSet init_from_depth(const std::vector<DepthPrior>& priors, const std::vector<Camera>& cameras,
                         const std::vector<Image>& images, int stride) {
    if (stride < 1) throw ContractError("init_from_depth: stride must be >= 1");
    if (priors.size() != cameras.size() || priors.size() != images.size())
        throw ContractError("init_from_depth: priors/cameras/images must align");
    std::vector<Eigen::Vector3d> positions, colors;
    for (size_t v = 0; v < priors.size(); ++v) {
        const auto& prior = priors[v];
        const auto& cam = cameras[v];
        const auto& img = images[v];
        Eigen::Matrix3d rot_t = cam.rotation.transpose();
        for (int y = 0; y < prior.aligned.height(); y += stride) {
            for (int x = 0; x < prior.aligned.width(); x += stride) {
                double d = prior.aligned.at(x, y);
                if (!(d > 0)) continue;
                double u = x + 0.5, vpix = y + 0.5;
                Eigen::Vector3d cam_pt((u - cam.cx()) / cam.fx() * d,
                                       (vpix - cam.cy()) / cam.fy() * d, d);
                positions.push_back(rot_t * (cam_pt - cam.translation));
                colors.emplace_back(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2));
            }
        }
    }
    if (positions.empty())
        throw DegenerateError("init_from_depth produced no points (all depths nonpositive?)");
    return make_splats(positions, colors);
}

// ---------------------------------------------------------------------------
// PLY
// ---------------------------------------------------------------------------

void export_ply(const SplatSet& set, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open file for writing: " + path);

    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\n";
    header << "element vertex " << set.size() << "\n";
    const char* names[] = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
    for (const char* n : names) header << "property float " << n << "\n";
    for (int i = 0; i < 9; ++i) header << "property float f_rest_" << i << "\n";
    header << "property float opacity\n";
    for (int i = 0; i < 3; ++i) header << "property float scale_" << i << "\n";
    for (int i = 0; i < 4; ++i) header << "property float rot_" << i << "\n";
    header << "end_header\n";
    out << header.str();

    std::vector<float> row(26);
    for (size_t i = 0; i < set.size(); ++i) {
        int k = 0;
        for (int c = 0; c < 3; ++c) row[k++] = static_cast<float>(set.positions[i][c]);
        for (int c = 0; c < 3; ++c) row[k++] = 0.0f; // normals, unused
        for (int c = 0; c < 3; ++c) row[k++] = static_cast<float>(set.sh[i](c, 0));
        // f_rest is channel-major: all degree-1 coeffs of R, then G, then B.
        for (int c = 0; c < 3; ++c)
            for (int j = 1; j < 4; ++j) row[k++] = static_cast<float>(set.sh[i](c, j));
        row[k++] = static_cast<float>(set.opacity_logits[i]);
        for (int c = 0; c < 3; ++c) row[k++] = static_cast<float>(set.log_scales[i][c]);
        for (int c = 0; c < 4; ++c) row[k++] = static_cast<float>(set.rotations[i][c]);
        out.write(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
    }
}

SplatSet import_ply(const std::string& path, std::string* warning) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line) || (line != "ply" && line != "ply\r"))
        throw CorruptFileError("not a PLY file: " + path);

    size_t vertex_count = 0;
    std::vector<std::string> properties;
    bool little_endian = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        if (word == "format") {
            std::string fmt;
            ss >> fmt;
            if (fmt != "binary_little_endian")
                throw UnsupportedFormatError("unsupported PLY format '" + fmt + "' in " + path);
            little_endian = true;
        } else if (word == "element") {
            std::string what;
            ss >> what >> vertex_count;
            if (what != "vertex")
                throw UnsupportedFormatError("unsupported PLY element '" + what + "' in " + path);
        } else if (word == "property") {
            std::string type, name;
            ss >> type >> name;
            if (type != "float")
                throw UnsupportedFormatError("unsupported PLY property type '" + type + "' in " +
                                             path);
            properties.push_back(name);
        } else if (word == "end_header") {
            break;
        } else if (word == "comment") {
            continue;
        }
    }
    if (!little_endian) throw CorruptFileError("missing PLY format line in " + path);

    auto find = [&](const std::string& name) -> int {
        auto it = std::find(properties.begin(), properties.end(), name);
        return it == properties.end() ? -1 : static_cast<int>(it - properties.begin());
    };
    auto require = [&](const std::string& name) -> int {
        int idx = find(name);
        if (idx < 0)
            throw UnsupportedFormatError("PLY file " + path + " missing required property " + name);
        return idx;
    };

    int ix = require("x"), iy = require("y"), iz = require("z");
    int is0 = require("scale_0"), is1 = require("scale_1"), is2 = require("scale_2");
    int ir0 = require("rot_0"), ir1 = require("rot_1"), ir2 = require("rot_2"),
        ir3 = require("rot_3");
    int iop = require("opacity");
    int idc0 = require("f_dc_0"), idc1 = require("f_dc_1"), idc2 = require("f_dc_2");

    int rest_count = 0;
    while (find("f_rest_" + std::to_string(rest_count)) >= 0) ++rest_count;
    if (rest_count % 3 != 0)
        throw UnsupportedFormatError("PLY file " + path + " has f_rest count not divisible by 3");
    int rest_per_channel = rest_count / 3;
    if (rest_per_channel > 3 && warning)
        *warning += "truncating spherical harmonics from " +
                    std::to_string(rest_per_channel) + " to 3 coefficients per channel; ";
    std::vector<int> rest_idx(rest_count);
    for (int i = 0; i < rest_count; ++i) rest_idx[i] = find("f_rest_" + std::to_string(i));

    SplatSet set;
    std::vector<float> row(properties.size());
    for (size_t v = 0; v < vertex_count; ++v) {
        in.read(reinterpret_cast<char*>(row.data()), row.size() * sizeof(float));
        if (!in) throw CorruptFileError("truncated PLY data in " + path);
        set.positions.emplace_back(row[ix], row[iy], row[iz]);
        set.log_scales.emplace_back(row[is0], row[is1], row[is2]);
        set.rotations.emplace_back(row[ir0], row[ir1], row[ir2], row[ir3]);
        set.opacity_logits.push_back(row[iop]);
        Eigen::Matrix<double, 3, 4> coeffs = Eigen::Matrix<double, 3, 4>::Zero();
        coeffs(0, 0) = row[idc0];
        coeffs(1, 0) = row[idc1];
        coeffs(2, 0) = row[idc2];
        for (int c = 0; c < 3; ++c)
            for (int j = 0; j < std::min(rest_per_channel, 3); ++j)
                coeffs(c, 1 + j) = row[rest_idx[c * rest_per_channel + j]];
        set.sh.push_back(coeffs);
    }
    return set;
}

} // namespace dgs
