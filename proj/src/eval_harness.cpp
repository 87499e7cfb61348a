// SPDX-License-Identifier: Apache-2.0
#include "dgs/eval_harness.hpp"

#include "dgs/errors.hpp"
#include "dgs/losses.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace dgs {

namespace {

double cross2(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

} // namespace

SplitSpec convex_hull_split(const std::vector<Camera>& cameras) {
    if (cameras.size() < 4)
        throw DegenerateError("convex hull split needs at least 4 cameras, got " +
                              std::to_string(cameras.size()));

    // Best-fit plane of the camera centers via principal components.
    const size_t n = cameras.size();
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& c : cameras) mean += c.center();
    mean /= static_cast<double>(n);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& c : cameras) {
        Eigen::Vector3d d = c.center() - mean;
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    // Eigenvalues ascend; the top two eigenvectors span the dominant plane. A
    // vanishing second eigenvalue means the centers are (numerically) on a
    // line, where a hull split is meaningless.
    if (eig.eigenvalues()(1) <= 1e-12 * eig.eigenvalues()(2))
        throw DegenerateError("camera centers are collinear; convex hull split is degenerate");
    Eigen::Vector3d axis_u = eig.eigenvectors().col(2);
    Eigen::Vector3d axis_v = eig.eigenvectors().col(1);

    struct Planar {
        Eigen::Vector2d p;
        int index; // into cameras
    };
    std::vector<Planar> pts(n);
    for (size_t i = 0; i < n; ++i) {
        Eigen::Vector3d d = cameras[i].center() - mean;
        pts[i] = {Eigen::Vector2d(axis_u.dot(d), axis_v.dot(d)), static_cast<int>(i)};
    }

    // Andrew's monotone chain; strict turns, so boundary-collinear points are
    // not hull vertices.
    std::sort(pts.begin(), pts.end(), [](const Planar& a, const Planar& b) {
        if (a.p.x() != b.p.x()) return a.p.x() < b.p.x();
        return a.p.y() < b.p.y();
    });
    auto build_chain = [&](auto begin, auto end) {
        std::vector<Planar> chain;
        for (auto it = begin; it != end; ++it) {
            while (chain.size() >= 2 &&
                   cross2(chain[chain.size() - 2].p, chain.back().p, it->p) <= 0)
                chain.pop_back();
            chain.push_back(*it);
        }
        return chain;
    };
    auto lower = build_chain(pts.begin(), pts.end());
    auto upper = build_chain(pts.rbegin(), pts.rend());

    std::vector<bool> on_hull(n, false);
    for (size_t i = 0; i + 1 < lower.size(); ++i) on_hull[lower[i].index] = true;
    for (size_t i = 0; i + 1 < upper.size(); ++i) on_hull[upper[i].index] = true;
    size_t hull_count = static_cast<size_t>(std::count(on_hull.begin(), on_hull.end(), true));
    if (hull_count < 3)
        throw DegenerateError("camera centers are collinear; convex hull split is degenerate");

    SplitSpec split;
    for (size_t i = 0; i < n; ++i)
        (on_hull[i] ? split.train_pool : split.test_set).push_back(cameras[i].id);
    return split;
}

uint64_t splitmix64_next(uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::vector<int> sample_kshot(const std::vector<int>& pool, int k, uint64_t seed) {
    if (k < 1) throw ContractError("sample_kshot: k must be >= 1");
    if (static_cast<size_t>(k) > pool.size())
        throw ContractError("sample_kshot: k exceeds pool size");
    std::vector<int> work = pool;
    uint64_t state = seed;
    const size_t n = work.size();
    for (int i = 0; i < k; ++i) {
        size_t j = i + splitmix64_next(state) % (n - i);
        std::swap(work[i], work[j]);
    }
    work.resize(k);
    return work;
}

double psnr(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw ContractError("psnr: image shape mismatch");
    if (a.size() == 0) throw ContractError("psnr: empty images");
    double mse = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a.data()[i] - b.data()[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b) {
    return 1.0 - 2.0 * dssim(a, b).value;
}

std::vector<AggregateRow> aggregate(const std::vector<EvalRecord>& records, int expected_seeds) {
    // (scene, k) -> seed -> per-view metric sums.
    struct SeedAccum {
        double psnr = 0, ssim = 0;
        int views = 0;
    };
    std::map<std::pair<std::string, int>, std::map<uint64_t, SeedAccum>> cells;
    for (const auto& r : records) {
        auto& acc = cells[{r.scene, r.k}][r.seed];
        acc.psnr += r.psnr;
        acc.ssim += r.ssim;
        ++acc.views;
    }

    std::vector<AggregateRow> rows;
    for (const auto& [key, seeds] : cells) {
        AggregateRow row;
        row.scene = key.first;
        row.k = key.second;
        row.seed_count = static_cast<int>(seeds.size());
        row.complete = expected_seeds <= 0 || row.seed_count >= expected_seeds;

        std::vector<double> psnr_means, ssim_means;
        for (const auto& [seed, acc] : seeds) {
            psnr_means.push_back(acc.psnr / acc.views);
            ssim_means.push_back(acc.ssim / acc.views);
        }
        auto mean_std = [](const std::vector<double>& v) {
            double m = 0;
            for (double x : v) m += x;
            m /= v.size();
            double s = 0;
            for (double x : v) s += (x - m) * (x - m);
            return std::pair<double, double>(m, v.size() > 1 ? std::sqrt(s / (v.size() - 1)) : 0.0);
        };
        std::tie(row.psnr_mean, row.psnr_std) = mean_std(psnr_means);
        std::tie(row.ssim_mean, row.ssim_std) = mean_std(ssim_means);
        rows.push_back(row);
    }
    return rows;
}

void write_results_csv(const std::vector<EvalRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open file for writing: " + path);
    out << "scene,k,seed,view,psnr,ssim\n";
    out << std::setprecision(10);
    for (const auto& r : records)
        out << r.scene << ',' << r.k << ',' << r.seed << ',' << r.view << ',' << r.psnr << ','
            << r.ssim << '\n';
}

std::string format_table(const std::vector<AggregateRow>& rows) {
    std::ostringstream out;
    out << std::left << std::setw(16) << "scene" << std::right << std::setw(4) << "k"
        << std::setw(7) << "seeds" << std::setw(12) << "psnr" << std::setw(10) << "+/-"
        << std::setw(10) << "ssim" << std::setw(10) << "+/-" << "\n";
    out << std::fixed << std::setprecision(3);
    for (const auto& r : rows) {
        out << std::left << std::setw(16) << r.scene << std::right << std::setw(4) << r.k
            << std::setw(7) << r.seed_count << std::setw(12) << r.psnr_mean << std::setw(10)
            << r.psnr_std << std::setw(10) << r.ssim_mean << std::setw(10) << r.ssim_std;
        if (!r.complete) out << "  (incomplete)";
        out << "\n";
    }
    return out.str();
}

SceneManifest parse_scene_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open scene manifest: " + path);
    SceneManifest manifest;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw CorruptFileError("scene manifest " + path + " line " +
                                   std::to_string(line_no) + ": expected key=value");
        std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            size_t a = s.find_first_not_of(" \t");
            size_t b = s.find_last_not_of(" \t");
            s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
        };
        trim(key);
        trim(value);
        if (key == "scene_id") manifest.scene_id = value;
        else if (key == "image_dir") manifest.image_dir = value;
        else if (key == "model_dir") manifest.model_dir = value;
        else if (key == "depth_dir") manifest.depth_dir = value;
        else
            throw CorruptFileError("scene manifest " + path + ": unknown key '" + key + "'");
    }
    if (manifest.scene_id.empty() || manifest.image_dir.empty() || manifest.model_dir.empty())
        throw CorruptFileError("scene manifest " + path +
                               " must set scene_id, image_dir and model_dir");
    return manifest;
}

} // namespace dgs
