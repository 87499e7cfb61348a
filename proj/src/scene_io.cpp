// SPDX-License-Identifier: Apache-2.0
#include "dgs/scene_io.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace dgs {

namespace fs = std::filesystem;

namespace {

constexpr uint64_t kInvalidPoint3dId = std::numeric_limits<uint64_t>::max();

// COLMAP model ids for the supported pinhole models.
constexpr int32_t kSimplePinholeId = 0;
constexpr int32_t kPinholeId = 1;

struct Point2d {
    double x = 0.0;
    double y = 0.0;
    uint64_t point3d_id = kInvalidPoint3dId;
};

struct RawCamera {
    uint32_t id = 0;
    int32_t model_id = 0;
    uint64_t width = 0;
    uint64_t height = 0;
    std::vector<double> params;
};

struct RawImage {
    uint32_t id = 0;
    double q[4] = {1, 0, 0, 0}; // qw qx qy qz
    double t[3] = {0, 0, 0};
    uint32_t camera_id = 0;
    std::string name;
    std::vector<Point2d> points2d;
};

struct RawPoint3d {
    uint64_t id = 0;
    double xyz[3] = {0, 0, 0};
    unsigned char rgb[3] = {0, 0, 0};
    double error = 0.0;
    std::vector<std::pair<uint32_t, uint32_t>> track; // (image_id, point2d_idx)
};

Eigen::Matrix3d quat_to_rotmat(const double q[4]) {
    double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    double w = q[0] / norm, x = q[1] / norm, y = q[2] / norm, z = q[3] / norm;
    Eigen::Matrix3d r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
        2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
        2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
    return r;
}

void rotmat_to_quat(const Eigen::Matrix3d& r, double q[4]) {
    double trace = r.trace();
    if (trace > 0) {
        double s = std::sqrt(trace + 1.0) * 2;
        q[0] = 0.25 * s;
        q[1] = (r(2, 1) - r(1, 2)) / s;
        q[2] = (r(0, 2) - r(2, 0)) / s;
        q[3] = (r(1, 0) - r(0, 1)) / s;
    } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
        double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2;
        q[0] = (r(2, 1) - r(1, 2)) / s;
        q[1] = 0.25 * s;
        q[2] = (r(0, 1) + r(1, 0)) / s;
        q[3] = (r(0, 2) + r(2, 0)) / s;
    } else if (r(1, 1) > r(2, 2)) {
        double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2;
        q[0] = (r(0, 2) - r(2, 0)) / s;
        q[1] = (r(0, 1) + r(1, 0)) / s;
        q[2] = 0.25 * s;
        q[3] = (r(1, 2) + r(2, 1)) / s;
    } else {
        double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2;
        q[0] = (r(1, 0) - r(0, 1)) / s;
        q[1] = (r(0, 2) + r(2, 0)) / s;
        q[2] = (r(1, 2) + r(2, 1)) / s;
        q[3] = 0.25 * s;
    }
}

// ---------------------------------------------------------------------------
// Binary reading with byte-offset tracking for corrupt-file diagnostics.
// ---------------------------------------------------------------------------

class BinaryReader {
  public:
    BinaryReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw InputError("cannot open file: " + path);
    }

    template <typename T> T read() {
        T value;
        in_.read(reinterpret_cast<char*>(&value), sizeof(T));
        if (!in_)
            throw CorruptFileError("truncated binary record in " + path_ + " at byte offset " +
                                   std::to_string(offset_));
        offset_ += sizeof(T);
        return value;
    }

    std::string read_cstring() {
        std::string s;
        char c;
        while (true) {
            in_.read(&c, 1);
            if (!in_)
                throw CorruptFileError("truncated binary record in " + path_ + " at byte offset " +
                                       std::to_string(offset_));
            ++offset_;
            if (c == '\0') break;
            s.push_back(c);
        }
        return s;
    }

  private:
    std::string path_;
    std::ifstream in_;
    uint64_t offset_ = 0;
};

class BinaryWriter {
  public:
    BinaryWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw InputError("cannot open file for writing: " + path);
    }

    template <typename T> void write(T value) {
        out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
    }

    void write_cstring(const std::string& s) { out_.write(s.c_str(), s.size() + 1); }

  private:
    std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Text parsing helpers.
// ---------------------------------------------------------------------------

std::vector<std::string> read_content_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        lines.push_back(line);
    }
    return lines;
}

std::vector<std::string> tokenize(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
    return tokens;
}

double parse_double(const std::string& s, const std::string& path) {
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw CorruptFileError("malformed number '" + s + "' in " + path);
    }
}

long long parse_int(const std::string& s, const std::string& path) {
    try {
        return std::stoll(s);
    } catch (const std::exception&) {
        throw CorruptFileError("malformed integer '" + s + "' in " + path);
    }
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Resolves <stem>.bin / <stem>.txt, preferring binary as COLMAP does.
std::string resolve_model_file(const std::string& dir, const std::string& stem, bool& binary) {
    std::string bin = dir + "/" + stem + ".bin";
    std::string txt = dir + "/" + stem + ".txt";
    if (fs::exists(bin)) {
        binary = true;
        return bin;
    }
    if (fs::exists(txt)) {
        binary = false;
        return txt;
    }
    throw InputError("missing COLMAP model file: " + stem + ".bin or " + stem + ".txt in " + dir);
}

// ---------------------------------------------------------------------------
// cameras
// ---------------------------------------------------------------------------

int params_for_model(int32_t model_id, const std::string& where) {
    if (model_id == kSimplePinholeId) return 3;
    if (model_id == kPinholeId) return 4;
    throw UnsupportedFormatError("unsupported camera model id " + std::to_string(model_id) +
                                 " in " + where + " (only SIMPLE_PINHOLE and PINHOLE)");
}

std::map<uint32_t, RawCamera> read_cameras(const std::string& dir) {
    bool binary = false;
    std::string path = resolve_model_file(dir, "cameras", binary);
    std::map<uint32_t, RawCamera> cameras;
    if (binary) {
        BinaryReader in(path);
        uint64_t count = in.read<uint64_t>();
        for (uint64_t i = 0; i < count; ++i) {
            RawCamera cam;
            cam.id = in.read<uint32_t>();
            cam.model_id = in.read<int32_t>();
            cam.width = in.read<uint64_t>();
            cam.height = in.read<uint64_t>();
            int nparams = params_for_model(cam.model_id, path);
            for (int p = 0; p < nparams; ++p) cam.params.push_back(in.read<double>());
            cameras[cam.id] = cam;
        }
    } else {
        for (const auto& line : read_content_lines(path)) {
            auto tok = tokenize(line);
            if (tok.size() < 4) throw CorruptFileError("short camera line in " + path);
            RawCamera cam;
            cam.id = static_cast<uint32_t>(parse_int(tok[0], path));
            if (tok[1] == "SIMPLE_PINHOLE")
                cam.model_id = kSimplePinholeId;
            else if (tok[1] == "PINHOLE")
                cam.model_id = kPinholeId;
            else
                throw UnsupportedFormatError("unsupported camera model " + tok[1] + " in " + path +
                                             " (only SIMPLE_PINHOLE and PINHOLE)");
            cam.width = static_cast<uint64_t>(parse_int(tok[2], path));
            cam.height = static_cast<uint64_t>(parse_int(tok[3], path));
            int nparams = params_for_model(cam.model_id, path);
            if (static_cast<int>(tok.size()) != 4 + nparams)
                throw CorruptFileError("wrong parameter count for camera line in " + path);
            for (int p = 0; p < nparams; ++p) cam.params.push_back(parse_double(tok[4 + p], path));
            cameras[cam.id] = cam;
        }
    }
    return cameras;
}

// ---------------------------------------------------------------------------
// images
// ---------------------------------------------------------------------------

std::vector<RawImage> read_images(const std::string& dir) {
    bool binary = false;
    std::string path = resolve_model_file(dir, "images", binary);
    std::vector<RawImage> images;
    if (binary) {
        BinaryReader in(path);
        uint64_t count = in.read<uint64_t>();
        for (uint64_t i = 0; i < count; ++i) {
            RawImage img;
            img.id = in.read<uint32_t>();
            for (int k = 0; k < 4; ++k) img.q[k] = in.read<double>();
            for (int k = 0; k < 3; ++k) img.t[k] = in.read<double>();
            img.camera_id = in.read<uint32_t>();
            img.name = in.read_cstring();
            uint64_t npts = in.read<uint64_t>();
            img.points2d.reserve(npts);
            for (uint64_t p = 0; p < npts; ++p) {
                Point2d pt;
                pt.x = in.read<double>();
                pt.y = in.read<double>();
                pt.point3d_id = in.read<uint64_t>();
                img.points2d.push_back(pt);
            }
            images.push_back(std::move(img));
        }
    } else {
        auto lines = read_content_lines(path);
        // images.txt alternates header and observation lines, but an image with
        // no observations may have an empty (skipped) second line. Detect the
        // header by its fixed 10-token prefix.
        for (size_t i = 0; i < lines.size(); ++i) {
            auto tok = tokenize(lines[i]);
            if (tok.size() < 10) throw CorruptFileError("short image header line in " + path);
            RawImage img;
            img.id = static_cast<uint32_t>(parse_int(tok[0], path));
            for (int k = 0; k < 4; ++k) img.q[k] = parse_double(tok[1 + k], path);
            for (int k = 0; k < 3; ++k) img.t[k] = parse_double(tok[5 + k], path);
            img.camera_id = static_cast<uint32_t>(parse_int(tok[8], path));
            img.name = tok[9];
            if (i + 1 < lines.size()) {
                auto obs = tokenize(lines[i + 1]);
                // Observation lines have a multiple-of-3 token count; a line
                // that parses as the next header is left in place.
                if (obs.size() % 3 == 0 && !obs.empty()) {
                    for (size_t p = 0; p + 2 < obs.size(); p += 3) {
                        Point2d pt;
                        pt.x = parse_double(obs[p], path);
                        pt.y = parse_double(obs[p + 1], path);
                        long long id3 = parse_int(obs[p + 2], path);
                        pt.point3d_id = id3 < 0 ? kInvalidPoint3dId : static_cast<uint64_t>(id3);
                        img.points2d.push_back(pt);
                    }
                    ++i;
                }
            }
            images.push_back(std::move(img));
        }
    }
    return images;
}

// ---------------------------------------------------------------------------
// points3D
// ---------------------------------------------------------------------------

std::vector<RawPoint3d> read_points3d(const std::string& dir) {
    bool binary = false;
    std::string path = resolve_model_file(dir, "points3D", binary);
    std::vector<RawPoint3d> points;
    if (binary) {
        BinaryReader in(path);
        uint64_t count = in.read<uint64_t>();
        for (uint64_t i = 0; i < count; ++i) {
            RawPoint3d pt;
            pt.id = in.read<uint64_t>();
            for (int k = 0; k < 3; ++k) pt.xyz[k] = in.read<double>();
            for (int k = 0; k < 3; ++k) pt.rgb[k] = in.read<unsigned char>();
            pt.error = in.read<double>();
            uint64_t track_len = in.read<uint64_t>();
            pt.track.reserve(track_len);
            for (uint64_t t = 0; t < track_len; ++t) {
                uint32_t image_id = in.read<uint32_t>();
                uint32_t p2d = in.read<uint32_t>();
                pt.track.emplace_back(image_id, p2d);
            }
            points.push_back(std::move(pt));
        }
    } else {
        for (const auto& line : read_content_lines(path)) {
            auto tok = tokenize(line);
            if (tok.size() < 8 || (tok.size() - 8) % 2 != 0)
                throw CorruptFileError("malformed point3D line in " + path);
            RawPoint3d pt;
            pt.id = static_cast<uint64_t>(parse_int(tok[0], path));
            for (int k = 0; k < 3; ++k) pt.xyz[k] = parse_double(tok[1 + k], path);
            for (int k = 0; k < 3; ++k)
                pt.rgb[k] = static_cast<unsigned char>(parse_int(tok[4 + k], path));
            pt.error = parse_double(tok[7], path);
            for (size_t t = 8; t + 1 < tok.size(); t += 2)
                pt.track.emplace_back(static_cast<uint32_t>(parse_int(tok[t], path)),
                                      static_cast<uint32_t>(parse_int(tok[t + 1], path)));
            points.push_back(std::move(pt));
        }
    }
    return points;
}

} // namespace

SfmModel parse_colmap(const std::string& model_dir) {
    auto raw_cameras = read_cameras(model_dir);
    auto raw_images = read_images(model_dir);
    auto raw_points = read_points3d(model_dir);

    SfmModel model;
    std::map<uint32_t, const RawImage*> image_by_id;
    for (const auto& img : raw_images) {
        auto cam_it = raw_cameras.find(img.camera_id);
        if (cam_it == raw_cameras.end())
            throw CorruptFileError("image " + std::to_string(img.id) +
                                   " references nonexistent camera id " +
                                   std::to_string(img.camera_id));
        const RawCamera& raw = cam_it->second;
        Camera cam;
        cam.id = static_cast<int>(img.id);
        cam.rotation = quat_to_rotmat(img.q);
        cam.translation = Eigen::Vector3d(img.t[0], img.t[1], img.t[2]);
        cam.width = static_cast<int>(raw.width);
        cam.height = static_cast<int>(raw.height);
        Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
        if (raw.model_id == kSimplePinholeId) {
            k(0, 0) = k(1, 1) = raw.params[0];
            k(0, 2) = raw.params[1];
            k(1, 2) = raw.params[2];
        } else {
            k(0, 0) = raw.params[0];
            k(1, 1) = raw.params[1];
            k(0, 2) = raw.params[2];
            k(1, 2) = raw.params[3];
        }
        cam.intrinsics = k;
        model.cameras.push_back(cam);
        model.image_names.emplace_back(cam.id, img.name);
        image_by_id[img.id] = &img;
    }

    for (const auto& raw : raw_points) {
        SfmPoint pt;
        pt.id = static_cast<long long>(raw.id);
        pt.position = Eigen::Vector3d(raw.xyz[0], raw.xyz[1], raw.xyz[2]);
        pt.reprojection_error = raw.error;
        pt.color << raw.rgb[0], raw.rgb[1], raw.rgb[2];
        pt.has_color = true;
        for (const auto& [image_id, p2d_idx] : raw.track) {
            auto it = image_by_id.find(image_id);
            if (it == image_by_id.end())
                throw CorruptFileError("point " + std::to_string(raw.id) +
                                       " track references nonexistent image id " +
                                       std::to_string(image_id));
            const RawImage& img = *it->second;
            if (p2d_idx >= img.points2d.size())
                throw CorruptFileError("point " + std::to_string(raw.id) +
                                       " track references out-of-range observation " +
                                       std::to_string(p2d_idx) + " in image " +
                                       std::to_string(image_id));
            TrackEntry entry;
            entry.camera_id = static_cast<int>(image_id);
            entry.pixel = Eigen::Vector2d(img.points2d[p2d_idx].x, img.points2d[p2d_idx].y);
            pt.track.push_back(entry);
        }
        model.points.push_back(std::move(pt));
    }
    return model;
}

namespace {

// Reassembles per-image 2D observation lists from the point tracks. Returns
// images keyed by camera id plus the point2d index of every (point, track
// entry) pair.
struct Reassembled {
    std::map<int, std::vector<Point2d>> observations;
    std::vector<std::vector<uint32_t>> track_indices; // parallel to model.points
};

Reassembled reassemble_observations(const SfmModel& model) {
    Reassembled out;
    for (const auto& cam : model.cameras) out.observations[cam.id] = {};
    out.track_indices.resize(model.points.size());
    for (size_t pi = 0; pi < model.points.size(); ++pi) {
        const auto& pt = model.points[pi];
        for (const auto& entry : pt.track) {
            auto& obs = out.observations[entry.camera_id];
            Point2d p2d;
            p2d.x = entry.pixel.x();
            p2d.y = entry.pixel.y();
            p2d.point3d_id = static_cast<uint64_t>(pt.id);
            out.track_indices[pi].push_back(static_cast<uint32_t>(obs.size()));
            obs.push_back(p2d);
        }
    }
    return out;
}

} // namespace

void write_colmap_text(const SfmModel& model, const std::string& model_dir) {
    fs::create_directories(model_dir);
    auto re = reassemble_observations(model);

    {
        std::ofstream out(model_dir + "/cameras.txt");
        out << "# Camera list: CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
        for (const auto& cam : model.cameras) {
            out << cam.id << " PINHOLE " << cam.width << " " << cam.height << " "
                << format_double(cam.fx()) << " " << format_double(cam.fy()) << " "
                << format_double(cam.cx()) << " " << format_double(cam.cy()) << "\n";
        }
    }
    {
        std::ofstream out(model_dir + "/images.txt");
        out << "# Image list: IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n";
        out << "#   POINTS2D[] as (X, Y, POINT3D_ID)\n";
        for (const auto& cam : model.cameras) {
            double q[4];
            rotmat_to_quat(cam.rotation, q);
            std::string name = model.image_name(cam.id);
            if (name.empty()) name = "image_" + std::to_string(cam.id) + ".png";
            out << cam.id << " " << format_double(q[0]) << " " << format_double(q[1]) << " "
                << format_double(q[2]) << " " << format_double(q[3]) << " "
                << format_double(cam.translation.x()) << " " << format_double(cam.translation.y())
                << " " << format_double(cam.translation.z()) << " " << cam.id << " " << name
                << "\n";
            const auto& obs = re.observations[cam.id];
            for (size_t i = 0; i < obs.size(); ++i) {
                if (i) out << " ";
                out << format_double(obs[i].x) << " " << format_double(obs[i].y) << " "
                    << static_cast<long long>(obs[i].point3d_id);
            }
            out << "\n";
        }
    }
    {
        std::ofstream out(model_dir + "/points3D.txt");
        out << "# 3D point list: POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as "
               "(IMAGE_ID, POINT2D_IDX)\n";
        for (size_t pi = 0; pi < model.points.size(); ++pi) {
            const auto& pt = model.points[pi];
            out << pt.id << " " << format_double(pt.position.x()) << " "
                << format_double(pt.position.y()) << " " << format_double(pt.position.z()) << " "
                << static_cast<int>(pt.color[0]) << " " << static_cast<int>(pt.color[1]) << " "
                << static_cast<int>(pt.color[2]) << " " << format_double(pt.reprojection_error);
            for (size_t t = 0; t < pt.track.size(); ++t)
                out << " " << pt.track[t].camera_id << " " << re.track_indices[pi][t];
            out << "\n";
        }
    }
}

void write_colmap_binary(const SfmModel& model, const std::string& model_dir) {
    fs::create_directories(model_dir);
    auto re = reassemble_observations(model);

    {
        BinaryWriter out(model_dir + "/cameras.bin");
        out.write<uint64_t>(model.cameras.size());
        for (const auto& cam : model.cameras) {
            out.write<uint32_t>(static_cast<uint32_t>(cam.id));
            out.write<int32_t>(kPinholeId);
            out.write<uint64_t>(static_cast<uint64_t>(cam.width));
            out.write<uint64_t>(static_cast<uint64_t>(cam.height));
            out.write<double>(cam.fx());
            out.write<double>(cam.fy());
            out.write<double>(cam.cx());
            out.write<double>(cam.cy());
        }
    }
    {
        BinaryWriter out(model_dir + "/images.bin");
        out.write<uint64_t>(model.cameras.size());
        for (const auto& cam : model.cameras) {
            double q[4];
            rotmat_to_quat(cam.rotation, q);
            out.write<uint32_t>(static_cast<uint32_t>(cam.id));
            for (int k = 0; k < 4; ++k) out.write<double>(q[k]);
            for (int k = 0; k < 3; ++k) out.write<double>(cam.translation[k]);
            out.write<uint32_t>(static_cast<uint32_t>(cam.id));
            std::string name = model.image_name(cam.id);
            if (name.empty()) name = "image_" + std::to_string(cam.id) + ".png";
            out.write_cstring(name);
            const auto& obs = re.observations.at(cam.id);
            out.write<uint64_t>(obs.size());
            for (const auto& p2d : obs) {
                out.write<double>(p2d.x);
                out.write<double>(p2d.y);
                out.write<uint64_t>(p2d.point3d_id);
            }
        }
    }
    {
        BinaryWriter out(model_dir + "/points3D.bin");
        out.write<uint64_t>(model.points.size());
        for (size_t pi = 0; pi < model.points.size(); ++pi) {
            const auto& pt = model.points[pi];
            out.write<uint64_t>(static_cast<uint64_t>(pt.id));
            for (int k = 0; k < 3; ++k) out.write<double>(pt.position[k]);
            for (int k = 0; k < 3; ++k) out.write<unsigned char>(pt.color[k]);
            out.write<double>(pt.reprojection_error);
            out.write<uint64_t>(pt.track.size());
            for (size_t t = 0; t < pt.track.size(); ++t) {
                out.write<uint32_t>(static_cast<uint32_t>(pt.track[t].camera_id));
                out.write<uint32_t>(re.track_indices[pi][t]);
            }
        }
    }
}

std::vector<SfmPoint> filter_points(const std::vector<SfmPoint>& points,
                                    const std::set<int>& selected_cameras, int min_views) {
    if (min_views < 1) throw ContractError("filter_points: min_views must be >= 1");
    std::vector<SfmPoint> kept;
    for (const auto& pt : points) {
        int hits = 0;
        for (const auto& entry : pt.track)
            if (selected_cameras.count(entry.camera_id)) ++hits;
        if (hits >= min_views) kept.push_back(pt);
    }
    return kept;
}

SparseDepthMap project_sparse_depth(const std::vector<SfmPoint>& points, const Camera& camera) {
    SparseDepthMap map;
    map.view_id = camera.id;
    for (const auto& pt : points) {
        for (const auto& entry : pt.track) {
            if (entry.camera_id != camera.id) continue;
            double depth = camera.to_camera(pt.position).z();
            if (depth <= 0) continue;
            // The observed feature location is the pixel the reprojection error
            // is defined against, so it is used directly rather than
            // re-projecting the point.
            int px = static_cast<int>(std::floor(entry.pixel.x()));
            int py = static_cast<int>(std::floor(entry.pixel.y()));
            if (px < 0 || px >= camera.width || py < 0 || py >= camera.height) continue;
            SparseDepthSample sample;
            sample.pixel = Eigen::Vector2i(px, py);
            sample.depth = depth;
            sample.weight = pt.reprojection_error; // raw error; normalized below
            map.samples.push_back(sample);
        }
    }
    // Reciprocal reprojection error, normalized so the best point has weight 1.
    // A zero-error point takes weight 1 directly; the rest are divided by the
    // maximum reciprocal among nonzero errors.
    double max_recip = 0.0;
    for (const auto& s : map.samples)
        if (s.weight > 0) max_recip = std::max(max_recip, 1.0 / s.weight);
    for (auto& s : map.samples) {
        if (s.weight <= 0)
            s.weight = 1.0;
        else
            s.weight = (1.0 / s.weight) / max_recip;
    }
    return map;
}

} // namespace dgs
