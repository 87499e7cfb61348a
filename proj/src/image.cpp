// SPDX-License-Identifier: Apache-2.0
#include "dgs/image.hpp"

#include "dgs/errors.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>

namespace dgs {

Image load_image(const std::string& path) {
    cv::Mat mat = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (mat.empty()) throw InputError("cannot read image: " + path);

    double scale;
    if (mat.depth() == CV_8U)
        scale = 1.0 / 255.0;
    else if (mat.depth() == CV_16U)
        scale = 1.0 / 65535.0;
    else
        throw UnsupportedFormatError("unsupported image bit depth in " + path);

    Image out(mat.cols, mat.rows, 3);
    for (int y = 0; y < mat.rows; ++y) {
        for (int x = 0; x < mat.cols; ++x) {
            double r, g, b;
            auto fetch = [&](int c) -> double {
                if (mat.depth() == CV_8U) return mat.ptr<uchar>(y)[x * mat.channels() + c] * scale;
                return mat.ptr<uint16_t>(y)[x * mat.channels() + c] * scale;
            };
            if (mat.channels() == 1) {
                r = g = b = fetch(0);
            } else {
                // OpenCV stores BGR(A).
                b = fetch(0);
                g = fetch(1);
                r = fetch(2);
            }
            out.at(x, y, 0) = r;
            out.at(x, y, 1) = g;
            out.at(x, y, 2) = b;
        }
    }
    return out;
}

void save_png(const Image& image, const std::string& path) {
    cv::Mat mat(image.height(), image.width(), CV_8UC3);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                double v = image.channels() == 1 ? image.at(x, y, 0) : image.at(x, y, c);
                v = std::clamp(v, 0.0, 1.0);
                // BGR order for OpenCV.
                mat.ptr<uchar>(y)[x * 3 + (2 - c)] = static_cast<uchar>(std::lround(v * 255.0));
            }
        }
    }
    if (!cv::imwrite(path, mat)) throw InputError("cannot write image: " + path);
}

} // namespace dgs
