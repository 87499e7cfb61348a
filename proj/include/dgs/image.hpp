// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cassert>
#include <cstddef>
#include <string>
#include <vector>

namespace dgs {

// Dense row-major image with interleaved channels. Values are doubles so the
// loss/gradient machinery stays in one precision end to end; file I/O converts
// at the boundary.
class Image {
  public:
    Image() = default;
    Image(int width, int height, int channels, double fill = 0.0)
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<size_t>(width) * height * channels, fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    bool empty() const { return data_.empty(); }
    size_t size() const { return data_.size(); }

    double& at(int x, int y, int c = 0) {
        assert(x >= 0 && x < width_ && y >= 0 && y < height_ && c >= 0 && c < channels_);
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }
    double at(int x, int y, int c = 0) const {
        assert(x >= 0 && x < width_ && y >= 0 && y < height_ && c >= 0 && c < channels_);
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Image& other) const {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }

  private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

// Boolean mask with image dimensions (Canny edges, coverage masks).
class Mask {
  public:
    Mask() = default;
    Mask(int width, int height, bool fill = false)
        : width_(width), height_(height), data_(static_cast<size_t>(width) * height, fill ? 1 : 0) {}

    int width() const { return width_; }
    int height() const { return height_; }

    bool at(int x, int y) const { return data_[static_cast<size_t>(y) * width_ + x] != 0; }
    void set(int x, int y, bool v) { data_[static_cast<size_t>(y) * width_ + x] = v ? 1 : 0; }

  private:
    int width_ = 0;
    int height_ = 0;
    std::vector<unsigned char> data_;
};

// Reads an 8-bit or 16-bit PNG/JPEG into an RGB image scaled to [0,1].
Image load_image(const std::string& path);

// Writes an RGB image in [0,1] as an 8-bit PNG (values clamped).
void save_png(const Image& image, const std::string& path);

} // namespace dgs
