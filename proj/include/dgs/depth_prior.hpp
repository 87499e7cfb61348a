// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dgs/errors.hpp"
#include "dgs/image.hpp"
#include "dgs/scene_io.hpp"

#include <string>

namespace dgs {

// Output of an external monocular depth estimator, in relative units.
struct RawDepthMap {
    int view_id = 0;
    Image values; // H x W, single channel, finite, nonnegative
    std::string source_tag;
};

// A raw depth map made metric by a fitted scale/offset against sparse SfM depth.
struct DepthPrior {
    int view_id = 0;
    double scale = 1.0;
    double offset = 0.0;
    double fit_residual = 0.0; // weighted RMS at the optimum
    Image aligned;             // scale * raw + offset, world units
};

struct EdgeMask {
    int view_id = 0;
    Mask mask;
};

// How the sparse reliability weights enter the scale/offset objective.
enum class FitWeighting {
    // Minimize sum_p (w(p) * D_sparse(p) - (s * raw(p) + t))^2: the weight
    // scales the target itself.
    scaled_target,
    // Minimize sum_p w(p) * (D_sparse(p) - (s * raw(p) + t))^2: conventional
    // weighted least squares.
    residual,
};

struct ScaleOffsetFit {
    double scale = 0.0;
    double offset = 0.0;
    double residual = 0.0;
};

// Closed-form minimizer of the selected objective over the sparse samples.
// Requires >= 2 samples with >= 2 distinct raw-depth values at the sampled
// pixels; otherwise throws DegenerateError.
ScaleOffsetFit fit_scale_offset(const RawDepthMap& raw, const SparseDepthMap& sparse,
                                FitWeighting weighting = FitWeighting::scaled_target);

// fit_scale_offset with the documented degenerate fallbacks: one sample fits
// the offset only (scale fixed at 1); zero samples is an error.
ScaleOffsetFit fit_scale_offset_with_fallback(const RawDepthMap& raw, const SparseDepthMap& sparse,
                                              FitWeighting weighting, bool& used_fallback);

// Applies a fit to a raw map, producing the aligned prior.
DepthPrior align_depth(const RawDepthMap& raw, const ScaleOffsetFit& fit);

struct CannyParams {
    double sigma = 1.4;
    // Thresholds as fractions of the maximum gradient magnitude.
    double low_fraction = 0.1;
    double high_fraction = 0.2;
};

// Standard Canny pipeline (Gaussian blur, Sobel gradients, non-maximum
// suppression, hysteresis) on the grayscale conversion of an RGB image.
EdgeMask canny_edges(const Image& image, const CannyParams& params = {});

// PFM grayscale ("Pf") read/write. Write emits little-endian (scale -1);
// read accepts either endianness per the PFM scale sign.
Image read_pfm(const std::string& path);
void write_pfm(const Image& values, const std::string& path);

// Prior persistence: PFM for the aligned depth plus a JSON sidecar
// (<path>.json) holding view id, scale, offset and residual.
void write_prior(const DepthPrior& prior, const std::string& pfm_path);
DepthPrior read_prior(const std::string& pfm_path);

} // namespace dgs
