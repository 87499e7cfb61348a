// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dgs/depth_prior.hpp"
#include "dgs/image.hpp"

namespace dgs {

struct LossWeights {
    double ssim = 0.2;   // mixes color L1 with D-SSIM; must be in [0,1]
    double depth = 0.1;  // weight of the depth-prior L1 term
    double smooth = 0.01; // weight of the edge-masked smoothness term
};

// A scalar loss value together with its gradient image.
struct LossTerm {
    double value = 0.0;
    Image grad;
};

struct LossReport {
    double color = 0.0;
    double dssim = 0.0;
    double depth = 0.0;
    double smooth = 0.0;
    double total = 0.0;
    Image grad_color; // d total / d rendered color, H x W x 3
    Image grad_depth; // d total / d rendered depth, H x W
};

// Mean absolute difference over all pixels and channels.
LossTerm color_l1(const Image& rendered, const Image& target);

// (1 - SSIM) / 2 with the standard 11x11 Gaussian window (sigma 1.5),
// K1 = 0.01, K2 = 0.03, dynamic range 1, averaged over channels. The gradient
// is analytic and taken with respect to `rendered`.
LossTerm dssim(const Image& rendered, const Image& target);

// Mean absolute depth difference over pixels whose accumulated alpha
// (1 - transmittance) exceeds 0.5. Empty mask yields loss 0 and zero gradient.
LossTerm depth_l1(const Image& rendered_depth, const Image& aligned_prior,
                  const Image& transmittance);

// Sum of squared depth differences over right/down neighbor pairs where both
// pixels are non-edge, normalized by the number of contributing pairs.
LossTerm smoothness(const Image& rendered_depth, const Mask& edge_mask);

// total = (1 - w.ssim) * color + w.ssim * dssim + w.depth * depth + w.smooth * smooth
LossReport combine(const LossTerm& color, const LossTerm& dssim_term, const LossTerm& depth,
                   const LossTerm& smooth, const LossWeights& weights);

} // namespace dgs
