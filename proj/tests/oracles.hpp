#ifndef PNEN_TESTS_ORACLES_HPP_
#define PNEN_TESTS_ORACLES_HPP_

// Brute-force reference implementations used only by tests. They share no
// code with the library kernels they check: plain index loops, no im2col,
// no gemm, no shared attention helper.

#include "pnen/filters.hpp"
#include "pnen/layers.hpp"
#include "pnen/nonlocal.hpp"
#include "pnen/tensor.hpp"

namespace pnen::oracle {

// Six-deep loop nest over (item, out-channel, oy, ox, in-channel, tap).
Tensor conv2d_naive(const Tensor& x, const ConvLayer& layer, int ph_override = -1,
                    int pw_override = -1);

// Triple loop product of single matrices (n == c == 1).
Tensor matmul_naive(const Tensor& a, const Tensor& b);

// Pairwise-loop non-local block on a single image: per-pixel 1x1 embeddings,
// exp/normalize per query row, accumulate, 1x1 transform, residual.
Tensor nlb_naive(const Tensor& x, const NlbLayerT<double>& layer);

// Per-scale pairwise-loop pyramid block. Downsampled references materialize
// via explicit kernel=stride=2^s block loops; requires 2^s | h and 2^s | w.
Tensor pnb_naive(const Tensor& x, const PnbLayerT<double>& layer);

// Token-loop APNB: embeddings per pixel, pooled tokens via explicit interval
// loops, one softmax over the concatenated token set.
Tensor apnb_naive(const Tensor& x, const ApnbLayerT<double>& layer);

// Direct non-separable 2-d Gaussian convolution with replicate boundary.
Tensor gaussian_blur_2d(const Tensor& img, double sigma);

// Per-window full-sort median (lower median).
Tensor median_naive(const Tensor& img, int radius);

// Exhaustive cumulative-weight weighted median.
Tensor weighted_median_naive(const Tensor& img, int radius, double sigma_spatial,
                             double sigma_range);

// Per-window double-loop SSIM with the standard 11x11 sigma-1.5 window.
double ssim_naive(const Tensor& a, const Tensor& b, double dynamic_range);

}  // namespace pnen::oracle

#endif  // PNEN_TESTS_ORACLES_HPP_
