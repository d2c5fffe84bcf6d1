#ifndef PNEN_OPS_HPP_
#define PNEN_OPS_HPP_

#include <vector>

#include "pnen/layers.hpp"
#include "pnen/tensor.hpp"

namespace pnen {

// Number of worker threads for the large-kernel loops, from PNB_THREADS
// (default 1). Work is split so results are bit-identical for any count.
int worker_threads();

// Row-major GEMMs. C is (m x n); the accumulate flag keeps existing C values.
template <class T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate = false);
template <class T>           // C = A * B^T with B stored (n x k)
void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate = false);
template <class T>           // C = A^T * B with A stored (k x m)
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate = false);

// --- convolution -----------------------------------------------------------

// Cross-correlation with stride/dilation/zero padding. Negative pad overrides
// fall back to the layer's stored padding.
template <class T>
TensorT<T> conv2d(const TensorT<T>& input, const ConvLayerT<T>& layer,
                  int ph_override = -1, int pw_override = -1);

// Accumulates parameter gradients into the layer and, when input_grad is
// non-null, the input gradient into *input_grad (which must be zero-filled or
// hold prior accumulation, shaped like input).
template <class T>
void conv2d_backward(const TensorT<T>& input, ConvLayerT<T>& layer,
                     const TensorT<T>& out_grad, TensorT<T>* input_grad,
                     int ph_override = -1, int pw_override = -1);

// Same kernels, but the im2col panels built during the forward pass land in
// col_cache (n * K * oh*ow values) and are reused by the backward pass.
template <class T>
TensorT<T> conv2d_cached(const TensorT<T>& input, const ConvLayerT<T>& layer,
                         std::vector<T>& col_cache, int ph_override = -1, int pw_override = -1);

template <class T>
void conv2d_backward_cached(const TensorT<T>& input, ConvLayerT<T>& layer,
                            const TensorT<T>& out_grad, TensorT<T>* input_grad,
                            const std::vector<T>& col_cache, int ph_override = -1,
                            int pw_override = -1);

// --- batch normalization ----------------------------------------------------

// Saved intermediates for the backward pass.
template <class T>
struct BnSavedT {
    TensorT<T> xhat;
    std::vector<T> inv_std;  // per channel
    bool train_mode = false;
};

// Train mode updates the layer's running statistics as a side effect.
template <class T>
TensorT<T> batchnorm(const TensorT<T>& input, BatchNormLayerT<T>& layer,
                     BnSavedT<T>* saved = nullptr);

template <class T>
void batchnorm_backward(const BnSavedT<T>& saved, BatchNormLayerT<T>& layer,
                        const TensorT<T>& out_grad, TensorT<T>* input_grad);

// --- elementwise and matrix ops ---------------------------------------------

template <class T>
TensorT<T> relu(const TensorT<T>& input);

// Batched matrix product over dim 0 (c must be 1): a is (n,1,r,k) and b is
// (n,1,k,cols), or (n,1,cols,k) when trans_b is set.
template <class T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b, bool trans_b = false);

// Row softmax with max subtraction, batched like matmul.
template <class T>
TensorT<T> softmax_rows(const TensorT<T>& logits);

// Adaptive average pooling; interval i spans [floor(i*h/p), floor((i+1)*h/p)).
template <class T>
TensorT<T> adaptive_avg_pool(const TensorT<T>& input, int out_h, int out_w);

// (n,C,H,W) -> (n,1,H*W,C): one row per pixel, one column per channel.
template <class T>
TensorT<T> image_to_rows(const TensorT<T>& x);

// Inverse of image_to_rows.
template <class T>
TensorT<T> rows_to_image(const TensorT<T>& rows, int c, int h, int w);

template <class T>
TensorT<T> concat_channels(const std::vector<const TensorT<T>*>& parts);

// Concatenates stacks of matrices along the row dimension.
template <class T>
TensorT<T> concat_rows(const std::vector<const TensorT<T>*>& parts);

}  // namespace pnen

#endif  // PNEN_OPS_HPP_
