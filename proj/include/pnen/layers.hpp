#ifndef PNEN_LAYERS_HPP_
#define PNEN_LAYERS_HPP_

#include <string>
#include <utility>
#include <vector>

#include "pnen/rng.hpp"
#include "pnen/tensor.hpp"

namespace pnen {

// Named view onto one trainable tensor and its gradient buffer.
template <class T>
struct ParamRefT {
    std::string name;
    TensorT<T>* value = nullptr;
    TensorT<T>* grad = nullptr;
};

// Named view onto non-trainable state (batch-norm running statistics).
template <class T>
struct BufferRefT {
    std::string name;
    TensorT<T>* value = nullptr;
};

// Learnable 2-d convolution (cross-correlation, no kernel flip).
template <class T>
struct ConvLayerT {
    int in_channels = 0, out_channels = 0;
    int kh = 1, kw = 1;
    int sh = 1, sw = 1;
    int dh = 1, dw = 1;
    int ph = 0, pw = 0;

    TensorT<T> weights;      // (out, in, kh, kw)
    TensorT<T> bias;         // (1, out, 1, 1), one scalar per output channel
    TensorT<T> weight_grad;  // same shape as weights
    TensorT<T> bias_grad;

    ConvLayerT() = default;
    ConvLayerT(int in_c, int out_c, int k, int stride = 1, int pad = 0, int dilation = 1);

    // Output spatial size: floor((h + 2p - d*(k-1) - 1)/s) + 1, same for w.
    std::pair<int, int> out_hw(int h, int w, int ph_override = -1, int pw_override = -1) const;

    void zero_grad();
    void init_fan_in_uniform(Rng& rng);  // U(-1/sqrt(fan_in), +1/sqrt(fan_in)), bias 0
    void init_zero();

    void collect_params(const std::string& prefix, std::vector<ParamRefT<T>>& out);
    int64_t param_count() const { return weights.numel() + bias.numel(); }
};

// Per-channel batch normalization. In train mode normalizes by biased batch
// statistics over (n, h, w) and updates running stats by momentum; in eval
// mode it is a deterministic per-channel affine map.
template <class T>
struct BatchNormLayerT {
    enum class Mode { train, eval };

    int channels = 0;
    TensorT<T> gamma, beta;
    TensorT<T> gamma_grad, beta_grad;
    TensorT<T> running_mean, running_var;
    double momentum = 0.1;
    double epsilon = 1e-5;
    Mode mode = Mode::train;

    BatchNormLayerT() = default;
    explicit BatchNormLayerT(int channels_);

    void zero_grad();
    void collect_params(const std::string& prefix, std::vector<ParamRefT<T>>& out);
    void collect_buffers(const std::string& prefix, std::vector<BufferRefT<T>>& out);
    int64_t param_count() const { return gamma.numel() + beta.numel(); }
};

extern template struct ConvLayerT<float>;
extern template struct ConvLayerT<double>;
extern template struct BatchNormLayerT<float>;
extern template struct BatchNormLayerT<double>;

using ConvLayer = ConvLayerT<double>;
using BatchNormLayer = BatchNormLayerT<double>;

}  // namespace pnen

#endif  // PNEN_LAYERS_HPP_
