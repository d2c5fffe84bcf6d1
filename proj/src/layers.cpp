#include "pnen/layers.hpp"

#include <cmath>

namespace pnen {

template <class T>
ConvLayerT<T>::ConvLayerT(int in_c, int out_c, int k, int stride, int pad, int dilation)
    : in_channels(in_c),
      out_channels(out_c),
      kh(k),
      kw(k),
      sh(stride),
      sw(stride),
      dh(dilation),
      dw(dilation),
      ph(pad),
      pw(pad),
      weights(out_c, in_c, k, k),
      bias(1, out_c, 1, 1),
      weight_grad(out_c, in_c, k, k),
      bias_grad(1, out_c, 1, 1) {
    if (in_c < 1 || out_c < 1 || k < 1 || stride < 1 || pad < 0 || dilation < 1)
        throw ConfigError("conv layer: invalid geometry");
}

template <class T>
std::pair<int, int> ConvLayerT<T>::out_hw(int h, int w, int ph_override, int pw_override) const {
    int p_h = ph_override >= 0 ? ph_override : ph;
    int p_w = pw_override >= 0 ? pw_override : pw;
    int oh = (h + 2 * p_h - dh * (kh - 1) - 1) / sh + 1;
    int ow = (w + 2 * p_w - dw * (kw - 1) - 1) / sw + 1;
    return {oh, ow};
}

template <class T>
void ConvLayerT<T>::zero_grad() {
    weight_grad.fill(T(0));
    bias_grad.fill(T(0));
}

template <class T>
void ConvLayerT<T>::init_fan_in_uniform(Rng& rng) {
    double bound = 1.0 / std::sqrt(double(in_channels) * kh * kw);
    for (T& v : weights.data) v = T(rng.uniform(-bound, bound));
    bias.fill(T(0));
}

template <class T>
void ConvLayerT<T>::init_zero() {
    weights.fill(T(0));
    bias.fill(T(0));
}

template <class T>
void ConvLayerT<T>::collect_params(const std::string& prefix, std::vector<ParamRefT<T>>& out) {
    out.push_back({prefix + ".weight", &weights, &weight_grad});
    out.push_back({prefix + ".bias", &bias, &bias_grad});
}

template <class T>
BatchNormLayerT<T>::BatchNormLayerT(int channels_)
    : channels(channels_),
      gamma(1, channels_, 1, 1, T(1)),
      beta(1, channels_, 1, 1, T(0)),
      gamma_grad(1, channels_, 1, 1),
      beta_grad(1, channels_, 1, 1),
      running_mean(1, channels_, 1, 1, T(0)),
      running_var(1, channels_, 1, 1, T(1)) {
    if (channels_ < 1) throw ConfigError("batchnorm layer: channels must be >= 1");
}

template <class T>
void BatchNormLayerT<T>::zero_grad() {
    gamma_grad.fill(T(0));
    beta_grad.fill(T(0));
}

template <class T>
void BatchNormLayerT<T>::collect_params(const std::string& prefix, std::vector<ParamRefT<T>>& out) {
    out.push_back({prefix + ".gamma", &gamma, &gamma_grad});
    out.push_back({prefix + ".beta", &beta, &beta_grad});
}

template <class T>
void BatchNormLayerT<T>::collect_buffers(const std::string& prefix, std::vector<BufferRefT<T>>& out) {
    out.push_back({prefix + ".running_mean", &running_mean});
    out.push_back({prefix + ".running_var", &running_var});
}

template struct ConvLayerT<float>;
template struct ConvLayerT<double>;
template struct BatchNormLayerT<float>;
template struct BatchNormLayerT<double>;

}  // namespace pnen
