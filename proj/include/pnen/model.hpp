#ifndef PNEN_MODEL_HPP_
#define PNEN_MODEL_HPP_

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "pnen/autograd.hpp"
#include "pnen/nonlocal.hpp"

namespace pnen {

struct ModelConfig {
    int channels = 3;  // image channels c
    int d = 64;        // feature width
    int m = 64;        // query/reference embedding dim
    int n = 32;        // value embedding dim
    std::vector<int> scales = {1, 2, 3};
    int blocks = 3;  // M interleaved DRB+PNB groups

    PnbConfig pnb() const { return PnbConfig{d, m, n, scales}; }
    void validate() const;
};

// One residual Conv-BN-ReLU-Conv group; both convs share the group dilation
// and keep spatial size (padding == dilation).
template <class T>
struct DrbGroupT {
    int dilation = 1;
    ConvLayerT<T> conv1;
    BatchNormLayerT<T> bn;
    ConvLayerT<T> conv2;
};

// Dilated residual block: five groups with dilations 1, 2, 4, 2, 1.
template <class T>
struct DrbBlockT {
    static constexpr std::array<int, 5> kDilations = {1, 2, 4, 2, 1};
    std::vector<DrbGroupT<T>> groups;

    DrbBlockT() = default;
    DrbBlockT(int d, Rng& rng);

    VarT<T> forward(TapeT<T>& tape, const VarT<T>& x);

    void collect_params(const std::string& prefix, std::vector<ParamRefT<T>>& out);
    void collect_buffers(const std::string& prefix, std::vector<BufferRefT<T>>& out);
    void zero_grad();
    int conv_count() const { return static_cast<int>(groups.size()) * 2; }
    int64_t param_count() const;
};

// Three 3x3 convs d->d->d->c with ReLU after the first two; the last conv is
// linear so residual images can go negative.
template <class T>
struct ExitNetT {
    ConvLayerT<T> conv1, conv2, conv3;

    ExitNetT() = default;
    ExitNetT(int d, int out_c, Rng& rng);

    VarT<T> forward(TapeT<T>& tape, const VarT<T>& x);
    void collect_params(const std::string& prefix, std::vector<ParamRefT<T>>& out);
    void zero_grad();
    int64_t param_count() const;
};

// Entry conv, M interleaved DRB->PNB groups, per-group exit nets producing
// residual predictions, and trainable scalar fusion weights.
template <class T>
struct PnenModelT {
    ModelConfig cfg;
    ConvLayerT<T> entry;
    std::vector<DrbBlockT<T>> drbs;
    std::vector<PnbLayerT<T>> pnbs;
    std::vector<ExitNetT<T>> exits;
    std::vector<TensorT<T>> fusion_w;       // each (1,1,1,1), init 1/M
    std::vector<TensorT<T>> fusion_w_grad;

    static PnenModelT seeded(const ModelConfig& cfg, uint64_t seed);

    // Returns the fused prediction Y and the per-group predictions Y_m.
    std::pair<VarT<T>, std::vector<VarT<T>>> forward(TapeT<T>& tape, const VarT<T>& x);

    // Eval-mode inference; does not touch gradients or running statistics.
    TensorT<T> infer(const TensorT<T>& x);

    // Correlation rows of one query pixel at the last pyramid block, taken
    // on that block's input feature map (eval mode).
    std::vector<AttentionDumpT<T>> attention_dumps(const TensorT<T>& x, int qy, int qx);

    void set_train_mode(bool train);
    std::vector<ParamRefT<T>> parameters();
    std::vector<BufferRefT<T>> buffers();
    void zero_grads();

    // Conv layers on the deepest serial path; each non-local block counts as
    // the one conv layer it puts on the trunk.
    int conv_depth() const;
    int64_t param_count() const;
};

// L = (1/(n*h*w*c)) * (||G-Y||^2 + sum_m ||G-Y_m||^2), i.e. per-sample mean
// of the deep-supervised squared errors.
template <class T>
VarT<T> pnen_loss(TapeT<T>& tape, const VarT<T>& y, const std::vector<VarT<T>>& ys,
                  const TensorT<T>& target);

// Checkpoint = <base>.manifest (text: format version, hyperparameters, tensor
// table with byte offsets) + <base>.pnt (single PNT1 blob of all tensors).
template <class T>
void save_checkpoint(PnenModelT<T>& model, const std::string& base);

template <class T>
PnenModelT<T> load_checkpoint(const std::string& base);

ModelConfig checkpoint_config(const std::string& base);
std::string checkpoint_dtype(const std::string& base);  // "f32" or "f64"

#define PNEN_MODEL_EXTERN(T)                                                                     \
    extern template struct DrbBlockT<T>;                                                         \
    extern template struct ExitNetT<T>;                                                          \
    extern template struct PnenModelT<T>;                                                        \
    extern template VarT<T> pnen_loss<T>(TapeT<T>&, const VarT<T>&, const std::vector<VarT<T>>&, \
                                         const TensorT<T>&);                                     \
    extern template void save_checkpoint<T>(PnenModelT<T>&, const std::string&);                 \
    extern template PnenModelT<T> load_checkpoint<T>(const std::string&);

PNEN_MODEL_EXTERN(float)
PNEN_MODEL_EXTERN(double)
#undef PNEN_MODEL_EXTERN

using PnenModel = PnenModelT<double>;
using DrbBlock = DrbBlockT<double>;

}  // namespace pnen

#endif  // PNEN_MODEL_HPP_
