#ifndef PNEN_AUTOGRAD_HPP_
#define PNEN_AUTOGRAD_HPP_

#include <functional>
#include <memory>
#include <vector>

#include "pnen/layers.hpp"
#include "pnen/ops.hpp"
#include "pnen/tensor.hpp"

namespace pnen {

// Handle to a tensor in the autograd graph. The gradient buffer is allocated
// eagerly (zero-filled) so that backward hooks can accumulate into it.
template <class T>
struct VarT {
    std::shared_ptr<TensorT<T>> value;
    std::shared_ptr<TensorT<T>> grad;

    const TensorT<T>& v() const { return *value; }
    TensorT<T>& g() { return *grad; }
};

template <class T>
VarT<T> make_var(TensorT<T> t);

// Ordered record of executed differentiable operations. backward() replays
// the hooks in exact reverse execution order. Layers referenced by recorded
// ops must outlive the tape. A non-recording tape turns the same ops into
// plain forward evaluation (no hooks, no saved intermediates).
template <class T>
class TapeT {
public:
    TapeT() = default;
    explicit TapeT(bool recording) : recording_(recording) {}

    bool recording() const { return recording_; }

    void record(std::function<void()> hook) {
        if (recording_) hooks_.push_back(std::move(hook));
    }

    // Seeds d(loss)/d(loss) = 1 and runs all hooks in reverse. The loss must
    // be a scalar produced under this tape; calling backward twice without a
    // fresh forward pass is an error.
    void backward(VarT<T>& loss);

    void clear() {
        hooks_.clear();
        used_ = false;
    }

    size_t size() const { return hooks_.size(); }

private:
    std::vector<std::function<void()>> hooks_;
    bool recording_ = true;
    bool used_ = false;
};

template <class T>
void backward(TapeT<T>& tape, VarT<T>& loss) {
    tape.backward(loss);
}

// --- taped operations --------------------------------------------------------
// Each wraps the forward kernel from ops.hpp and records the matching
// backward accumulation. Parameter gradients go straight into the layers.

template <class T>
VarT<T> conv2d(TapeT<T>& tape, const VarT<T>& x, ConvLayerT<T>& layer,
               int ph_override = -1, int pw_override = -1);

template <class T>
VarT<T> batchnorm(TapeT<T>& tape, const VarT<T>& x, BatchNormLayerT<T>& layer);

template <class T>
VarT<T> relu(TapeT<T>& tape, const VarT<T>& x);

template <class T>
VarT<T> add(TapeT<T>& tape, const VarT<T>& a, const VarT<T>& b);

// y = w * x with a trainable scalar w stored as a (1,1,1,1) tensor.
template <class T>
VarT<T> scale_by_param(TapeT<T>& tape, const VarT<T>& x, TensorT<T>& w, TensorT<T>& w_grad);

template <class T>
VarT<T> matmul(TapeT<T>& tape, const VarT<T>& a, const VarT<T>& b, bool trans_b = false);

template <class T>
VarT<T> softmax_rows(TapeT<T>& tape, const VarT<T>& logits);

template <class T>
VarT<T> image_to_rows(TapeT<T>& tape, const VarT<T>& x);

template <class T>
VarT<T> rows_to_image(TapeT<T>& tape, const VarT<T>& rows, int c, int h, int w);

template <class T>
VarT<T> concat_channels(TapeT<T>& tape, const std::vector<VarT<T>>& parts);

template <class T>
VarT<T> concat_rows(TapeT<T>& tape, const std::vector<VarT<T>>& parts);

template <class T>
VarT<T> adaptive_avg_pool(TapeT<T>& tape, const VarT<T>& x, int out_h, int out_w);

// Scalar sum of squared differences against a fixed target.
template <class T>
VarT<T> sum_squared_error(TapeT<T>& tape, const VarT<T>& a, const TensorT<T>& target);

template <class T>
VarT<T> sum_all(TapeT<T>& tape, const VarT<T>& x);

template <class T>
VarT<T> scale_const(TapeT<T>& tape, const VarT<T>& x, T k);

using Tape = TapeT<double>;
using Var = VarT<double>;

#define PNEN_AUTOGRAD_EXTERN(T)                                                                  \
    extern template struct VarT<T>;                                                              \
    extern template class TapeT<T>;                                                              \
    extern template VarT<T> make_var<T>(TensorT<T>);                                             \
    extern template VarT<T> conv2d<T>(TapeT<T>&, const VarT<T>&, ConvLayerT<T>&, int, int);      \
    extern template VarT<T> batchnorm<T>(TapeT<T>&, const VarT<T>&, BatchNormLayerT<T>&);        \
    extern template VarT<T> relu<T>(TapeT<T>&, const VarT<T>&);                                  \
    extern template VarT<T> add<T>(TapeT<T>&, const VarT<T>&, const VarT<T>&);                   \
    extern template VarT<T> scale_by_param<T>(TapeT<T>&, const VarT<T>&, TensorT<T>&,            \
                                              TensorT<T>&);                                      \
    extern template VarT<T> matmul<T>(TapeT<T>&, const VarT<T>&, const VarT<T>&, bool);          \
    extern template VarT<T> softmax_rows<T>(TapeT<T>&, const VarT<T>&);                          \
    extern template VarT<T> image_to_rows<T>(TapeT<T>&, const VarT<T>&);                         \
    extern template VarT<T> rows_to_image<T>(TapeT<T>&, const VarT<T>&, int, int, int);          \
    extern template VarT<T> concat_channels<T>(TapeT<T>&, const std::vector<VarT<T>>&);          \
    extern template VarT<T> concat_rows<T>(TapeT<T>&, const std::vector<VarT<T>>&);              \
    extern template VarT<T> adaptive_avg_pool<T>(TapeT<T>&, const VarT<T>&, int, int);           \
    extern template VarT<T> sum_squared_error<T>(TapeT<T>&, const VarT<T>&, const TensorT<T>&);  \
    extern template VarT<T> sum_all<T>(TapeT<T>&, const VarT<T>&);                               \
    extern template VarT<T> scale_const<T>(TapeT<T>&, const VarT<T>&, T);

PNEN_AUTOGRAD_EXTERN(float)
PNEN_AUTOGRAD_EXTERN(double)
#undef PNEN_AUTOGRAD_EXTERN

}  // namespace pnen

#endif  // PNEN_AUTOGRAD_HPP_
