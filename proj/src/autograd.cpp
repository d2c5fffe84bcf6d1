#include "pnen/autograd.hpp"

#include <algorithm>
#include <cmath>

namespace pnen {

template <class T>
VarT<T> make_var(TensorT<T> t) {
    VarT<T> v;
    v.value = std::make_shared<TensorT<T>>(std::move(t));
    v.grad = std::make_shared<TensorT<T>>(v.value->n, v.value->c, v.value->h, v.value->w);
    return v;
}

template <class T>
void TapeT<T>::backward(VarT<T>& loss) {
    if (!recording_) throw ConfigError("tape: backward on a non-recording tape");
    if (used_) throw ConfigError("tape: backward called twice without re-running forward");
    if (loss.value->numel() != 1)
        throw ConfigError("tape: loss must be scalar, got " + loss.value->shape_str());
    used_ = true;
    loss.grad->data[0] += T(1);
    for (auto it = hooks_.rbegin(); it != hooks_.rend(); ++it) (*it)();
}

template <class T>
VarT<T> conv2d(TapeT<T>& tape, const VarT<T>& x, ConvLayerT<T>& layer,
               int ph_override, int pw_override) {
    if (!tape.recording()) return make_var(conv2d(x.v(), layer, ph_override, pw_override));
    auto cache = std::make_shared<std::vector<T>>();
    VarT<T> out = make_var(conv2d_cached(x.v(), layer, *cache, ph_override, pw_override));
    tape.record([x, out, cache, &layer, ph_override, pw_override]() mutable {
        conv2d_backward_cached(x.v(), layer, *out.grad, x.grad.get(), *cache, ph_override,
                               pw_override);
    });
    return out;
}

template <class T>
VarT<T> batchnorm(TapeT<T>& tape, const VarT<T>& x, BatchNormLayerT<T>& layer) {
    auto saved = std::make_shared<BnSavedT<T>>();
    VarT<T> out = make_var(batchnorm(x.v(), layer, saved.get()));
    tape.record([x, out, saved, &layer]() mutable {
        batchnorm_backward(*saved, layer, *out.grad, x.grad.get());
    });
    return out;
}

template <class T>
VarT<T> relu(TapeT<T>& tape, const VarT<T>& x) {
    VarT<T> out = make_var(relu(x.v()));
    tape.record([x, out]() mutable {
        const auto& xv = x.v();
        for (size_t i = 0; i < xv.data.size(); ++i)
            if (xv.data[i] > T(0)) x.grad->data[i] += out.grad->data[i];
    });
    return out;
}

template <class T>
VarT<T> add(TapeT<T>& tape, const VarT<T>& a, const VarT<T>& b) {
    if (!a.v().same_shape(b.v()))
        throw ConfigError("add: shape mismatch " + a.v().shape_str() + " vs " + b.v().shape_str());
    TensorT<T> sum = a.v();
    for (size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += b.v().data[i];
    ensure_finite(sum, "add");
    VarT<T> out = make_var(std::move(sum));
    tape.record([a, b, out]() mutable {
        for (size_t i = 0; i < out.grad->data.size(); ++i) {
            a.grad->data[i] += out.grad->data[i];
            b.grad->data[i] += out.grad->data[i];
        }
    });
    return out;
}

template <class T>
VarT<T> scale_by_param(TapeT<T>& tape, const VarT<T>& x, TensorT<T>& w, TensorT<T>& w_grad) {
    if (w.numel() != 1 || w_grad.numel() != 1)
        throw ConfigError("scale_by_param: weight must be scalar");
    T wv = w.data[0];
    TensorT<T> y = x.v();
    for (T& v : y.data) v *= wv;
    ensure_finite(y, "scale_by_param");
    VarT<T> out = make_var(std::move(y));
    tape.record([x, out, &w, &w_grad]() mutable {
        T wv = w.data[0];
        T acc = T(0);
        for (size_t i = 0; i < out.grad->data.size(); ++i) {
            acc += out.grad->data[i] * x.value->data[i];
            x.grad->data[i] += wv * out.grad->data[i];
        }
        w_grad.data[0] += acc;
    });
    return out;
}

template <class T>
VarT<T> matmul(TapeT<T>& tape, const VarT<T>& a, const VarT<T>& b, bool trans_b) {
    VarT<T> out = make_var(matmul(a.v(), b.v(), trans_b));
    tape.record([a, b, out, trans_b]() mutable {
        const int items = a.value->n;
        const int r = a.value->h;
        const int kd = a.value->w;
        const int cols = out.value->w;
        for (int item = 0; item < items; ++item) {
            const T* pa = &a.value->m_at(item, 0, 0);
            const T* pb = &b.value->m_at(item, 0, 0);
            const T* pd = &out.grad->m_at(item, 0, 0);
            T* da = &a.grad->m_at(item, 0, 0);
            T* db = &b.grad->m_at(item, 0, 0);
            if (!trans_b) {
                // C = A*B: dA += dC*B^T, dB += A^T*dC
                gemm_nt(r, kd, cols, pd, pb, da, /*accumulate=*/true);
                gemm_tn(kd, cols, r, pa, pd, db, /*accumulate=*/true);
            } else {
                // C = A*B^T: dA += dC*B, dB += dC^T*A
                gemm_nn(r, kd, cols, pd, pb, da, /*accumulate=*/true);
                gemm_tn(cols, kd, r, pd, pa, db, /*accumulate=*/true);
            }
        }
    });
    return out;
}

template <class T>
VarT<T> softmax_rows(TapeT<T>& tape, const VarT<T>& logits) {
    VarT<T> out = make_var(softmax_rows(logits.v()));
    tape.record([logits, out]() mutable {
        const int items = out.value->n;
        const int rows = out.value->h;
        const int k = out.value->w;
        for (int item = 0; item < items; ++item) {
            for (int r = 0; r < rows; ++r) {
                const T* p = &out.value->m_at(item, r, 0);
                const T* dp = &out.grad->m_at(item, r, 0);
                T* dz = &logits.grad->m_at(item, r, 0);
                T dot = T(0);
                for (int j = 0; j < k; ++j) dot += p[j] * dp[j];
                for (int j = 0; j < k; ++j) dz[j] += p[j] * (dp[j] - dot);
            }
        }
    });
    return out;
}

template <class T>
VarT<T> image_to_rows(TapeT<T>& tape, const VarT<T>& x) {
    VarT<T> out = make_var(image_to_rows(x.v()));
    tape.record([x, out]() mutable {
        const auto& g = *out.grad;
        const int hw = x.value->h * x.value->w;
        for (int item = 0; item < x.value->n; ++item)
            for (int ch = 0; ch < x.value->c; ++ch) {
                T* dst = &x.grad->at(item, ch, 0, 0);
                for (int p = 0; p < hw; ++p) dst[p] += g.m_at(item, p, ch);
            }
    });
    return out;
}

template <class T>
VarT<T> rows_to_image(TapeT<T>& tape, const VarT<T>& rows, int c, int h, int w) {
    VarT<T> out = make_var(rows_to_image(rows.v(), c, h, w));
    tape.record([rows, out, c, h, w]() mutable {
        const auto& g = *out.grad;
        for (int item = 0; item < g.n; ++item)
            for (int ch = 0; ch < c; ++ch) {
                const T* src = &g.at(item, ch, 0, 0);
                for (int p = 0; p < h * w; ++p) rows.grad->m_at(item, p, ch) += src[p];
            }
    });
    return out;
}

template <class T>
VarT<T> concat_channels(TapeT<T>& tape, const std::vector<VarT<T>>& parts) {
    std::vector<const TensorT<T>*> views;
    views.reserve(parts.size());
    for (const auto& p : parts) views.push_back(p.value.get());
    VarT<T> out = make_var(concat_channels(views));
    tape.record([parts, out]() mutable {
        const auto& g = *out.grad;
        const int hw = g.h * g.w;
        for (int item = 0; item < g.n; ++item) {
            int ch_off = 0;
            for (auto& p : parts) {
                for (int ch = 0; ch < p.value->c; ++ch) {
                    const T* src = &g.at(item, ch_off + ch, 0, 0);
                    T* dst = &p.grad->at(item, ch, 0, 0);
                    for (int q = 0; q < hw; ++q) dst[q] += src[q];
                }
                ch_off += p.value->c;
            }
        }
    });
    return out;
}

template <class T>
VarT<T> concat_rows(TapeT<T>& tape, const std::vector<VarT<T>>& parts) {
    std::vector<const TensorT<T>*> views;
    views.reserve(parts.size());
    for (const auto& p : parts) views.push_back(p.value.get());
    VarT<T> out = make_var(concat_rows(views));
    tape.record([parts, out]() mutable {
        const auto& g = *out.grad;
        for (int item = 0; item < g.n; ++item) {
            int row_off = 0;
            for (auto& p : parts) {
                const int count = p.value->h * p.value->w;
                const T* src = &g.m_at(item, row_off, 0);
                T* dst = &p.grad->m_at(item, 0, 0);
                for (int q = 0; q < count; ++q) dst[q] += src[q];
                row_off += p.value->h;
            }
        }
    });
    return out;
}

template <class T>
VarT<T> adaptive_avg_pool(TapeT<T>& tape, const VarT<T>& x, int out_h, int out_w) {
    VarT<T> out = make_var(adaptive_avg_pool(x.v(), out_h, out_w));
    tape.record([x, out, out_h, out_w]() mutable {
        const auto& g = *out.grad;
        const int h = x.value->h, w = x.value->w;
        for (int item = 0; item < g.n; ++item)
            for (int ch = 0; ch < g.c; ++ch)
                for (int oy = 0; oy < out_h; ++oy) {
                    int y0 = oy * h / out_h, y1 = (oy + 1) * h / out_h;
                    for (int ox = 0; ox < out_w; ++ox) {
                        int x0 = ox * w / out_w, x1 = (ox + 1) * w / out_w;
                        T share = g.at(item, ch, oy, ox) / T((y1 - y0) * (x1 - x0));
                        for (int y = y0; y < y1; ++y)
                            for (int xx = x0; xx < x1; ++xx)
                                x.grad->at(item, ch, y, xx) += share;
                    }
                }
    });
    return out;
}

template <class T>
VarT<T> sum_squared_error(TapeT<T>& tape, const VarT<T>& a, const TensorT<T>& target) {
    if (!a.v().same_shape(target))
        throw ConfigError("sum_squared_error: shape mismatch " + a.v().shape_str() + " vs " +
                          target.shape_str());
    double acc = 0.0;
    for (size_t i = 0; i < target.data.size(); ++i) {
        double d = double(a.value->data[i]) - double(target.data[i]);
        acc += d * d;
    }
    VarT<T> out = make_var(TensorT<T>::scalar(T(acc)));
    ensure_finite(out.v(), "sum_squared_error");
    auto tgt = std::make_shared<TensorT<T>>(target);
    tape.record([a, out, tgt]() mutable {
        T g = out.grad->data[0];
        for (size_t i = 0; i < tgt->data.size(); ++i)
            a.grad->data[i] += T(2) * (a.value->data[i] - tgt->data[i]) * g;
    });
    return out;
}

template <class T>
VarT<T> sum_all(TapeT<T>& tape, const VarT<T>& x) {
    double acc = 0.0;
    for (const T& v : x.value->data) acc += double(v);
    VarT<T> out = make_var(TensorT<T>::scalar(T(acc)));
    ensure_finite(out.v(), "sum_all");
    tape.record([x, out]() mutable {
        T g = out.grad->data[0];
        for (T& d : x.grad->data) d += g;
    });
    return out;
}

template <class T>
VarT<T> scale_const(TapeT<T>& tape, const VarT<T>& x, T k) {
    TensorT<T> y = x.v();
    for (T& v : y.data) v *= k;
    ensure_finite(y, "scale_const");
    VarT<T> out = make_var(std::move(y));
    tape.record([x, out, k]() mutable {
        for (size_t i = 0; i < out.grad->data.size(); ++i)
            x.grad->data[i] += k * out.grad->data[i];
    });
    return out;
}

#define PNEN_AUTOGRAD_INST(T)                                                                    \
    template struct VarT<T>;                                                                     \
    template class TapeT<T>;                                                                     \
    template VarT<T> make_var<T>(TensorT<T>);                                                    \
    template VarT<T> conv2d<T>(TapeT<T>&, const VarT<T>&, ConvLayerT<T>&, int, int);             \
    template VarT<T> batchnorm<T>(TapeT<T>&, const VarT<T>&, BatchNormLayerT<T>&);               \
    template VarT<T> relu<T>(TapeT<T>&, const VarT<T>&);                                         \
    template VarT<T> add<T>(TapeT<T>&, const VarT<T>&, const VarT<T>&);                          \
    template VarT<T> scale_by_param<T>(TapeT<T>&, const VarT<T>&, TensorT<T>&, TensorT<T>&);     \
    template VarT<T> matmul<T>(TapeT<T>&, const VarT<T>&, const VarT<T>&, bool);                 \
    template VarT<T> softmax_rows<T>(TapeT<T>&, const VarT<T>&);                                 \
    template VarT<T> image_to_rows<T>(TapeT<T>&, const VarT<T>&);                                \
    template VarT<T> rows_to_image<T>(TapeT<T>&, const VarT<T>&, int, int, int);                 \
    template VarT<T> concat_channels<T>(TapeT<T>&, const std::vector<VarT<T>>&);                 \
    template VarT<T> concat_rows<T>(TapeT<T>&, const std::vector<VarT<T>>&);                     \
    template VarT<T> adaptive_avg_pool<T>(TapeT<T>&, const VarT<T>&, int, int);                  \
    template VarT<T> sum_squared_error<T>(TapeT<T>&, const VarT<T>&, const TensorT<T>&);         \
    template VarT<T> sum_all<T>(TapeT<T>&, const VarT<T>&);                                      \
    template VarT<T> scale_const<T>(TapeT<T>&, const VarT<T>&, T);

PNEN_AUTOGRAD_INST(float)
PNEN_AUTOGRAD_INST(double)
#undef PNEN_AUTOGRAD_INST

}  // namespace pnen
