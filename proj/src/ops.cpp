#include "pnen/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace pnen {

int worker_threads() {
    static const int count = [] {
        const char* env = std::getenv("PNB_THREADS");
        if (!env) return 1;
        int v = std::atoi(env);
        return v < 1 ? 1 : v;
    }();
    return count;
}

namespace {

// Splits [0, total) into contiguous chunks, one worker per chunk. Each index
// is processed by exactly one worker with the same per-index arithmetic, so
// results do not depend on the thread count.
template <class Fn>
void parallel_for(int64_t total, int64_t grain, Fn&& fn) {
    int threads = worker_threads();
    if (threads <= 1 || total < 2 * grain) {
        fn(0, total);
        return;
    }
    int64_t chunks = std::min<int64_t>(threads, (total + grain - 1) / grain);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(chunks));
    int64_t per = (total + chunks - 1) / chunks;
    for (int64_t i = 0; i < chunks; ++i) {
        int64_t lo = i * per;
        int64_t hi = std::min(total, lo + per);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace

// Column blocking keeps the streamed B panel hot across rows; accumulation
// order per output element is fixed by the code, so results are identical
// for any thread count.
constexpr int kGemmJB = 240;

template <class T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
    parallel_for(m, 8, [&](int64_t lo, int64_t hi) {
        for (int j0 = 0; j0 < n; j0 += kGemmJB) {
            const int j1 = std::min(n, j0 + kGemmJB);
            int64_t i = lo;
            for (; i + 2 <= hi; i += 2) {  // row pairs share each B panel read
                T* c0 = c + i * n;
                T* c1 = c0 + n;
                if (!accumulate)
                    for (int j = j0; j < j1; ++j) c0[j] = c1[j] = T(0);
                const T* a0 = a + i * k;
                const T* a1 = a0 + k;
                for (int kk = 0; kk < k; ++kk) {
                    T av0 = a0[kk], av1 = a1[kk];
                    const T* bk = b + size_t(kk) * n;
                    for (int j = j0; j < j1; ++j) {
                        T bv = bk[j];
                        c0[j] += av0 * bv;
                        c1[j] += av1 * bv;
                    }
                }
            }
            for (; i < hi; ++i) {
                T* ci = c + i * n;
                if (!accumulate)
                    for (int j = j0; j < j1; ++j) ci[j] = T(0);
                const T* ai = a + i * k;
                for (int kk = 0; kk < k; ++kk) {
                    T av = ai[kk];
                    const T* bk = b + size_t(kk) * n;
                    for (int j = j0; j < j1; ++j) ci[j] += av * bk[j];
                }
            }
        }
    });
}

template <class T>
void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
    parallel_for(m, 8, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            const T* ai = a + i * k;
            T* ci = c + i * n;
            for (int j = 0; j < n; ++j) {
                const T* bj = b + size_t(j) * k;
                T acc0 = T(0), acc1 = T(0), acc2 = T(0), acc3 = T(0);
                int kk = 0;
                for (; kk + 4 <= k; kk += 4) {
                    acc0 += ai[kk] * bj[kk];
                    acc1 += ai[kk + 1] * bj[kk + 1];
                    acc2 += ai[kk + 2] * bj[kk + 2];
                    acc3 += ai[kk + 3] * bj[kk + 3];
                }
                T acc = (acc0 + acc1) + (acc2 + acc3);
                for (; kk < k; ++kk) acc += ai[kk] * bj[kk];
                ci[j] = accumulate ? ci[j] + acc : acc;
            }
        }
    });
}

template <class T>
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
    parallel_for(m, 8, [&](int64_t lo, int64_t hi) {
        for (int j0 = 0; j0 < n; j0 += kGemmJB) {
            const int j1 = std::min(n, j0 + kGemmJB);
            for (int64_t i = lo; i < hi; ++i) {
                T* ci = c + i * n;
                if (!accumulate)
                    for (int j = j0; j < j1; ++j) ci[j] = T(0);
                for (int kk = 0; kk < k; ++kk) {
                    T av = a[size_t(kk) * m + i];
                    const T* bk = b + size_t(kk) * n;
                    for (int j = j0; j < j1; ++j) ci[j] += av * bk[j];
                }
            }
        }
    });
}

namespace {

struct ConvGeom {
    int oh = 0, ow = 0, ph = 0, pw = 0;
};

template <class T>
ConvGeom conv_geometry(const TensorT<T>& input, const ConvLayerT<T>& layer,
                       int ph_override, int pw_override) {
    if (input.c != layer.in_channels)
        throw ConfigError("conv2d: input has " + std::to_string(input.c) +
                          " channels, layer expects " + std::to_string(layer.in_channels));
    ConvGeom g;
    g.ph = ph_override >= 0 ? ph_override : layer.ph;
    g.pw = pw_override >= 0 ? pw_override : layer.pw;
    auto [oh, ow] = layer.out_hw(input.h, input.w, g.ph, g.pw);
    if (oh < 1 || ow < 1)
        throw ConfigError("conv2d: output size " + std::to_string(oh) + "x" +
                          std::to_string(ow) + " from input " + input.shape_str());
    g.oh = oh;
    g.ow = ow;
    return g;
}

// col is (in_c*kh*kw) x (oh*ow), row-major.
template <class T>
void im2col(const TensorT<T>& x, int item, const ConvLayerT<T>& l, const ConvGeom& g, T* col) {
    const int ohw = g.oh * g.ow;
    for (int ic = 0; ic < l.in_channels; ++ic) {
        for (int ky = 0; ky < l.kh; ++ky) {
            for (int kx = 0; kx < l.kw; ++kx) {
                T* row = col + (size_t(ic) * l.kh * l.kw + size_t(ky) * l.kw + kx) * ohw;
                for (int oy = 0; oy < g.oh; ++oy) {
                    int iy = oy * l.sh - g.ph + ky * l.dh;
                    T* dst = row + size_t(oy) * g.ow;
                    if (iy < 0 || iy >= x.h) {
                        for (int ox = 0; ox < g.ow; ++ox) dst[ox] = T(0);
                        continue;
                    }
                    const T* src = &x.at(item, ic, iy, 0);
                    for (int ox = 0; ox < g.ow; ++ox) {
                        int ix = ox * l.sw - g.pw + kx * l.dw;
                        dst[ox] = (ix >= 0 && ix < x.w) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

template <class T>
void col2im_accumulate(const T* col, int item, const ConvLayerT<T>& l, const ConvGeom& g,
                       TensorT<T>& dx) {
    const int ohw = g.oh * g.ow;
    for (int ic = 0; ic < l.in_channels; ++ic) {
        for (int ky = 0; ky < l.kh; ++ky) {
            for (int kx = 0; kx < l.kw; ++kx) {
                const T* row = col + (size_t(ic) * l.kh * l.kw + size_t(ky) * l.kw + kx) * ohw;
                for (int oy = 0; oy < g.oh; ++oy) {
                    int iy = oy * l.sh - g.ph + ky * l.dh;
                    if (iy < 0 || iy >= dx.h) continue;
                    const T* src = row + size_t(oy) * g.ow;
                    T* dst = &dx.at(item, ic, iy, 0);
                    for (int ox = 0; ox < g.ow; ++ox) {
                        int ix = ox * l.sw - g.pw + kx * l.dw;
                        if (ix >= 0 && ix < dx.w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

namespace {

template <class T>
TensorT<T> conv2d_impl(const TensorT<T>& input, const ConvLayerT<T>& layer, int ph_override,
                       int pw_override, std::vector<T>* col_cache) {
    ConvGeom g = conv_geometry(input, layer, ph_override, pw_override);
    const int K = layer.in_channels * layer.kh * layer.kw;
    const int ohw = g.oh * g.ow;
    TensorT<T> out(input.n, layer.out_channels, g.oh, g.ow);
    std::vector<T> scratch;
    if (col_cache)
        col_cache->resize(size_t(input.n) * K * ohw);
    else
        scratch.resize(size_t(K) * ohw);
    for (int item = 0; item < input.n; ++item) {
        T* col = col_cache ? col_cache->data() + size_t(item) * K * ohw : scratch.data();
        im2col(input, item, layer, g, col);
        T* y = &out.at(item, 0, 0, 0);
        gemm_nn(layer.out_channels, ohw, K, layer.weights.data.data(), col, y);
        for (int oc = 0; oc < layer.out_channels; ++oc) {
            T b = layer.bias.data[oc];
            T* yc = y + size_t(oc) * ohw;
            for (int p = 0; p < ohw; ++p) yc[p] += b;
        }
    }
    ensure_finite(out, "conv2d");
    return out;
}

template <class T>
void conv2d_backward_impl(const TensorT<T>& input, ConvLayerT<T>& layer,
                          const TensorT<T>& out_grad, TensorT<T>* input_grad, int ph_override,
                          int pw_override, const std::vector<T>* col_cache) {
    ConvGeom g = conv_geometry(input, layer, ph_override, pw_override);
    const int K = layer.in_channels * layer.kh * layer.kw;
    const int ohw = g.oh * g.ow;
    if (out_grad.n != input.n || out_grad.c != layer.out_channels || out_grad.h != g.oh ||
        out_grad.w != g.ow)
        throw ConfigError("conv2d_backward: out_grad shape " + out_grad.shape_str());
    if (col_cache && col_cache->size() != size_t(input.n) * K * ohw)
        throw ConfigError("conv2d_backward: stale im2col cache");
    std::vector<T> scratch;
    if (!col_cache) scratch.resize(size_t(K) * ohw);
    std::vector<T> dcol(input_grad ? size_t(K) * ohw : 0);
    for (int item = 0; item < input.n; ++item) {
        const T* dy = &out_grad.at(item, 0, 0, 0);
        for (int oc = 0; oc < layer.out_channels; ++oc) {
            const T* dyc = dy + size_t(oc) * ohw;
            T acc = T(0);
            for (int p = 0; p < ohw; ++p) acc += dyc[p];
            layer.bias_grad.data[oc] += acc;
        }
        const T* col;
        if (col_cache) {
            col = col_cache->data() + size_t(item) * K * ohw;
        } else {
            im2col(input, item, layer, g, scratch.data());
            col = scratch.data();
        }
        gemm_nt(layer.out_channels, K, ohw, dy, col, layer.weight_grad.data.data(),
                /*accumulate=*/true);
        if (input_grad) {
            gemm_tn(K, ohw, layer.out_channels, layer.weights.data.data(), dy, dcol.data());
            col2im_accumulate(dcol.data(), item, layer, g, *input_grad);
        }
    }
}

}  // namespace

template <class T>
TensorT<T> conv2d(const TensorT<T>& input, const ConvLayerT<T>& layer,
                  int ph_override, int pw_override) {
    return conv2d_impl(input, layer, ph_override, pw_override,
                       static_cast<std::vector<T>*>(nullptr));
}

template <class T>
void conv2d_backward(const TensorT<T>& input, ConvLayerT<T>& layer,
                     const TensorT<T>& out_grad, TensorT<T>* input_grad,
                     int ph_override, int pw_override) {
    conv2d_backward_impl(input, layer, out_grad, input_grad, ph_override, pw_override,
                         static_cast<const std::vector<T>*>(nullptr));
}

template <class T>
TensorT<T> conv2d_cached(const TensorT<T>& input, const ConvLayerT<T>& layer,
                         std::vector<T>& col_cache, int ph_override, int pw_override) {
    return conv2d_impl(input, layer, ph_override, pw_override, &col_cache);
}

template <class T>
void conv2d_backward_cached(const TensorT<T>& input, ConvLayerT<T>& layer,
                            const TensorT<T>& out_grad, TensorT<T>* input_grad,
                            const std::vector<T>& col_cache, int ph_override, int pw_override) {
    conv2d_backward_impl(input, layer, out_grad, input_grad, ph_override, pw_override,
                         &col_cache);
}

template <class T>
TensorT<T> batchnorm(const TensorT<T>& input, BatchNormLayerT<T>& layer, BnSavedT<T>* saved) {
    if (input.c != layer.channels)
        throw ConfigError("batchnorm: input has " + std::to_string(input.c) +
                          " channels, layer expects " + std::to_string(layer.channels));
    const int64_t per_channel = int64_t(input.n) * input.h * input.w;
    if (per_channel == 0) throw ConfigError("batchnorm: empty batch");

    const bool train = layer.mode == BatchNormLayerT<T>::Mode::train;
    TensorT<T> out(input.n, input.c, input.h, input.w);
    if (saved) {
        saved->xhat = TensorT<T>(input.n, input.c, input.h, input.w);
        saved->inv_std.assign(static_cast<size_t>(input.c), T(0));
        saved->train_mode = train;
    }

    const int64_t hw = int64_t(input.h) * input.w;
    for (int ch = 0; ch < input.c; ++ch) {
        T mean, var;
        if (train) {
            double sum = 0.0, sq = 0.0;
            for (int item = 0; item < input.n; ++item) {
                const T* src = &input.at(item, ch, 0, 0);
                for (int64_t p = 0; p < hw; ++p) {
                    double v = double(src[p]);
                    sum += v;
                    sq += v * v;
                }
            }
            double mu = sum / double(per_channel);
            double v2 = sq / double(per_channel) - mu * mu;
            if (v2 < 0.0) v2 = 0.0;  // biased variance, clipped against roundoff
            mean = T(mu);
            var = T(v2);
            layer.running_mean.data[ch] =
                T((1.0 - layer.momentum) * double(layer.running_mean.data[ch]) + layer.momentum * mu);
            layer.running_var.data[ch] =
                T((1.0 - layer.momentum) * double(layer.running_var.data[ch]) + layer.momentum * v2);
        } else {
            mean = layer.running_mean.data[ch];
            var = layer.running_var.data[ch];
        }
        T inv_std = T(1.0 / std::sqrt(double(var) + layer.epsilon));
        T gm = layer.gamma.data[ch];
        T bt = layer.beta.data[ch];
        for (int item = 0; item < input.n; ++item) {
            const T* src = &input.at(item, ch, 0, 0);
            T* dst = &out.at(item, ch, 0, 0);
            T* sx = saved ? &saved->xhat.at(item, ch, 0, 0) : nullptr;
            for (int64_t p = 0; p < hw; ++p) {
                T xh = (src[p] - mean) * inv_std;
                if (sx) sx[p] = xh;
                dst[p] = gm * xh + bt;
            }
        }
        if (saved) saved->inv_std[static_cast<size_t>(ch)] = inv_std;
    }
    ensure_finite(out, "batchnorm");
    return out;
}

template <class T>
void batchnorm_backward(const BnSavedT<T>& saved, BatchNormLayerT<T>& layer,
                        const TensorT<T>& out_grad, TensorT<T>* input_grad) {
    const TensorT<T>& xhat = saved.xhat;
    if (!out_grad.same_shape(xhat))
        throw ConfigError("batchnorm_backward: grad shape " + out_grad.shape_str());
    const int64_t hw = int64_t(xhat.h) * xhat.w;
    const double inv_count = 1.0 / (double(xhat.n) * hw);
    for (int ch = 0; ch < xhat.c; ++ch) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int item = 0; item < xhat.n; ++item) {
            const T* dy = &out_grad.at(item, ch, 0, 0);
            const T* xh = &xhat.at(item, ch, 0, 0);
            for (int64_t p = 0; p < hw; ++p) {
                sum_dy += double(dy[p]);
                sum_dy_xhat += double(dy[p]) * double(xh[p]);
            }
        }
        layer.beta_grad.data[ch] += T(sum_dy);
        layer.gamma_grad.data[ch] += T(sum_dy_xhat);
        if (!input_grad) continue;
        T gm = layer.gamma.data[ch];
        T istd = saved.inv_std[static_cast<size_t>(ch)];
        if (saved.train_mode) {
            T mean_dy = T(sum_dy * inv_count);
            T mean_dy_xhat = T(sum_dy_xhat * inv_count);
            for (int item = 0; item < xhat.n; ++item) {
                const T* dy = &out_grad.at(item, ch, 0, 0);
                const T* xh = &xhat.at(item, ch, 0, 0);
                T* dx = &input_grad->at(item, ch, 0, 0);
                for (int64_t p = 0; p < hw; ++p)
                    dx[p] += gm * istd * (dy[p] - mean_dy - xh[p] * mean_dy_xhat);
            }
        } else {
            for (int item = 0; item < xhat.n; ++item) {
                const T* dy = &out_grad.at(item, ch, 0, 0);
                T* dx = &input_grad->at(item, ch, 0, 0);
                for (int64_t p = 0; p < hw; ++p) dx[p] += gm * istd * dy[p];
            }
        }
    }
}

template <class T>
TensorT<T> relu(const TensorT<T>& input) {
    TensorT<T> out(input.n, input.c, input.h, input.w);
    for (size_t i = 0; i < input.data.size(); ++i)
        out.data[i] = input.data[i] > T(0) ? input.data[i] : T(0);
    ensure_finite(out, "relu");
    return out;
}

namespace {

template <class T>
void check_matrix_stack(const TensorT<T>& t, const char* who) {
    if (t.c != 1)
        throw ConfigError(std::string(who) + ": expected matrix stack (c==1), got " + t.shape_str());
}

}  // namespace

template <class T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b, bool trans_b) {
    check_matrix_stack(a, "matmul");
    check_matrix_stack(b, "matmul");
    if (a.n != b.n) throw ConfigError("matmul: batch mismatch");
    const int inner_b = trans_b ? b.w : b.h;
    const int cols = trans_b ? b.h : b.w;
    if (a.w != inner_b)
        throw ConfigError("matmul: inner dimensions " + a.shape_str() + " vs " + b.shape_str());
    TensorT<T> out(a.n, 1, a.h, cols);
    for (int item = 0; item < a.n; ++item) {
        const T* pa = &a.m_at(item, 0, 0);
        const T* pb = &b.m_at(item, 0, 0);
        T* pc = &out.m_at(item, 0, 0);
        if (trans_b)
            gemm_nt(a.h, cols, a.w, pa, pb, pc);
        else
            gemm_nn(a.h, cols, a.w, pa, pb, pc);
    }
    ensure_finite(out, "matmul");
    return out;
}

template <class T>
TensorT<T> softmax_rows(const TensorT<T>& logits) {
    check_matrix_stack(logits, "softmax_rows");
    if (!logits.all_finite()) throw NumericError("softmax_rows: non-finite logits");
    TensorT<T> out(logits.n, 1, logits.h, logits.w);
    const int k = logits.w;
    for (int item = 0; item < logits.n; ++item) {
        for (int r = 0; r < logits.h; ++r) {
            const T* z = &logits.m_at(item, r, 0);
            T* p = &out.m_at(item, r, 0);
            T zmax = z[0];
            for (int j = 1; j < k; ++j) zmax = std::max(zmax, z[j]);
            T sum = T(0);
            for (int j = 0; j < k; ++j) {
                p[j] = std::exp(z[j] - zmax);
                sum += p[j];
            }
            T inv = T(1) / sum;
            for (int j = 0; j < k; ++j) p[j] *= inv;
        }
    }
    ensure_finite(out, "softmax_rows");
    return out;
}

template <class T>
TensorT<T> adaptive_avg_pool(const TensorT<T>& input, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1 || out_h > input.h || out_w > input.w)
        throw ConfigError("adaptive_avg_pool: pool size " + std::to_string(out_h) + "x" +
                          std::to_string(out_w) + " vs input " + input.shape_str());
    TensorT<T> out(input.n, input.c, out_h, out_w);
    for (int item = 0; item < input.n; ++item) {
        for (int ch = 0; ch < input.c; ++ch) {
            for (int oy = 0; oy < out_h; ++oy) {
                int y0 = oy * input.h / out_h;
                int y1 = (oy + 1) * input.h / out_h;
                for (int ox = 0; ox < out_w; ++ox) {
                    int x0 = ox * input.w / out_w;
                    int x1 = (ox + 1) * input.w / out_w;
                    T acc = T(0);
                    for (int y = y0; y < y1; ++y)
                        for (int x = x0; x < x1; ++x) acc += input.at(item, ch, y, x);
                    out.at(item, ch, oy, ox) = acc / T((y1 - y0) * (x1 - x0));
                }
            }
        }
    }
    ensure_finite(out, "adaptive_avg_pool");
    return out;
}

template <class T>
TensorT<T> image_to_rows(const TensorT<T>& x) {
    TensorT<T> out(x.n, 1, x.h * x.w, x.c);
    for (int item = 0; item < x.n; ++item)
        for (int ch = 0; ch < x.c; ++ch) {
            const T* src = &x.at(item, ch, 0, 0);
            for (int p = 0; p < x.h * x.w; ++p) out.m_at(item, p, ch) = src[p];
        }
    return out;
}

template <class T>
TensorT<T> rows_to_image(const TensorT<T>& rows, int c, int h, int w) {
    check_matrix_stack(rows, "rows_to_image");
    if (rows.h != h * w || rows.w != c)
        throw ConfigError("rows_to_image: matrix " + rows.shape_str() + " does not match " +
                          std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w));
    TensorT<T> out(rows.n, c, h, w);
    for (int item = 0; item < rows.n; ++item)
        for (int ch = 0; ch < c; ++ch) {
            T* dst = &out.at(item, ch, 0, 0);
            for (int p = 0; p < h * w; ++p) dst[p] = rows.m_at(item, p, ch);
        }
    return out;
}

template <class T>
TensorT<T> concat_channels(const std::vector<const TensorT<T>*>& parts) {
    if (parts.empty()) throw ConfigError("concat_channels: no inputs");
    int total_c = 0;
    for (const auto* p : parts) {
        if (p->n != parts[0]->n || p->h != parts[0]->h || p->w != parts[0]->w)
            throw ConfigError("concat_channels: mismatched shapes");
        total_c += p->c;
    }
    TensorT<T> out(parts[0]->n, total_c, parts[0]->h, parts[0]->w);
    for (int item = 0; item < out.n; ++item) {
        int ch_off = 0;
        for (const auto* p : parts) {
            for (int ch = 0; ch < p->c; ++ch) {
                const T* src = &p->at(item, ch, 0, 0);
                T* dst = &out.at(item, ch_off + ch, 0, 0);
                std::copy(src, src + size_t(p->h) * p->w, dst);
            }
            ch_off += p->c;
        }
    }
    return out;
}

template <class T>
TensorT<T> concat_rows(const std::vector<const TensorT<T>*>& parts) {
    if (parts.empty()) throw ConfigError("concat_rows: no inputs");
    int total_r = 0;
    for (const auto* p : parts) {
        check_matrix_stack(*p, "concat_rows");
        if (p->n != parts[0]->n || p->w != parts[0]->w)
            throw ConfigError("concat_rows: mismatched shapes");
        total_r += p->h;
    }
    TensorT<T> out(parts[0]->n, 1, total_r, parts[0]->w);
    for (int item = 0; item < out.n; ++item) {
        int row_off = 0;
        for (const auto* p : parts) {
            const T* src = &p->m_at(item, 0, 0);
            T* dst = &out.m_at(item, row_off, 0);
            std::copy(src, src + size_t(p->h) * p->w, dst);
            row_off += p->h;
        }
    }
    return out;
}

#define PNEN_INSTANTIATE_OPS(T)                                                                  \
    template void gemm_nn<T>(int, int, int, const T*, const T*, T*, bool);                       \
    template void gemm_nt<T>(int, int, int, const T*, const T*, T*, bool);                       \
    template void gemm_tn<T>(int, int, int, const T*, const T*, T*, bool);                       \
    template TensorT<T> conv2d<T>(const TensorT<T>&, const ConvLayerT<T>&, int, int);            \
    template void conv2d_backward<T>(const TensorT<T>&, ConvLayerT<T>&, const TensorT<T>&,       \
                                     TensorT<T>*, int, int);                                     \
    template TensorT<T> conv2d_cached<T>(const TensorT<T>&, const ConvLayerT<T>&,                \
                                         std::vector<T>&, int, int);                             \
    template void conv2d_backward_cached<T>(const TensorT<T>&, ConvLayerT<T>&,                   \
                                            const TensorT<T>&, TensorT<T>*,                      \
                                            const std::vector<T>&, int, int);                    \
    template TensorT<T> batchnorm<T>(const TensorT<T>&, BatchNormLayerT<T>&, BnSavedT<T>*);      \
    template void batchnorm_backward<T>(const BnSavedT<T>&, BatchNormLayerT<T>&,                 \
                                        const TensorT<T>&, TensorT<T>*);                         \
    template TensorT<T> relu<T>(const TensorT<T>&);                                              \
    template TensorT<T> matmul<T>(const TensorT<T>&, const TensorT<T>&, bool);                   \
    template TensorT<T> softmax_rows<T>(const TensorT<T>&);                                      \
    template TensorT<T> adaptive_avg_pool<T>(const TensorT<T>&, int, int);                       \
    template TensorT<T> image_to_rows<T>(const TensorT<T>&);                                     \
    template TensorT<T> rows_to_image<T>(const TensorT<T>&, int, int, int);                      \
    template TensorT<T> concat_channels<T>(const std::vector<const TensorT<T>*>&);               \
    template TensorT<T> concat_rows<T>(const std::vector<const TensorT<T>*>&);

PNEN_INSTANTIATE_OPS(float)
PNEN_INSTANTIATE_OPS(double)

#undef PNEN_INSTANTIATE_OPS

}  // namespace pnen
