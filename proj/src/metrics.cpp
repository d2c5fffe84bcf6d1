#include "pnen/metrics.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace pnen {

template <class T>
double psnr(const TensorT<T>& a, const TensorT<T>& b, double peak) {
    if (!a.same_shape(b))
        throw ConfigError("psnr: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    if (peak <= 0.0) throw ConfigError("psnr: peak must be positive");
    double sq = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = double(a.data[i]) - double(b.data[i]);
        sq += d * d;
    }
    double mse = sq / double(a.numel());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;

std::vector<double> ssim_window() {
    std::vector<double> k(kSsimWindow);
    double sum = 0.0;
    int r = kSsimWindow / 2;
    for (int i = 0; i < kSsimWindow; ++i) {
        double d = double(i - r);
        k[static_cast<size_t>(i)] = std::exp(-0.5 * d * d / (kSsimSigma * kSsimSigma));
        sum += k[static_cast<size_t>(i)];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable windowed sum: out(y,x) = sum_{i,j} win(i)win(j) img(y+i, x+j),
// valid positions only.
void window_filter(const std::vector<double>& img, int h, int w, const std::vector<double>& win,
                   std::vector<double>& out) {
    const int k = static_cast<int>(win.size());
    const int oh = h - k + 1, ow = w - k + 1;
    std::vector<double> tmp(static_cast<size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < k; ++i) acc += win[static_cast<size_t>(i)] * img[size_t(y) * w + x + i];
            tmp[size_t(y) * ow + x] = acc;
        }
    out.assign(static_cast<size_t>(oh) * ow, 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < k; ++i) acc += win[static_cast<size_t>(i)] * tmp[size_t(y + i) * ow + x];
            out[size_t(y) * ow + x] = acc;
        }
}

}  // namespace

template <class T>
double ssim(const TensorT<T>& a, const TensorT<T>& b, double dynamic_range) {
    if (!a.same_shape(b))
        throw ConfigError("ssim: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    if (a.h < kSsimWindow || a.w < kSsimWindow)
        throw ConfigError("ssim: image smaller than the 11x11 window: " + a.shape_str());
    if (a.n != 1) throw ConfigError("ssim: expects single images");

    const double c1 = (kSsimK1 * dynamic_range) * (kSsimK1 * dynamic_range);
    const double c2 = (kSsimK2 * dynamic_range) * (kSsimK2 * dynamic_range);
    const std::vector<double> win = ssim_window();

    const int h = a.h, w = a.w;
    const size_t plane = static_cast<size_t>(h) * w;
    std::vector<double> pa(plane), pb(plane), paa(plane), pbb(plane), pab(plane);
    std::vector<double> mu_a, mu_b, raw_aa, raw_bb, raw_ab;

    double total = 0.0;
    for (int ch = 0; ch < a.c; ++ch) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double va = double(a.at(0, ch, y, x));
                double vb = double(b.at(0, ch, y, x));
                size_t i = size_t(y) * w + x;
                pa[i] = va;
                pb[i] = vb;
                paa[i] = va * va;
                pbb[i] = vb * vb;
                pab[i] = va * vb;
            }
        window_filter(pa, h, w, win, mu_a);
        window_filter(pb, h, w, win, mu_b);
        window_filter(paa, h, w, win, raw_aa);
        window_filter(pbb, h, w, win, raw_bb);
        window_filter(pab, h, w, win, raw_ab);
        double acc = 0.0;
        for (size_t i = 0; i < mu_a.size(); ++i) {
            double ma = mu_a[i], mb = mu_b[i];
            double va = raw_aa[i] - ma * ma;
            double vb = raw_bb[i] - mb * mb;
            double cov = raw_ab[i] - ma * mb;
            double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            acc += num / den;
        }
        total += acc / double(mu_a.size());
    }
    return total / double(a.c);
}

template <class T>
QualityScore quality(const TensorT<T>& a, const TensorT<T>& b, double peak) {
    return {psnr(a, b, peak), ssim(a, b, peak)};
}

#define PNEN_METRICS_INST(T)                                                                     \
    template double psnr<T>(const TensorT<T>&, const TensorT<T>&, double);                       \
    template double ssim<T>(const TensorT<T>&, const TensorT<T>&, double);                       \
    template QualityScore quality<T>(const TensorT<T>&, const TensorT<T>&, double);

PNEN_METRICS_INST(float)
PNEN_METRICS_INST(double)
#undef PNEN_METRICS_INST

}  // namespace pnen
