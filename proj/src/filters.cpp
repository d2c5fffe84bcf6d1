#include "pnen/filters.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace pnen {

void FilterSpec::validate() const {
    if (radius < 1) throw ConfigError("filter spec: radius must be >= 1");
    if (sigma_spatial <= 0.0 || sigma_range <= 0.0)
        throw ConfigError("filter spec: sigmas must be positive");
}

std::string FilterSpec::describe() const {
    std::string s = filter_kind_name(kind);
    switch (kind) {
        case FilterKind::gaussian:
            return s + "(sigma=" + std::to_string(sigma_spatial) + ")";
        case FilterKind::median:
            return s + "(r=" + std::to_string(radius) + ")";
        case FilterKind::weighted_median:
            return s + "(r=" + std::to_string(radius) + ",ss=" + std::to_string(sigma_spatial) +
                   ",sr=" + std::to_string(sigma_range) + ")";
    }
    return s;
}

FilterKind parse_filter_kind(const std::string& name) {
    if (name == "gaussian") return FilterKind::gaussian;
    if (name == "median") return FilterKind::median;
    if (name == "weighted_median") return FilterKind::weighted_median;
    throw ConfigError("unknown filter kind '" + name + "'");
}

const char* filter_kind_name(FilterKind kind) {
    switch (kind) {
        case FilterKind::gaussian: return "gaussian";
        case FilterKind::median: return "median";
        case FilterKind::weighted_median: return "weighted_median";
    }
    return "?";
}

namespace {

inline int clamp_idx(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

template <class T>
void check_single_image(const TensorT<T>& img, const char* who) {
    if (img.n != 1) throw ConfigError(std::string(who) + ": expects a single image");
}

std::vector<double> gaussian_kernel(double sigma) {
    int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double v = std::exp(-0.5 * (double(i) * i) / (sigma * sigma));
        k[static_cast<size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

}  // namespace

template <class T>
TensorT<T> gaussian_blur(const TensorT<T>& img, const FilterSpec& spec) {
    check_single_image(img, "gaussian_blur");
    spec.validate();
    std::vector<double> kernel = gaussian_kernel(spec.sigma_spatial);
    int radius = (static_cast<int>(kernel.size()) - 1) / 2;
    TensorT<T> tmp(1, img.c, img.h, img.w);
    TensorT<T> out(1, img.c, img.h, img.w);
    for (int ch = 0; ch < img.c; ++ch) {
        for (int y = 0; y < img.h; ++y)  // horizontal pass
            for (int x = 0; x < img.w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[static_cast<size_t>(i + radius)] *
                           double(img.at(0, ch, y, clamp_idx(x + i, img.w)));
                tmp.at(0, ch, y, x) = T(acc);
            }
        for (int y = 0; y < img.h; ++y)  // vertical pass
            for (int x = 0; x < img.w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[static_cast<size_t>(i + radius)] *
                           double(tmp.at(0, ch, clamp_idx(y + i, img.h), x));
                out.at(0, ch, y, x) = T(acc);
            }
    }
    ensure_finite(out, "gaussian_blur");
    return out;
}

template <class T>
TensorT<T> median_filter(const TensorT<T>& img, const FilterSpec& spec) {
    check_single_image(img, "median_filter");
    spec.validate();
    const int r = spec.radius;
    TensorT<T> out(1, img.c, img.h, img.w);
    std::vector<T> window;
    window.reserve(static_cast<size_t>((2 * r + 1) * (2 * r + 1)));
    for (int ch = 0; ch < img.c; ++ch)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                window.clear();
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx)
                        window.push_back(
                            img.at(0, ch, clamp_idx(y + dy, img.h), clamp_idx(x + dx, img.w)));
                // lower median: index (count-1)/2 of the sorted window
                size_t mid = (window.size() - 1) / 2;
                std::nth_element(window.begin(), window.begin() + mid, window.end());
                out.at(0, ch, y, x) = window[mid];
            }
    ensure_finite(out, "median_filter");
    return out;
}

template <class T>
TensorT<T> weighted_median(const TensorT<T>& img, const FilterSpec& spec) {
    check_single_image(img, "weighted_median");
    spec.validate();
    const int r = spec.radius;
    const double inv2ss = 1.0 / (2.0 * spec.sigma_spatial * spec.sigma_spatial);
    const double inv2sr = 1.0 / (2.0 * spec.sigma_range * spec.sigma_range);
    TensorT<T> out(1, img.c, img.h, img.w);
    std::vector<std::pair<T, double>> window;  // (value, weight)
    window.reserve(static_cast<size_t>((2 * r + 1) * (2 * r + 1)));
    for (int ch = 0; ch < img.c; ++ch)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                double center = double(img.at(0, ch, y, x));
                window.clear();
                double total = 0.0;
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx) {
                        T v = img.at(0, ch, clamp_idx(y + dy, img.h), clamp_idx(x + dx, img.w));
                        double dv = double(v) - center;
                        double wgt = std::exp(-(double(dy) * dy + double(dx) * dx) * inv2ss) *
                                     std::exp(-dv * dv * inv2sr);
                        window.push_back({v, wgt});
                        total += wgt;
                    }
                std::sort(window.begin(), window.end(),
                          [](const auto& a, const auto& b) { return a.first < b.first; });
                double half = 0.5 * total;
                double cum = 0.0;
                T result = window.back().first;
                for (const auto& [v, wgt] : window) {
                    cum += wgt;
                    if (cum >= half) {
                        result = v;
                        break;
                    }
                }
                out.at(0, ch, y, x) = result;
            }
    ensure_finite(out, "weighted_median");
    return out;
}

template <class T>
TensorT<T> apply_filter(const TensorT<T>& img, const FilterSpec& spec) {
    switch (spec.kind) {
        case FilterKind::gaussian: return gaussian_blur(img, spec);
        case FilterKind::median: return median_filter(img, spec);
        case FilterKind::weighted_median: return weighted_median(img, spec);
    }
    throw ConfigError("apply_filter: bad filter kind");
}

#define PNEN_FILTERS_INST(T)                                                                     \
    template TensorT<T> gaussian_blur<T>(const TensorT<T>&, const FilterSpec&);                  \
    template TensorT<T> median_filter<T>(const TensorT<T>&, const FilterSpec&);                  \
    template TensorT<T> weighted_median<T>(const TensorT<T>&, const FilterSpec&);                \
    template TensorT<T> apply_filter<T>(const TensorT<T>&, const FilterSpec&);

PNEN_FILTERS_INST(float)
PNEN_FILTERS_INST(double)
#undef PNEN_FILTERS_INST

}  // namespace pnen
