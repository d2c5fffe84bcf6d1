#ifndef PNEN_METRICS_HPP_
#define PNEN_METRICS_HPP_

#include "pnen/tensor.hpp"

namespace pnen {

struct QualityScore {
    double psnr = 0.0;  // dB; +infinity for identical images
    double ssim = 0.0;  // in [-1, 1]; 1 iff identical (up to stabilizers)
};

// 10*log10(peak^2 / MSE) over all channels. Identical images report +inf.
template <class T>
double psnr(const TensorT<T>& a, const TensorT<T>& b, double peak);

// Mean local SSIM with an 11x11 Gaussian window (sigma 1.5), K1=0.01,
// K2=0.03, over valid window positions; color images are scored per channel
// and averaged.
template <class T>
double ssim(const TensorT<T>& a, const TensorT<T>& b, double dynamic_range = 1.0);

template <class T>
QualityScore quality(const TensorT<T>& a, const TensorT<T>& b, double peak = 1.0);

#define PNEN_METRICS_EXTERN(T)                                                                   \
    extern template double psnr<T>(const TensorT<T>&, const TensorT<T>&, double);                \
    extern template double ssim<T>(const TensorT<T>&, const TensorT<T>&, double);                \
    extern template QualityScore quality<T>(const TensorT<T>&, const TensorT<T>&, double);

PNEN_METRICS_EXTERN(float)
PNEN_METRICS_EXTERN(double)
#undef PNEN_METRICS_EXTERN

}  // namespace pnen

#endif  // PNEN_METRICS_HPP_
