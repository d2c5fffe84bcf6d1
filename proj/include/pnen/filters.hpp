#ifndef PNEN_FILTERS_HPP_
#define PNEN_FILTERS_HPP_

#include <string>

#include "pnen/tensor.hpp"

namespace pnen {

enum class FilterKind { gaussian, median, weighted_median };

// Deterministic classical smoothing filters used as imitation targets.
// All operate per channel on a single image with replicate-edge boundary.
struct FilterSpec {
    FilterKind kind = FilterKind::gaussian;
    int radius = 1;              // window radius for the median variants
    double sigma_spatial = 1.5;  // Gaussian sigma; spatial sigma for weighted median
    double sigma_range = 0.1;    // range sigma, weighted median only

    void validate() const;
    std::string describe() const;
};

FilterKind parse_filter_kind(const std::string& name);
const char* filter_kind_name(FilterKind kind);

// Separable Gaussian, kernel truncated at 3*sigma and normalized to sum 1.
template <class T>
TensorT<T> gaussian_blur(const TensorT<T>& img, const FilterSpec& spec);

// Per-pixel median over the (2r+1)^2 replicate-padded window.
template <class T>
TensorT<T> median_filter(const TensorT<T>& img, const FilterSpec& spec);

// Per-pixel weighted median with Gaussian spatial and range weights; output
// is the smallest window value whose cumulative weight reaches half the
// total.
template <class T>
TensorT<T> weighted_median(const TensorT<T>& img, const FilterSpec& spec);

template <class T>
TensorT<T> apply_filter(const TensorT<T>& img, const FilterSpec& spec);

#define PNEN_FILTERS_EXTERN(T)                                                \
    extern template TensorT<T> gaussian_blur<T>(const TensorT<T>&, const FilterSpec&);   \
    extern template TensorT<T> median_filter<T>(const TensorT<T>&, const FilterSpec&);   \
    extern template TensorT<T> weighted_median<T>(const TensorT<T>&, const FilterSpec&); \
    extern template TensorT<T> apply_filter<T>(const TensorT<T>&, const FilterSpec&);

PNEN_FILTERS_EXTERN(float)
PNEN_FILTERS_EXTERN(double)
#undef PNEN_FILTERS_EXTERN

}  // namespace pnen

#endif  // PNEN_FILTERS_HPP_
