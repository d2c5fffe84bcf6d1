#ifndef PNEN_TENSOR_HPP_
#define PNEN_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pnen/errors.hpp"

namespace pnen {

// Dense 4-d array in (batch, channel, height, width) row-major order.
// The universal carrier for images, feature maps, gradients, and (with
// n == c == 1) plain matrices of shape h x w.
template <class T>
struct TensorT {
    using value_type = T;

    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    TensorT() = default;
    TensorT(int n_, int c_, int h_, int w_, T fill = T(0));

    static TensorT scalar(T v);
    static TensorT matrix(int rows, int cols, T fill = T(0));

    int64_t numel() const { return int64_t(n) * c * h * w; }

    bool same_shape(const TensorT& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    std::string shape_str() const;

    T& at(int in, int ic, int iy, int ix) {
        return data[((size_t(in) * c + ic) * h + iy) * w + ix];
    }
    const T& at(int in, int ic, int iy, int ix) const {
        return data[((size_t(in) * c + ic) * h + iy) * w + ix];
    }

    // Matrix accessors; meaningful when the tensor is a stack of n matrices
    // (c == 1) or a single matrix (n == c == 1).
    int rows() const { return h; }
    int cols() const { return w; }
    T& m_at(int item, int r, int col) {
        return data[(size_t(item) * h + r) * w + col];
    }
    const T& m_at(int item, int r, int col) const {
        return data[(size_t(item) * h + r) * w + col];
    }

    void fill(T v);
    bool all_finite() const;
    T max_abs_diff(const TensorT& o) const;
};

// Throws NumericError when the tensor holds a NaN or infinity. Every public
// forward operation funnels its result through this.
template <class T>
void ensure_finite(const TensorT<T>& t, const char* op);

using Tensor = TensorT<double>;
using Tensor32 = TensorT<float>;

extern template struct TensorT<float>;
extern template struct TensorT<double>;
extern template void ensure_finite<float>(const TensorT<float>&, const char*);
extern template void ensure_finite<double>(const TensorT<double>&, const char*);

}  // namespace pnen

#endif  // PNEN_TENSOR_HPP_
