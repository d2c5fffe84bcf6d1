#include "pnen/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pnen {

template <class T>
TensorT<T>::TensorT(int n_, int c_, int h_, int w_, T fill) : n(n_), c(c_), h(h_), w(w_) {
    if (n < 0 || c < 0 || h < 0 || w < 0)
        throw ConfigError("tensor: negative dimension in " + shape_str());
    data.assign(static_cast<size_t>(numel()), fill);
}

template <class T>
TensorT<T> TensorT<T>::scalar(T v) {
    TensorT t(1, 1, 1, 1);
    t.data[0] = v;
    return t;
}

template <class T>
TensorT<T> TensorT<T>::matrix(int rows, int cols, T fill) {
    return TensorT(1, 1, rows, cols, fill);
}

template <class T>
std::string TensorT<T>::shape_str() const {
    std::ostringstream os;
    os << "(" << n << "," << c << "," << h << "," << w << ")";
    return os.str();
}

template <class T>
void TensorT<T>::fill(T v) {
    std::fill(data.begin(), data.end(), v);
}

template <class T>
bool TensorT<T>::all_finite() const {
    for (const T& v : data)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

template <class T>
T TensorT<T>::max_abs_diff(const TensorT& o) const {
    if (!same_shape(o))
        throw ConfigError("max_abs_diff: shape mismatch " + shape_str() + " vs " + o.shape_str());
    T m = T(0);
    for (size_t i = 0; i < data.size(); ++i)
        m = std::max(m, std::abs(data[i] - o.data[i]));
    return m;
}

template <class T>
void ensure_finite(const TensorT<T>& t, const char* op) {
    if (!t.all_finite())
        throw NumericError(std::string(op) + ": non-finite value in result " + t.shape_str());
}

template struct TensorT<float>;
template struct TensorT<double>;
template void ensure_finite<float>(const TensorT<float>&, const char*);
template void ensure_finite<double>(const TensorT<double>&, const char*);

}  // namespace pnen
