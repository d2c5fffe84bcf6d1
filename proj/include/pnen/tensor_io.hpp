#ifndef PNEN_TENSOR_IO_HPP_
#define PNEN_TENSOR_IO_HPP_

#include <string>

#include "pnen/tensor.hpp"

namespace pnen {

// Raw tensor file format "PNT1":
//   magic line       "PNT1\n"
//   ASCII header     "n c h w dtype\n"   with dtype in {f32, f64}
//   payload          n*c*h*w little-endian values
// Round-trips bit-exactly within one dtype.

struct PntInfo {
    int n = 0, c = 0, h = 0, w = 0;
    std::string dtype;  // "f32" or "f64"
};

PntInfo probe_pnt(const std::string& path);

template <class T>
void write_pnt(const TensorT<T>& t, const std::string& path);

// Reads a PNT1 file. A dtype narrower or wider than T is converted by a
// plain cast; matching dtypes are bit-exact.
template <class T>
TensorT<T> read_pnt(const std::string& path);

extern template void write_pnt<float>(const TensorT<float>&, const std::string&);
extern template void write_pnt<double>(const TensorT<double>&, const std::string&);
extern template TensorT<float> read_pnt<float>(const std::string&);
extern template TensorT<double> read_pnt<double>(const std::string&);

}  // namespace pnen

#endif  // PNEN_TENSOR_IO_HPP_
