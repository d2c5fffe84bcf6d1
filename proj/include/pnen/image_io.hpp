#ifndef PNEN_IMAGE_IO_HPP_
#define PNEN_IMAGE_IO_HPP_

#include <string>

#include "pnen/tensor.hpp"

namespace pnen {

// Binary netpbm only: P5 (gray) and P6 (color), 8-bit, maxval 255.
// Reads scale bytes to [0,1]; writes clamp to [0,1] and round half away
// from zero. read∘write∘read is the identity on 8-bit data.

template <class T>
TensorT<T> read_image(const std::string& path);  // (1,1,h,w) or (1,3,h,w)

template <class T>
void write_image(const TensorT<T>& img, const std::string& path);

uint8_t quantize_u8(double v);  // clamp + round half away from zero

extern template TensorT<float> read_image<float>(const std::string&);
extern template TensorT<double> read_image<double>(const std::string&);
extern template void write_image<float>(const TensorT<float>&, const std::string&);
extern template void write_image<double>(const TensorT<double>&, const std::string&);

}  // namespace pnen

#endif  // PNEN_IMAGE_IO_HPP_
