#include "pnen/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "PNT1 payload is little-endian; big-endian hosts are unsupported");

namespace pnen {

namespace {

template <class T>
const char* dtype_name();
template <>
const char* dtype_name<float>() { return "f32"; }
template <>
const char* dtype_name<double>() { return "f64"; }

PntInfo read_header(std::istream& in, const std::string& path) {
    std::string magic;
    if (!std::getline(in, magic) || magic != "PNT1")
        throw DataError("not a PNT1 file: " + path);
    std::string header;
    if (!std::getline(in, header))
        throw DataError("truncated PNT1 header: " + path);
    std::istringstream hs(header);
    PntInfo info;
    if (!(hs >> info.n >> info.c >> info.h >> info.w >> info.dtype))
        throw DataError("malformed PNT1 header '" + header + "': " + path);
    if (info.dtype != "f32" && info.dtype != "f64")
        throw DataError("unknown PNT1 dtype '" + info.dtype + "': " + path);
    if (info.n < 0 || info.c < 0 || info.h < 0 || info.w < 0)
        throw DataError("negative PNT1 dimension: " + path);
    return info;
}

template <class Src, class Dst>
void read_payload(std::istream& in, int64_t count, std::vector<Dst>& out, const std::string& path) {
    std::vector<Src> raw(static_cast<size_t>(count));
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(count * sizeof(Src)));
    if (in.gcount() != static_cast<std::streamsize>(count * sizeof(Src)))
        throw DataError("truncated PNT1 payload: " + path);
    out.resize(raw.size());
    for (size_t i = 0; i < raw.size(); ++i) out[i] = static_cast<Dst>(raw[i]);
}

}  // namespace

PntInfo probe_pnt(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open tensor file: " + path);
    return read_header(in, path);
}

template <class T>
void write_pnt(const TensorT<T>& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write tensor file: " + path);
    out << "PNT1\n"
        << t.n << " " << t.c << " " << t.h << " " << t.w << " " << dtype_name<T>() << "\n";
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(T)));
    if (!out) throw DataError("short write on tensor file: " + path);
}

template <class T>
TensorT<T> read_pnt(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open tensor file: " + path);
    PntInfo info = read_header(in, path);
    TensorT<T> t(info.n, info.c, info.h, info.w);
    if (info.dtype == "f32")
        read_payload<float, T>(in, t.numel(), t.data, path);
    else
        read_payload<double, T>(in, t.numel(), t.data, path);
    return t;
}

template void write_pnt<float>(const TensorT<float>&, const std::string&);
template void write_pnt<double>(const TensorT<double>&, const std::string&);
template TensorT<float> read_pnt<float>(const std::string&);
template TensorT<double> read_pnt<double>(const std::string&);

}  // namespace pnen
