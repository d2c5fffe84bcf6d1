#ifndef PNEN_NONLOCAL_HPP_
#define PNEN_NONLOCAL_HPP_

#include <string>
#include <vector>

#include "pnen/autograd.hpp"
#include "pnen/layers.hpp"

namespace pnen {

// Baseline non-local block: full-resolution query/reference/value embeddings
// via 1x1 convs, softmax attention over all pixel pairs, 1x1 transform,
// residual add.
struct NlbConfig {
    int d = 64;  // input channels
    int m = 64;  // query/reference embedding dim
    int n = 32;  // value embedding dim

    void validate() const;
};

// Pyramid non-local block: full-resolution query; per scale s the reference
// and value embeddings come from convs with kernel = stride = 2^s. Scale 0
// (stride 1) is allowed and reproduces the baseline block.
struct PnbConfig {
    int d = 64;
    int m = 64;
    int n = 32;
    std::vector<int> scales = {1, 2, 3};

    int stride_of(size_t idx) const { return 1 << scales[idx]; }
    int num_scales() const { return static_cast<int>(scales.size()); }
    void validate() const;
};

// Asymmetric pyramid non-local block: keys/values are adaptive-average-pooled
// embeddings at the given output sizes, concatenated into one token set with
// a single softmax over all tokens.
struct ApnbConfig {
    int d = 64;
    int m = 64;
    int n = 32;
    std::vector<int> pool_sizes = {1, 3, 6, 8};

    int token_count() const;
    void validate() const;
};

// One correlation row of a query pixel against a scale's reference grid,
// reshaped to that grid. Weights are non-negative and sum to 1.
template <class T>
struct AttentionDumpT {
    int scale = 0;   // scale exponent s
    int stride = 1;  // 2^s
    int qy = 0, qx = 0;
    TensorT<T> weights;  // (1, 1, ref_h, ref_w)
};

template <class T>
struct NlbLayerT {
    NlbConfig cfg;
    ConvLayerT<T> theta, phi, g, psi;

    NlbLayerT() = default;
    NlbLayerT(const NlbConfig& cfg_, Rng& rng);

    VarT<T> forward(TapeT<T>& tape, const VarT<T>& x);
    TensorT<T> forward(const TensorT<T>& x);  // inference-only convenience

    void collect_params(const std::string& prefix, std::vector<ParamRefT<T>>& out);
    void zero_grad();
    int64_t param_count() const;
};

template <class T>
struct PnbLayerT {
    PnbConfig cfg;
    ConvLayerT<T> theta;
    std::vector<ConvLayerT<T>> phi;  // one per scale
    std::vector<ConvLayerT<T>> g;
    ConvLayerT<T> psi;  // (S*n) -> d

    PnbLayerT() = default;
    PnbLayerT(const PnbConfig& cfg_, Rng& rng);

    VarT<T> forward(TapeT<T>& tape, const VarT<T>& x);
    TensorT<T> forward(const TensorT<T>& x);

    // Correlation rows of one query pixel against every scale's references.
    std::vector<AttentionDumpT<T>> dump_attention(const TensorT<T>& x, int qy, int qx) const;

    void collect_params(const std::string& prefix, std::vector<ParamRefT<T>>& out);
    void zero_grad();
    int64_t param_count() const;
};

template <class T>
struct ApnbLayerT {
    ApnbConfig cfg;
    ConvLayerT<T> theta, phi, g, psi;

    ApnbLayerT() = default;
    ApnbLayerT(const ApnbConfig& cfg_, Rng& rng);

    VarT<T> forward(TapeT<T>& tape, const VarT<T>& x);
    TensorT<T> forward(const TensorT<T>& x);

    void collect_params(const std::string& prefix, std::vector<ParamRefT<T>>& out);
    void zero_grad();
    int64_t param_count() const;
};

// Symmetric per-side zero padding that completes the last kernel-sized block
// when the stride does not divide the extent (output = ceil(extent/k)).
int tiling_pad(int extent, int k);

// Writes <prefix>.pgm (weights min-max scaled to 0..255) and <prefix>.txt
// (raw values, one row per line, after a "scale stride qy qx h w" header).
template <class T>
void write_attention_dump(const AttentionDumpT<T>& dump, const std::string& prefix);

#define PNEN_NONLOCAL_EXTERN(T)                                                                  \
    extern template struct NlbLayerT<T>;                                                         \
    extern template struct PnbLayerT<T>;                                                         \
    extern template struct ApnbLayerT<T>;                                                        \
    extern template void write_attention_dump<T>(const AttentionDumpT<T>&, const std::string&);

PNEN_NONLOCAL_EXTERN(float)
PNEN_NONLOCAL_EXTERN(double)
#undef PNEN_NONLOCAL_EXTERN

using NlbLayer = NlbLayerT<double>;
using PnbLayer = PnbLayerT<double>;
using ApnbLayer = ApnbLayerT<double>;
using AttentionDump = AttentionDumpT<double>;

}  // namespace pnen

#endif  // PNEN_NONLOCAL_HPP_
