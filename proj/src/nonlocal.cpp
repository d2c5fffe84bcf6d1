#include "pnen/nonlocal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "pnen/image_io.hpp"

namespace pnen {

void NlbConfig::validate() const {
    if (d < 1 || m < 1 || n < 1) throw ConfigError("nlb config: d, m, n must be >= 1");
}

void PnbConfig::validate() const {
    if (d < 1 || m < 1 || n < 1) throw ConfigError("pnb config: d, m, n must be >= 1");
    if (scales.empty()) throw ConfigError("pnb config: scales must be non-empty");
    for (size_t i = 0; i < scales.size(); ++i) {
        if (scales[i] < 0) throw ConfigError("pnb config: scales must be >= 0");
        if (i > 0 && scales[i] <= scales[i - 1])
            throw ConfigError("pnb config: scales must be strictly increasing");
    }
}

void ApnbConfig::validate() const {
    if (d < 1 || m < 1 || n < 1) throw ConfigError("apnb config: d, m, n must be >= 1");
    if (pool_sizes.empty()) throw ConfigError("apnb config: pool_sizes must be non-empty");
    for (int p : pool_sizes)
        if (p < 1) throw ConfigError("apnb config: pool sizes must be >= 1");
}

int ApnbConfig::token_count() const {
    int total = 0;
    for (int p : pool_sizes) total += p * p;
    return total;
}

int tiling_pad(int extent, int k) {
    int remainder = extent % k;
    int missing = remainder == 0 ? 0 : k - remainder;
    return (missing + 1) / 2;
}

namespace {

// softmax(q k^T) v over matrix stacks; shared by all three block variants so
// the degenerate pyramid reproduces the baseline bit for bit.
template <class T>
VarT<T> attention_rows(TapeT<T>& tape, const VarT<T>& q_rows, const VarT<T>& k_rows,
                       const VarT<T>& v_rows) {
    auto logits = matmul(tape, q_rows, k_rows, /*trans_b=*/true);
    auto p = softmax_rows(tape, logits);
    return matmul(tape, p, v_rows);
}

template <class T>
void check_channels(const TensorT<T>& x, int d, const char* who) {
    if (x.c != d)
        throw ConfigError(std::string(who) + ": input has " + std::to_string(x.c) +
                          " channels, block expects " + std::to_string(d));
}

template <class T, class Layer>
TensorT<T> run_untaped(Layer& layer, const TensorT<T>& x) {
    TapeT<T> tape(/*recording=*/false);
    VarT<T> in = make_var(x);
    return layer.forward(tape, in).v();
}

}  // namespace

// --- NLB ---------------------------------------------------------------------

template <class T>
NlbLayerT<T>::NlbLayerT(const NlbConfig& cfg_, Rng& rng) : cfg(cfg_) {
    cfg.validate();
    theta = ConvLayerT<T>(cfg.d, cfg.m, 1);
    phi = ConvLayerT<T>(cfg.d, cfg.m, 1);
    g = ConvLayerT<T>(cfg.d, cfg.n, 1);
    psi = ConvLayerT<T>(cfg.n, cfg.d, 1);
    theta.init_fan_in_uniform(rng);
    phi.init_fan_in_uniform(rng);
    g.init_fan_in_uniform(rng);
    psi.init_zero();  // block starts as the identity
}

template <class T>
VarT<T> NlbLayerT<T>::forward(TapeT<T>& tape, const VarT<T>& x) {
    check_channels(x.v(), cfg.d, "nlb_forward");
    const int h = x.v().h, w = x.v().w;
    auto q = image_to_rows(tape, conv2d(tape, x, theta));
    auto k = image_to_rows(tape, conv2d(tape, x, phi));
    auto v = image_to_rows(tape, conv2d(tape, x, g));
    auto e = attention_rows(tape, q, k, v);
    auto e_img = rows_to_image(tape, e, cfg.n, h, w);
    return add(tape, conv2d(tape, e_img, psi), x);
}

template <class T>
TensorT<T> NlbLayerT<T>::forward(const TensorT<T>& x) {
    return run_untaped(*this, x);
}

template <class T>
void NlbLayerT<T>::collect_params(const std::string& prefix, std::vector<ParamRefT<T>>& out) {
    theta.collect_params(prefix + ".theta", out);
    phi.collect_params(prefix + ".phi", out);
    g.collect_params(prefix + ".g", out);
    psi.collect_params(prefix + ".psi", out);
}

template <class T>
void NlbLayerT<T>::zero_grad() {
    theta.zero_grad();
    phi.zero_grad();
    g.zero_grad();
    psi.zero_grad();
}

template <class T>
int64_t NlbLayerT<T>::param_count() const {
    return theta.param_count() + phi.param_count() + g.param_count() + psi.param_count();
}

// --- PNB ---------------------------------------------------------------------

template <class T>
PnbLayerT<T>::PnbLayerT(const PnbConfig& cfg_, Rng& rng) : cfg(cfg_) {
    cfg.validate();
    theta = ConvLayerT<T>(cfg.d, cfg.m, 1);
    theta.init_fan_in_uniform(rng);
    for (size_t i = 0; i < cfg.scales.size(); ++i) {
        int k = cfg.stride_of(i);
        phi.emplace_back(cfg.d, cfg.m, k, k);
        g.emplace_back(cfg.d, cfg.n, k, k);
        phi.back().init_fan_in_uniform(rng);
        g.back().init_fan_in_uniform(rng);
    }
    psi = ConvLayerT<T>(cfg.num_scales() * cfg.n, cfg.d, 1);
    psi.init_zero();
}

template <class T>
VarT<T> PnbLayerT<T>::forward(TapeT<T>& tape, const VarT<T>& x) {
    check_channels(x.v(), cfg.d, "pnb_forward");
    const int h = x.v().h, w = x.v().w;
    for (size_t i = 0; i < cfg.scales.size(); ++i) {
        int stride = cfg.stride_of(i);
        if (stride > h && stride > w)
            throw ConfigError("pnb_forward: scale stride " + std::to_string(stride) +
                              " exceeds both spatial dims of " + x.v().shape_str());
    }
    auto q = image_to_rows(tape, conv2d(tape, x, theta));
    std::vector<VarT<T>> parts;
    parts.reserve(cfg.scales.size());
    for (size_t i = 0; i < cfg.scales.size(); ++i) {
        int stride = cfg.stride_of(i);
        int pad_h = tiling_pad(h, stride);
        int pad_w = tiling_pad(w, stride);
        auto k_rows = image_to_rows(tape, conv2d(tape, x, phi[i], pad_h, pad_w));
        auto v_rows = image_to_rows(tape, conv2d(tape, x, g[i], pad_h, pad_w));
        auto e = attention_rows(tape, q, k_rows, v_rows);
        parts.push_back(rows_to_image(tape, e, cfg.n, h, w));
    }
    auto cat = parts.size() == 1 ? parts[0] : concat_channels(tape, parts);
    return add(tape, conv2d(tape, cat, psi), x);
}

template <class T>
TensorT<T> PnbLayerT<T>::forward(const TensorT<T>& x) {
    return run_untaped(*this, x);
}

template <class T>
std::vector<AttentionDumpT<T>> PnbLayerT<T>::dump_attention(const TensorT<T>& x, int qy,
                                                            int qx) const {
    check_channels(x, cfg.d, "dump_attention");
    if (x.n != 1) throw ConfigError("dump_attention: expects a single image");
    if (qy < 0 || qy >= x.h || qx < 0 || qx >= x.w)
        throw ConfigError("dump_attention: pixel (" + std::to_string(qy) + "," +
                          std::to_string(qx) + ") outside " + x.shape_str());
    TensorT<T> q_map = conv2d(x, theta);
    std::vector<AttentionDumpT<T>> dumps;
    for (size_t i = 0; i < cfg.scales.size(); ++i) {
        int stride = cfg.stride_of(i);
        TensorT<T> refs = conv2d(x, phi[i], tiling_pad(x.h, stride), tiling_pad(x.w, stride));
        TensorT<T> logits(1, 1, 1, refs.h * refs.w);
        for (int ry = 0; ry < refs.h; ++ry)
            for (int rx = 0; rx < refs.w; ++rx) {
                T acc = T(0);
                for (int ch = 0; ch < cfg.m; ++ch)
                    acc += q_map.at(0, ch, qy, qx) * refs.at(0, ch, ry, rx);
                logits.m_at(0, 0, ry * refs.w + rx) = acc;
            }
        TensorT<T> row = softmax_rows(logits);
        AttentionDumpT<T> dump;
        dump.scale = cfg.scales[i];
        dump.stride = stride;
        dump.qy = qy;
        dump.qx = qx;
        dump.weights = TensorT<T>(1, 1, refs.h, refs.w);
        dump.weights.data = row.data;
        dumps.push_back(std::move(dump));
    }
    return dumps;
}

template <class T>
void PnbLayerT<T>::collect_params(const std::string& prefix, std::vector<ParamRefT<T>>& out) {
    theta.collect_params(prefix + ".theta", out);
    for (size_t i = 0; i < phi.size(); ++i) {
        std::string tag = std::to_string(cfg.scales[i]);
        phi[i].collect_params(prefix + ".phi" + tag, out);
        g[i].collect_params(prefix + ".g" + tag, out);
    }
    psi.collect_params(prefix + ".psi", out);
}

template <class T>
void PnbLayerT<T>::zero_grad() {
    theta.zero_grad();
    for (auto& l : phi) l.zero_grad();
    for (auto& l : g) l.zero_grad();
    psi.zero_grad();
}

template <class T>
int64_t PnbLayerT<T>::param_count() const {
    int64_t total = theta.param_count() + psi.param_count();
    for (const auto& l : phi) total += l.param_count();
    for (const auto& l : g) total += l.param_count();
    return total;
}

// --- APNB --------------------------------------------------------------------

template <class T>
ApnbLayerT<T>::ApnbLayerT(const ApnbConfig& cfg_, Rng& rng) : cfg(cfg_) {
    cfg.validate();
    theta = ConvLayerT<T>(cfg.d, cfg.m, 1);
    phi = ConvLayerT<T>(cfg.d, cfg.m, 1);
    g = ConvLayerT<T>(cfg.d, cfg.n, 1);
    psi = ConvLayerT<T>(cfg.n, cfg.d, 1);
    theta.init_fan_in_uniform(rng);
    phi.init_fan_in_uniform(rng);
    g.init_fan_in_uniform(rng);
    psi.init_zero();
}

template <class T>
VarT<T> ApnbLayerT<T>::forward(TapeT<T>& tape, const VarT<T>& x) {
    check_channels(x.v(), cfg.d, "apnb_forward");
    const int h = x.v().h, w = x.v().w;
    for (int p : cfg.pool_sizes)
        if (p > h || p > w)
            throw ConfigError("apnb_forward: pool size " + std::to_string(p) +
                              " exceeds spatial dims of " + x.v().shape_str());
    auto q = image_to_rows(tape, conv2d(tape, x, theta));
    auto k_map = conv2d(tape, x, phi);
    auto v_map = conv2d(tape, x, g);
    std::vector<VarT<T>> k_tokens, v_tokens;
    for (int p : cfg.pool_sizes) {
        k_tokens.push_back(image_to_rows(tape, adaptive_avg_pool(tape, k_map, p, p)));
        v_tokens.push_back(image_to_rows(tape, adaptive_avg_pool(tape, v_map, p, p)));
    }
    auto keys = k_tokens.size() == 1 ? k_tokens[0] : concat_rows(tape, k_tokens);
    auto values = v_tokens.size() == 1 ? v_tokens[0] : concat_rows(tape, v_tokens);
    auto e = attention_rows(tape, q, keys, values);
    auto e_img = rows_to_image(tape, e, cfg.n, h, w);
    return add(tape, conv2d(tape, e_img, psi), x);
}

template <class T>
TensorT<T> ApnbLayerT<T>::forward(const TensorT<T>& x) {
    return run_untaped(*this, x);
}

template <class T>
void ApnbLayerT<T>::collect_params(const std::string& prefix, std::vector<ParamRefT<T>>& out) {
    theta.collect_params(prefix + ".theta", out);
    phi.collect_params(prefix + ".phi", out);
    g.collect_params(prefix + ".g", out);
    psi.collect_params(prefix + ".psi", out);
}

template <class T>
void ApnbLayerT<T>::zero_grad() {
    theta.zero_grad();
    phi.zero_grad();
    g.zero_grad();
    psi.zero_grad();
}

template <class T>
int64_t ApnbLayerT<T>::param_count() const {
    return theta.param_count() + phi.param_count() + g.param_count() + psi.param_count();
}

// --- dump serialization --------------------------------------------------------

template <class T>
void write_attention_dump(const AttentionDumpT<T>& dump, const std::string& prefix) {
    const TensorT<T>& wts = dump.weights;
    T lo = wts.data[0], hi = wts.data[0];
    for (const T& v : wts.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    TensorT<T> scaled(1, 1, wts.h, wts.w);
    if (hi > lo) {
        for (size_t i = 0; i < wts.data.size(); ++i)
            scaled.data[i] = (wts.data[i] - lo) / (hi - lo);
    } else {
        scaled.fill(T(0.5));  // uniform map: mid-gray
    }
    write_image(scaled, prefix + ".pgm");

    std::ofstream txt(prefix + ".txt", std::ios::trunc);
    if (!txt) throw DataError("cannot write attention sidecar: " + prefix + ".txt");
    txt << dump.scale << " " << dump.stride << " " << dump.qy << " " << dump.qx << " " << wts.h
        << " " << wts.w << "\n";
    char buf[64];
    for (int y = 0; y < wts.h; ++y) {
        for (int x = 0; x < wts.w; ++x) {
            std::snprintf(buf, sizeof buf, "%.17g", double(wts.at(0, 0, y, x)));
            txt << buf << (x + 1 == wts.w ? "" : " ");
        }
        txt << "\n";
    }
}

#define PNEN_NONLOCAL_INST(T)                                                                    \
    template struct NlbLayerT<T>;                                                                \
    template struct PnbLayerT<T>;                                                                \
    template struct ApnbLayerT<T>;                                                               \
    template void write_attention_dump<T>(const AttentionDumpT<T>&, const std::string&);

PNEN_NONLOCAL_INST(float)
PNEN_NONLOCAL_INST(double)
#undef PNEN_NONLOCAL_INST

}  // namespace pnen
