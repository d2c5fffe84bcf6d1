#include "pnen/model.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "pnen/tensor_io.hpp"

namespace pnen {

void ModelConfig::validate() const {
    if (channels < 1) throw ConfigError("model config: channels must be >= 1");
    if (d < 1) throw ConfigError("model config: d must be >= 1");
    if (blocks < 1) throw ConfigError("model config: blocks must be >= 1");
    pnb().validate();
}

// --- DRB ----------------------------------------------------------------------

template <class T>
DrbBlockT<T>::DrbBlockT(int d, Rng& rng) {
    groups.reserve(kDilations.size());
    for (int dil : kDilations) {
        DrbGroupT<T> grp;
        grp.dilation = dil;
        grp.conv1 = ConvLayerT<T>(d, d, 3, 1, dil, dil);
        grp.bn = BatchNormLayerT<T>(d);
        grp.conv2 = ConvLayerT<T>(d, d, 3, 1, dil, dil);
        grp.conv1.init_fan_in_uniform(rng);
        grp.conv2.init_fan_in_uniform(rng);
        groups.push_back(std::move(grp));
    }
}

template <class T>
VarT<T> DrbBlockT<T>::forward(TapeT<T>& tape, const VarT<T>& x) {
    VarT<T> cur = x;
    for (auto& grp : groups) {
        auto t = conv2d(tape, cur, grp.conv1);
        t = batchnorm(tape, t, grp.bn);
        t = relu(tape, t);
        t = conv2d(tape, t, grp.conv2);
        cur = add(tape, cur, t);
    }
    return cur;
}

template <class T>
void DrbBlockT<T>::collect_params(const std::string& prefix, std::vector<ParamRefT<T>>& out) {
    for (size_t i = 0; i < groups.size(); ++i) {
        std::string p = prefix + ".g" + std::to_string(i);
        groups[i].conv1.collect_params(p + ".conv1", out);
        groups[i].bn.collect_params(p + ".bn", out);
        groups[i].conv2.collect_params(p + ".conv2", out);
    }
}

template <class T>
void DrbBlockT<T>::collect_buffers(const std::string& prefix, std::vector<BufferRefT<T>>& out) {
    for (size_t i = 0; i < groups.size(); ++i)
        groups[i].bn.collect_buffers(prefix + ".g" + std::to_string(i) + ".bn", out);
}

template <class T>
void DrbBlockT<T>::zero_grad() {
    for (auto& grp : groups) {
        grp.conv1.zero_grad();
        grp.bn.zero_grad();
        grp.conv2.zero_grad();
    }
}

template <class T>
int64_t DrbBlockT<T>::param_count() const {
    int64_t total = 0;
    for (const auto& grp : groups)
        total += grp.conv1.param_count() + grp.bn.param_count() + grp.conv2.param_count();
    return total;
}

// --- exit net -------------------------------------------------------------------

template <class T>
ExitNetT<T>::ExitNetT(int d, int out_c, Rng& rng) {
    conv1 = ConvLayerT<T>(d, d, 3, 1, 1);
    conv2 = ConvLayerT<T>(d, d, 3, 1, 1);
    conv3 = ConvLayerT<T>(d, out_c, 3, 1, 1);
    conv1.init_fan_in_uniform(rng);
    conv2.init_fan_in_uniform(rng);
    conv3.init_fan_in_uniform(rng);
}

template <class T>
VarT<T> ExitNetT<T>::forward(TapeT<T>& tape, const VarT<T>& x) {
    auto t = relu(tape, conv2d(tape, x, conv1));
    t = relu(tape, conv2d(tape, t, conv2));
    return conv2d(tape, t, conv3);
}

template <class T>
void ExitNetT<T>::collect_params(const std::string& prefix, std::vector<ParamRefT<T>>& out) {
    conv1.collect_params(prefix + ".conv1", out);
    conv2.collect_params(prefix + ".conv2", out);
    conv3.collect_params(prefix + ".conv3", out);
}

template <class T>
void ExitNetT<T>::zero_grad() {
    conv1.zero_grad();
    conv2.zero_grad();
    conv3.zero_grad();
}

template <class T>
int64_t ExitNetT<T>::param_count() const {
    return conv1.param_count() + conv2.param_count() + conv3.param_count();
}

// --- full model -----------------------------------------------------------------

template <class T>
PnenModelT<T> PnenModelT<T>::seeded(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    PnenModelT<T> model;
    model.cfg = cfg;
    Rng rng(seed, /*stream=*/0x706e656eULL);
    model.entry = ConvLayerT<T>(cfg.channels, cfg.d, 3, 1, 1);
    model.entry.init_fan_in_uniform(rng);
    for (int i = 0; i < cfg.blocks; ++i) {
        model.drbs.emplace_back(cfg.d, rng);
        model.pnbs.emplace_back(cfg.pnb(), rng);
        model.exits.emplace_back(cfg.d, cfg.channels, rng);
    }
    for (int i = 0; i < cfg.blocks; ++i) {
        model.fusion_w.push_back(TensorT<T>::scalar(T(1.0 / cfg.blocks)));
        model.fusion_w_grad.push_back(TensorT<T>::scalar(T(0)));
    }
    return model;
}

template <class T>
std::pair<VarT<T>, std::vector<VarT<T>>> PnenModelT<T>::forward(TapeT<T>& tape, const VarT<T>& x) {
    if (x.v().c != cfg.channels)
        throw ConfigError("pnen_forward: input has " + std::to_string(x.v().c) +
                          " channels, model expects " + std::to_string(cfg.channels));
    VarT<T> feat = conv2d(tape, x, entry);
    std::vector<VarT<T>> ys;
    ys.reserve(static_cast<size_t>(cfg.blocks));
    for (int i = 0; i < cfg.blocks; ++i) {
        feat = drbs[i].forward(tape, feat);
        feat = pnbs[i].forward(tape, feat);
        auto residual = exits[i].forward(tape, feat);
        ys.push_back(add(tape, x, residual));
    }
    VarT<T> fused = scale_by_param(tape, ys[0], fusion_w[0], fusion_w_grad[0]);
    for (int i = 1; i < cfg.blocks; ++i)
        fused = add(tape, fused, scale_by_param(tape, ys[i], fusion_w[i], fusion_w_grad[i]));
    return {fused, ys};
}

template <class T>
TensorT<T> PnenModelT<T>::infer(const TensorT<T>& x) {
    set_train_mode(false);
    TapeT<T> tape(/*recording=*/false);
    VarT<T> in = make_var(x);
    return forward(tape, in).first.v();
}

template <class T>
std::vector<AttentionDumpT<T>> PnenModelT<T>::attention_dumps(const TensorT<T>& x, int qy,
                                                              int qx) {
    set_train_mode(false);
    TapeT<T> tape(/*recording=*/false);
    VarT<T> feat = conv2d(tape, make_var(x), entry);
    for (int i = 0; i < cfg.blocks; ++i) {
        feat = drbs[i].forward(tape, feat);
        if (i + 1 == cfg.blocks) return pnbs[i].dump_attention(feat.v(), qy, qx);
        feat = pnbs[i].forward(tape, feat);
    }
    throw ConfigError("attention_dumps: model has no blocks");
}

template <class T>
void PnenModelT<T>::set_train_mode(bool train) {
    using Mode = typename BatchNormLayerT<T>::Mode;
    Mode mode = train ? Mode::train : Mode::eval;
    // write only on change so concurrent inference on a frozen model stays
    // read-only
    for (auto& blk : drbs)
        for (auto& grp : blk.groups)
            if (grp.bn.mode != mode) grp.bn.mode = mode;
}

template <class T>
std::vector<ParamRefT<T>> PnenModelT<T>::parameters() {
    std::vector<ParamRefT<T>> out;
    entry.collect_params("entry", out);
    for (int i = 0; i < cfg.blocks; ++i) {
        std::string grp = "group" + std::to_string(i);
        drbs[i].collect_params(grp + ".drb", out);
        pnbs[i].collect_params(grp + ".pnb", out);
        exits[i].collect_params(grp + ".exit", out);
    }
    for (int i = 0; i < cfg.blocks; ++i)
        out.push_back({"fusion.w" + std::to_string(i), &fusion_w[i], &fusion_w_grad[i]});
    return out;
}

template <class T>
std::vector<BufferRefT<T>> PnenModelT<T>::buffers() {
    std::vector<BufferRefT<T>> out;
    for (int i = 0; i < cfg.blocks; ++i)
        drbs[i].collect_buffers("group" + std::to_string(i) + ".drb", out);
    return out;
}

template <class T>
void PnenModelT<T>::zero_grads() {
    entry.zero_grad();
    for (auto& b : drbs) b.zero_grad();
    for (auto& b : pnbs) b.zero_grad();
    for (auto& e : exits) e.zero_grad();
    for (auto& g : fusion_w_grad) g.fill(T(0));
}

template <class T>
int PnenModelT<T>::conv_depth() const {
    int depth = 1;  // entry
    for (int i = 0; i < cfg.blocks; ++i) depth += drbs[i].conv_count() + 1;
    depth += 3;  // exit net
    return depth;
}

template <class T>
int64_t PnenModelT<T>::param_count() const {
    int64_t total = entry.param_count();
    for (const auto& b : drbs) total += b.param_count();
    for (const auto& b : pnbs) total += b.param_count();
    for (const auto& e : exits) total += e.param_count();
    total += static_cast<int64_t>(fusion_w.size());
    return total;
}

template <class T>
VarT<T> pnen_loss(TapeT<T>& tape, const VarT<T>& y, const std::vector<VarT<T>>& ys,
                  const TensorT<T>& target) {
    if (!y.v().same_shape(target))
        throw ConfigError("pnen_loss: prediction " + y.v().shape_str() + " vs target " +
                          target.shape_str());
    for (const auto& ym : ys)
        if (!ym.v().same_shape(target))
            throw ConfigError("pnen_loss: intermediate prediction shape mismatch");
    VarT<T> total = sum_squared_error(tape, y, target);
    for (const auto& ym : ys) total = add(tape, total, sum_squared_error(tape, ym, target));
    T norm = T(1.0 / (double(target.n) * target.c * target.h * target.w));
    return scale_const(tape, total, norm);
}

// --- checkpoint -----------------------------------------------------------------

namespace {

constexpr int kCheckpointVersion = 1;

template <class T>
const char* ckpt_dtype();
template <>
const char* ckpt_dtype<float>() { return "f32"; }
template <>
const char* ckpt_dtype<double>() { return "f64"; }

std::string join_scales(const std::vector<int>& scales) {
    std::string s;
    for (size_t i = 0; i < scales.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(scales[i]);
    }
    return s;
}

std::vector<int> split_scales(const std::string& s) {
    std::vector<int> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}

struct ManifestEntry {
    std::string name;
    int n, c, h, w;
    int64_t byte_offset;
};

struct Manifest {
    ModelConfig cfg;
    std::string dtype;
    std::vector<ManifestEntry> entries;
};

Manifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint manifest: " + path);
    std::string word;
    int version = 0;
    in >> word >> version;
    if (word != "pnen-checkpoint" || version != kCheckpointVersion)
        throw DataError("unsupported checkpoint format in " + path);
    Manifest mf;
    std::string scales_str;
    int tensor_count = 0;
    auto expect = [&](const char* key) {
        in >> word;
        if (word != key) throw DataError("bad manifest: expected '" + std::string(key) +
                                         "' line in " + path);
    };
    expect("dtype");
    in >> mf.dtype;
    expect("channels");
    in >> mf.cfg.channels;
    expect("d");
    in >> mf.cfg.d;
    expect("m");
    in >> mf.cfg.m;
    expect("n");
    in >> mf.cfg.n;
    expect("blocks");
    in >> mf.cfg.blocks;
    expect("scales");
    in >> scales_str;
    expect("tensors");
    in >> tensor_count;
    if (!in) throw DataError("bad manifest header: " + path);
    if (mf.dtype != "f32" && mf.dtype != "f64")
        throw DataError("bad manifest dtype '" + mf.dtype + "' in " + path);
    mf.cfg.scales = split_scales(scales_str);
    mf.entries.reserve(static_cast<size_t>(tensor_count));
    for (int i = 0; i < tensor_count; ++i) {
        ManifestEntry e;
        in >> e.name >> e.n >> e.c >> e.h >> e.w >> e.byte_offset;
        if (!in) throw DataError("truncated manifest tensor table: " + path);
        mf.entries.push_back(std::move(e));
    }
    return mf;
}

}  // namespace

template <class T>
void save_checkpoint(PnenModelT<T>& model, const std::string& base) {
    auto params = model.parameters();
    auto bufs = model.buffers();

    std::vector<std::pair<std::string, TensorT<T>*>> tensors;
    for (auto& p : params) tensors.push_back({p.name, p.value});
    for (auto& b : bufs) tensors.push_back({b.name, b.value});

    int64_t total = 0;
    for (auto& [name, t] : tensors) total += t->numel();
    TensorT<T> blob(1, 1, 1, static_cast<int>(total));

    std::ofstream mfst(base + ".manifest", std::ios::trunc);
    if (!mfst) throw DataError("cannot write checkpoint manifest: " + base + ".manifest");
    mfst << "pnen-checkpoint " << kCheckpointVersion << "\n";
    mfst << "dtype " << ckpt_dtype<T>() << "\n";
    mfst << "channels " << model.cfg.channels << "\n";
    mfst << "d " << model.cfg.d << "\n";
    mfst << "m " << model.cfg.m << "\n";
    mfst << "n " << model.cfg.n << "\n";
    mfst << "blocks " << model.cfg.blocks << "\n";
    mfst << "scales " << join_scales(model.cfg.scales) << "\n";
    mfst << "tensors " << tensors.size() << "\n";
    int64_t offset = 0;
    for (auto& [name, t] : tensors) {
        mfst << name << " " << t->n << " " << t->c << " " << t->h << " " << t->w << " "
             << offset * static_cast<int64_t>(sizeof(T)) << "\n";
        std::copy(t->data.begin(), t->data.end(), blob.data.begin() + offset);
        offset += t->numel();
    }
    if (!mfst) throw DataError("short write on checkpoint manifest");
    write_pnt(blob, base + ".pnt");
}

template <class T>
PnenModelT<T> load_checkpoint(const std::string& base) {
    Manifest mf = read_manifest(base + ".manifest");
    int dtype_size = mf.dtype == "f32" ? 4 : 8;
    TensorT<T> blob = read_pnt<T>(base + ".pnt");

    PnenModelT<T> model = PnenModelT<T>::seeded(mf.cfg, 0);
    auto params = model.parameters();
    auto bufs = model.buffers();
    std::vector<std::pair<std::string, TensorT<T>*>> tensors;
    for (auto& p : params) tensors.push_back({p.name, p.value});
    for (auto& b : bufs) tensors.push_back({b.name, b.value});
    if (tensors.size() != mf.entries.size())
        throw DataError("checkpoint tensor count mismatch: manifest has " +
                        std::to_string(mf.entries.size()) + ", model has " +
                        std::to_string(tensors.size()));
    for (size_t i = 0; i < tensors.size(); ++i) {
        const ManifestEntry& e = mf.entries[i];
        TensorT<T>* t = nullptr;
        for (auto& [name, ptr] : tensors)
            if (name == e.name) {
                t = ptr;
                break;
            }
        if (!t) throw DataError("checkpoint names unknown tensor '" + e.name + "'");
        if (t->n != e.n || t->c != e.c || t->h != e.h || t->w != e.w)
            throw DataError("checkpoint shape mismatch for '" + e.name + "'");
        if (e.byte_offset % dtype_size != 0)
            throw DataError("checkpoint misaligned offset for '" + e.name + "'");
        int64_t elem_offset = e.byte_offset / dtype_size;
        if (elem_offset + t->numel() > blob.numel())
            throw DataError("checkpoint blob too small for '" + e.name + "'");
        std::copy(blob.data.begin() + elem_offset, blob.data.begin() + elem_offset + t->numel(),
                  t->data.begin());
    }
    return model;
}

ModelConfig checkpoint_config(const std::string& base) {
    return read_manifest(base + ".manifest").cfg;
}

std::string checkpoint_dtype(const std::string& base) {
    return read_manifest(base + ".manifest").dtype;
}

#define PNEN_MODEL_INST(T)                                                                       \
    template struct DrbBlockT<T>;                                                                \
    template struct ExitNetT<T>;                                                                 \
    template struct PnenModelT<T>;                                                               \
    template VarT<T> pnen_loss<T>(TapeT<T>&, const VarT<T>&, const std::vector<VarT<T>>&,        \
                                  const TensorT<T>&);                                            \
    template void save_checkpoint<T>(PnenModelT<T>&, const std::string&);                        \
    template PnenModelT<T> load_checkpoint<T>(const std::string&);

PNEN_MODEL_INST(float)
PNEN_MODEL_INST(double)
#undef PNEN_MODEL_INST

}  // namespace pnen
