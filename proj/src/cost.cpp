#include "pnen/cost.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace pnen {

const char* nl_variant_name(NlVariant v) {
    switch (v) {
        case NlVariant::none: return "none";
        case NlVariant::nlb: return "nlb";
        case NlVariant::apnb: return "apnb";
        case NlVariant::pnb: return "pnb";
    }
    return "?";
}

int64_t CostReport::total_macs() const {
    int64_t t = 0;
    for (const auto& r : rows) t += r.macs;
    return t;
}

int64_t CostReport::total_misc() const {
    int64_t t = 0;
    for (const auto& r : rows) t += r.misc_ops;
    return t;
}

int64_t CostReport::total_params() const {
    int64_t t = 0;
    for (const auto& r : rows) t += r.params;
    return t;
}

int64_t CostReport::total_attn_elems() const {
    int64_t t = 0;
    for (const auto& r : rows) t += r.attn_elems;
    return t;
}

int64_t CostReport::attention_flops() const {
    int64_t t = 0;
    for (const auto& r : rows)
        if (r.name.find("nl.") != std::string::npos) t += 2 * r.macs + r.misc_ops;
    return t;
}

namespace {

// Sequential-execution liveness model. Residual sources and branch inputs
// are held while their consumers run; each row's transient covers scratch
// that only lives inside the row (correlation matrices).
struct Walker {
    CostReport rep;
    int64_t live = 0;
    int64_t held = 0;
    int64_t peak = 0;

    void row(const std::string& name, int64_t macs, int64_t misc, int64_t params,
             int64_t out_elems, int64_t attn = 0, int64_t transient = 0) {
        peak = std::max(peak, held + live + out_elems + transient);
        CostRow r;
        r.name = name;
        r.macs = macs;
        r.misc_ops = misc;
        r.params = params;
        r.out_elems = out_elems;
        r.attn_elems = attn;
        rep.rows.push_back(std::move(r));
        live = out_elems;
    }

    void hold(int64_t e) { held += e; }
    void release(int64_t e) { held -= e; }
};

struct ConvCost {
    int64_t macs, params, out_elems;
};

ConvCost conv_cost(int in_c, int out_c, int kh, int kw, int oh, int ow) {
    ConvCost c;
    c.out_elems = int64_t(out_c) * oh * ow;
    c.macs = c.out_elems * in_c * kh * kw;
    c.params = int64_t(out_c) * in_c * kh * kw + out_c;
    return c;
}

int ceil_div(int a, int b) { return (a + b - 1) / b; }

// Attention arithmetic shared by all variants: per reference set of size
// refs with embedding dims (m, n) and hw query rows.
struct AttnScaleCost {
    int64_t refs;
    int64_t k_elems, v_elems;  // reference/value embedding elements
};

void describe_attention(Walker& wk, const std::string& prefix, int d, int m, int n, int h, int w,
                        const std::vector<AttnScaleCost>& scales, int64_t k_embed_macs_each,
                        int64_t v_embed_macs_each, int64_t k_params_each, int64_t v_params_each,
                        int64_t pool_misc, int64_t& attn_mem) {
    const int64_t hw = int64_t(h) * w;
    const int64_t q_elems = hw * m;

    wk.row(prefix + "nl.theta", hw * m * d, 0, int64_t(m) * d + m, q_elems);
    wk.hold(q_elems);
    attn_mem += q_elems;

    int64_t total_out = 0;
    for (size_t i = 0; i < scales.size(); ++i) {
        const auto& sc = scales[i];
        std::string tag = scales.size() > 1 ? std::to_string(i) : std::string();
        wk.row(prefix + "nl.phi" + tag, k_embed_macs_each, pool_misc, k_params_each, sc.k_elems);
        wk.hold(sc.k_elems);
        wk.row(prefix + "nl.g" + tag, v_embed_macs_each, pool_misc, v_params_each, sc.v_elems);
        wk.hold(sc.v_elems);
        const int64_t attn = hw * sc.refs;
        wk.row(prefix + "nl.corr" + tag, attn * m, 0, 0, attn, attn);
        wk.row(prefix + "nl.softmax" + tag, 0, 5 * attn, 0, attn, 0);
        wk.row(prefix + "nl.aggregate" + tag, attn * n, 0, 0, hw * n, 0, attn);
        wk.hold(hw * n);
        total_out += hw * n;
        attn_mem += sc.k_elems + sc.v_elems + attn + hw * n;
        wk.release(sc.k_elems + sc.v_elems);
    }
    // concat + 1x1 transform back to d channels, then the residual add
    const int64_t cat_c = int64_t(n) * static_cast<int64_t>(scales.size());
    wk.release(total_out + q_elems);
    wk.row(prefix + "nl.psi", hw * d * cat_c, 0, cat_c * d + d, hw * d);
    wk.row(prefix + "nl.residual", 0, hw * d, 0, hw * d);
}

void describe_nlb(Walker& wk, const std::string& prefix, int d, int m, int n, int h, int w,
                  int64_t& attn_mem) {
    const int64_t hw = int64_t(h) * w;
    std::vector<AttnScaleCost> scales{{hw, hw * m, hw * n}};
    describe_attention(wk, prefix, d, m, n, h, w, scales, hw * m * d, hw * n * d,
                       int64_t(m) * d + m, int64_t(n) * d + n, 0, attn_mem);
}

void describe_pnb(Walker& wk, const std::string& prefix, const PnbConfig& cfg, int h, int w,
                  int64_t& attn_mem) {
    const int64_t hw = int64_t(h) * w;
    std::vector<AttnScaleCost> scales;
    for (size_t i = 0; i < cfg.scales.size(); ++i) {
        int k = cfg.stride_of(i);
        int64_t refs = int64_t(ceil_div(h, k)) * ceil_div(w, k);
        scales.push_back({refs, refs * cfg.m, refs * cfg.n});
    }
    // Embedding MACs depend on the kernel: scale s has k^2 taps over d
    // channels per output element, so each scale costs refs*k^2*d per output
    // channel (hw*d when k divides h and w).
    const int64_t q_elems = hw * cfg.m;
    wk.row(prefix + "nl.theta", hw * cfg.m * cfg.d, 0, int64_t(cfg.m) * cfg.d + cfg.m, q_elems);
    wk.hold(q_elems);
    attn_mem += q_elems;
    int64_t total_out = 0;
    for (size_t i = 0; i < cfg.scales.size(); ++i) {
        int k = cfg.stride_of(i);
        const auto& sc = scales[i];
        std::string tag = std::to_string(cfg.scales[i]);
        int64_t kk = int64_t(k) * k;
        wk.row(prefix + "nl.phi_s" + tag, sc.refs * cfg.m * cfg.d * kk, 0,
               int64_t(cfg.m) * cfg.d * kk + cfg.m, sc.k_elems);
        wk.hold(sc.k_elems);
        wk.row(prefix + "nl.g_s" + tag, sc.refs * cfg.n * cfg.d * kk, 0,
               int64_t(cfg.n) * cfg.d * kk + cfg.n, sc.v_elems);
        wk.hold(sc.v_elems);
        const int64_t attn = hw * sc.refs;
        wk.row(prefix + "nl.corr_s" + tag, attn * cfg.m, 0, 0, attn, attn);
        wk.row(prefix + "nl.softmax_s" + tag, 0, 5 * attn, 0, attn, 0);
        wk.row(prefix + "nl.aggregate_s" + tag, attn * cfg.n, 0, 0, hw * cfg.n, 0, attn);
        wk.hold(hw * cfg.n);
        total_out += hw * cfg.n;
        attn_mem += sc.k_elems + sc.v_elems + attn + hw * cfg.n;
        wk.release(sc.k_elems + sc.v_elems);
    }
    const int64_t cat_c = int64_t(cfg.n) * cfg.num_scales();
    wk.release(total_out + q_elems);
    wk.row(prefix + "nl.psi", hw * cfg.d * cat_c, 0, cat_c * cfg.d + cfg.d, hw * cfg.d);
    wk.row(prefix + "nl.residual", 0, hw * cfg.d, 0, hw * cfg.d);
}

void describe_apnb(Walker& wk, const std::string& prefix, const ApnbConfig& cfg, int h, int w,
                   int64_t& attn_mem) {
    const int64_t hw = int64_t(h) * w;
    int64_t tokens = cfg.token_count();
    std::vector<AttnScaleCost> scales{{tokens, tokens * cfg.m, tokens * cfg.n}};
    // Full-resolution 1x1 embeddings plus one pooling read per level.
    int64_t pool_misc = hw * static_cast<int64_t>(cfg.pool_sizes.size());
    describe_attention(wk, prefix, cfg.d, cfg.m, cfg.n, h, w, scales, hw * cfg.m * cfg.d,
                       hw * cfg.n * cfg.d, int64_t(cfg.m) * cfg.d + cfg.m,
                       int64_t(cfg.n) * cfg.d + cfg.n, pool_misc, attn_mem);
}

void describe_drb(Walker& wk, const std::string& prefix, int d, int h, int w) {
    const int64_t hw = int64_t(h) * w;
    const int64_t feat = int64_t(d) * hw;
    for (size_t gi = 0; gi < DrbBlockT<double>::kDilations.size(); ++gi) {
        std::string p = prefix + "drb.g" + std::to_string(gi) + ".";
        ConvCost cc = conv_cost(d, d, 3, 3, h, w);
        wk.hold(feat);  // group residual input
        wk.row(p + "conv1", cc.macs, 0, cc.params, cc.out_elems);
        wk.row(p + "bn", 0, 2 * feat, 2 * d, feat);
        wk.row(p + "relu", 0, feat, 0, feat);
        wk.row(p + "conv2", cc.macs, 0, cc.params, cc.out_elems);
        wk.release(feat);
        wk.row(p + "add", 0, feat, 0, feat);
    }
}

}  // namespace

CostReport count_costs(const ModelConfig& cfg, NlVariant variant, int h, int w, int dtype_bytes,
                       const std::vector<int>& pool_sizes) {
    cfg.validate();
    Walker wk;
    wk.rep.title = std::string("pnen[") + nl_variant_name(variant) + "] " + std::to_string(h) +
                   "x" + std::to_string(w);
    wk.rep.dtype_bytes = dtype_bytes;
    const int64_t hw = int64_t(h) * w;
    const int64_t img = int64_t(cfg.channels) * hw;
    const int64_t feat = int64_t(cfg.d) * hw;
    int64_t attn_mem = 0;

    wk.hold(img);  // input image feeds every residual prediction
    ConvCost entry = conv_cost(cfg.channels, cfg.d, 3, 3, h, w);
    wk.row("entry", entry.macs, 0, entry.params, entry.out_elems);

    for (int b = 0; b < cfg.blocks; ++b) {
        std::string prefix = "group" + std::to_string(b) + ".";
        describe_drb(wk, prefix, cfg.d, h, w);
        switch (variant) {
            case NlVariant::none:
                break;
            case NlVariant::nlb:
                wk.hold(feat);
                describe_nlb(wk, prefix, cfg.d, cfg.m, cfg.n, h, w, attn_mem);
                wk.release(feat);
                break;
            case NlVariant::apnb: {
                ApnbConfig ac{cfg.d, cfg.m, cfg.n, pool_sizes};
                wk.hold(feat);
                describe_apnb(wk, prefix, ac, h, w, attn_mem);
                wk.release(feat);
                break;
            }
            case NlVariant::pnb:
                wk.hold(feat);
                describe_pnb(wk, prefix, cfg.pnb(), h, w, attn_mem);
                wk.release(feat);
                break;
        }
        // exit net on the group feature; trunk feature stays live
        wk.hold(feat);
        ConvCost e1 = conv_cost(cfg.d, cfg.d, 3, 3, h, w);
        ConvCost e3 = conv_cost(cfg.d, cfg.channels, 3, 3, h, w);
        wk.row(prefix + "exit.conv1", e1.macs, feat, e1.params, e1.out_elems);
        wk.row(prefix + "exit.conv2", e1.macs, feat, e1.params, e1.out_elems);
        wk.row(prefix + "exit.conv3", e3.macs, 0, e3.params, e3.out_elems);
        wk.row(prefix + "exit.residual", 0, img, 0, img);
        wk.hold(img);  // Y_m stays live until fusion
        wk.release(feat);
        wk.live = feat;  // trunk continues from the group feature
    }
    wk.row("fusion", 0, int64_t(cfg.blocks) * img + img, cfg.blocks, img);
    wk.release(int64_t(cfg.blocks) * img);
    wk.release(img);

    wk.rep.peak_act_elems = wk.peak;
    wk.rep.attention_mem_elems = attn_mem;
    return wk.rep;
}

CostReport count_costs_nlb(const NlbConfig& cfg, int h, int w, int dtype_bytes) {
    cfg.validate();
    Walker wk;
    wk.rep.title = "nlb " + std::to_string(h) + "x" + std::to_string(w);
    wk.rep.dtype_bytes = dtype_bytes;
    int64_t attn_mem = 0;
    wk.hold(int64_t(cfg.d) * h * w);
    describe_nlb(wk, "", cfg.d, cfg.m, cfg.n, h, w, attn_mem);
    wk.rep.peak_act_elems = wk.peak;
    wk.rep.attention_mem_elems = attn_mem;
    return wk.rep;
}

CostReport count_costs_pnb(const PnbConfig& cfg, int h, int w, int dtype_bytes) {
    cfg.validate();
    Walker wk;
    wk.rep.title = "pnb " + std::to_string(h) + "x" + std::to_string(w);
    wk.rep.dtype_bytes = dtype_bytes;
    int64_t attn_mem = 0;
    wk.hold(int64_t(cfg.d) * h * w);
    describe_pnb(wk, "", cfg, h, w, attn_mem);
    wk.rep.peak_act_elems = wk.peak;
    wk.rep.attention_mem_elems = attn_mem;
    return wk.rep;
}

CostReport count_costs_apnb(const ApnbConfig& cfg, int h, int w, int dtype_bytes) {
    cfg.validate();
    Walker wk;
    wk.rep.title = "apnb " + std::to_string(h) + "x" + std::to_string(w);
    wk.rep.dtype_bytes = dtype_bytes;
    int64_t attn_mem = 0;
    wk.hold(int64_t(cfg.d) * h * w);
    describe_apnb(wk, "", cfg, h, w, attn_mem);
    wk.rep.peak_act_elems = wk.peak;
    wk.rep.attention_mem_elems = attn_mem;
    return wk.rep;
}

CostReport count_costs_conv(int in_c, int out_c, int k, int stride, int pad, int dilation, int h,
                            int w, int dtype_bytes) {
    Walker wk;
    wk.rep.title = "conv " + std::to_string(h) + "x" + std::to_string(w);
    wk.rep.dtype_bytes = dtype_bytes;
    int oh = (h + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
    int ow = (w + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
    if (oh < 1 || ow < 1) throw ConfigError("count_costs_conv: empty output");
    wk.hold(int64_t(in_c) * h * w);
    ConvCost cc = conv_cost(in_c, out_c, k, k, oh, ow);
    wk.row("conv", cc.macs, 0, cc.params, cc.out_elems);
    wk.rep.peak_act_elems = wk.peak;
    return wk.rep;
}

std::string CostReport::render_table() const {
    std::ostringstream os;
    os << "# " << title << " (dtype " << dtype_bytes << " bytes)\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-28s %16s %14s %12s %14s %14s\n", "layer", "macs", "misc_ops",
                  "params", "act_elems", "attn_elems");
    os << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-28s %16lld %14lld %12lld %14lld %14lld\n",
                      r.name.c_str(), static_cast<long long>(r.macs),
                      static_cast<long long>(r.misc_ops), static_cast<long long>(r.params),
                      static_cast<long long>(r.out_elems), static_cast<long long>(r.attn_elems));
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "%-28s %16lld %14lld %12lld %14s %14lld\n", "total",
                  static_cast<long long>(total_macs()), static_cast<long long>(total_misc()),
                  static_cast<long long>(total_params()), "-",
                  static_cast<long long>(total_attn_elems()));
    os << buf;
    os << "flops_total " << total_flops() << " (1 MAC = 2 FLOPs)\n";
    os << "flops_attention " << attention_flops() << "\n";
    os << "attention_mem_bytes " << attention_mem_elems * dtype_bytes << "\n";
    os << "peak_activation_bytes " << peak_act_elems * dtype_bytes
       << " (inference; training ~2x)\n";
    return os.str();
}

std::string CostReport::render_csv() const {
    std::ostringstream os;
    os << "layer,macs,misc_ops,params,act_elems,attn_elems\n";
    for (const auto& r : rows)
        os << r.name << "," << r.macs << "," << r.misc_ops << "," << r.params << ","
           << r.out_elems << "," << r.attn_elems << "\n";
    os << "total," << total_macs() << "," << total_misc() << "," << total_params() << ",,"
       << total_attn_elems() << "\n";
    return os.str();
}

}  // namespace pnen
