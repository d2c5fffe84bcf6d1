#ifndef PNEN_COST_HPP_
#define PNEN_COST_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "pnen/model.hpp"
#include "pnen/nonlocal.hpp"

namespace pnen {

// Which non-local variant sits in each group of the backbone.
enum class NlVariant { none, nlb, apnb, pnb };

const char* nl_variant_name(NlVariant v);

// Analytic per-layer operation counts.
//   macs      multiply-accumulates (conv: out_elems*in_c*kh*kw; attention:
//             queries*refs*m for logits plus queries*refs*n for aggregation)
//   misc_ops  non-MAC elementwise work (softmax: 5 ops per correlation
//             element; relu 1/elem; batchnorm 2/elem; adds 1/elem)
// Printed FLOPs = 2*macs + misc_ops.
struct CostRow {
    std::string name;
    int64_t macs = 0;
    int64_t misc_ops = 0;
    int64_t params = 0;
    int64_t out_elems = 0;
    int64_t attn_elems = 0;  // correlation-matrix entries, listed separately
};

struct CostReport {
    std::string title;
    int dtype_bytes = 4;
    std::vector<CostRow> rows;

    // Peak concurrently-live activation elements under sequential execution
    // with residual inputs held live; gradient buffers excluded. A training
    // estimate doubles this (one gradient buffer per activation).
    int64_t peak_act_elems = 0;

    // Extra elements the non-local operation keeps live: query/reference/
    // value embeddings, correlation matrices, and enhanced outputs.
    int64_t attention_mem_elems = 0;

    int64_t total_macs() const;
    int64_t total_misc() const;
    int64_t total_flops() const { return 2 * total_macs() + total_misc(); }
    int64_t total_params() const;
    int64_t total_attn_elems() const;

    // FLOPs of the attention-specific rows (embeddings, correlation,
    // softmax, aggregation, transform).
    int64_t attention_flops() const;

    std::string render_table() const;
    std::string render_csv() const;
};

// Full backbone with the chosen non-local variant in every group.
CostReport count_costs(const ModelConfig& cfg, NlVariant variant, int h, int w,
                       int dtype_bytes = 4,
                       const std::vector<int>& pool_sizes = {1, 3, 6, 8});

// A standalone block on a (d, h, w) feature map.
CostReport count_costs_nlb(const NlbConfig& cfg, int h, int w, int dtype_bytes = 4);
CostReport count_costs_pnb(const PnbConfig& cfg, int h, int w, int dtype_bytes = 4);
CostReport count_costs_apnb(const ApnbConfig& cfg, int h, int w, int dtype_bytes = 4);

// A single convolution layer (no activation), mostly for sanity checks.
CostReport count_costs_conv(int in_c, int out_c, int k, int stride, int pad, int dilation, int h,
                            int w, int dtype_bytes = 4);

}  // namespace pnen

#endif  // PNEN_COST_HPP_
