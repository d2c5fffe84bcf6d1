#ifndef PNEN_GRADCHECK_HPP_
#define PNEN_GRADCHECK_HPP_

#include <functional>
#include <string>
#include <vector>

#include "pnen/tensor.hpp"

namespace pnen {

struct GradCheckResult {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// One tensor whose analytic gradient is compared against finite differences.
struct GradProbe {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;  // analytic gradient, already populated
};

// Central finite differences with the given step on a deterministic sample
// of indices per probe. Relative error uses a unit floor:
// |a - fd| / max(1, |a|, |fd|).
double check_probes(const std::function<double()>& forward, std::vector<GradProbe>& probes,
                    uint64_t seed, double step = 1e-5, int samples_per_tensor = 8);

// Runs every layer class plus the end-to-end loss at 64-bit precision:
// conv2d (plain/strided/dilated), batchnorm train/eval, relu, matmul,
// softmax_rows, nlb/pnb/apnb blocks, drb, and a small full model on a
// 1x3x16x16 input. Per-op tolerance 1e-4, end-to-end 1e-3.
std::vector<GradCheckResult> run_gradcheck_suite(uint64_t seed);

}  // namespace pnen

#endif  // PNEN_GRADCHECK_HPP_
