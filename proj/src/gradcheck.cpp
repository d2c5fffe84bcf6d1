#include "pnen/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "pnen/autograd.hpp"
#include "pnen/model.hpp"
#include "pnen/nonlocal.hpp"
#include "pnen/rng.hpp"

namespace pnen {

double check_probes(const std::function<double()>& forward, std::vector<GradProbe>& probes,
                    uint64_t seed, double step, int samples_per_tensor) {
    Rng rng(seed, /*stream=*/0xFD);
    double worst = 0.0;
    for (auto& probe : probes) {
        const int64_t count = probe.value->numel();
        std::vector<int64_t> indices;
        if (count <= samples_per_tensor) {
            for (int64_t i = 0; i < count; ++i) indices.push_back(i);
        } else {
            for (int s = 0; s < samples_per_tensor; ++s)
                indices.push_back(static_cast<int64_t>(rng.below(static_cast<uint64_t>(count))));
        }
        for (int64_t idx : indices) {
            double* slot = &probe.value->data[static_cast<size_t>(idx)];
            double original = *slot;
            *slot = original + step;
            double up = forward();
            *slot = original - step;
            double down = forward();
            *slot = original;
            double fd = (up - down) / (2.0 * step);
            double analytic = probe.grad->data[static_cast<size_t>(idx)];
            double denom = std::max({1.0, std::abs(analytic), std::abs(fd)});
            worst = std::max(worst, std::abs(analytic - fd) / denom);
        }
    }
    return worst;
}

namespace {

Tensor random_tensor(int n, int c, int h, int w, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(n, c, h, w);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Keeps relu inputs away from the kink so central differences stay valid.
Tensor random_tensor_off_zero(int n, int c, int h, int w, Rng& rng, double margin = 0.05) {
    Tensor t(n, c, h, w);
    for (double& v : t.data) {
        double u = rng.uniform(margin, 1.0);
        v = rng.coin() ? u : -u;
    }
    return t;
}

void randomize_conv(ConvLayer& layer, Rng& rng) {
    for (double& v : layer.weights.data) v = rng.uniform(-0.5, 0.5);
    for (double& v : layer.bias.data) v = rng.uniform(-0.2, 0.2);
}

double sse_value(const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return acc;
}

std::vector<GradProbe> probes_of(std::vector<ParamRefT<double>>& refs) {
    std::vector<GradProbe> out;
    out.reserve(refs.size());
    for (auto& r : refs) out.push_back({r.name, r.value, r.grad});
    return out;
}

// Checks d(||op(x) - R||^2) for a fixed random R against finite differences
// over the input and the given parameter probes. fwd must not touch any
// gradient buffer.
template <class Forward>
double run_op_check(Tensor input, std::vector<GradProbe> param_probes, Forward&& fwd,
                    uint64_t seed, int samples_per_tensor = 8) {
    Rng rng(seed, 0x0E);
    Var x = make_var(std::move(input));
    Tensor ref;
    {
        Tape warmup;
        Var out = fwd(warmup, x);
        ref = random_tensor(out.v().n, out.v().c, out.v().h, out.v().w, rng);
    }
    auto loss_value = [&]() {
        Tape tape;
        Var out = fwd(tape, x);
        return sse_value(out.v(), ref);
    };

    x.grad->fill(0.0);
    for (auto& p : param_probes) p.grad->fill(0.0);
    Tape tape;
    Var out = fwd(tape, x);
    Var loss = sum_squared_error(tape, out, ref);
    tape.backward(loss);

    std::vector<GradProbe> probes;
    probes.push_back({"input", x.value.get(), x.grad.get()});
    for (auto& p : param_probes) probes.push_back(p);
    return check_probes(loss_value, probes, seed, 1e-5, samples_per_tensor);
}

std::vector<GradProbe> conv_probes(ConvLayer& l) {
    return {{"weight", &l.weights, &l.weight_grad}, {"bias", &l.bias, &l.bias_grad}};
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(uint64_t seed) {
    std::vector<GradCheckResult> results;
    auto record = [&](const std::string& name, double err, double tol) {
        results.push_back({name, err, tol, err < tol});
    };
    const double tol_op = 1e-4;
    const double tol_e2e = 1e-3;
    Rng rng(seed, 0xC0FFEE);

    {
        ConvLayer conv(3, 4, 3, 1, 1);
        randomize_conv(conv, rng);
        record("conv2d",
               run_op_check(
                   random_tensor(2, 3, 6, 6, rng), conv_probes(conv),
                   [&](Tape& t, Var& x) { return conv2d(t, x, conv); }, seed + 1),
               tol_op);
    }
    {  // kernel = stride = 2, the pyramid embedding shape
        ConvLayer conv(3, 4, 2, 2, 0);
        randomize_conv(conv, rng);
        record("conv2d_strided",
               run_op_check(
                   random_tensor(2, 3, 6, 6, rng), conv_probes(conv),
                   [&](Tape& t, Var& x) { return conv2d(t, x, conv); }, seed + 2),
               tol_op);
    }
    {
        ConvLayer conv(3, 4, 3, 1, 2, 2);
        randomize_conv(conv, rng);
        record("conv2d_dilated",
               run_op_check(
                   random_tensor(2, 3, 6, 6, rng), conv_probes(conv),
                   [&](Tape& t, Var& x) { return conv2d(t, x, conv); }, seed + 3),
               tol_op);
    }
    for (bool train : {true, false}) {
        BatchNormLayer bn(3);
        bn.mode = train ? BatchNormLayer::Mode::train : BatchNormLayer::Mode::eval;
        for (double& v : bn.gamma.data) v = rng.uniform(0.5, 1.5);
        for (double& v : bn.beta.data) v = rng.uniform(-0.5, 0.5);
        for (double& v : bn.running_mean.data) v = rng.uniform(-0.3, 0.3);
        for (double& v : bn.running_var.data) v = rng.uniform(0.5, 1.5);
        std::vector<GradProbe> probes = {{"gamma", &bn.gamma, &bn.gamma_grad},
                                         {"beta", &bn.beta, &bn.beta_grad}};
        record(train ? "batchnorm_train" : "batchnorm_eval",
               run_op_check(
                   random_tensor(2, 3, 6, 6, rng), probes,
                   [&](Tape& t, Var& x) { return batchnorm(t, x, bn); }, seed + 4 + train),
               tol_op);
    }
    {
        record("relu",
               run_op_check(
                   random_tensor_off_zero(2, 3, 6, 6, rng), {},
                   [&](Tape& t, Var& x) { return relu(t, x); }, seed + 6),
               tol_op);
    }
    {
        Var b = make_var(random_tensor(1, 1, 4, 3, rng));
        std::vector<GradProbe> probes = {{"b", b.value.get(), b.grad.get()}};
        record("matmul",
               run_op_check(
                   random_tensor(1, 1, 5, 4, rng), probes,
                   [&](Tape& t, Var& x) { return matmul(t, x, b); }, seed + 7),
               tol_op);
    }
    {
        Var b = make_var(random_tensor(1, 1, 6, 4, rng));
        std::vector<GradProbe> probes = {{"b", b.value.get(), b.grad.get()}};
        record("matmul_transposed",
               run_op_check(
                   random_tensor(1, 1, 5, 4, rng), probes,
                   [&](Tape& t, Var& x) { return matmul(t, x, b, /*trans_b=*/true); }, seed + 8),
               tol_op);
    }
    {
        record("softmax_rows",
               run_op_check(
                   random_tensor(1, 1, 4, 6, rng, -2.0, 2.0), {},
                   [&](Tape& t, Var& x) { return softmax_rows(t, x); }, seed + 9),
               tol_op);
    }
    {
        record("adaptive_avg_pool",
               run_op_check(
                   random_tensor(1, 2, 6, 6, rng), {},
                   [&](Tape& t, Var& x) { return adaptive_avg_pool(t, x, 2, 3); }, seed + 10),
               tol_op);
    }
    {
        Rng wrng(seed, 0x1);
        NlbLayerT<double> nlb(NlbConfig{4, 3, 2}, wrng);
        randomize_conv(nlb.psi, wrng);  // exercise the transform branch
        std::vector<ParamRefT<double>> refs;
        nlb.collect_params("nlb", refs);
        record("nlb_block",
               run_op_check(
                   random_tensor(1, 4, 4, 4, rng), probes_of(refs),
                   [&](Tape& t, Var& x) { return nlb.forward(t, x); }, seed + 11, 4),
               tol_op);
    }
    {
        Rng wrng(seed, 0x2);
        PnbLayerT<double> pnb(PnbConfig{4, 3, 2, {1, 2}}, wrng);
        randomize_conv(pnb.psi, wrng);
        std::vector<ParamRefT<double>> refs;
        pnb.collect_params("pnb", refs);
        record("pnb_block",
               run_op_check(
                   random_tensor(1, 4, 8, 8, rng), probes_of(refs),
                   [&](Tape& t, Var& x) { return pnb.forward(t, x); }, seed + 12, 4),
               tol_op);
    }
    {
        Rng wrng(seed, 0x3);
        ApnbLayerT<double> apnb(ApnbConfig{4, 3, 2, {1, 2}}, wrng);
        randomize_conv(apnb.psi, wrng);
        std::vector<ParamRefT<double>> refs;
        apnb.collect_params("apnb", refs);
        record("apnb_block",
               run_op_check(
                   random_tensor(1, 4, 6, 6, rng), probes_of(refs),
                   [&](Tape& t, Var& x) { return apnb.forward(t, x); }, seed + 13, 4),
               tol_op);
    }
    {
        Rng wrng(seed, 0x4);
        DrbBlockT<double> drb(4, wrng);
        std::vector<ParamRefT<double>> refs;
        drb.collect_params("drb", refs);
        record("drb_block",
               run_op_check(
                   random_tensor(1, 4, 6, 6, rng), probes_of(refs),
                   [&](Tape& t, Var& x) { return drb.forward(t, x); }, seed + 14, 2),
               tol_op);
    }
    {  // end-to-end loss on 1x3x16x16 through a reduced-width full model
        ModelConfig mc;
        mc.channels = 3;
        mc.d = 6;
        mc.m = 4;
        mc.n = 2;
        mc.scales = {1, 2};
        mc.blocks = 2;
        auto model = PnenModelT<double>::seeded(mc, seed + 100);
        Rng wrng(seed, 0x5);
        for (auto& pnb : model.pnbs) randomize_conv(pnb.psi, wrng);
        model.set_train_mode(true);

        Var x = make_var(random_tensor(1, 3, 16, 16, rng, 0.0, 1.0));
        Tensor target = random_tensor(1, 3, 16, 16, rng, 0.0, 1.0);

        auto loss_value = [&]() {
            Tape tape;
            auto [y, ys] = model.forward(tape, x);
            double acc = sse_value(y.v(), target);
            for (auto& ym : ys) acc += sse_value(ym.v(), target);
            return acc / double(target.numel());
        };

        model.zero_grads();
        x.grad->fill(0.0);
        Tape tape;
        auto [y, ys] = model.forward(tape, x);
        Var loss = pnen_loss(tape, y, ys, target);
        tape.backward(loss);

        std::vector<GradProbe> probes;
        probes.push_back({"input", x.value.get(), x.grad.get()});
        auto refs = model.parameters();
        for (auto& r : refs) probes.push_back({r.name, r.value, r.grad});
        record("pnen_end_to_end", check_probes(loss_value, probes, seed + 15, 1e-5, 2), tol_e2e);
    }
    return results;
}

}  // namespace pnen
