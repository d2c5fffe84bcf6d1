#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "pnen/train.hpp"
#include "test_util.hpp"

using namespace pnen;
using test::random_tensor;

namespace {

TrainConfig tiny_train_config() {
    TrainConfig cfg;
    cfg.model = ModelConfig{1, 16, 16, 8, {1, 2}, 1};
    cfg.filter = FilterSpec{FilterKind::gaussian, 1, 1.5, 0.1};
    cfg.synth = SynthSpec{128, 1, 4, 0.02};
    cfg.synth_count = 8;
    cfg.patch_size = 32;
    cfg.batch_size = 8;
    cfg.seed = 7;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_SUITE_BEGIN("train");

TEST_CASE("adam leaves parameters untouched under zero gradients") {
    Tensor w = Tensor::scalar(1.5);
    Tensor g = Tensor::scalar(0.0);
    std::vector<ParamRefT<double>> params = {{"w", &w, &g}};
    AdamT<double> adam(params);
    for (int i = 0; i < 10; ++i) adam.step(params, 1e-3);
    CHECK(w.data[0] == 1.5);
}

TEST_CASE("adam first step moves by about -lr*sign(g)") {
    Tensor w = Tensor::scalar(0.0);
    Tensor g = Tensor::scalar(3.7);
    std::vector<ParamRefT<double>> params = {{"w", &w, &g}};
    AdamT<double> adam(params);
    adam.step(params, 0.01);
    // mhat = g, vhat = g^2 -> step = lr * g / (|g| + eps)
    CHECK(w.data[0] == doctest::Approx(-0.01).epsilon(1e-6));
    g.data[0] = -0.2;
    Tensor w2 = Tensor::scalar(0.0);
    std::vector<ParamRefT<double>> params2 = {{"w", &w2, &g}};
    AdamT<double> adam2(params2);
    adam2.step(params2, 0.01);
    CHECK(w2.data[0] == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("adam descends x^2 to near zero with the default betas") {
    Tensor x = Tensor::scalar(1.0);
    Tensor g = Tensor::scalar(0.0);
    std::vector<ParamRefT<double>> params = {{"x", &x, &g}};
    AdamT<double> adam(params);
    double worst_after_warmup = 0.0;
    for (int t = 1; t <= 500; ++t) {
        g.data[0] = 2.0 * x.data[0];  // d/dx x^2
        adam.step(params, 0.1);
        if (t > 100) worst_after_warmup = std::max(worst_after_warmup, std::abs(x.data[0]));
    }
    CHECK(std::abs(x.data[0]) < 1e-2);
    CHECK(worst_after_warmup < 0.5);
    // 100 steps from x=1 already shrink the iterate well below the start
    Tensor x2 = Tensor::scalar(1.0);
    std::vector<ParamRefT<double>> p2 = {{"x", &x2, &g}};
    AdamT<double> a2(p2);
    for (int t = 1; t <= 100; ++t) {
        g.data[0] = 2.0 * x2.data[0];
        a2.step(p2, 0.1);
    }
    CHECK(std::abs(x2.data[0]) < 0.1);
}

TEST_CASE("adam aborts on non-finite gradients without touching params") {
    Tensor w = Tensor::scalar(2.0);
    Tensor g = Tensor::scalar(std::numeric_limits<double>::quiet_NaN());
    std::vector<ParamRefT<double>> params = {{"w", &w, &g}};
    AdamT<double> adam(params);
    CHECK_THROWS_AS(adam.step(params, 1e-3), NumericError);
    CHECK(w.data[0] == 2.0);
    CHECK(adam.t() == 0);
}

TEST_CASE("plateau schedule keeps the rate while the loss improves") {
    PlateauSchedule sched{5e-4, 1e-4, 5, 1e-6};
    double loss = 1.0;
    for (int e = 0; e < 12; ++e) {
        CHECK(sched.on_epoch_end(loss) == doctest::Approx(5e-4));
        loss *= 0.9;
    }
}

TEST_CASE("plateau schedule halves after patience flat epochs") {
    PlateauSchedule sched{5e-4, 1e-4, 5, 1e-6};
    sched.on_epoch_end(1.0);  // establishes the best
    for (int e = 0; e < 4; ++e) CHECK(sched.on_epoch_end(1.0) == doctest::Approx(5e-4));
    CHECK(sched.on_epoch_end(1.0) == doctest::Approx(2.5e-4));  // 5th flat epoch
}

TEST_CASE("repeated plateaus walk the rate down to the floor and stay") {
    PlateauSchedule sched{5e-4, 1e-4, 2, 1e-6};
    sched.on_epoch_end(1.0);
    std::vector<double> lrs;
    for (int e = 0; e < 10; ++e) lrs.push_back(sched.on_epoch_end(1.0));
    // every two flat epochs: 5e-4 -> 2.5e-4 -> 1.25e-4 -> clamp at 1e-4
    CHECK(lrs[1] == doctest::Approx(2.5e-4));
    CHECK(lrs[3] == doctest::Approx(1.25e-4));
    CHECK(lrs[5] == doctest::Approx(1e-4));
    CHECK(lrs[9] == doctest::Approx(1e-4));
    for (size_t i = 1; i < lrs.size(); ++i) CHECK(lrs[i] <= lrs[i - 1]);
}

TEST_CASE("identity augmentation draw leaves the pair unchanged") {
    Rng rng(51);
    Tensor x = random_tensor(1, 1, 6, 6, rng);
    AugmentDraw identity{false, 0};
    CHECK(apply_augment(x, identity).max_abs_diff(x) == 0.0);
}

TEST_CASE("horizontal flip is an involution") {
    Rng rng(52);
    Tensor x = random_tensor(1, 3, 5, 5, rng);
    AugmentDraw flip{true, 0};
    CHECK(apply_augment(apply_augment(x, flip), flip).max_abs_diff(x) == 0.0);
}

TEST_CASE("four quarter turns restore the input") {
    Rng rng(53);
    Tensor x = random_tensor(1, 2, 7, 7, rng);
    Tensor turned = x;
    AugmentDraw turn{false, 1};
    for (int i = 0; i < 4; ++i) turned = apply_augment(turned, turn);
    CHECK(turned.max_abs_diff(x) == 0.0);
}

TEST_CASE("augment maps input and target pixels identically") {
    // index-valued image: value encodes the source coordinate
    Tensor x(1, 1, 8, 8);
    for (int i = 0; i < 64; ++i) x.data[static_cast<size_t>(i)] = i;
    Tensor g = x;
    Rng rng(54);
    for (int rep = 0; rep < 16; ++rep) {
        Tensor xa = x, ga = g;
        augment_pair(xa, ga, rng);
        CHECK(xa.max_abs_diff(ga) == 0.0);  // same transform on both
        // and the transform is a permutation of the source pixels
        std::vector<double> seen(xa.data.begin(), xa.data.end());
        std::sort(seen.begin(), seen.end());
        for (int i = 0; i < 64; ++i) CHECK(seen[static_cast<size_t>(i)] == i);
    }
}

TEST_CASE("augment draw mapping matches the manual coordinate formula") {
    Tensor x(1, 1, 4, 4);
    for (int i = 0; i < 16; ++i) x.data[static_cast<size_t>(i)] = i;
    AugmentDraw draw{true, 1};
    Tensor y = apply_augment(x, draw);
    // hflip then one CCW turn: out(y', x') = in(x', w-1-y') of the flipped
    for (int oy = 0; oy < 4; ++oy)
        for (int ox = 0; ox < 4; ++ox) {
            int fy = ox, fx = 4 - 1 - oy;      // undo the rotation
            int sy = fy, sx = 4 - 1 - fx;      // undo the flip
            CHECK(y.at(0, 0, oy, ox) == x.at(0, 0, sy, sx));
        }
}

TEST_CASE("synthetic textures are deterministic per seed") {
    SynthSpec spec{128, 1, 4, 0.02};
    auto a = synth_sample<double>(spec, 99);
    auto b = synth_sample<double>(spec, 99);
    CHECK(a.image.max_abs_diff(b.image) == 0.0);
    auto c = synth_sample<double>(spec, 100);
    CHECK(c.image.max_abs_diff(a.image) > 0.0);
}

TEST_CASE("zero texture amplitude gives piecewise-constant images") {
    SynthSpec spec{128, 1, 4, 0.0};
    auto sample = synth_sample<double>(spec, 5);
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x) {
            int label = sample.labels[static_cast<size_t>(y) * 128 + static_cast<size_t>(x)];
            // all pixels of one region share one level
            if (x > 0 && sample.labels[static_cast<size_t>(y) * 128 + static_cast<size_t>(x - 1)] == label)
                CHECK(sample.image.at(0, 0, y, x) == sample.image.at(0, 0, y, x - 1));
        }
}

TEST_CASE("region boundaries dominate the interior texture by 10x") {
    SynthSpec spec{128, 1, 4, 0.02};
    auto sample = synth_sample<double>(spec, 8);
    const auto& img = sample.image;
    double boundary_sum = 0.0;
    int boundary_count = 0;
    double interior_sq = 0.0, interior_mean = 0.0;
    int interior_count = 0;
    // horizontal neighbors only; labels identify true region crossings
    for (int y = 0; y < 128; ++y)
        for (int x = 1; x < 128; ++x) {
            double diff = std::abs(img.at(0, 0, y, x) - img.at(0, 0, y, x - 1));
            int la = sample.labels[static_cast<size_t>(y) * 128 + static_cast<size_t>(x)];
            int lb = sample.labels[static_cast<size_t>(y) * 128 + static_cast<size_t>(x - 1)];
            if (la != lb) {
                boundary_sum += diff;
                ++boundary_count;
            }
        }
    // interior texture std measured against each region's level
    SynthSpec flat_spec = spec;
    flat_spec.texture_sigma = 0.0;
    auto flat = synth_sample<double>(flat_spec, 8);  // same seed -> same layout
    for (int i = 0; i < 128 * 128; ++i) {
        double r = img.data[static_cast<size_t>(i)] - flat.image.data[static_cast<size_t>(i)];
        interior_mean += r;
        interior_sq += r * r;
        ++interior_count;
    }
    interior_mean /= interior_count;
    double interior_std = std::sqrt(interior_sq / interior_count - interior_mean * interior_mean);
    REQUIRE(boundary_count > 0);
    double mean_boundary_gradient = boundary_sum / boundary_count;
    CHECK(mean_boundary_gradient >= 10.0 * interior_std);
}

TEST_CASE("synth spec validation") {
    CHECK_THROWS_AS((SynthSpec{64, 1, 4, 0.02}).validate(), ConfigError);
    CHECK_THROWS_AS((SynthSpec{128, 2, 4, 0.02}).validate(), ConfigError);
    CHECK_THROWS_AS((SynthSpec{128, 1, 0, 0.02}).validate(), ConfigError);
}

TEST_CASE("train config validation enforces the pyramid patch bound") {
    TrainConfig cfg = tiny_train_config();
    cfg.patch_size = 4;  // scales {1,2} need >= 8
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.patch_size = 32;
    cfg.lr_floor = 1e-3;  // above lr_init
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.lr_floor = 1e-4;
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("lr zero leaves parameters exactly at their initial values") {
    test::TempDir dir("train_lr0");
    TrainConfig cfg = tiny_train_config();
    cfg.lr_init = 0.0;
    cfg.lr_floor = 0.0;
    cfg.epochs = 1;
    cfg.steps_per_epoch = 3;
    auto initial = PnenModelT<float>::seeded(cfg.model, cfg.seed);
    auto result = train_model<float>(cfg, dir.str());
    auto pa = initial.parameters();
    auto pb = result.model.parameters();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        CAPTURE(pa[i].name);
        CHECK(pa[i].value->max_abs_diff(*pb[i].value) == 0.0);
    }
}

TEST_CASE("identical seeds give byte-identical loss logs") {
    test::TempDir dir_a("train_det_a");
    test::TempDir dir_b("train_det_b");
    TrainConfig cfg = tiny_train_config();
    cfg.epochs = 2;
    cfg.steps_per_epoch = 5;
    train_model<float>(cfg, dir_a.str());
    train_model<float>(cfg, dir_b.str());
    std::string a = slurp(dir_a.file("loss.csv"));
    std::string b = slurp(dir_b.file("loss.csv"));
    CHECK(!a.empty());
    CHECK(a == b);
}

TEST_CASE("loss log has the documented header and row count") {
    test::TempDir dir("train_csv");
    TrainConfig cfg = tiny_train_config();
    cfg.epochs = 2;
    cfg.steps_per_epoch = 4;
    auto result = train_model<float>(cfg, dir.str());
    std::ifstream csv(result.csv_path);
    std::string line;
    std::getline(csv, line);
    CHECK(line == "step,epoch,lr,loss");
    int rows = 0;
    while (std::getline(csv, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 8);
    CHECK(result.step_losses.size() == 8);
    CHECK(result.epoch_losses.size() == 2);
}

TEST_CASE("tiny run: 200 steps cut the training loss by 10x") {
    // d=16, M=1, S=2, 32x32 patches, gaussian-blur target
    test::TempDir dir("train_tiny");
    TrainConfig cfg = tiny_train_config();
    cfg.epochs = 2;
    cfg.steps_per_epoch = 100;
    auto result = train_model<float>(cfg, dir.str());
    double first = result.step_losses.front();
    double last = result.step_losses.back();
    CAPTURE(first);
    CAPTURE(last);
    CHECK(last <= first / 10.0);
    // the tail average moves too, just with per-batch composition noise
    double last_avg = 0.0;
    for (size_t i = result.step_losses.size() - 20; i < result.step_losses.size(); ++i)
        last_avg += result.step_losses[i];
    last_avg /= 20.0;
    CHECK(last_avg <= first / 5.0);
}

TEST_SUITE_END();
