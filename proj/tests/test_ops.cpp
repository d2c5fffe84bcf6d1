#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "pnen/ops.hpp"
#include "test_util.hpp"

using namespace pnen;
using test::random_tensor;

TEST_SUITE_BEGIN("ops");

TEST_CASE("conv2d with a 1x1 identity kernel is the identity") {
    ConvLayer layer(1, 1, 1);
    layer.weights.data[0] = 1.0;
    Tensor x(1, 1, 3, 3, 1.0);
    Tensor y = conv2d(x, layer);
    CHECK(y.same_shape(x));
    CHECK(y.max_abs_diff(x) == 0.0);
}

TEST_CASE("kernel=stride=2 with all-0.25 taps averages non-overlapping blocks") {
    ConvLayer layer(1, 1, 2, 2);
    layer.weights.fill(0.25);
    Tensor x(1, 1, 4, 4);
    for (int i = 0; i < 16; ++i) x.data[static_cast<size_t>(i)] = i + 1;
    Tensor y = conv2d(x, layer);
    CHECK(y.h == 2);
    CHECK(y.w == 2);
    // block means computed by hand from values 1..16
    CHECK(y.at(0, 0, 0, 0) == doctest::Approx(3.5));
    CHECK(y.at(0, 0, 0, 1) == doctest::Approx(5.5));
    CHECK(y.at(0, 0, 1, 0) == doctest::Approx(11.5));
    CHECK(y.at(0, 0, 1, 1) == doctest::Approx(13.5));
}

TEST_CASE("dilated conv matches the naive loop oracle") {
    Rng rng(101);
    ConvLayer layer(1, 1, 3, 1, 2, 2);
    test::randomize(layer, rng);
    Tensor x = random_tensor(1, 1, 5, 5, rng);
    Tensor y = conv2d(x, layer);
    CHECK(y.h == 5);
    CHECK(y.w == 5);
    CHECK(y.max_abs_diff(oracle::conv2d_naive(x, layer)) < 1e-12);
}

TEST_CASE("conv2d matches the oracle across strides, dilations, and batches") {
    Rng rng(102);
    struct Geometry {
        int in_c, out_c, k, stride, pad, dil;
    };
    for (const auto& geo : {Geometry{3, 5, 3, 1, 1, 1}, Geometry{2, 4, 2, 2, 0, 1},
                            Geometry{4, 3, 3, 2, 2, 2}, Geometry{1, 2, 4, 4, 1, 1}}) {
        ConvLayer layer(geo.in_c, geo.out_c, geo.k, geo.stride, geo.pad, geo.dil);
        test::randomize(layer, rng);
        Tensor x = random_tensor(2, geo.in_c, 9, 7, rng);
        Tensor y = conv2d(x, layer);
        CAPTURE(geo.k);
        CHECK(y.max_abs_diff(oracle::conv2d_naive(x, layer)) < 1e-12);
    }
}

TEST_CASE("conv2d validates channels and output size") {
    ConvLayer layer(3, 4, 3);
    Tensor wrong(1, 2, 5, 5);
    CHECK_THROWS_AS(conv2d(wrong, layer), ConfigError);
    Tensor tiny(1, 3, 2, 2);  // 3x3 kernel, no padding -> empty output
    CHECK_THROWS_AS(conv2d(tiny, layer), ConfigError);
}

TEST_CASE("kernel=stride=k tiles to floor(h/k) x floor(w/k)") {
    Rng rng(103);
    for (int k : {2, 4, 8}) {
        ConvLayer layer(1, 1, k, k);
        test::randomize(layer, rng);
        Tensor x = random_tensor(1, 1, 16, 24, rng);
        Tensor y = conv2d(x, layer);
        CHECK(y.h == 16 / k);
        CHECK(y.w == 24 / k);
    }
}

TEST_CASE("batchnorm eval with unit stats is identity up to epsilon") {
    BatchNormLayer bn(2);
    bn.mode = BatchNormLayer::Mode::eval;
    Rng rng(104);
    Tensor x = random_tensor(2, 2, 3, 3, rng);
    Tensor y = batchnorm(x, bn);
    CHECK(y.max_abs_diff(x) < 1e-5);  // scaled by 1/sqrt(1+eps)
}

TEST_CASE("batchnorm train on constant input collapses to beta") {
    BatchNormLayer bn(2);
    bn.mode = BatchNormLayer::Mode::train;
    bn.beta.data = {0.25, -1.5};
    Tensor x(2, 2, 3, 3, 7.0);
    Tensor y = batchnorm(x, bn);
    for (int item = 0; item < 2; ++item)
        for (int ch = 0; ch < 2; ++ch)
            for (int p = 0; p < 9; ++p)
                CHECK(y.at(item, ch, p / 3, p % 3) ==
                      doctest::Approx(bn.beta.data[static_cast<size_t>(ch)]).epsilon(1e-9));
}

TEST_CASE("batchnorm train normalizes {1,3} to {-1,3} with gamma 2 beta 1") {
    BatchNormLayer bn(1);
    bn.mode = BatchNormLayer::Mode::train;
    bn.gamma.data[0] = 2.0;
    bn.beta.data[0] = 1.0;
    bn.epsilon = 0.0;
    Tensor x(1, 1, 1, 2);
    x.data = {1.0, 3.0};
    Tensor y = batchnorm(x, bn);
    // mean 2, biased std 1
    CHECK(y.data[0] == doctest::Approx(-1.0));
    CHECK(y.data[1] == doctest::Approx(3.0));
    // running stats moved toward the batch by momentum 0.1
    CHECK(bn.running_mean.data[0] == doctest::Approx(0.2));
    CHECK(bn.running_var.data[0] == doctest::Approx(0.9 + 0.1 * 1.0));
}

TEST_CASE("relu clamps negatives only") {
    Tensor x(1, 1, 1, 3);
    x.data = {-1.0, 0.0, 2.0};
    Tensor y = relu(x);
    CHECK(y.data[0] == 0.0);
    CHECK(y.data[1] == 0.0);
    CHECK(y.data[2] == 2.0);
    Tensor pos(1, 1, 2, 2, 3.5);
    CHECK(relu(pos).max_abs_diff(pos) == 0.0);
    Tensor neg(1, 1, 2, 2, -3.5);
    CHECK(relu(neg).max_abs_diff(Tensor(1, 1, 2, 2, 0.0)) == 0.0);
}

TEST_CASE("matmul identity and dot product") {
    Tensor eye = Tensor::matrix(3, 3);
    for (int i = 0; i < 3; ++i) eye.m_at(0, i, i) = 1.0;
    Rng rng(105);
    Tensor a = random_tensor(1, 1, 3, 3, rng);
    CHECK(matmul(eye, a).max_abs_diff(a) == 0.0);

    Tensor row = Tensor::matrix(1, 2);
    row.data = {1.0, 2.0};
    Tensor col = Tensor::matrix(2, 1);
    col.data = {3.0, 4.0};
    CHECK(matmul(row, col).data[0] == doctest::Approx(11.0));
}

TEST_CASE("matmul 7x5 * 5x3 matches the triple-loop oracle") {
    Rng rng(106);
    Tensor a = random_tensor(1, 1, 7, 5, rng);
    Tensor b = random_tensor(1, 1, 5, 3, rng);
    CHECK(matmul(a, b).max_abs_diff(oracle::matmul_naive(a, b)) < 1e-12);
}

TEST_CASE("matmul rejects dimension mismatches") {
    Tensor a = Tensor::matrix(2, 3);
    Tensor b = Tensor::matrix(4, 2);
    CHECK_THROWS_AS(matmul(a, b), ConfigError);
    CHECK_THROWS_AS(matmul(a, b, /*trans_b=*/true), ConfigError);
    Tensor bt = Tensor::matrix(4, 3);  // (cols x k) with trans_b
    CHECK_NOTHROW(matmul(a, bt, /*trans_b=*/true));
}

TEST_CASE("softmax of equal values is uniform") {
    Tensor z = Tensor::matrix(1, 5, 3.25);
    Tensor p = softmax_rows(z);
    for (double v : p.data) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("softmax of [0, ln 3] is [0.25, 0.75]") {
    Tensor z = Tensor::matrix(1, 2);
    z.data = {0.0, std::log(3.0)};
    Tensor p = softmax_rows(z);
    CHECK(p.data[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(p.data[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax survives huge logits via max subtraction") {
    Tensor z = Tensor::matrix(1, 3);
    z.data = {1000.0, 1000.0, 999.0};
    Tensor p = softmax_rows(z);
    CHECK(p.all_finite());
    CHECK(p.data[0] + p.data[1] + p.data[2] == doctest::Approx(1.0).epsilon(1e-6));
    Tensor inf_z = Tensor::matrix(1, 2);
    inf_z.data[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(softmax_rows(inf_z), NumericError);
}

TEST_CASE("softmax rows are probability vectors") {
    Rng rng(107);
    Tensor z = random_tensor(2, 1, 6, 9, rng, -30.0, 30.0);
    Tensor p = softmax_rows(z);
    for (int item = 0; item < 2; ++item)
        for (int r = 0; r < 6; ++r) {
            double sum = 0.0;
            for (int j = 0; j < 9; ++j) {
                double v = p.m_at(item, r, j);
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                sum += v;
            }
            CHECK(std::abs(sum - 1.0) < 1e-6);
        }
}

TEST_CASE("adaptive_avg_pool uses floor-interval partitions") {
    Tensor x(1, 1, 3, 3);
    for (int i = 0; i < 9; ++i) x.data[static_cast<size_t>(i)] = i;
    Tensor y = adaptive_avg_pool(x, 2, 2);
    // intervals along 3 -> [0,1) and [1,3)
    CHECK(y.at(0, 0, 0, 0) == doctest::Approx(0.0));
    CHECK(y.at(0, 0, 0, 1) == doctest::Approx((1.0 + 2.0) / 2));
    CHECK(y.at(0, 0, 1, 0) == doctest::Approx((3.0 + 6.0) / 2));
    CHECK(y.at(0, 0, 1, 1) == doctest::Approx((4.0 + 5.0 + 7.0 + 8.0) / 4));
    CHECK_THROWS_AS(adaptive_avg_pool(x, 4, 1), ConfigError);
}

TEST_CASE("image_to_rows and rows_to_image invert each other") {
    Rng rng(108);
    Tensor x = random_tensor(2, 3, 4, 5, rng);
    Tensor rows = image_to_rows(x);
    CHECK(rows.h == 20);
    CHECK(rows.w == 3);
    CHECK(rows_to_image(rows, 3, 4, 5).max_abs_diff(x) == 0.0);
}

TEST_CASE("deterministic forward: same inputs give bit-identical results") {
    Rng rng_a(42), rng_b(42);
    ConvLayer la(3, 4, 3, 1, 1), lb(3, 4, 3, 1, 1);
    la.init_fan_in_uniform(rng_a);
    lb.init_fan_in_uniform(rng_b);
    Tensor xa = random_tensor(1, 3, 8, 8, rng_a);
    Tensor xb = random_tensor(1, 3, 8, 8, rng_b);
    CHECK(xa.max_abs_diff(xb) == 0.0);
    CHECK(conv2d(xa, la).max_abs_diff(conv2d(xb, lb)) == 0.0);
}

TEST_SUITE_END();
