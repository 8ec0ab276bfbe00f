#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nnattr/kernels.hpp"
#include "testutil.hpp"

using namespace nnattr;
using testutil::dot;
using testutil::max_abs_diff;
using testutil::random_tensor;

TEST_CASE("matmul identity and hand sums") {
    Tensor<double> eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor<double> v({3, 1}, {1, 2, 3});
    auto r = matmul(eye, v);
    CHECK(r.shape == Shape{3, 1});
    CHECK(r.data == std::vector<double>{1, 2, 3});

    Tensor<double> a({2, 2}, {1, 2, 3, 4});
    Tensor<double> ones({2, 1}, {1, 1});
    auto s = matmul(a, ones);
    CHECK(s.data == std::vector<double>{3, 7});
}

TEST_CASE("matmul matches the naive triple loop exactly") {
    auto a = random_tensor<double>({8, 8});
    auto b = random_tensor<double>({8, 8});
    CHECK(max_abs_diff(matmul(a, b), testutil::naive_matmul(a, b)) == 0.0);
}

TEST_CASE("matmul shape errors name both shapes") {
    Tensor<double> a({2, 3});
    Tensor<double> b({2, 2});
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2x3]"), ShapeError);
}

TEST_CASE("conv2d scalar kernel and delta kernel") {
    Tensor<float> x({1, 3, 3});
    for (auto& v : x.data) v = 1.0f;
    Tensor<float> k({1, 1, 1, 1}, {2.0f});
    auto y = conv2d(x, k, Tensor<float>(), {1, 1}, Padding::Valid);
    CHECK(y.shape == Shape{1, 3, 3});
    for (auto v : y.data) CHECK(v == 2.0f);

    // delta kernel reproduces the input window
    auto img = random_tensor<float>({1, 4, 4});
    Tensor<float> delta({1, 1, 2, 2}, {1.0f, 0.0f, 0.0f, 0.0f});
    auto win = conv2d(img, delta, Tensor<float>(), {1, 1}, Padding::Valid);
    CHECK(win.shape == Shape{1, 3, 3});
    for (std::int64_t i = 0; i < 3; ++i) {
        for (std::int64_t j = 0; j < 3; ++j) {
            CHECK(win.at({0, i, j}) == img.at({0, i, j}));
        }
    }
}

TEST_CASE("conv2d matches the naive loop oracle in single precision") {
    auto x = random_tensor<float>({3, 10, 10});
    auto k = random_tensor<float>({5, 3, 4, 4});
    auto b = random_tensor<float>({5});
    auto y = conv2d(x, k, b, {1, 1}, Padding::Valid);
    auto oracle = testutil::naive_conv2d_valid(x, k, b, 1, 1);
    CHECK(y.shape == oracle.shape);
    CHECK(max_abs_diff(y, oracle) <= 1e-6);
}

TEST_CASE("conv2d rejects oversized kernels") {
    Tensor<double> x({1, 3, 3});
    Tensor<double> k({1, 1, 4, 4});
    CHECK_THROWS_AS(conv2d(x, k, Tensor<double>(), {1, 1}, Padding::Valid), ShapeError);
}

TEST_CASE("conv2d same padding output size") {
    auto x = random_tensor<double>({2, 7, 7});
    auto k = random_tensor<double>({3, 2, 3, 3});
    auto y = conv2d(x, k, Tensor<double>(), {1, 1}, Padding::Same);
    CHECK(y.shape == Shape{3, 7, 7});
    auto y2 = conv2d(x, k, Tensor<double>(), {2, 2}, Padding::Same);
    CHECK(y2.shape == Shape{3, 4, 4});
}

TEST_CASE("conv2d input adjoint: zeros, scalar kernel, inner-product identity") {
    auto k1 = Tensor<float>({1, 1, 1, 1}, {3.0f});
    Tensor<float> zeros({1, 3, 3});
    auto gz = conv2d_input_adjoint(zeros, k1, {1, 1}, Padding::Valid, {1, 3, 3});
    for (auto v : gz.data) CHECK(v == 0.0f);

    // scalar kernel c scales the upstream on the stride grid
    Tensor<float> up({1, 2, 2}, {1, 2, 3, 4});
    auto g = conv2d_input_adjoint(up, k1, {2, 2}, Padding::Valid, {1, 3, 3});
    CHECK(g.at({0, 0, 0}) == 3.0f);
    CHECK(g.at({0, 0, 2}) == 6.0f);
    CHECK(g.at({0, 2, 0}) == 9.0f);
    CHECK(g.at({0, 2, 2}) == 12.0f);
    CHECK(g.at({0, 1, 1}) == 0.0f);

    for (Padding pad : {Padding::Valid, Padding::Same}) {
        for (auto stride : {std::array<std::int64_t, 2>{1, 1}, std::array<std::int64_t, 2>{2, 2}}) {
            auto x = random_tensor<double>({3, 9, 9});
            auto k = random_tensor<double>({4, 3, 3, 3});
            auto y = conv2d(x, k, Tensor<double>(), stride, pad);
            auto u = random_tensor<double>(y.shape);
            auto adj = conv2d_input_adjoint(u, k, stride, pad, x.shape);
            CHECK(std::abs(dot(y, u) - dot(x, adj)) <= 1e-12 * std::max(1.0, std::abs(dot(y, u))));
        }
    }
}

TEST_CASE("avgpool2d values and adjoint") {
    Tensor<double> c({2, 4, 4});
    for (auto& v : c.data) v = 2.5;
    auto y = avgpool2d(c, {2, 2}, {2, 2});
    for (auto v : y.data) CHECK(v == 2.5);

    Tensor<double> x({1, 2, 2}, {1, 2, 3, 4});
    auto m = avgpool2d(x, {2, 2}, {2, 2});
    CHECK(m.data[0] == 2.5);

    auto xi = random_tensor<double>({2, 6, 6});
    auto yo = avgpool2d(xi, {3, 3}, {2, 2});
    auto u = random_tensor<double>(yo.shape);
    auto adj = avgpool2d_adjoint(u, {3, 3}, {2, 2}, xi.shape);
    CHECK(std::abs(dot(yo, u) - dot(xi, adj)) <= 1e-12);
}

TEST_CASE("avgpool2d window exceeding input errors") {
    Tensor<double> x({1, 2, 2});
    CHECK_THROWS_AS(avgpool2d(x, {3, 3}, {1, 1}), ShapeError);
}

TEST_CASE("maxpool2d max, argmax, ties and adjoint routing") {
    Tensor<double> x({1, 2, 2}, {1, 2, 3, 4});
    auto [y, idx] = maxpool2d(x, {2, 2}, {2, 2});
    CHECK(y.data[0] == 4.0);
    CHECK(idx.data[0] == 3); // flat row-major position (1,1)

    Tensor<double> flat({1, 2, 2}, {7, 7, 7, 7});
    auto [y2, idx2] = maxpool2d(flat, {2, 2}, {2, 2});
    CHECK(y2.data[0] == 7.0);
    CHECK(idx2.data[0] == 0); // tie breaks to the lowest row-major index

    Tensor<double> ones_up({1, 1, 1}, {1.0});
    auto routed = maxpool2d_adjoint(ones_up, idx, {1, 2, 2});
    CHECK(routed.data == std::vector<double>{0, 0, 0, 1});

    auto xi = random_tensor<float>({3, 6, 6});
    auto [yo, am] = maxpool2d(xi, {3, 3}, {3, 3});
    auto u = random_tensor<float>(yo.shape);
    auto adj = maxpool2d_adjoint(u, am, xi.shape);
    CHECK(std::abs(dot(yo, u) - dot(xi, adj)) <= 1e-6);
}

TEST_CASE("channel permutation round trip and index map") {
    auto x = random_tensor<double>({2, 10, 10, 3});
    auto cf = channels_last_to_first(x);
    CHECK(cf.shape == Shape{2, 3, 10, 10});
    auto back = channels_first_to_last(cf);
    CHECK(back.shape == x.shape);
    CHECK(back.data == x.data); // bit-exact round trip

    std::uniform_int_distribution<std::int64_t> db(0, 1), dh(0, 9), dc(0, 2);
    for (int probe = 0; probe < 20; ++probe) {
        const auto b = db(testutil::test_rng()), h = dh(testutil::test_rng());
        const auto w = dh(testutil::test_rng()), c = dc(testutil::test_rng());
        CHECK(x.at({b, h, w, c}) == cf.at({b, c, h, w}));
    }
}

TEST_CASE("channel permutation rejects wrong rank") {
    Tensor<double> x({2, 3, 4});
    CHECK_THROWS_AS(channels_last_to_first(x), ShapeError);
}

TEST_CASE("kernels are deterministic across runs") {
    auto x = random_tensor<float>({3, 8, 8});
    auto k = random_tensor<float>({4, 3, 3, 3});
    auto b = random_tensor<float>({4});
    auto y1 = conv2d(x, k, b, {1, 1}, Padding::Same);
    auto y2 = conv2d(x, k, b, {1, 1}, Padding::Same);
    CHECK(y1.data == y2.data);

    auto a = random_tensor<float>({5, 7});
    auto m = random_tensor<float>({7, 4});
    CHECK(matmul(a, m).data == matmul(a, m).data);
}

TEST_CASE("adjoint identity holds in single precision across random geometries") {
    for (int trial = 0; trial < 8; ++trial) {
        std::uniform_int_distribution<std::int64_t> dim(5, 9), ch(1, 3), kk(1, 3);
        const auto h = dim(testutil::test_rng()), w = dim(testutil::test_rng());
        const auto cin = ch(testutil::test_rng()), cout = ch(testutil::test_rng());
        const auto ks = kk(testutil::test_rng());
        auto x = random_tensor<float>({cin, h, w});
        auto k = random_tensor<float>({cout, cin, ks, ks});
        auto y = conv2d(x, k, Tensor<float>(), {1, 1}, Padding::Valid);
        auto u = random_tensor<float>(y.shape);
        auto adj = conv2d_input_adjoint(u, k, {1, 1}, Padding::Valid, x.shape);
        CHECK(std::abs(dot(y, u) - dot(x, adj)) <= 1e-6 * std::max(1.0, std::abs(dot(y, u))));
    }
}
