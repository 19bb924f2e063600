#include <doctest.h>

#include "oracles.hpp"
#include "sac/errors.hpp"
#include "sac/kernels.hpp"

using namespace sac;

TEST_CASE("matmul: identity leaves the operand unchanged") {
    Tensor id({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    const Tensor b = oracle::random_tensor({3, 4}, 11);
    CHECK(matmul(id, b) == b);
}

TEST_CASE("matmul: hand-computed 2x2 by 2x1") {
    const Tensor c = matmul(Tensor({2, 2}, {1, 2, 3, 4}), Tensor({2, 1}, {1, 1}));
    CHECK(c == Tensor({2, 1}, {3, 7}));
}

TEST_CASE("matmul: seeded 8x8 equals the naive triple loop exactly") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Tensor a = oracle::random_tensor({8, 8}, seed), b = oracle::random_tensor({8, 8}, seed + 100);
        CHECK(matmul(a, b) == oracle::naive_matmul(a, b));
    }
}

TEST_CASE("matmul: inner dimension mismatch") {
    CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 3})), DimensionError);
}

TEST_CASE("conv1d: K=1 identity channel map is a no-op") {
    ConvSpec s;
    s.in_channels = s.out_channels = 2;
    const Tensor x = oracle::random_tensor({5, 2}, 3);
    const Tensor w({2, 2, 1}, {1, 0, 0, 1});
    CHECK(conv1d(x, w, s, 0, 0) == x);
}

TEST_CASE("conv1d: hand-computed 3-tap sum") {
    ConvSpec s;
    s.kernel_size = 3;
    const Tensor y = conv1d(Tensor({3, 1}, {0, 1, 0}), Tensor({1, 1, 3}, {1, 1, 1}), s, 0, 0);
    CHECK(y == Tensor({1, 1}, {1}));
}

TEST_CASE("conv1d: dilated random case matches direct summation") {
    ConvSpec s;
    s.in_channels = 3;
    s.out_channels = 2;
    s.kernel_size = 3;
    s.dilation = 4;
    const Tensor x = oracle::random_tensor({32, 3}, 21);
    const Tensor w = oracle::random_tensor({2, 3, 3}, 22);
    const Tensor y = conv1d(x, w, s, 4, 4);
    CHECK(y.rows() == 32);
    CHECK(oracle::max_diff(y, oracle::direct_conv(x, w, 4, 1, 4, 4)) <= 1e-6);
}

TEST_CASE("conv1d: strided output length follows the formula") {
    ConvSpec s;
    s.kernel_size = 3;
    s.stride = 2;
    const Tensor x = oracle::random_tensor({11, 1}, 5);
    const Tensor w = oracle::random_tensor({1, 1, 3}, 6);
    const Tensor y = conv1d(x, w, s, 1, 1);
    CHECK(y.rows() == (11 + 2 - 2 - 1) / 2 + 1);
    CHECK(oracle::max_diff(y, oracle::direct_conv(x, w, 1, 2, 1, 1)) <= 1e-6);
}

TEST_CASE("conv1d: explicit pads equal a zero-extended input bit for bit") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        ConvSpec s;
        s.in_channels = 2;
        s.out_channels = 3;
        s.kernel_size = 5;
        s.dilation = 1 + seed % 3;
        const std::size_t lp = seed % 4, rp = (seed * 7) % 5;
        const Tensor x = oracle::random_tensor({20, 2}, seed);
        const Tensor w = oracle::random_tensor({3, 2, 5}, seed + 50);
        Tensor ext = Tensor::zeros(lp, 2);
        ext.append_rows(x);
        ext.append_rows(Tensor::zeros(rp, 2));
        CHECK(conv1d(x, w, s, lp, rp) == conv1d(ext, w, s, 0, 0));
    }
}

TEST_CASE("conv1d: too short for the receptive span") {
    ConvSpec s;
    s.kernel_size = 5;
    CHECK_THROWS_AS(conv1d(Tensor({3, 1}), Tensor({1, 1, 5}), s, 0, 0), DimensionError);
}

TEST_CASE("conv1d: even kernel on a symmetric conv is rejected") {
    ConvSpec s;
    s.kernel_size = 4;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.causal = true;
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("conv1d_transposed: single frame scatters the scaled kernel") {
    const Tensor y = conv1d_transposed(Tensor({1, 1}, {3}), Tensor({1, 1, 2}, {0.5f, -1}), 2);
    CHECK(y == Tensor({2, 1}, {1.5f, -3}));
}

TEST_CASE("conv1d_transposed: hand overlap-add") {
    const Tensor y = conv1d_transposed(Tensor({2, 1}, {1, 1}), Tensor({1, 1, 4}, {1, 1, 1, 1}), 2);
    CHECK(y == Tensor({6, 1}, {1, 1, 2, 2, 1, 1}));
}

TEST_CASE("conv1d_transposed: random case matches scatter-add") {
    const Tensor x = oracle::random_tensor({16, 3}, 31);
    const Tensor w = oracle::random_tensor({3, 2, 8}, 32);
    const Tensor y = conv1d_transposed(x, w, 4);
    CHECK(y.rows() == 16 * 4 + 8 - 4);
    CHECK(oracle::max_diff(y, oracle::scatter_add(x, w, 4)) <= 1e-6);
}

TEST_CASE("conv1d_transposed: kernel shorter than factor") {
    CHECK_THROWS_AS(conv1d_transposed(Tensor({2, 1}), Tensor({1, 1, 2}), 3), ConfigError);
}

TEST_CASE("attention: a single key returns its value row") {
    const Tensor q = oracle::random_tensor({3, 4}, 1);
    const Tensor k = oracle::random_tensor({1, 4}, 2), v = oracle::random_tensor({1, 4}, 3);
    const Tensor o = masked_softmax_attention(q, k, v, BoolMatrix(3, 1, true));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t c = 0; c < 4; ++c) CHECK(o(i, c) == v(0, c));
}

TEST_CASE("attention: uniform scores average the allowed rows") {
    const Tensor q = Tensor::zeros(1, 2);
    const Tensor k = oracle::random_tensor({3, 2}, 4);
    const Tensor v({3, 2}, {1, 2, 3, 4, 100, 100});
    BoolMatrix m(1, 3);
    m.set(0, 0, true);
    m.set(0, 1, true);
    const Tensor o = masked_softmax_attention(q, k, v, m);
    CHECK(o(0, 0) == doctest::Approx(2.0));
    CHECK(o(0, 1) == doctest::Approx(3.0));
}

TEST_CASE("attention: random masks match the per-row softmax oracle") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const Tensor q = oracle::random_tensor({8, 8}, seed), k = oracle::random_tensor({8, 8}, seed + 1),
                     v = oracle::random_tensor({8, 8}, seed + 2);
        WeightInit bits(seed + 3);
        BoolMatrix m(8, 8);
        for (std::size_t i = 0; i < 8; ++i) {
            for (std::size_t j = 0; j < 8; ++j) m.set(i, j, bits.next_symmetric() > 0);
            m.set(i, (i * 3) % 8, true);
        }
        CHECK(oracle::max_diff(masked_softmax_attention(q, k, v, m), oracle::softmax_attention(q, k, v, m)) <= 1e-6);
    }
}

TEST_CASE("attention: fully masked row is rejected") {
    BoolMatrix m(2, 2, true);
    m.set(1, 0, false);
    m.set(1, 1, false);
    CHECK_THROWS_AS(masked_softmax_attention(Tensor({2, 2}), Tensor({2, 2}), Tensor({2, 2}), m), InvalidMaskError);
}

TEST_CASE("attention: unmasked path equals the all-true mask") {
    const Tensor q = oracle::random_tensor({5, 4}, 8), k = oracle::random_tensor({6, 4}, 9),
                 v = oracle::random_tensor({6, 4}, 10);
    CHECK(scaled_dot_product_attention(q, k, v) == masked_softmax_attention(q, k, v, BoolMatrix(5, 6, true)));
}

TEST_CASE("layer_norm: zero mean and unit variance with identity affine") {
    const Tensor x = oracle::random_tensor({4, 16}, 12, 3.0f);
    Tensor g({16}), b({16});
    for (float& v : g.data()) v = 1.0f;
    const Tensor y = layer_norm(x, g, b);
    CHECK(oracle::max_diff(y, oracle::layer_norm(x, g, b)) <= 1e-5);
    for (std::size_t i = 0; i < 4; ++i) {
        double m = 0;
        for (float v : y.row(i)) m += v;
        CHECK(m / 16 == doctest::Approx(0.0).epsilon(1e-5));
    }
}

TEST_CASE("activations") {
    Tensor x({4}, {-2, -0.5f, 0, 3});
    Tensor r = x;
    relu_inplace(r);
    CHECK(r == Tensor({4}, {0, 0, 0, 3}));
    Tensor l = x;
    leaky_relu_inplace(l, 0.1f);
    CHECK(l.data()[0] == doctest::Approx(-0.2));
    Tensor s = Tensor({1}, {0});
    sigmoid_inplace(s);
    CHECK(s.data()[0] == 0.5f);
}

TEST_CASE("kernels are pure: repeated calls are bit-identical and finite") {
    ConvSpec s;
    s.in_channels = 4;
    s.out_channels = 4;
    s.kernel_size = 3;
    s.dilation = 2;
    const Tensor x = oracle::random_tensor({30, 4}, 40), w = oracle::random_tensor({4, 4, 3}, 41);
    const Tensor a = conv1d(x, w, s, 2, 2), b = conv1d(x, w, s, 2, 2);
    CHECK(a == b);
    CHECK(all_finite(a));
    const Tensor q = oracle::random_tensor({7, 4}, 42);
    CHECK(scaled_dot_product_attention(q, x, x) == scaled_dot_product_attention(q, x, x));
}

TEST_CASE("tensor: data length must equal the shape product") {
    CHECK_THROWS_AS(Tensor({2, 3}, std::vector<float>(5)), DimensionError);
    CHECK(Tensor({2, 3}).size() == 6);
}
