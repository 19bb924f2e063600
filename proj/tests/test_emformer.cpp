#include <doctest.h>

#include "oracles.hpp"
#include "sac/emformer.hpp"
#include "golden.hpp"
#include "sac/errors.hpp"

using namespace sac;

namespace {

Emformer make_emformer(const EmformerConfig& cfg, std::uint64_t seed) {
    WeightStore store;
    WeightInit init(seed);
    Emformer::init_weights(cfg, init, store);
    return Emformer::from_store(cfg, store);
}

EmformerConfig toy() { return EmformerConfig{}; }

Tensor run_stream(const Emformer& m, const Tensor& x) {
    EmformerState st = EmformerState::fresh(m.config());
    Tensor out = Tensor::zeros(0, m.config().hidden);
    const std::size_t s = m.config().segment;
    for (std::size_t t = 0; t < x.rows(); t += s) out.append_rows(emformer_step(m, st, x.slice_rows(t, t + s)));
    out.append_rows(emformer_flush(m, st));
    return out;
}

}  // namespace

TEST_CASE("emformer offline: one segment with no context is plain self-attention") {
    EmformerConfig cfg{1, 8, 2, 4, 0, 0, 16};
    const Emformer m = make_emformer(cfg, 3);
    const Tensor x = oracle::random_tensor({4, 8}, 4);
    const Tensor ref = oracle::transformer_layer(m.layers()[0], 2, x, BoolMatrix(4, 4, true));
    CHECK(oracle::max_diff(m.offline(x), ref) <= 1e-5);
}

TEST_CASE("emformer offline: unbounded context equals a full transformer stack") {
    EmformerConfig cfg{2, 8, 2, 4, 100, 100, 16};
    const Emformer m = make_emformer(cfg, 5);
    const Tensor x = oracle::random_tensor({12, 8}, 6);
    Tensor ref = x;
    for (const auto& w : m.layers()) ref = oracle::transformer_layer(w, 2, ref, BoolMatrix(12, 12, true));
    CHECK(oracle::max_diff(m.offline(x), ref) <= 1e-5);
}

TEST_CASE("emformer offline: single layer equals masked attention with the segment mask") {
    EmformerConfig cfg{1, 8, 2, 4, 8, 4, 16};
    const Emformer m = make_emformer(cfg, 7);
    const Tensor x = oracle::random_tensor({24, 8}, 8);
    const Tensor ref = oracle::transformer_layer(m.layers()[0], 2, x, oracle::segment_mask(24, 4, 8, 4));
    CHECK(oracle::max_diff(m.offline(x), ref) <= 1e-5);
}

TEST_CASE("emformer offline: toy golden fixture") {
    const Emformer m = make_emformer(toy(), 2024);
    const Tensor y = m.offline(oracle::random_tensor({40, 16}, 99));
    REQUIRE(y.rows() == 40);
    const auto f = golden::fingerprint(y.data());
    golden::dump("emformer", f);
    CHECK(f.sum_abs == doctest::Approx(GOLDEN_EMFORMER_SUM_ABS).epsilon(1e-5));
    CHECK(f.weighted == doctest::Approx(GOLDEN_EMFORMER_WEIGHTED).epsilon(1e-4));
    CHECK(f.first == doctest::Approx(GOLDEN_EMFORMER_FIRST).epsilon(1e-5));
    CHECK(f.last == doctest::Approx(GOLDEN_EMFORMER_LAST).epsilon(1e-5));
}

TEST_CASE("emformer offline: length must be a multiple of the segment") {
    const Emformer m = make_emformer(toy(), 1);
    CHECK_THROWS_AS(m.offline(Tensor({6, 16})), DimensionError);
}

TEST_CASE("emformer offline: first segment ignores frames at or after S+R") {
    const EmformerConfig cfg = toy();
    const Emformer m = make_emformer(cfg, 9);
    Tensor x = oracle::random_tensor({32, 16}, 10);
    const Tensor a = m.offline(x);
    const Tensor noise = oracle::random_tensor({32, 16}, 11, 5.0f);
    for (std::size_t t = cfg.segment + cfg.right_context; t < 32; ++t)
        for (std::size_t c = 0; c < 16; ++c) x(t, c) = noise(t, c);
    const Tensor b = m.offline(x);
    CHECK(a.slice_rows(0, cfg.segment) == b.slice_rows(0, cfg.segment));
    CHECK_FALSE(a.slice_rows(cfg.segment, 32) == b.slice_rows(cfg.segment, 32));
}

TEST_CASE("emformer: every segment is invariant to inputs from (i+1)S+R on") {
    const EmformerConfig cfg = toy();
    const Emformer m = make_emformer(cfg, 12);
    const Tensor x = oracle::random_tensor({40, 16}, 13);
    const Tensor base = m.offline(x);
    for (std::size_t i = 0; i < 10; ++i) {
        const std::size_t cut = (i + 1) * cfg.segment + cfg.right_context;
        if (cut >= 40) break;
        Tensor y = x;
        const Tensor noise = oracle::random_tensor({40, 16}, 100 + i, 3.0f);
        for (std::size_t t = cut; t < 40; ++t)
            for (std::size_t c = 0; c < 16; ++c) y(t, c) = noise(t, c);
        const Tensor out = m.offline(y);
        CHECK(out.slice_rows(0, (i + 1) * cfg.segment) == base.slice_rows(0, (i + 1) * cfg.segment));
    }
}

TEST_CASE("emformer step: R=0 emits immediately and matches offline") {
    EmformerConfig cfg{2, 16, 2, 4, 8, 0, 32};
    const Emformer m = make_emformer(cfg, 14);
    const Tensor x = oracle::random_tensor({4, 16}, 15);
    EmformerState st = EmformerState::fresh(cfg);
    const Tensor out = emformer_step(m, st, x);
    CHECK(out == m.offline(x));
}

TEST_CASE("emformer step: R=S delays output by one segment") {
    EmformerConfig cfg{2, 16, 2, 4, 8, 4, 32};
    const Emformer m = make_emformer(cfg, 16);
    const Tensor x = oracle::random_tensor({8, 16}, 17);
    EmformerState st = EmformerState::fresh(cfg);
    CHECK(emformer_step(m, st, x.slice_rows(0, 4)).rows() == 0);
    const Tensor seg0 = emformer_step(m, st, x.slice_rows(4, 8));
    CHECK(seg0 == m.offline(x).slice_rows(0, 4));
}

TEST_CASE("emformer step: ten toy steps plus flush equal offline bit for bit") {
    const Emformer m = make_emformer(toy(), 18);
    const Tensor x = oracle::random_tensor({40, 16}, 19);
    CHECK(run_stream(m, x) == m.offline(x));
}

TEST_CASE("emformer step: equivalence across configs") {
    const EmformerConfig cfgs[] = {{1, 8, 1, 4, 0, 0, 8},  {2, 8, 2, 2, 3, 5, 16},  {3, 12, 3, 4, 4, 8, 24},
                                   {2, 16, 4, 4, 30, 8, 32}, {2, 8, 2, 3, 7, 2, 8}};
    std::uint64_t seed = 40;
    for (const auto& cfg : cfgs) {
        const Emformer m = make_emformer(cfg, seed++);
        for (std::size_t segs : {1u, 2u, 7u}) {
            const Tensor x = oracle::random_tensor({segs * cfg.segment, cfg.hidden}, seed++);
            CHECK(run_stream(m, x) == m.offline(x));
        }
    }
}

TEST_CASE("emformer state: cache bounded by L and frame counter tracks steps") {
    const EmformerConfig cfg = toy();
    const Emformer m = make_emformer(cfg, 20);
    const Tensor x = oracle::random_tensor({48, 16}, 21);
    EmformerState st = EmformerState::fresh(cfg);
    CHECK(st.key_cache[0].rows() == 0);
    for (std::size_t n = 1; n <= 12; ++n) {
        emformer_step(m, st, x.slice_rows((n - 1) * 4, n * 4));
        CHECK(st.frames_consumed == n * cfg.segment);
        for (std::size_t l = 0; l < cfg.num_layers; ++l) {
            CHECK(st.key_cache[l].rows() <= cfg.left_context);
            CHECK(st.value_cache[l].rows() <= cfg.left_context);
        }
    }
}

TEST_CASE("emformer step: misuse") {
    const Emformer m = make_emformer(toy(), 22);
    EmformerState st = EmformerState::fresh(toy());
    CHECK_THROWS_AS(emformer_step(m, st, Tensor({3, 16})), ChunkingError);
    emformer_flush(m, st);
    CHECK_THROWS_AS(emformer_step(m, st, Tensor({4, 16})), StateError);
    CHECK_THROWS_AS(emformer_flush(m, st), StateError);
}

TEST_CASE("block mask: trivial layouts") {
    EmformerConfig c{1, 8, 1, 4, 0, 0, 8};
    const auto one = build_block_mask(4, c);
    CHECK(mask_sparsity(one) == 0.0);
    CHECK(mask_sparsity(one.dense()) == 0.0);
    const auto two = build_block_mask(8, c);
    CHECK(mask_sparsity(two) == 0.5);
    CHECK(two.allows(0, 3));
    CHECK_FALSE(two.allows(0, 4));
}

TEST_CASE("block mask: dense form matches the cell-by-cell definition") {
    for (std::size_t t : {1u, 5u, 17u, 40u, 83u}) {
        EmformerConfig c{1, 8, 1, 4, 6, 3, 8};
        const auto m = build_block_mask(t, c);
        const auto ref = oracle::segment_mask(t, 4, 6, 3);
        CHECK(m.dense().cells == ref.cells);
        CHECK(m.sparsity() == doctest::Approx(oracle::count_sparsity(ref)).epsilon(1e-12));
    }
}

TEST_CASE("mask sparsity: extremes") {
    CHECK(mask_sparsity(BoolMatrix(5, 5, true)) == 0.0);
    CHECK(mask_sparsity(BoolMatrix(5, 5, false)) == 1.0);
}

TEST_CASE("mask sparsity: full-scale layout at T=400 by counting") {
    EmformerConfig c{1, 8, 1, 4, 30, 8, 8};
    const double s = mask_sparsity(build_block_mask(400, c).dense());
    CHECK(s == doctest::Approx(oracle::count_sparsity(oracle::segment_mask(400, 4, 30, 8))));
    CHECK(s == doctest::Approx(0.8985).epsilon(1e-12));
    MESSAGE("sparsity at T=400: " << s);
}

TEST_CASE("mask sparsity: non-decreasing in T past L+S+R") {
    EmformerConfig c{1, 8, 1, 4, 30, 8, 8};
    double prev = 0.0;
    for (std::size_t t = 43; t <= 800; ++t) {
        const double s = build_block_mask(t, c).sparsity();
        CHECK(s >= prev - 1e-15);
        prev = s;
    }
}

TEST_CASE("blocksparse attention: all-true mask equals unmasked attention") {
    const Tensor q = oracle::random_tensor({8, 4}, 1), k = oracle::random_tensor({8, 4}, 2),
                 v = oracle::random_tensor({8, 4}, 3);
    const AttentionBlockMask all(8, 4, 8, 8);
    CHECK(oracle::max_diff(blocksparse_attention(q, k, v, all), scaled_dot_product_attention(q, k, v)) <= 1e-6);
}

TEST_CASE("blocksparse attention: block-diagonal equals per-segment attention") {
    const Tensor q = oracle::random_tensor({12, 4}, 4), k = oracle::random_tensor({12, 4}, 5),
                 v = oracle::random_tensor({12, 4}, 6);
    const Tensor out = blocksparse_attention(q, k, v, AttentionBlockMask(12, 4, 0, 0));
    for (std::size_t s = 0; s < 3; ++s) {
        const Tensor ref = scaled_dot_product_attention(q.slice_rows(4 * s, 4 * s + 4), k.slice_rows(4 * s, 4 * s + 4),
                                                        v.slice_rows(4 * s, 4 * s + 4));
        CHECK(oracle::max_diff(out.slice_rows(4 * s, 4 * s + 4), ref) <= 1e-6);
    }
}

TEST_CASE("blocksparse attention: seeded cases equal dense masked attention") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const std::size_t t = 8 + seed * 3, s = 1 + seed % 5, l = seed % 7, r = seed % 4;
        const Tensor q = oracle::random_tensor({t, 8}, seed), k = oracle::random_tensor({t, 8}, seed + 1000),
                     v = oracle::random_tensor({t, 8}, seed + 2000);
        const AttentionBlockMask m(t, s, l, r);
        CHECK(oracle::max_diff(blocksparse_attention(q, k, v, m), masked_softmax_attention(q, k, v, m.dense())) <=
              1e-6);
    }
}
