#include <doctest.h>

#include "golden.hpp"
#include "oracles.hpp"
#include "sac/errors.hpp"
#include "sac/vocoder.hpp"

using namespace sac;

namespace {

Vocoder make_vocoder(const VocoderConfig& cfg, std::uint64_t seed, bool zero_cond = false) {
    WeightStore store;
    WeightInit init(seed);
    Vocoder::init_weights(cfg, init, store);
    if (zero_cond) store.put("vocoder.cond_w", Tensor({cfg.speaker_dim, cfg.in_channels}));
    return Vocoder::from_store(cfg, store);
}

SpeakerEmbedding random_g(std::size_t dim, std::uint64_t seed) {
    return SpeakerEmbedding::normalized(oracle::random_tensor({dim}, seed).values());
}

VocoderConfig small() {
    VocoderConfig c;
    c.upsample_factors = {4, 2};
    c.upsample_kernels = {8, 4};
    c.channels = 8;
    c.in_channels = 8;
    c.speaker_dim = 4;
    return c;
}

std::vector<float> stream_in_pieces(const Vocoder& m, const Tensor& feat, const SpeakerEmbedding& g,
                                    const std::vector<std::size_t>& sizes) {
    VocoderState st = VocoderState::fresh(m.config());
    std::vector<float> out;
    std::size_t at = 0;
    for (std::size_t n : sizes) {
        const auto s = vocoder_step(m, st, feat.slice_rows(at, at + n), g);
        CHECK(s.size() % m.config().hop() == 0);
        out.insert(out.end(), s.begin(), s.end());
        at += n;
    }
    const auto tail = vocoder_flush(m, st, g);
    out.insert(out.end(), tail.begin(), tail.end());
    return out;
}

}  // namespace

TEST_CASE("speaker embedding: normalization and degenerate input") {
    const auto g = SpeakerEmbedding::normalized({3, 4});
    CHECK(g.values[0] == doctest::Approx(0.6));
    CHECK(g.norm() == doctest::Approx(1.0));
    CHECK(SpeakerEmbedding::neutral(16).norm() == doctest::Approx(1.0));
    CHECK_THROWS_AS(SpeakerEmbedding::normalized({0, 0, 0}), DegenerateInputError);
}

TEST_CASE("vocoder: T frames give T*hop samples") {
    const Vocoder m = make_vocoder(VocoderConfig{}, 1);
    const auto g = random_g(32, 2);
    for (std::size_t t : {1u, 2u, 7u, 20u}) CHECK(m.offline(oracle::random_tensor({t, 16}, t), g).rows() == t * 320);
}

TEST_CASE("vocoder: one frame through a single x2 stage with kernel 2 gives two samples") {
    VocoderConfig c;
    c.upsample_factors = {2};
    c.upsample_kernels = {2};
    const Vocoder m = make_vocoder(c, 3);
    const Tensor y = m.offline(oracle::random_tensor({1, 16}, 4), random_g(32, 5));
    CHECK(y.rows() == 2);
    CHECK(all_finite(y));
}

TEST_CASE("vocoder: output is bounded by tanh") {
    const Vocoder m = make_vocoder(VocoderConfig{}, 6);
    const Tensor y = m.offline(oracle::random_tensor({10, 16}, 7, 10.0f), random_g(32, 8));
    for (float v : y.data()) CHECK(std::fabs(v) <= 1.0f);
}

TEST_CASE("vocoder: toy golden fixture on zero features and a fixed g") {
    const Vocoder m = make_vocoder(VocoderConfig{}, 90);
    const Tensor y = m.offline(Tensor::zeros(8, 16), random_g(32, 91));
    const auto f = golden::fingerprint(y.data());
    golden::dump("vocoder", f);
    CHECK(f.sum_abs == doctest::Approx(GOLDEN_VOCODER_SUM_ABS).epsilon(1e-5));
    CHECK(f.weighted == doctest::Approx(GOLDEN_VOCODER_WEIGHTED).epsilon(1e-4));
    CHECK(f.first == doctest::Approx(GOLDEN_VOCODER_FIRST).epsilon(1e-5));
    CHECK(f.last == doctest::Approx(GOLDEN_VOCODER_LAST).epsilon(1e-5));
}

TEST_CASE("vocoder: with zero conditioning weights g has no effect") {
    const Vocoder m = make_vocoder(VocoderConfig{}, 10, true);
    const auto g = random_g(32, 11);
    SpeakerEmbedding neg = g;
    for (float& v : neg.values) v = -v;
    const Tensor feat = oracle::random_tensor({6, 16}, 12);
    CHECK(m.offline(feat, g) == m.offline(feat, neg));
}

TEST_CASE("vocoder: conditioning is linear in g") {
    const Vocoder m = make_vocoder(VocoderConfig{}, 13);
    const auto a = random_g(32, 14), b = random_g(32, 15);
    const Tensor ca = m.condition(a), cb = m.condition(b);
    SpeakerEmbedding sum{std::vector<float>(32)};
    for (std::size_t i = 0; i < 32; ++i) sum.values[i] = a.values[i] + b.values[i];
    const Tensor cs = m.condition(sum);
    for (std::size_t i = 0; i < 16; ++i) CHECK(cs(0, i) == doctest::Approx(ca(0, i) + cb(0, i)).epsilon(1e-5));
    CHECK_FALSE(m.offline(Tensor::zeros(4, 16), a) == m.offline(Tensor::zeros(4, 16), b));
}

TEST_CASE("vocoder: mrf_combine averages in branch order") {
    std::vector<Tensor> b{Tensor({1, 1}, {1}), Tensor({1, 1}, {2}), Tensor({1, 1}, {6})};
    CHECK(mrf_combine(b)(0, 0) == 3.0f);
    std::vector<Tensor> none;
    CHECK_THROWS_AS(mrf_combine(none), MisuseError);
}

TEST_CASE("vocoder: zero future reach config emits every frame immediately") {
    VocoderConfig c;
    c.upsample_factors = {4, 2};
    c.upsample_kernels = {4, 2};
    c.resblock_kernels = {};
    c.pre_kernel = c.post_kernel = 1;
    CHECK(c.future_reach() == 0);
    const Vocoder m = make_vocoder(c, 16);
    const auto g = random_g(32, 17);
    const Tensor feat = oracle::random_tensor({9, 16}, 18);
    VocoderState st = VocoderState::fresh(c);
    std::vector<float> out;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto s = vocoder_step(m, st, feat.slice_rows(3 * i, 3 * i + 3), g);
        CHECK(s.size() == 3 * 8);
        out.insert(out.end(), s.begin(), s.end());
    }
    CHECK(vocoder_flush(m, st, g).empty());
    CHECK(out == m.offline(feat, g).values());
}

TEST_CASE("vocoder step: a first chunk shorter than the future reach emits nothing") {
    const Vocoder m = make_vocoder(VocoderConfig{}, 19);
    const std::size_t fv = m.config().future_reach();
    REQUIRE(fv > 1);
    const auto g = random_g(32, 20);
    VocoderState st = VocoderState::fresh(m.config());
    CHECK(vocoder_step(m, st, oracle::random_tensor({fv, 16}, 21), g).empty());
    CHECK(vocoder_step(m, st, oracle::random_tensor({1, 16}, 22), g).size() == m.config().hop());
}

TEST_CASE("vocoder step: 64 frames in 4-frame steps equal offline bit for bit") {
    const Vocoder m = make_vocoder(VocoderConfig{}, 23);
    const auto g = random_g(32, 24);
    const Tensor feat = oracle::random_tensor({64, 16}, 25);
    const auto out = stream_in_pieces(m, feat, g, std::vector<std::size_t>(16, 4));
    CHECK(out == m.offline(feat, g).values());
}

TEST_CASE("vocoder step: random splits over several configs equal offline") {
    VocoderConfig wide = small();
    wide.resblock_kernels = {3, 7};
    wide.resblock_dilations = {1, 2, 4};
    VocoderConfig odd = small();
    odd.upsample_factors = {3, 5};
    odd.upsample_kernels = {7, 5};
    odd.pre_kernel = 3;
    odd.post_kernel = 5;
    std::uint64_t seed = 60;
    for (const VocoderConfig& c : {small(), wide, odd}) {
        const Vocoder m = make_vocoder(c, seed++);
        const auto g = random_g(c.speaker_dim, seed++);
        const Tensor feat = oracle::random_tensor({30, c.in_channels}, seed++);
        const auto ref = m.offline(feat, g).values();
        WeightInit r(seed++);
        for (int trial = 0; trial < 4; ++trial) {
            std::vector<std::size_t> sizes;
            std::size_t left = 30;
            while (left > 0) {
                const std::size_t n =
                    std::min<std::size_t>(left, static_cast<std::size_t>((r.next_symmetric() + 1.0f) * 5));
                sizes.push_back(n);
                left -= n;
            }
            CHECK(stream_in_pieces(m, feat, g, sizes) == ref);
        }
    }
}

TEST_CASE("vocoder step: flush semantics") {
    const Vocoder m = make_vocoder(VocoderConfig{}, 26);
    const auto g = random_g(32, 27);
    SUBCASE("empty stream") {
        VocoderState st = VocoderState::fresh(m.config());
        CHECK(vocoder_flush(m, st, g).empty());
        CHECK_THROWS_AS(vocoder_flush(m, st, g), StateError);
    }
    SUBCASE("stream shorter than the reach") {
        const Tensor feat = oracle::random_tensor({2, 16}, 28);
        VocoderState st = VocoderState::fresh(m.config());
        CHECK(vocoder_step(m, st, feat, g).empty());
        CHECK(vocoder_flush(m, st, g) == m.offline(feat, g).values());
        CHECK_THROWS_AS(vocoder_step(m, st, feat, g), StateError);
    }
}

TEST_CASE("vocoder step: changing g mid-stream is misuse") {
    const Vocoder m = make_vocoder(VocoderConfig{}, 29);
    const auto g = random_g(32, 30), h = random_g(32, 31);
    VocoderState st = VocoderState::fresh(m.config());
    vocoder_step(m, st, Tensor::zeros(4, 16), g);
    CHECK_THROWS_AS(vocoder_step(m, st, Tensor::zeros(4, 16), h), MisuseError);
    CHECK_THROWS_AS(vocoder_step(m, st, Tensor::zeros(4, 3), g), DimensionError);
}

TEST_CASE("vocoder: receptive field is honest and tight") {
    const Vocoder m = make_vocoder(VocoderConfig{}, 32);
    const std::size_t fv = m.config().future_reach(), pv = m.config().past_reach(), hop = m.config().hop();
    const auto g = random_g(32, 33);
    const std::size_t n = fv + pv + 20, j = fv + 10;
    const Tensor feat = oracle::random_tensor({n, 16}, 34);
    const auto base = m.offline(feat, g).values();
    Tensor y = feat;
    for (std::size_t c = 0; c < 16; ++c) y(j, c) += 1.0f;
    const auto out = m.offline(y, g).values();
    auto frame_equal = [&](std::size_t f) {
        return std::equal(base.begin() + long(f * hop), base.begin() + long((f + 1) * hop), out.begin() + long(f * hop));
    };
    for (std::size_t f = 0; f < j - fv; ++f) CHECK(frame_equal(f));
    CHECK_FALSE(frame_equal(j - fv));
    for (std::size_t f = j + pv + 1; f < n; ++f) CHECK(frame_equal(f));
    CHECK_FALSE(frame_equal(j + pv));
}

TEST_CASE("vocoder config: stage widths halve and never reach zero") {
    VocoderConfig c;
    c.channels = 4;
    CHECK(c.stage_out_channels(0) == 2);
    CHECK(c.stage_out_channels(1) == 1);
    CHECK(c.stage_out_channels(2) == 1);
    c.upsample_kernels = {4, 16, 10};
    CHECK_THROWS_AS(c.validate(), ConfigError);
}
