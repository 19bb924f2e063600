#include "sac/vocoder.hpp"

#include <algorithm>
#include <cmath>

#include "sac/errors.hpp"

namespace sac {

namespace {

constexpr float kStageSlope = 0.1f;
constexpr float kOutputSlope = 0.01f;
// Weight gain for the vocoder convolutions; with the plain bound the deep
// stack attenuates a random signal to almost nothing.
constexpr float kConvGain = 2.45f;

long long floor_div(long long a, long long b) {
    long long q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

long long ceil_div(long long a, long long b) { return -floor_div(-a, b); }

}  // namespace

float SpeakerEmbedding::norm() const {
    double s = 0.0;
    for (float v : values) s += static_cast<double>(v) * v;
    return static_cast<float>(std::sqrt(s));
}

SpeakerEmbedding SpeakerEmbedding::normalized(std::vector<float> v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    if (!(s > 0.0) || !std::isfinite(s)) throw DegenerateInputError("speaker embedding has zero norm");
    const double inv = 1.0 / std::sqrt(s);
    for (float& x : v) x = static_cast<float>(x * inv);
    return SpeakerEmbedding{std::move(v)};
}

SpeakerEmbedding SpeakerEmbedding::neutral(std::size_t dim) {
    if (dim == 0) throw ConfigError("speaker embedding dimension must be positive");
    return SpeakerEmbedding{std::vector<float>(dim, static_cast<float>(1.0 / std::sqrt(static_cast<double>(dim))))};
}

void VocoderConfig::validate() const {
    if (in_channels == 0 || channels == 0 || speaker_dim == 0)
        throw ConfigError("vocoder: channel counts must be positive");
    if (upsample_factors.empty()) throw ConfigError("vocoder: at least one upsampling stage is required");
    if (upsample_kernels.size() != upsample_factors.size())
        throw ConfigError("vocoder: one transposed kernel size per upsampling factor");
    for (std::size_t s = 0; s < upsample_factors.size(); ++s) {
        if (upsample_factors[s] < 1) throw ConfigError("vocoder: upsampling factors must be >= 1");
        if (upsample_kernels[s] < upsample_factors[s])
            throw ConfigError("vocoder: transposed kernel " + std::to_string(upsample_kernels[s]) +
                              " is shorter than its factor " + std::to_string(upsample_factors[s]));
    }
    for (std::size_t k : resblock_kernels)
        if (k == 0 || k % 2 == 0) throw ConfigError("vocoder: residual block kernels must be odd");
    if (!resblock_kernels.empty() && resblock_dilations.empty())
        throw ConfigError("vocoder: residual blocks need at least one dilation");
    for (std::size_t d : resblock_dilations)
        if (d < 1) throw ConfigError("vocoder: dilations must be >= 1");
    if (pre_kernel % 2 == 0 || post_kernel % 2 == 0)
        throw ConfigError("vocoder: input/output conv kernels must be odd");
}

std::size_t VocoderConfig::hop() const {
    std::size_t h = 1;
    for (std::size_t f : upsample_factors) h *= f;
    return h;
}

std::size_t VocoderConfig::stage_in_channels(std::size_t stage) const {
    return stage == 0 ? channels : stage_out_channels(stage - 1);
}

std::size_t VocoderConfig::stage_out_channels(std::size_t stage) const {
    return std::max<std::size_t>(1, channels >> (stage + 1));
}

std::size_t VocoderConfig::trim_left(std::size_t stage) const {
    return (upsample_kernels.at(stage) - upsample_factors.at(stage)) / 2;
}

std::size_t VocoderConfig::trim_right(std::size_t stage) const {
    return upsample_kernels.at(stage) - upsample_factors.at(stage) - trim_left(stage);
}

ConvSpec VocoderConfig::pre_spec() const {
    ConvSpec s;
    s.in_channels = in_channels;
    s.out_channels = channels;
    s.kernel_size = pre_kernel;
    return s;
}

ConvSpec VocoderConfig::post_spec() const {
    ConvSpec s;
    s.in_channels = stage_out_channels(num_stages() - 1);
    s.out_channels = 1;
    s.kernel_size = post_kernel;
    return s;
}

ConvSpec VocoderConfig::res_spec(std::size_t stage, std::size_t kernel, std::size_t dilation) const {
    ConvSpec s;
    s.in_channels = s.out_channels = stage_out_channels(stage);
    s.kernel_size = kernel;
    s.dilation = dilation;
    return s;
}

namespace {

// Largest one-sided reach of any residual-block chain (symmetric convs).
long long mrf_reach(const VocoderConfig& cfg) {
    long long best = 0;
    for (std::size_t k : cfg.resblock_kernels) {
        long long chain = 0;
        for (std::size_t d : cfg.resblock_dilations)
            chain += static_cast<long long>(d * (k - 1) / 2 + (k - 1) / 2);
        best = std::max(best, chain);
    }
    return best;
}

// Index of the first (future=false) or last (future=true) feature frame that
// output sample `sample` depends on.
long long dependency_frame(const VocoderConfig& cfg, long long sample, bool future) {
    const long long post = static_cast<long long>(cfg.post_spec().same_right_pad());
    const long long mrf = mrf_reach(cfg);
    long long i = future ? sample + post : sample - post;
    for (std::size_t s = cfg.num_stages(); s-- > 0;) {
        i = future ? i + mrf : i - mrf;
        const long long f = static_cast<long long>(cfg.upsample_factors[s]);
        const long long k = static_cast<long long>(cfg.upsample_kernels[s]);
        const long long full = i + static_cast<long long>(cfg.trim_left(s));
        // Full-length row r receives frames t with t*f <= r < t*f + k.
        i = future ? floor_div(full, f) : ceil_div(full - k + 1, f);
    }
    const long long pre = static_cast<long long>(cfg.pre_spec().same_right_pad());
    return future ? i + pre : i - pre;
}

constexpr long long kProbeFrame = 1 << 20;

}  // namespace

std::size_t VocoderConfig::future_reach() const {
    const long long hop_ll = static_cast<long long>(hop());
    const long long last = dependency_frame(*this, kProbeFrame * hop_ll + hop_ll - 1, true);
    return static_cast<std::size_t>(std::max(0LL, last - kProbeFrame));
}

std::size_t VocoderConfig::past_reach() const {
    const long long first = dependency_frame(*this, kProbeFrame * static_cast<long long>(hop()), false);
    return static_cast<std::size_t>(std::max(0LL, kProbeFrame - first));
}

Vocoder::Vocoder(VocoderConfig cfg, Tensor cond_w, Tensor pre_w, Tensor pre_b, std::vector<StageWeights> stages,
                 Tensor post_w, Tensor post_b)
    : cfg_(std::move(cfg)),
      cond_w_(std::move(cond_w)),
      pre_w_(std::move(pre_w)),
      pre_b_(std::move(pre_b)),
      stages_(std::move(stages)),
      post_w_(std::move(post_w)),
      post_b_(std::move(post_b)) {
    cfg_.validate();
    if (stages_.size() != cfg_.num_stages()) throw ConfigError("vocoder: stage count mismatch");
}

namespace {

std::string stage_name(const std::string& prefix, std::size_t s, const std::string& leaf) {
    return prefix + ".stage" + std::to_string(s) + "." + leaf;
}

std::string unit_name(const std::string& prefix, std::size_t s, std::size_t b, std::size_t u, const char* leaf) {
    return stage_name(prefix, s, "block" + std::to_string(b) + ".unit" + std::to_string(u) + "." + leaf);
}

}  // namespace

void Vocoder::init_weights(const VocoderConfig& cfg, WeightInit& init, WeightStore& store,
                           const std::string& prefix) {
    cfg.validate();
    store.put(prefix + ".cond_w", init.uniform({cfg.speaker_dim, cfg.in_channels}, cfg.speaker_dim));
    const std::size_t pre_fan = cfg.in_channels * cfg.pre_kernel;
    store.put(prefix + ".pre_w", init.uniform({cfg.channels, cfg.in_channels, cfg.pre_kernel}, pre_fan, kConvGain));
    store.put(prefix + ".pre_b", init.uniform({cfg.channels}, pre_fan));
    for (std::size_t s = 0; s < cfg.num_stages(); ++s) {
        const std::size_t cin = cfg.stage_in_channels(s), cout = cfg.stage_out_channels(s);
        const std::size_t k = cfg.upsample_kernels[s];
        // Each output row receives k / factor taps per input channel.
        const std::size_t up_fan = std::max<std::size_t>(1, cin * k / cfg.upsample_factors[s]);
        store.put(stage_name(prefix, s, "up_w"), init.uniform({cin, cout, k}, up_fan, kConvGain));
        store.put(stage_name(prefix, s, "up_b"), init.uniform({cout}, up_fan));
        for (std::size_t b = 0; b < cfg.resblock_kernels.size(); ++b) {
            const std::size_t rk = cfg.resblock_kernels[b];
            for (std::size_t u = 0; u < cfg.resblock_dilations.size(); ++u) {
                store.put(unit_name(prefix, s, b, u, "c1_w"), init.uniform({cout, cout, rk}, cout * rk, kConvGain));
                store.put(unit_name(prefix, s, b, u, "c1_b"), init.uniform({cout}, cout * rk));
                store.put(unit_name(prefix, s, b, u, "c2_w"), init.uniform({cout, cout, rk}, cout * rk, kConvGain));
                store.put(unit_name(prefix, s, b, u, "c2_b"), init.uniform({cout}, cout * rk));
            }
        }
    }
    const std::size_t last = cfg.stage_out_channels(cfg.num_stages() - 1);
    store.put(prefix + ".post_w", init.uniform({1, last, cfg.post_kernel}, last * cfg.post_kernel, kConvGain));
    store.put(prefix + ".post_b", init.uniform({1}, last * cfg.post_kernel));
}

Vocoder Vocoder::from_store(const VocoderConfig& cfg, const WeightStore& store, const std::string& prefix) {
    cfg.validate();
    std::vector<StageWeights> stages(cfg.num_stages());
    for (std::size_t s = 0; s < cfg.num_stages(); ++s) {
        const std::size_t cin = cfg.stage_in_channels(s), cout = cfg.stage_out_channels(s);
        auto& st = stages[s];
        st.up_w = store.expect(stage_name(prefix, s, "up_w"), {cin, cout, cfg.upsample_kernels[s]});
        st.up_b = store.expect(stage_name(prefix, s, "up_b"), {cout});
        st.blocks.resize(cfg.resblock_kernels.size());
        for (std::size_t b = 0; b < cfg.resblock_kernels.size(); ++b) {
            const std::size_t rk = cfg.resblock_kernels[b];
            for (std::size_t u = 0; u < cfg.resblock_dilations.size(); ++u) {
                ResUnitWeights w;
                w.c1_w = store.expect(unit_name(prefix, s, b, u, "c1_w"), {cout, cout, rk});
                w.c1_b = store.expect(unit_name(prefix, s, b, u, "c1_b"), {cout});
                w.c2_w = store.expect(unit_name(prefix, s, b, u, "c2_w"), {cout, cout, rk});
                w.c2_b = store.expect(unit_name(prefix, s, b, u, "c2_b"), {cout});
                st.blocks[b].push_back(std::move(w));
            }
        }
    }
    const std::size_t last = cfg.stage_out_channels(cfg.num_stages() - 1);
    return Vocoder(cfg, store.expect(prefix + ".cond_w", {cfg.speaker_dim, cfg.in_channels}),
                   store.expect(prefix + ".pre_w", {cfg.channels, cfg.in_channels, cfg.pre_kernel}),
                   store.expect(prefix + ".pre_b", {cfg.channels}), std::move(stages),
                   store.expect(prefix + ".post_w", {1, last, cfg.post_kernel}),
                   store.expect(prefix + ".post_b", {1}));
}

Tensor Vocoder::condition(const SpeakerEmbedding& g) const {
    if (g.dim() != cfg_.speaker_dim)
        throw DimensionError("vocoder: speaker embedding has dimension " + std::to_string(g.dim()) +
                             ", expected " + std::to_string(cfg_.speaker_dim));
    return matmul(Tensor({1, g.dim()}, g.values), cond_w_);
}

Tensor Vocoder::conditioned_input(const Tensor& feat, const Tensor& cond) const {
    Tensor x = feat;
    add_bias(x, cond);
    return x;
}

Tensor mrf_combine(std::vector<Tensor>& branches) {
    if (branches.empty()) throw MisuseError("mrf_combine: no branches");
    Tensor sum = std::move(branches[0]);
    for (std::size_t b = 1; b < branches.size(); ++b) add_inplace(sum, branches[b]);
    const float n = static_cast<float>(branches.size());
    for (float& v : sum.data()) v = v / n;
    return sum;
}

namespace {

Tensor lrelu(const Tensor& x, float slope) {
    Tensor y = x;
    leaky_relu_inplace(y, slope);
    return y;
}

Tensor same_conv(const Tensor& x, const Tensor& w, const Tensor& b, const ConvSpec& spec) {
    Tensor y = conv1d(x, w, spec, spec.same_left_pad(), spec.same_right_pad());
    add_bias(y, b);
    return y;
}

}  // namespace

Tensor Vocoder::offline(const Tensor& feat, const SpeakerEmbedding& g) const {
    if (feat.rank() != 2 || feat.cols() != cfg_.in_channels)
        throw DimensionError("vocoder: features must be [T, in_channels]");
    if (feat.rows() == 0) return Tensor::zeros(0, 1);
    Tensor x = same_conv(conditioned_input(feat, condition(g)), pre_w_, pre_b_, cfg_.pre_spec());
    for (std::size_t s = 0; s < stages_.size(); ++s) {
        const auto& st = stages_[s];
        const std::size_t rows = x.rows() * cfg_.upsample_factors[s];
        Tensor full = conv1d_transposed(lrelu(x, kStageSlope), st.up_w, cfg_.upsample_factors[s]);
        add_bias(full, st.up_b);
        x = full.slice_rows(cfg_.trim_left(s), cfg_.trim_left(s) + rows);
        if (st.blocks.empty()) continue;
        std::vector<Tensor> branches;
        for (std::size_t b = 0; b < st.blocks.size(); ++b) {
            Tensor y = x;
            for (std::size_t u = 0; u < st.blocks[b].size(); ++u) {
                const auto& w = st.blocks[b][u];
                const std::size_t k = cfg_.resblock_kernels[b];
                Tensor t = same_conv(lrelu(y, kStageSlope), w.c1_w, w.c1_b,
                                     cfg_.res_spec(s, k, cfg_.resblock_dilations[u]));
                t = same_conv(lrelu(t, kStageSlope), w.c2_w, w.c2_b, cfg_.res_spec(s, k, 1));
                add_inplace(t, y);
                y = std::move(t);
            }
            branches.push_back(std::move(y));
        }
        x = mrf_combine(branches);
    }
    Tensor out = same_conv(lrelu(x, kOutputSlope), post_w_, post_b_, cfg_.post_spec());
    tanh_inplace(out);
    return out;
}

VocoderState VocoderState::fresh(const VocoderConfig& cfg) {
    cfg.validate();
    VocoderState st;
    st.stages.resize(cfg.num_stages());
    for (std::size_t s = 0; s < cfg.num_stages(); ++s) {
        const std::size_t c = cfg.stage_out_channels(s);
        auto& stage = st.stages[s];
        stage.blocks.resize(cfg.resblock_kernels.size());
        for (auto& block : stage.blocks) {
            block.resize(cfg.resblock_dilations.size());
            for (auto& unit : block) unit.residual = RowQueue(c);
        }
        stage.branch_out.assign(cfg.resblock_kernels.size(), RowQueue(c));
    }
    return st;
}

namespace {

Tensor upsample_stream(const VocoderConfig& cfg, std::size_t s, const StageWeights& w, UpsampleState& st,
                       const Tensor& x, bool final) {
    const std::size_t f = cfg.upsample_factors[s], k = cfg.upsample_kernels[s];
    const std::size_t cout = cfg.stage_out_channels(s);
    if (!st.started) {
        st.acc = Tensor::zeros(k - f, cout);
        st.to_drop = cfg.trim_left(s);
        st.started = true;
    }
    Tensor out = Tensor::zeros(0, cout);
    for (std::size_t t = 0; t < x.rows(); ++t) {
        st.acc.append_rows(Tensor::zeros(f, cout));
        scatter_transposed_frame(x.row(t), w.up_w, st.acc.data());
        out.append_rows(st.acc.slice_rows(0, f));
        st.acc.drop_front_rows(f);
    }
    if (final) {
        out.append_rows(st.acc);
        st.acc = Tensor::zeros(0, cout);
    }
    add_bias(out, w.up_b);
    const std::size_t drop = std::min(st.to_drop, out.rows());
    out.drop_front_rows(drop);
    st.to_drop -= drop;
    if (final) out = out.slice_rows(0, out.rows() - std::min(out.rows(), cfg.trim_right(s)));
    return out;
}

Tensor mrf_stream(const VocoderConfig& cfg, std::size_t s, const StageWeights& w, StageState& st,
                  const Tensor& x, bool final) {
    if (w.blocks.empty()) return x;
    for (std::size_t b = 0; b < w.blocks.size(); ++b) {
        Tensor y = x;
        const std::size_t k = cfg.resblock_kernels[b];
        for (std::size_t u = 0; u < w.blocks[b].size(); ++u) {
            const auto& uw = w.blocks[b][u];
            auto& us = st.blocks[b][u];
            us.residual.push(y);
            Tensor t = conv_stream(us.c1, lrelu(y, kStageSlope), uw.c1_w, uw.c1_b,
                                   cfg.res_spec(s, k, cfg.resblock_dilations[u]), final);
            t = conv_stream(us.c2, lrelu(t, kStageSlope), uw.c2_w, uw.c2_b, cfg.res_spec(s, k, 1), final);
            add_inplace(t, us.residual.pop(t.rows()));
            y = std::move(t);
        }
        st.branch_out[b].push(y);
    }
    std::size_t ready = st.branch_out[0].size();
    for (const auto& q : st.branch_out) ready = std::min(ready, q.size());
    std::vector<Tensor> branches;
    for (auto& q : st.branch_out) branches.push_back(q.pop(ready));
    return mrf_combine(branches);
}

std::vector<float> run(const Vocoder& model, VocoderState& state, const Tensor& feat, const SpeakerEmbedding& g,
                       bool final) {
    const auto& cfg = model.config();
    if (state.flushed) throw StateError("vocoder: stream already flushed");
    if (state.stages.size() != cfg.num_stages()) throw StateError("vocoder: state built for another config");
    if (!state.bound) {
        state.cond = model.condition(g);
        state.g = g;
        state.bound = true;
    } else if (!(g == state.g)) {
        throw MisuseError("vocoder: speaker embedding changed within a session");
    }
    state.last_g = &g;

    Tensor x = conv_stream(state.pre, model.conditioned_input(feat, state.cond), model.pre_w(), model.pre_b(),
                           cfg.pre_spec(), final);
    state.frames_consumed += feat.rows();
    for (std::size_t s = 0; s < cfg.num_stages(); ++s) {
        const auto& w = model.stages()[s];
        x = upsample_stream(cfg, s, w, state.stages[s].up, lrelu(x, kStageSlope), final);
        x = mrf_stream(cfg, s, w, state.stages[s], x, final);
    }
    Tensor out = conv_stream(state.post, lrelu(x, kOutputSlope), model.post_w(), model.post_b(),
                             cfg.post_spec(), final);
    tanh_inplace(out);
    state.pending.insert(state.pending.end(), out.data().begin(), out.data().end());

    const std::size_t hop = cfg.hop();
    const std::size_t release = final ? state.pending.size() : (state.pending.size() / hop) * hop;
    std::vector<float> samples(state.pending.begin(), state.pending.begin() + static_cast<std::ptrdiff_t>(release));
    state.pending.erase(state.pending.begin(), state.pending.begin() + static_cast<std::ptrdiff_t>(release));
    state.samples_emitted += release;
    if (final) state.flushed = true;
    return samples;
}

}  // namespace

std::vector<float> vocoder_step(const Vocoder& model, VocoderState& state, const Tensor& feat,
                                const SpeakerEmbedding& g) {
    if (feat.rank() != 2 || feat.cols() != model.config().in_channels)
        throw DimensionError("vocoder: features must be [n, in_channels]");
    return run(model, state, feat, g, false);
}

std::vector<float> vocoder_flush(const Vocoder& model, VocoderState& state, const SpeakerEmbedding& g) {
    return run(model, state, Tensor::zeros(0, model.config().in_channels), g, true);
}

}  // namespace sac
