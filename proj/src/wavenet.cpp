#include "sac/wavenet.hpp"

#include <algorithm>

#include "sac/errors.hpp"

namespace sac {

void WaveNetConfig::validate() const {
    if (in_channels == 0 || channels == 0 || out_channels == 0)
        throw ConfigError("wavenet: channel counts must be positive");
    if (kernel_size == 0 || kernel_size % 2 == 0)
        throw ConfigError("wavenet: kernel size must be odd (symmetric non-causal convolution)");
    if (dilations.empty()) throw ConfigError("wavenet: at least one layer is required");
    for (std::size_t d : dilations)
        if (d < 1) throw ConfigError("wavenet: dilations must be >= 1");
}

ConvSpec WaveNetConfig::layer_spec(std::size_t layer) const {
    ConvSpec s;
    s.in_channels = channels;
    s.out_channels = gated ? 2 * channels : channels;
    s.kernel_size = kernel_size;
    s.dilation = dilations.at(layer);
    return s;
}

std::size_t WaveNetConfig::future_reach() const {
    std::size_t total = 0;
    for (std::size_t l = 0; l < num_layers(); ++l) total += layer_spec(l).same_right_pad();
    return total;
}

WaveNet::WaveNet(WaveNetConfig cfg, Tensor in_w, Tensor in_b, std::vector<WaveNetLayerWeights> layers,
                 Tensor out_w, Tensor out_b)
    : cfg_(std::move(cfg)),
      in_w_(std::move(in_w)),
      in_b_(std::move(in_b)),
      layers_(std::move(layers)),
      out_w_(std::move(out_w)),
      out_b_(std::move(out_b)) {
    cfg_.validate();
    if (layers_.size() != cfg_.num_layers()) throw ConfigError("wavenet: layer count mismatch");
}

namespace {

std::string name(const std::string& prefix, const std::string& leaf) { return prefix + "." + leaf; }
std::string layer_name(const std::string& prefix, std::size_t l, const char* leaf) {
    return prefix + ".layer" + std::to_string(l) + "." + leaf;
}

}  // namespace

void WaveNet::init_weights(const WaveNetConfig& cfg, WeightInit& init, WeightStore& store,
                           const std::string& prefix) {
    cfg.validate();
    const std::size_t c = cfg.channels;
    store.put(name(prefix, "in_w"), init.uniform({cfg.in_channels, c}, cfg.in_channels));
    store.put(name(prefix, "in_b"), init.uniform({c}, cfg.in_channels));
    for (std::size_t l = 0; l < cfg.num_layers(); ++l) {
        const ConvSpec spec = cfg.layer_spec(l);
        const std::size_t fan_in = c * cfg.kernel_size;
        store.put(layer_name(prefix, l, "conv_w"), init.uniform({spec.out_channels, c, cfg.kernel_size}, fan_in));
        store.put(layer_name(prefix, l, "conv_b"), init.uniform({spec.out_channels}, fan_in));
        store.put(layer_name(prefix, l, "res_w"), init.uniform({c, c}, c));
        store.put(layer_name(prefix, l, "res_b"), init.uniform({c}, c));
        store.put(layer_name(prefix, l, "skip_w"), init.uniform({c, c}, c));
        store.put(layer_name(prefix, l, "skip_b"), init.uniform({c}, c));
    }
    store.put(name(prefix, "out_w"), init.uniform({c, cfg.out_channels}, c));
    store.put(name(prefix, "out_b"), init.uniform({cfg.out_channels}, c));
}

WaveNet WaveNet::from_store(const WaveNetConfig& cfg, const WeightStore& store, const std::string& prefix) {
    cfg.validate();
    const std::size_t c = cfg.channels;
    std::vector<WaveNetLayerWeights> layers(cfg.num_layers());
    for (std::size_t l = 0; l < cfg.num_layers(); ++l) {
        const ConvSpec spec = cfg.layer_spec(l);
        auto& w = layers[l];
        w.conv_w = store.expect(layer_name(prefix, l, "conv_w"), {spec.out_channels, c, cfg.kernel_size});
        w.conv_b = store.expect(layer_name(prefix, l, "conv_b"), {spec.out_channels});
        w.res_w = store.expect(layer_name(prefix, l, "res_w"), {c, c});
        w.res_b = store.expect(layer_name(prefix, l, "res_b"), {c});
        w.skip_w = store.expect(layer_name(prefix, l, "skip_w"), {c, c});
        w.skip_b = store.expect(layer_name(prefix, l, "skip_b"), {c});
    }
    return WaveNet(cfg, store.expect(name(prefix, "in_w"), {cfg.in_channels, c}),
                   store.expect(name(prefix, "in_b"), {c}), std::move(layers),
                   store.expect(name(prefix, "out_w"), {c, cfg.out_channels}),
                   store.expect(name(prefix, "out_b"), {cfg.out_channels}));
}

Tensor WaveNet::activation(const Tensor& conv_out) const {
    const std::size_t c = cfg_.channels;
    Tensor z({conv_out.rows(), c});
    if (cfg_.gated) {
        Tensor filter = conv_out.slice_cols(0, c);
        Tensor gate = conv_out.slice_cols(c, 2 * c);
        tanh_inplace(filter);
        sigmoid_inplace(gate);
        for (std::size_t i = 0; i < z.size(); ++i) z.data()[i] = filter.data()[i] * gate.data()[i];
    } else {
        z = conv_out;
        tanh_inplace(z);
    }
    return z;
}

Tensor WaveNet::output_projection(const Tensor& skip_sum, const Tensor& last) const {
    if (!cfg_.skip) return linear(last, out_w_, out_b_);
    Tensor s = skip_sum;
    relu_inplace(s);
    return linear(s, out_w_, out_b_);
}

Tensor WaveNet::offline(const Tensor& x) const {
    if (x.rank() != 2 || x.cols() != cfg_.in_channels) throw DimensionError("wavenet: input must be [T, in_channels]");
    if (x.rows() == 0) return Tensor::zeros(0, cfg_.out_channels);
    Tensor cur = input_projection(x);
    Tensor skip_sum;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& w = layers_[l];
        const ConvSpec spec = cfg_.layer_spec(l);
        Tensor h = conv1d(cur, w.conv_w, spec, spec.same_left_pad(), spec.same_right_pad());
        add_bias(h, w.conv_b);
        const Tensor z = activation(h);
        Tensor res = linear(z, w.res_w, w.res_b);
        if (cfg_.residual) add_inplace(res, cur);
        Tensor sk = linear(z, w.skip_w, w.skip_b);
        if (l == 0)
            skip_sum = std::move(sk);
        else
            add_inplace(skip_sum, sk);
        cur = std::move(res);
    }
    return output_projection(skip_sum, cur);
}

StreamConvState StreamConvState::fresh(const WaveNetConfig& cfg) {
    StreamConvState s;
    s.convs.resize(cfg.num_layers());
    s.residual.assign(cfg.num_layers(), RowQueue(cfg.channels));
    s.skip_sum = Tensor::zeros(0, cfg.channels);
    return s;
}

namespace {

Tensor run(const WaveNet& model, StreamConvState& state, const Tensor& frames, bool final) {
    const auto& cfg = model.config();
    if (state.flushed) throw StateError("wavenet: stream already flushed");
    if (state.convs.size() != cfg.num_layers()) throw StateError("wavenet: state built for another config");

    Tensor cur = frames.rows() > 0 ? model.input_projection(frames) : Tensor::zeros(0, cfg.channels);
    state.consumed += frames.rows();
    for (std::size_t l = 0; l < cfg.num_layers(); ++l) {
        const auto& w = model.layers()[l];
        if (cfg.residual) state.residual[l].push(cur);
        const Tensor h = conv_stream(state.convs[l], cur, w.conv_w, w.conv_b, cfg.layer_spec(l), final);
        const std::size_t m = h.rows();
        const std::size_t first_frame = state.convs[l].emitted - m;
        const Tensor z = model.activation(h);
        Tensor res = linear(z, w.res_w, w.res_b);
        if (cfg.residual) add_inplace(res, state.residual[l].pop(m));
        const Tensor sk = linear(z, w.skip_w, w.skip_b);
        if (l == 0) {
            state.skip_sum.append_rows(sk);
        } else {
            const std::size_t offset = first_frame - state.emitted;
            for (std::size_t r = 0; r < m; ++r) {
                auto dst = state.skip_sum.row(offset + r);
                auto src = sk.row(r);
                for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
            }
        }
        cur = std::move(res);
    }
    const std::size_t ready = cur.rows();
    const Tensor skip = state.skip_sum.slice_rows(0, ready);
    state.skip_sum.drop_front_rows(ready);
    state.emitted += ready;
    if (final) state.flushed = true;
    return model.output_projection(skip, cur);
}

}  // namespace

Tensor wavenet_step(const WaveNet& model, StreamConvState& state, const Tensor& frames) {
    if (frames.rank() != 2 || frames.cols() != model.config().in_channels)
        throw DimensionError("wavenet: frames must be [n, in_channels]");
    return run(model, state, frames, false);
}

Tensor wavenet_flush(const WaveNet& model, StreamConvState& state) {
    return run(model, state, Tensor::zeros(0, model.config().in_channels), true);
}

}  // namespace sac
