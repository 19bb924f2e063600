#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sac/kernels.hpp"
#include "sac/stream_conv.hpp"
#include "sac/tensor.hpp"
#include "sac/weights.hpp"

namespace sac {

struct WaveNetConfig {
    std::size_t in_channels = 16;
    std::size_t channels = 16;
    std::size_t out_channels = 16;
    std::size_t kernel_size = 3;
    std::vector<std::size_t> dilations{1, 2, 4, 8};
    bool gated = true;     // tanh(filter) * sigmoid(gate); otherwise tanh
    bool residual = true;  // x_{l+1} = x_l + res(z_l); otherwise res(z_l)
    bool skip = true;      // output from relu(sum of skips); otherwise from the last layer

    void validate() const;
    std::size_t num_layers() const { return dilations.size(); }
    ConvSpec layer_spec(std::size_t layer) const;
    // Frames of future input one output frame depends on; the past reach is the same.
    std::size_t future_reach() const;
};

struct WaveNetLayerWeights {
    Tensor conv_w, conv_b;  // [2C or C, C, K]
    Tensor res_w, res_b;    // [C, C]
    Tensor skip_w, skip_b;  // [C, C]
};

// Non-causal gated dilated convolution stack (the bottleneck extractor).
// Every layer uses symmetric zero "same" padding, so output length = input length.
class WaveNet {
public:
    WaveNet(WaveNetConfig cfg, Tensor in_w, Tensor in_b, std::vector<WaveNetLayerWeights> layers,
            Tensor out_w, Tensor out_b);

    static void init_weights(const WaveNetConfig& cfg, WeightInit& init, WeightStore& store,
                             const std::string& prefix = "wavenet");
    static WaveNet from_store(const WaveNetConfig& cfg, const WeightStore& store,
                              const std::string& prefix = "wavenet");

    const WaveNetConfig& config() const { return cfg_; }
    const std::vector<WaveNetLayerWeights>& layers() const { return layers_; }

    Tensor offline(const Tensor& x) const;

    // Row-wise pieces shared by the offline and streamed paths.
    Tensor input_projection(const Tensor& x) const { return linear(x, in_w_, in_b_); }
    Tensor activation(const Tensor& conv_out) const;
    Tensor output_projection(const Tensor& skip_sum, const Tensor& last) const;

private:
    WaveNetConfig cfg_;
    Tensor in_w_, in_b_;
    std::vector<WaveNetLayerWeights> layers_;
    Tensor out_w_, out_b_;
};

struct StreamConvState {
    std::vector<ConvBuffer> convs;     // one per layer; zero-initialized left history
    std::vector<RowQueue> residual;    // layer inputs waiting for their conv output
    Tensor skip_sum;                   // partial skip sums, first row = next frame to emit
    std::size_t consumed = 0;
    std::size_t emitted = 0;
    bool flushed = false;

    static StreamConvState fresh(const WaveNetConfig& cfg);
};

// Emits every frame whose full future window has arrived.
Tensor wavenet_step(const WaveNet& model, StreamConvState& state, const Tensor& frames);
// Emits the last future_reach() frames using zero right padding.
Tensor wavenet_flush(const WaveNet& model, StreamConvState& state);

}  // namespace sac
